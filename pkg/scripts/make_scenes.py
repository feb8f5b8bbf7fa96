"""Regenerate the bundled scene descriptors and OBJ meshes under src/dfguide/scenes/."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1] / "src" / "dfguide" / "scenes"
MESHES = ROOT / "meshes"


def quad(p, u, v):
    """Quad with corners p, p+u, p+u+v, p+v; normal is u x v."""
    p, u, v = (np.asarray(a, dtype=float) for a in (p, u, v))
    return [p, p + u, p + u + v, p + v], [(0, 1, 2, 3)]


def box(lo, hi):
    """Axis-aligned box with outward normals."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    v = [(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
         (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)]
    f = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 4, 7, 3), (1, 2, 6, 5), (0, 1, 5, 4), (3, 7, 6, 2)]
    return [np.array(p) for p in v], f


def rotated_box(center, size, angle_deg):
    verts, faces = box(-np.asarray(size) / 2, np.asarray(size) / 2)
    a = np.radians(angle_deg)
    rot = np.array([[np.cos(a), 0, np.sin(a)], [0, 1, 0], [-np.sin(a), 0, np.cos(a)]])
    c = np.asarray(center, float)
    return [rot @ p + c for p in verts], faces


def write_obj(name, mesh):
    verts, faces = mesh
    lines = [f"# {name}"]
    lines += [f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f}" for p in verts]
    lines += ["f " + " ".join(str(i + 1) for i in f) for f in faces]
    (MESHES / f"{name}.obj").write_text("\n".join(lines) + "\n")
    return f"meshes/{name}.obj"


def write_scene(name, desc):
    (ROOT / f"{name}.json").write_text(json.dumps(desc, indent=2) + "\n")


def cornell_flipped():
    meshes = [
        ("cornell_floor", quad((0, 0, 1), (1, 0, 0), (0, 0, -1)), "white", "wall"),
        ("cornell_ceiling", quad((0, 1, 0), (1, 0, 0), (0, 0, 1)), "white", "wall"),
        ("cornell_back", quad((0, 0, 0), (1, 0, 0), (0, 1, 0)), "white", "wall"),
        ("cornell_left", quad((0, 0, 1), (0, 0, -1), (0, 1, 0)), "red", "wall"),
        ("cornell_right", quad((1, 0, 0), (0, 0, 1), (0, 1, 0)), "green", "wall"),
        ("cornell_short_block", rotated_box((0.66, 0.15, 0.62), (0.3, 0.3, 0.3), -17), "white", "block"),
        ("cornell_tall_block", rotated_box((0.34, 0.3, 0.36), (0.3, 0.6, 0.3), 18), "white", "block"),
    ]
    desc_meshes = []
    for name, mesh, mat, role in meshes:
        desc_meshes.append({"name": name, "file": write_obj(name, mesh), "material": mat, "role": role})
    # light panel hangs below the ceiling and faces up, so the room is lit by the ceiling bounce
    light = quad((0.38, 0.96, 0.38), (0, 0, 0.24), (0.24, 0, 0))
    desc_meshes.append({"name": "cornell_light", "file": write_obj("cornell_light", light), "material": "panel",
                        "emission": [40.0, 36.0, 30.0], "role": "emitter"})
    write_scene("cornell-flipped", {
        "name": "cornell-flipped",
        "camera": {"position": [0.5, 0.5, 2.3], "look_at": [0.5, 0.5, 0.0], "up": [0, 1, 0], "fov": 36.0,
                   "width": 32, "height": 32},
        "materials": {
            "white": {"type": "diffuse", "albedo": [0.73, 0.73, 0.73]},
            "red": {"type": "diffuse", "albedo": [0.63, 0.065, 0.05]},
            "green": {"type": "diffuse", "albedo": [0.14, 0.45, 0.091]},
            "panel": {"type": "diffuse", "albedo": [0.0, 0.0, 0.0]},
        },
        "meshes": desc_meshes,
        "environment": [0.0, 0.0, 0.0],
        "probes": [
            {"name": "floor_center", "position": [0.5, 0.0, 0.85], "normal": [0, 1, 0], "wo": [0, 0.6, 0.8]},
            {"name": "back_wall", "position": [0.5, 0.6, 0.0], "normal": [0, 0, 1], "wo": [0, 0, 1]},
            {"name": "left_wall", "position": [0.0, 0.5, 0.6], "normal": [1, 0, 0], "wo": [0.8, 0, 0.6]},
            {"name": "ceiling", "position": [0.5, 1.0, 0.8], "normal": [0, -1, 0], "wo": [0, -0.6, 0.8]},
            {"name": "short_block_top", "position": [0.66, 0.3, 0.62], "normal": [0, 1, 0], "wo": [0, 0.7, 0.7]},
        ],
    })


def veach_door_mini():
    # closed room; a partition at x = 1.3 with a narrow door gap hides the emitter
    X, Y, Z = 2.0, 1.0, 1.2
    px = 1.3
    gz0, gz1, gy = 0.45, 0.72, 0.85
    meshes = [
        ("vd_floor", quad((0, 0, Z), (X, 0, 0), (0, 0, -Z)), "white"),
        ("vd_ceiling", quad((0, Y, 0), (X, 0, 0), (0, 0, Z)), "white"),
        ("vd_back", quad((0, 0, 0), (X, 0, 0), (0, Y, 0)), "white"),
        ("vd_front", quad((X, 0, Z), (-X, 0, 0), (0, Y, 0)), "white"),
        ("vd_left", quad((0, 0, Z), (0, 0, -Z), (0, Y, 0)), "warm"),
        ("vd_right", quad((X, 0, 0), (0, 0, Z), (0, Y, 0)), "white"),
        # partition pieces around the door gap (both faces are visible: surfaces are two-sided)
        ("vd_partition_a", quad((px, 0, 0), (0, 0, gz0), (0, Y, 0)), "white"),
        ("vd_partition_b", quad((px, 0, gz1), (0, 0, Z - gz1), (0, Y, 0)), "white"),
        ("vd_partition_lintel", quad((px, gy, gz0), (0, 0, gz1 - gz0), (0, Y - gy, 0)), "white"),
        ("vd_crate", rotated_box((0.55, 0.12, 0.45), (0.24, 0.24, 0.24), 25), "white"),
    ]
    desc_meshes = [{"name": n, "file": write_obj(n, m), "material": mat} for n, m, mat in meshes]
    light = quad((1.45, 0.2, 0.01), (0.5, 0, 0), (0, 0.6, 0))
    desc_meshes.append({"name": "vd_light", "file": write_obj("vd_light", light), "material": "panel",
                        "emission": [40.0, 36.0, 30.0], "role": "emitter"})
    write_scene("cornell-veach-door-mini", {
        "name": "cornell-veach-door-mini",
        "camera": {"position": [0.12, 0.55, 1.1], "look_at": [1.3, 0.35, 0.45], "up": [0, 1, 0], "fov": 62.0,
                   "width": 32, "height": 32},
        "materials": {
            "white": {"type": "diffuse", "albedo": [0.7, 0.7, 0.7]},
            "warm": {"type": "diffuse", "albedo": [0.7, 0.55, 0.4]},
            "panel": {"type": "diffuse", "albedo": [0.0, 0.0, 0.0]},
        },
        "meshes": desc_meshes,
        "environment": [0.0, 0.0, 0.0],
        "probes": [
            {"name": "floor_near_door", "position": [1.0, 0.0, 0.56], "normal": [0, 1, 0], "wo": [-0.6, 0.8, 0]},
            {"name": "floor_center", "position": [0.6, 0.0, 0.8], "normal": [0, 1, 0], "wo": [-0.5, 0.5, 0.7]},
            {"name": "partition_face", "position": [1.3, 0.5, 0.9], "normal": [-1, 0, 0], "wo": [-0.8, 0, 0.6]},
            {"name": "left_wall", "position": [0.0, 0.5, 0.5], "normal": [1, 0, 0], "wo": [1, 0, 0]},
            {"name": "crate_top", "position": [0.55, 0.24, 0.45], "normal": [0, 1, 0], "wo": [-0.4, 0.9, 0.2]},
        ],
    })


def furnace():
    # inward-facing cube; every wall emits 0.5 and reflects with albedo 0.5
    verts, faces = box((0, 0, 0), (1, 1, 1))
    inward = [tuple(reversed(f)) for f in faces]
    write_scene("furnace", {
        "name": "furnace",
        "camera": {"position": [0.5, 0.5, 0.5], "look_at": [0.5, 0.5, 0.0], "up": [0, 1, 0], "fov": 90.0,
                   "width": 16, "height": 16},
        "materials": {"grey": {"type": "diffuse", "albedo": [0.5, 0.5, 0.5]}},
        "meshes": [{"name": "furnace_cube", "file": write_obj("furnace_cube", (verts, inward)), "material": "grey",
                    "emission": [0.5, 0.5, 0.5], "two_sided": True}],
        "environment": [0.0, 0.0, 0.0],
        "probes": [
            {"name": "floor", "position": [0.5, 0.0, 0.5], "normal": [0, 1, 0], "wo": [0, 1, 0]},
            {"name": "back", "position": [0.5, 0.5, 0.0], "normal": [0, 0, 1], "wo": [0, 0, 1]},
            {"name": "left", "position": [0.0, 0.5, 0.5], "normal": [1, 0, 0], "wo": [0.6, 0.8, 0]},
            {"name": "ceiling", "position": [0.5, 1.0, 0.5], "normal": [0, -1, 0], "wo": [0, -1, 0]},
            {"name": "corner", "position": [0.1, 0.0, 0.1], "normal": [0, 1, 0], "wo": [0.5, 0.7, 0.5]},
        ],
    })


def glossy_spot():
    meshes = [
        ("gs_floor", quad((-1, 0, 1), (2, 0, 0), (0, 0, -2)), "glossy"),
        ("gs_back", quad((-1, 0, -1), (2, 0, 0), (0, 1.5, 0)), "white"),
        ("gs_left", quad((-1, 0, 1), (0, 0, -2), (0, 1.5, 0)), "white"),
        ("gs_block", rotated_box((0.25, 0.15, -0.2), (0.3, 0.3, 0.3), 30), "metal"),
    ]
    desc_meshes = [{"name": n, "file": write_obj(n, m), "material": mat} for n, m, mat in meshes]
    light = quad((-0.45, 0.9, -0.45), (0.12, 0, 0), (0, 0, 0.12))
    desc_meshes.append({"name": "gs_light", "file": write_obj("gs_light", light), "material": "panel",
                        "emission": [120.0, 110.0, 95.0], "role": "emitter"})
    write_scene("glossy-spot", {
        "name": "glossy-spot",
        "camera": {"position": [0.3, 0.7, 1.8], "look_at": [-0.1, 0.2, -0.2], "up": [0, 1, 0], "fov": 45.0,
                   "width": 32, "height": 32},
        "materials": {
            "glossy": {"type": "conductor", "roughness": 0.25, "f0": [0.9, 0.85, 0.75]},
            "metal": {"type": "conductor", "roughness": 0.5, "f0": [0.95, 0.64, 0.54]},
            "white": {"type": "diffuse", "albedo": [0.7, 0.7, 0.7]},
            "panel": {"type": "diffuse", "albedo": [0.0, 0.0, 0.0]},
        },
        "meshes": desc_meshes,
        "environment": [0.02, 0.02, 0.03],
        "probes": [
            {"name": "floor_front", "position": [0.0, 0.0, 0.5], "normal": [0, 1, 0], "wo": [0.1, 0.6, 0.8],
             "roughness": 0.25},
            {"name": "floor_under_light", "position": [-0.4, 0.0, -0.4], "normal": [0, 1, 0], "wo": [0.3, 0.7, 0.6],
             "roughness": 0.25},
            {"name": "back_wall", "position": [0.0, 0.6, -1.0], "normal": [0, 0, 1], "wo": [0.2, 0, 0.98]},
            {"name": "left_wall", "position": [-1.0, 0.5, 0.0], "normal": [1, 0, 0], "wo": [0.8, 0, 0.6]},
            {"name": "block_top", "position": [0.25, 0.3, -0.2], "normal": [0, 1, 0], "wo": [0.1, 0.7, 0.7],
             "roughness": 0.5},
        ],
    })


if __name__ == "__main__":
    MESHES.mkdir(parents=True, exist_ok=True)
    cornell_flipped()
    veach_door_mini()
    furnace()
    glossy_spot()
