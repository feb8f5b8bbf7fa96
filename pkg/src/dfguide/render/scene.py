"""Scene description: triangle soup, materials, emitters, camera and probe points."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dfguide import kernels
from dfguide.render.bvh import Bvh, build_bvh

log = logging.getLogger(__name__)

DIFFUSE, CONDUCTOR, MIRROR, DIELECTRIC = 0, 1, 2, 3
MATERIAL_TYPES = {"diffuse": DIFFUSE, "conductor": CONDUCTOR, "mirror": MIRROR, "dielectric": DIELECTRIC}


class SceneError(ValueError):
    pass


@dataclass
class Materials:
    """Struct-of-arrays material table indexed by material id."""

    names: list
    kind: np.ndarray
    albedo: np.ndarray
    roughness: np.ndarray
    f0: np.ndarray
    ior: np.ndarray

    @property
    def is_delta(self) -> np.ndarray:
        return (self.kind == MIRROR) | (self.kind == DIELECTRIC)


@dataclass
class Camera:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    fov: float
    width: int
    height: int

    def basis(self):
        fwd = self.look_at - self.position
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, self.up)
        right = right / np.linalg.norm(right)
        up = np.cross(right, fwd)
        return fwd, right, up

    def generate_rays(self, px: np.ndarray, py: np.ndarray, jitter: np.ndarray):
        """Pinhole rays through pixel ``(px, py)`` offset by ``jitter`` in [0, 1)^2; row 0 is the top."""
        fwd, right, up = self.basis()
        tan_half = np.tan(np.radians(self.fov) * 0.5)
        aspect = self.width / self.height
        sx = (2.0 * (px + jitter[:, 0]) / self.width - 1.0) * tan_half * aspect
        sy = (1.0 - 2.0 * (py + jitter[:, 1]) / self.height) * tan_half
        d = fwd[None, :] + sx[:, None] * right[None, :] + sy[:, None] * up[None, :]
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return np.broadcast_to(self.position, d.shape).copy(), d


@dataclass
class Probe:
    name: str
    position: np.ndarray
    normal: np.ndarray
    wo: np.ndarray
    roughness: float = 1.0


@dataclass
class Scene:
    name: str
    v0: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray
    material: np.ndarray
    emission: np.ndarray
    two_sided_emission: np.ndarray
    mesh_id: np.ndarray
    mesh_names: list
    materials: Materials
    camera: Camera
    environment: np.ndarray
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    probes: list = field(default_factory=list)
    bvh: Bvh | None = None

    @property
    def n_triangles(self) -> int:
        return len(self.v0)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.bounds_max - self.bounds_min))

    @property
    def ray_epsilon(self) -> float:
        return 1e-4 * self.diagonal

    @property
    def emissive(self) -> np.ndarray:
        return np.any(self.emission > 0.0, axis=1)

    def normalize_position(self, x: np.ndarray) -> tuple[np.ndarray, int]:
        """Map into ``[0, 1]^3`` by the scene bounds; returns the count of clamped rows."""
        ext = np.maximum(self.bounds_max - self.bounds_min, 1e-12)
        p = (x - self.bounds_min) / ext
        outside = np.any((p < 0.0) | (p > 1.0), axis=1)
        return np.clip(p, 0.0, 1.0), int(outside.sum())

    @property
    def spawn_tmin(self) -> float:
        """``tmin`` for rays whose origin was already pushed off the surface."""
        return 1e-9 * self.diagonal

    def intersect(self, orig: np.ndarray, dirs: np.ndarray, backend: str | None = None, tmin: float | None = None):
        """Closest hit beyond ``tmin`` (default: the ray epsilon): ``(t, prim, u, v)``; misses have ``prim == -1``."""
        orig = np.ascontiguousarray(orig, dtype=np.float64)
        dirs = np.ascontiguousarray(dirs, dtype=np.float64)
        tmin = self.ray_epsilon if tmin is None else tmin
        return kernels.intersect_bvh(orig, dirs, tmin, self.bvh, self.v0, self.e1, self.e2, backend=backend)


def read_obj(path: Path) -> np.ndarray:
    """Triangles ``(T, 3, 3)`` from ``v`` and ``f`` records; polygons are fanned."""
    verts, tris = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(c) for c in parts[1:4]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                for k in range(1, len(idx) - 1):
                    tris.append([idx[0], idx[k], idx[k + 1]])
    if not tris:
        return np.zeros((0, 3, 3))
    return np.asarray(verts, dtype=np.float64)[np.asarray(tris)]


def _vec3(x, default=(0.0, 0.0, 0.0)) -> np.ndarray:
    if x is None:
        x = default
    if np.isscalar(x):
        x = [x, x, x]
    return np.asarray(x, dtype=np.float64)


def _parse_materials(desc: dict) -> tuple[Materials, dict]:
    names, kind, albedo, rough, f0, ior = [], [], [], [], [], []
    for name, m in desc.items():
        t = m.get("type", "diffuse")
        if t not in MATERIAL_TYPES:
            raise SceneError(f"material {name!r}: unknown type {t!r}")
        r = float(m.get("roughness", 1.0 if t == "diffuse" else 0.0))
        if not 0.0 <= r <= 1.0:
            log.warning("material %r: roughness %.3g clamped to [0, 1]", name, r)
            r = min(max(r, 0.0), 1.0)
        names.append(name)
        kind.append(MATERIAL_TYPES[t])
        albedo.append(_vec3(m.get("albedo"), (0.8, 0.8, 0.8)))
        rough.append(r)
        f0.append(_vec3(m.get("f0"), (0.04, 0.04, 0.04)))
        ior.append(float(m.get("ior", 1.5)))
    mats = Materials(names, np.array(kind, dtype=np.int64), np.array(albedo).reshape(-1, 3),
                     np.array(rough), np.array(f0).reshape(-1, 3), np.array(ior))
    return mats, {n: i for i, n in enumerate(names)}


def load_scene(path, camera_override: dict | None = None) -> Scene:
    """Read a JSON scene descriptor; mesh paths are relative to the descriptor."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        desc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: malformed JSON ({exc})") from exc
    if not desc.get("meshes"):
        raise SceneError("no geometry")
    mats, mat_index = _parse_materials(desc.get("materials", {}))

    tris, mat_ids, emis, two_sided, mesh_ids, mesh_names = [], [], [], [], [], []
    for k, mesh in enumerate(desc["meshes"]):
        mfile = path.parent / mesh["file"]
        if not mfile.exists():
            raise FileNotFoundError(mfile)
        t = read_obj(mfile)
        if len(t) == 0:
            raise SceneError(f"{mfile}: no faces")
        if mesh["material"] not in mat_index:
            raise SceneError(f"mesh {mesh['file']!r}: unknown material {mesh['material']!r}")
        e = _vec3(mesh.get("emission"))
        if np.any(e < 0):
            raise SceneError(f"mesh {mesh['file']!r}: negative emission")
        tris.append(t)
        n = len(t)
        mat_ids.append(np.full(n, mat_index[mesh["material"]]))
        emis.append(np.tile(e, (n, 1)))
        two_sided.append(np.full(n, bool(mesh.get("two_sided", False))))
        mesh_ids.append(np.full(n, k))
        mesh_names.append(mesh.get("name", Path(mesh["file"]).stem))
    tri = np.concatenate(tris)
    if not np.all(np.isfinite(tri)):
        raise SceneError("non-finite vertex coordinates")
    v0 = np.ascontiguousarray(tri[:, 0])
    e1 = np.ascontiguousarray(tri[:, 1] - tri[:, 0])
    e2 = np.ascontiguousarray(tri[:, 2] - tri[:, 0])
    nrm = np.cross(e1, e2)
    area = np.linalg.norm(nrm, axis=1)
    if np.any(area <= 0):
        log.warning("%s: %d degenerate triangles", path.name, int(np.sum(area <= 0)))
    nrm = nrm / np.maximum(area, 1e-300)[:, None]

    cam = dict(desc["camera"])
    if camera_override:
        cam.update(camera_override)
    camera = Camera(_vec3(cam["position"]), _vec3(cam["look_at"]), _vec3(cam.get("up"), (0, 1, 0)),
                    float(cam.get("fov", 40.0)), int(cam.get("width", 32)), int(cam.get("height", 32)))
    probes = [
        Probe(p["name"], _vec3(p["position"]), _unit(_vec3(p["normal"])), _unit(_vec3(p["wo"])),
              float(p.get("roughness", 1.0)))
        for p in desc.get("probes", [])
    ]
    flat = tri.reshape(-1, 3)
    scene = Scene(
        name=desc.get("name", path.stem),
        v0=v0, e1=e1, e2=e2, normal=nrm,
        material=np.concatenate(mat_ids).astype(np.int64),
        emission=np.concatenate(emis),
        two_sided_emission=np.concatenate(two_sided),
        mesh_id=np.concatenate(mesh_ids).astype(np.int64),
        mesh_names=mesh_names,
        materials=mats,
        camera=camera,
        environment=_vec3(desc.get("environment")),
        bounds_min=flat.min(axis=0),
        bounds_max=flat.max(axis=0),
        probes=probes,
    )
    scene.bvh = build_bvh(tri.min(axis=1), tri.max(axis=1))
    return scene


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)
