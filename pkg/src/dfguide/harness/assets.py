"""Locations of the scenes and references shipped inside the package."""
from __future__ import annotations

from pathlib import Path

SCENES_DIR = Path(__file__).resolve().parent.parent / "scenes"
REFS_DIR = SCENES_DIR / "refs"


def bundled_scene_names() -> list[str]:
    return sorted(p.stem for p in SCENES_DIR.glob("*.json"))


def resolve_scene(name_or_path) -> Path:
    """Accept a bundled scene name or a path to a descriptor."""
    p = Path(name_or_path)
    if p.suffix == ".json" or p.exists():
        return p
    candidate = SCENES_DIR / f"{name_or_path}.json"
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no bundled scene named {name_or_path!r} and no such file")


def reference_path(scene_name: str) -> Path:
    return REFS_DIR / f"{scene_name}.pfm"
