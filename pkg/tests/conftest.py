import sys
from pathlib import Path

from dfguide.harness.assets import SCENES_DIR, bundled_scene_names

sys.path.insert(0, str(Path(__file__).parent))

BUNDLED = bundled_scene_names()


def scene_path(name: str) -> Path:
    return SCENES_DIR / f"{name}.json"
