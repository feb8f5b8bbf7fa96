"""Time BVH traversal on the compiled and numpy backends.

    python3 benchmarks/bench_kernels.py [--rays 100000] [--repeat 3]

Prints rays/second per scene and backend and checks that both return the same hits.
"""
from __future__ import annotations

import argparse
import time
import zlib

import numpy as np

from dfguide.harness.assets import SCENES_DIR, bundled_scene_names
from dfguide.render.scene import load_scene


def random_rays(scene, n, seed):
    rng = np.random.default_rng(seed)
    lo, hi = scene.bounds_min, scene.bounds_max
    orig = lo + rng.random((n, 3)) * (hi - lo)
    d = rng.normal(size=(n, 3))
    return orig, d / np.linalg.norm(d, axis=1, keepdims=True)


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--rays", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        from dfguide import _kernels  # noqa: F401
    except ImportError:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    print(f"{'scene':26s} {'tris':>6s} {'cython rays/s':>14s} {'numpy rays/s':>13s} {'speedup':>8s}  same hits")
    for name in bundled_scene_names():
        scene = load_scene(SCENES_DIR / f"{name}.json")
        orig, dirs = random_rays(scene, args.rays, zlib.crc32(name.encode()))
        tc, (t_c, p_c, _, _) = best_time(lambda: scene.intersect(orig, dirs, backend="cython"), args.repeat)
        tp, (t_p, p_p, _, _) = best_time(lambda: scene.intersect(orig, dirs, backend="python"), args.repeat)
        same = np.array_equal(p_c, p_p) and np.array_equal(t_c, t_p)
        print(f"{name:26s} {scene.n_triangles:6d} {args.rays / tc:14.0f} {args.rays / tp:13.0f} {tp / tc:7.1f}x  {same}")


if __name__ == "__main__":
    main()
