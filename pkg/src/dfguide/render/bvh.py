"""Bounding volume hierarchy over triangles, plus a brute-force reference."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF_SIZE = 4


@dataclass
class Bvh:
    """Flattened BVH. Inner nodes have ``count == 0`` and two ``child`` indices;
    leaves reference ``prim_order[first:first + count]``."""

    bmin: np.ndarray
    bmax: np.ndarray
    child: np.ndarray
    first: np.ndarray
    count: np.ndarray
    prim_order: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.count)


def build_bvh(tri_min: np.ndarray, tri_max: np.ndarray, leaf_size: int = LEAF_SIZE) -> Bvh:
    """Median split along the widest centroid axis. Deterministic for a given input order."""
    n = len(tri_min)
    if n == 0:
        raise ValueError("cannot build a BVH without primitives")
    centroid = 0.5 * (tri_min + tri_max)
    bmin, bmax, child, first, count = [], [], [], [], []
    order = []

    def new_node():
        bmin.append(None)
        bmax.append(None)
        child.append([-1, -1])
        first.append(0)
        count.append(0)
        return len(count) - 1

    root = new_node()
    stack = [(root, np.arange(n))]
    while stack:
        node, prims = stack.pop()
        bmin[node] = tri_min[prims].min(axis=0)
        bmax[node] = tri_max[prims].max(axis=0)
        if len(prims) <= leaf_size:
            first[node] = len(order)
            count[node] = len(prims)
            order.extend(prims.tolist())
            continue
        c = centroid[prims]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        ranked = prims[np.argsort(c[:, axis], kind="stable")]
        half = len(ranked) // 2
        left, right = new_node(), new_node()
        child[node] = [left, right]
        stack.append((right, ranked[half:]))
        stack.append((left, ranked[:half]))
    return Bvh(
        bmin=np.ascontiguousarray(np.array(bmin, dtype=np.float64)),
        bmax=np.ascontiguousarray(np.array(bmax, dtype=np.float64)),
        child=np.ascontiguousarray(np.array(child, dtype=np.int64)),
        first=np.array(first, dtype=np.int64),
        count=np.array(count, dtype=np.int64),
        prim_order=np.array(order, dtype=np.int64),
    )


def _cross(a, b):
    return np.stack([a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1],
                     a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2],
                     a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]], axis=1)


def _dot(a, b):
    # fixed left-to-right order so the compiled kernel can match bit for bit
    return a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1] + a[:, 2] * b[:, 2]


def moller_trumbore(orig, dirs, v0, e1, e2, tmin):
    """Ray/triangle test for paired rows. Returns ``(t, u, v)``; misses get ``t = inf``."""
    p = _cross(dirs, e2)
    det = _dot(e1, p)
    ok = np.abs(det) >= 1e-14
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tv = orig - v0
    u = _dot(tv, p) * inv
    q = _cross(tv, e1)
    v = _dot(dirs, q) * inv
    t = _dot(e2, q) * inv
    ok &= (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (u + v <= 1.0) & (t > tmin)
    return np.where(ok, t, np.inf), u, v


def intersect_brute_force(orig, dirs, tmin, v0, e1, e2, chunk: int = 4096):
    """Test every ray against every triangle. Oracle for the BVH kernels."""
    n, m = len(orig), len(v0)
    t_best = np.full(n, np.inf)
    prim = np.full(n, -1, dtype=np.int64)
    ub = np.zeros(n)
    vb = np.zeros(n)
    for s in range(0, n, chunk):
        sl = slice(s, min(n, s + chunk))
        k = sl.stop - sl.start
        ri = np.repeat(np.arange(k), m)
        pi = np.tile(np.arange(m), k)
        t, u, v = moller_trumbore(orig[sl][ri], dirs[sl][ri], v0[pi], e1[pi], e2[pi], tmin)
        t = t.reshape(k, m)
        j = np.argmin(t, axis=1)  # first index wins ties
        rows = np.arange(k)
        tj = t[rows, j]
        hit = np.isfinite(tj)
        t_best[sl] = tj
        prim[sl] = np.where(hit, j, -1)
        ub[sl] = np.where(hit, u.reshape(k, m)[rows, j], 0.0)
        vb[sl] = np.where(hit, v.reshape(k, m)[rows, j], 0.0)
    return t_best, prim, ub, vb
