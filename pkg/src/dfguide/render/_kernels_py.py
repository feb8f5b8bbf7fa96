"""Pure numpy fallback for the compiled kernels in ``dfguide._kernels``.

Traversal is breadth-first over (ray, node) pairs so that the per-node work
is vectorised across rays.
"""
from __future__ import annotations

import numpy as np

from dfguide.render.bvh import moller_trumbore

CULL_SCALE = 1.000000001


def intersect_bvh(orig, dirs, tmin, bmin, bmax, child, first, count, prim_order, v0, e1, e2):
    n = len(orig)
    t_best = np.full(n, np.inf)
    prim = np.full(n, -1, dtype=np.int64)
    ub = np.zeros(n)
    vb = np.zeros(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(dirs != 0.0, 1.0 / np.where(dirs != 0.0, dirs, 1.0), np.inf)

    rays = np.arange(n)
    nodes = np.zeros(n, dtype=np.int64)
    while rays.size:
        o = orig[rays]
        iv = inv[rays]
        with np.errstate(invalid="ignore"):
            a = (bmin[nodes] - o) * iv
            b = (bmax[nodes] - o) * iv
        a = np.nan_to_num(a, nan=-np.inf, posinf=np.inf, neginf=-np.inf)
        b = np.nan_to_num(b, nan=np.inf, posinf=np.inf, neginf=-np.inf)
        tn = np.maximum(np.minimum(a, b).max(axis=1), tmin)
        # same culling margin as the compiled kernel
        tf = np.minimum(np.maximum(a, b).min(axis=1), t_best[rays] * CULL_SCALE + 1e-12)
        keep = tn <= tf
        rays, nodes = rays[keep], nodes[keep]
        if not rays.size:
            break

        leaf = count[nodes] > 0
        if np.any(leaf):
            lr, ln = rays[leaf], nodes[leaf]
            cnt = count[ln]
            rr = np.repeat(lr, cnt)
            starts = np.repeat(first[ln], cnt)
            offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            pp = prim_order[starts + offs]
            t, u, v = moller_trumbore(orig[rr], dirs[rr], v0[pp], e1[pp], e2[pp], tmin)
            hit = np.isfinite(t)
            if np.any(hit):
                rr, pp, t, u, v = rr[hit], pp[hit], t[hit], u[hit], v[hit]
                # closest candidate per ray, ties broken by primitive index
                order = np.lexsort((pp, t, rr))
                rr, pp, t, u, v = rr[order], pp[order], t[order], u[order], v[order]
                head = np.ones(len(rr), dtype=bool)
                head[1:] = rr[1:] != rr[:-1]
                rr, pp, t, u, v = rr[head], pp[head], t[head], u[head], v[head]
                better = (t < t_best[rr]) | ((t == t_best[rr]) & (pp < prim[rr]))
                rr, pp, t, u, v = rr[better], pp[better], t[better], u[better], v[better]
                t_best[rr] = t
                prim[rr] = pp
                ub[rr] = u
                vb[rr] = v

        inner = ~leaf
        ir, inn = rays[inner], nodes[inner]
        rays = np.concatenate([ir, ir])
        nodes = np.concatenate([child[inn, 0], child[inn, 1]])
    return t_best, prim, ub, vb


# --- dense grid ----------------------------------------------------------------------------


def _grid_corners(p01, res):
    g = np.clip(np.asarray(p01, dtype=np.float64), 0.0, 1.0) * res
    base = np.minimum(np.floor(g).astype(np.int64), res - 1)
    f = g - base
    r1 = res + 1
    idx = np.empty((len(g), 8), dtype=np.int64)
    wts = np.empty((len(g), 8))
    for c in range(8):
        off = np.array([(c >> 2) & 1, (c >> 1) & 1, c & 1])
        idx[:, c] = (base + off) @ np.array([r1 * r1, r1, 1])
        w = np.where(off, f, 1.0 - f)
        wts[:, c] = w[:, 0] * w[:, 1] * w[:, 2]
    return idx, wts


def grid_forward(p01, table, res, out, col):
    idx, wts = _grid_corners(p01, res)
    nf = table.shape[1]
    out[:, col:col + nf] = np.einsum("nc,ncf->nf", wts, table[idx].astype(np.float64))


def grid_backward(p01, grad_out, res, col, grad_table):
    idx, wts = _grid_corners(p01, res)
    flat = idx.ravel()
    for k in range(grad_table.shape[1]):
        contrib = (wts * grad_out[:, col + k:col + k + 1].astype(np.float64)).ravel()
        grad_table[:, k] += np.bincount(flat, weights=contrib, minlength=grad_table.shape[0])
