# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: closest-hit BVH traversal and the dense-grid encoding.

Traversal must return the same hits as ``dfguide.render._kernels_py.intersect_bvh``:
Moeller-Trumbore in double precision, ties on ``t`` broken by the smaller
primitive index. The grid kernels match the numpy fallback to rounding.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, INFINITY

cnp.import_array()

DEF STACK = 128
DEF CULL_SCALE = 1.000000001


cdef inline bint _slab(const double[:, ::1] bmin, const double[:, ::1] bmax, long node,
                       double ox, double oy, double oz, double ix, double iy, double iz,
                       double tmin, double tmax) nogil:
    cdef double t0, t1, tn = tmin, tf = tmax, a, b
    a = (bmin[node, 0] - ox) * ix
    b = (bmax[node, 0] - ox) * ix
    if a > b:
        a, b = b, a
    if a > tn: tn = a
    if b < tf: tf = b
    a = (bmin[node, 1] - oy) * iy
    b = (bmax[node, 1] - oy) * iy
    if a > b:
        a, b = b, a
    if a > tn: tn = a
    if b < tf: tf = b
    a = (bmin[node, 2] - oz) * iz
    b = (bmax[node, 2] - oz) * iz
    if a > b:
        a, b = b, a
    if a > tn: tn = a
    if b < tf: tf = b
    return tn <= tf


def intersect_bvh(const double[:, ::1] orig, const double[:, ::1] dirs, double tmin,
                  const double[:, ::1] bmin, const double[:, ::1] bmax,
                  const long[:, ::1] child, const long[::1] first, const long[::1] count,
                  const long[::1] prim_order,
                  const double[:, ::1] v0, const double[:, ::1] e1, const double[:, ::1] e2):
    cdef Py_ssize_t n = orig.shape[0]
    t_out_arr = np.full(n, np.inf)
    prim_out_arr = np.full(n, -1, dtype=np.int64)
    u_out_arr = np.zeros(n)
    v_out_arr = np.zeros(n)
    cdef double[::1] t_out = t_out_arr
    cdef long[::1] prim_out = prim_out_arr
    cdef double[::1] u_out = u_out_arr
    cdef double[::1] v_out = v_out_arr
    cdef long stack[STACK]
    cdef Py_ssize_t r
    cdef int sp
    cdef long node, j, p, k
    cdef double ox, oy, oz, dx, dy, dz, ix, iy, iz, best
    cdef double px, py, pz, det, inv, tx, ty, tz, qx, qy, qz, uu, vv, tt
    cdef long best_prim
    cdef double bu, bv

    with nogil:
        for r in range(n):
            ox = orig[r, 0]; oy = orig[r, 1]; oz = orig[r, 2]
            dx = dirs[r, 0]; dy = dirs[r, 1]; dz = dirs[r, 2]
            ix = 1.0 / dx if dx != 0.0 else INFINITY
            iy = 1.0 / dy if dy != 0.0 else INFINITY
            iz = 1.0 / dz if dz != 0.0 else INFINITY
            best = INFINITY
            best_prim = -1
            bu = 0.0
            bv = 0.0
            sp = 0
            stack[sp] = 0
            sp += 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                # margin: a flat box's plane distance may round above a tied hit
                if not _slab(bmin, bmax, node, ox, oy, oz, ix, iy, iz, tmin, best * CULL_SCALE + 1e-12):
                    continue
                if count[node] > 0:
                    for j in range(first[node], first[node] + count[node]):
                        p = prim_order[j]
                        px = dy * e2[p, 2] - dz * e2[p, 1]
                        py = dz * e2[p, 0] - dx * e2[p, 2]
                        pz = dx * e2[p, 1] - dy * e2[p, 0]
                        det = e1[p, 0] * px + e1[p, 1] * py + e1[p, 2] * pz
                        if fabs(det) < 1e-14:
                            continue
                        inv = 1.0 / det
                        tx = ox - v0[p, 0]; ty = oy - v0[p, 1]; tz = oz - v0[p, 2]
                        uu = (tx * px + ty * py + tz * pz) * inv
                        if uu < 0.0 or uu > 1.0:
                            continue
                        qx = ty * e1[p, 2] - tz * e1[p, 1]
                        qy = tz * e1[p, 0] - tx * e1[p, 2]
                        qz = tx * e1[p, 1] - ty * e1[p, 0]
                        vv = (dx * qx + dy * qy + dz * qz) * inv
                        if vv < 0.0 or uu + vv > 1.0:
                            continue
                        tt = (e2[p, 0] * qx + e2[p, 1] * qy + e2[p, 2] * qz) * inv
                        if tt <= tmin:
                            continue
                        if tt < best or (tt == best and p < best_prim):
                            best = tt
                            best_prim = p
                            bu = uu
                            bv = vv
                else:
                    # push the far child first so the near one is popped next
                    k = child[node, 0]
                    j = child[node, 1]
                    if sp + 2 <= STACK:
                        stack[sp] = j
                        stack[sp + 1] = k
                        sp += 2
            t_out[r] = best
            prim_out[r] = best_prim
            u_out[r] = bu
            v_out[r] = bv
    return t_out_arr, prim_out_arr, u_out_arr, v_out_arr


# --- dense grid ----------------------------------------------------------------------------

ctypedef fused real:
    float
    double


cdef inline void _cell(double p, long res, long* base, double* frac) noexcept nogil:
    cdef double g
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    g = p * res
    base[0] = <long>floor(g)
    if base[0] > res - 1:
        base[0] = res - 1
    frac[0] = g - base[0]


def grid_forward(const real[:, ::1] p01, const real[:, ::1] table, long res, real[:, ::1] out, long col):
    """Trilinear lookup of one level into ``out[:, col:col + F]``."""
    cdef Py_ssize_t n = p01.shape[0], nf = table.shape[1], i, k
    cdef long bx, by, bz, r1 = res + 1, idx
    cdef double fx, fy, fz, wx, wy, wz, w
    cdef double acc[16]
    cdef int c
    if nf > 16:
        raise ValueError("at most 16 features per level")
    with nogil:
        for i in range(n):
            _cell(p01[i, 0], res, &bx, &fx)
            _cell(p01[i, 1], res, &by, &fy)
            _cell(p01[i, 2], res, &bz, &fz)
            for k in range(nf):
                acc[k] = 0.0
            for c in range(8):
                wx = fx if (c >> 2) & 1 else 1.0 - fx
                wy = fy if (c >> 1) & 1 else 1.0 - fy
                wz = fz if c & 1 else 1.0 - fz
                w = wx * wy * wz
                idx = (bx + ((c >> 2) & 1)) * r1 * r1 + (by + ((c >> 1) & 1)) * r1 + bz + (c & 1)
                for k in range(nf):
                    acc[k] += w * table[idx, k]
            for k in range(nf):
                out[i, col + k] = <real>acc[k]


def grid_backward(const real[:, ::1] p01, const real[:, ::1] grad_out, long res, long col,
                  double[:, ::1] grad_table):
    """Scatter-add ``grad_out[:, col:col + F]`` into ``grad_table`` (zeroed by the caller), row order."""
    cdef Py_ssize_t n = p01.shape[0], nf = grad_table.shape[1], i, k
    cdef long bx, by, bz, r1 = res + 1, idx
    cdef double fx, fy, fz, wx, wy, wz, w
    cdef int c
    with nogil:
        for i in range(n):
            _cell(p01[i, 0], res, &bx, &fx)
            _cell(p01[i, 1], res, &by, &fy)
            _cell(p01[i, 2], res, &bz, &fz)
            for c in range(8):
                wx = fx if (c >> 2) & 1 else 1.0 - fx
                wy = fy if (c >> 1) & 1 else 1.0 - fy
                wz = fz if c & 1 else 1.0 - fz
                w = wx * wy * wz
                idx = (bx + ((c >> 2) & 1)) * r1 * r1 + (by + ((c >> 1) & 1)) * r1 + bz + (c & 1)
                for k in range(nf):
                    grad_table[idx, k] += w * grad_out[i, col + k]
