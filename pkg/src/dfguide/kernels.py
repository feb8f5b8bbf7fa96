"""Hot-kernel dispatch: compiled Cython when importable, numpy otherwise.

Set ``DFGUIDE_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from dfguide.render import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("DFGUIDE_PURE_PYTHON"):
    try:
        from dfguide import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def _pick(backend: str | None):
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from dfguide import _kernels
        return _kernels
    return _impl


def intersect_bvh(orig, dirs, tmin, bvh, v0, e1, e2, backend: str | None = None):
    """Closest hit per ray: ``(t, prim, u, v)`` with ``prim == -1`` and ``t == inf`` on a miss."""
    impl = _pick(backend)
    return impl.intersect_bvh(orig, dirs, float(tmin), bvh.bmin, bvh.bmax, bvh.child, bvh.first,
                              bvh.count, bvh.prim_order, v0, e1, e2)


def grid_forward(p01, table, res: int, out, col: int, backend: str | None = None):
    """Trilinear lookup of one dense-grid level into ``out[:, col:col + F]``."""
    _pick(backend).grid_forward(p01, table, int(res), out, int(col))


def grid_backward(p01, grad_out, res: int, col: int, grad_table, backend: str | None = None):
    """Accumulate one level's table gradient into the float64 array ``grad_table``."""
    _pick(backend).grid_backward(p01, grad_out, int(res), int(col), grad_table)
