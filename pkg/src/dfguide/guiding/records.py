from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np


@dataclass
class PathVertexRecords:
    """Training tuples for non-delta bounces, one row per vertex (struct of arrays).

    ``l_in`` is the path-suffix estimate of the radiance arriving at ``x``
    from ``wi``; ``l_r = f * cos / q * l_in`` the one-sample estimate of the
    radiance reflected towards ``wo``. ``next_*`` describe the vertex hit by
    ``wi``; when ``next_hit`` is False the ray escaped (or was not traced)
    and ``next_emission`` holds the environment radiance it saw.
    """

    x: np.ndarray
    wo: np.ndarray
    normal: np.ndarray
    roughness: np.ndarray
    wi: np.ndarray
    f: np.ndarray
    cos: np.ndarray
    q: np.ndarray
    from_guide: np.ndarray
    l_in: np.ndarray
    l_r: np.ndarray
    throughput: np.ndarray
    depth: np.ndarray
    path: np.ndarray
    next_hit: np.ndarray
    next_x: np.ndarray
    next_wo: np.ndarray
    next_normal: np.ndarray
    next_roughness: np.ndarray
    next_delta: np.ndarray
    next_emission: np.ndarray

    def __len__(self) -> int:
        return len(self.q)

    def subset(self, idx) -> "PathVertexRecords":
        return PathVertexRecords(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    @classmethod
    def concatenate(cls, parts) -> "PathVertexRecords":
        parts = list(parts)
        return cls(**{f.name: np.concatenate([getattr(p, f.name) for p in parts]) for f in fields(cls)})

    @classmethod
    def empty(cls) -> "PathVertexRecords":
        z3 = np.zeros((0, 3))
        z1 = np.zeros(0)
        zi = np.zeros(0, dtype=np.int64)
        zb = np.zeros(0, dtype=bool)
        return cls(x=z3, wo=z3, normal=z3, roughness=z1, wi=z3, f=z3, cos=z1, q=z1, from_guide=zb, l_in=z3,
                   l_r=z3, throughput=z3, depth=zi, path=zi, next_hit=zb, next_x=z3, next_wo=z3,
                   next_normal=z3, next_roughness=z1, next_delta=zb, next_emission=z3)
