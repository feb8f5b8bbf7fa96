"""Unidirectional path tracer (no NEE, no Russian roulette) with optional neural guiding.

Paths are traced as a wavefront: every bounce processes all live paths of a
wave in one vectorised step.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from dfguide.guiding import GuideConfig, GuidingSystem, GuidingTrainer, PathVertexRecords, TrainSchedule, mixed_sample
from dfguide.render.bsdf import bsdf_sample, dot
from dfguide.render.film import Film
from dfguide.render.scene import Scene

log = logging.getLogger(__name__)

MAX_PATH_LENGTH = 6
DIMS_PER_BOUNCE = 3
MODES = ("pt", "df-n", "df-l")


@dataclass
class IntegratorConfig:
    max_path_length: int = MAX_PATH_LENGTH
    nee: bool = False
    russian_roulette: bool = False
    guide_fraction: float = 0.7
    train_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.nee or self.russian_roulette:
            raise ValueError("next-event estimation and Russian roulette are not supported")
        if self.max_path_length < 1:
            raise ValueError("max_path_length must be >= 1")


@dataclass
class Counters:
    rejected: int = 0  # mixture pdf == 0
    nonfinite: int = 0
    clamped_positions: int = 0
    guide_samples: int = 0
    guide_zero_f: int = 0  # guide picked a direction the BSDF does not scatter into, e.g. below the surface

    def add(self, other: "Counters"):
        self.rejected += other.rejected
        self.guide_samples += other.guide_samples
        self.guide_zero_f += other.guide_zero_f
        self.nonfinite += other.nonfinite
        self.clamped_positions += other.clamped_positions


@dataclass
class WaveResult:
    radiance: np.ndarray
    records: PathVertexRecords | None
    counters: Counters


def n_dims(max_path_length: int = MAX_PATH_LENGTH) -> int:
    return 2 + DIMS_PER_BOUNCE * max_path_length


def trace_paths(scene: Scene, orig, dirs, uniforms, guide: GuidingSystem | None = None, alpha: float = 0.0,
                collect: bool = False, max_path_length: int = MAX_PATH_LENGTH, backend: str | None = None) -> WaveResult:
    """Trace one path per row of ``orig``/``dirs``.

    ``uniforms[:, 2 + 3k : 5 + 3k]`` drive bounce ``k``. Emission is gathered
    at every vertex; the walk stops after ``max_path_length`` segments.
    With ``collect`` the non-delta scattering vertices come back as records
    whose suffix radiance has been filled in.
    """
    n = len(orig)
    mats = scene.materials
    radiance = np.zeros((n, 3))
    beta = np.ones((n, 3))
    counters = Counters()
    o = np.asarray(orig, dtype=np.float64)
    d = np.asarray(dirs, dtype=np.float64)
    alive = np.arange(n)
    depth_limit = max_path_length

    # per-depth bookkeeping for the suffix estimates
    e_next = np.zeros((depth_limit, n, 3))
    weight = np.zeros((depth_limit, n, 3))
    scattered = np.zeros((depth_limit, n), dtype=bool)
    verts = []
    next_info = {}

    for depth in range(depth_limit):
        if alive.size == 0:
            break
        t, prim, _, _ = scene.intersect(o[alive], d[alive], backend=backend, tmin=scene.spawn_tmin)
        hit = prim >= 0
        esc = alive[~hit]
        if esc.size:
            radiance[esc] += beta[esc] * scene.environment
            if depth > 0:
                e_next[depth - 1, esc] = scene.environment
        hidx = alive[hit]
        if hidx.size == 0:
            break
        p = prim[hit]
        x = o[hidx] + t[hit, None] * d[hidx]
        wo = -d[hidx]
        ng = scene.normal[p]
        front = dot(ng, wo) > 0.0
        nrm = np.where(front[:, None], ng, -ng)
        le = scene.emission[p] * (front | scene.two_sided_emission[p])[:, None]
        radiance[hidx] += beta[hidx] * le
        mid = scene.material[p]
        delta = mats.is_delta[mid]
        rough = mats.roughness[mid]
        if depth > 0:
            e_next[depth - 1, hidx] = le
            if collect:
                next_info[depth - 1] = (hidx, x, wo, nrm, rough, delta)
        if depth == depth_limit - 1:
            break

        u = uniforms[hidx, 2 + DIMS_PER_BOUNCE * depth: 2 + DIMS_PER_BOUNCE * (depth + 1)]
        wi = np.zeros((hidx.size, 3))
        w = np.zeros((hidx.size, 3))
        q = np.zeros(hidx.size)
        fval = np.zeros((hidx.size, 3))
        cos = np.zeros(hidx.size)
        from_guide = np.zeros(hidx.size, dtype=bool)

        guided = (~delta) if (guide is not None and alpha > 0.0) else np.zeros(hidx.size, dtype=bool)
        plain = ~guided
        if np.any(plain):
            bs = bsdf_sample(mats, mid[plain], nrm[plain], wo[plain], u[plain][:, [1, 2, 0]], front=front[plain])
            wi[plain] = bs.wi
            w[plain] = bs.weight
            q[plain] = bs.pdf
            cos[plain] = np.abs(dot(nrm[plain], bs.wi))
            nd = ~bs.delta
            safe = np.where(bs.pdf > 0, bs.pdf, 1.0)
            fval[plain] = np.where(nd[:, None], bs.weight * (safe / np.maximum(cos[plain], 1e-300))[:, None], 0.0)
            rej = nd & ~(bs.pdf > 0)
            counters.rejected += int(rej.sum())
        if np.any(guided):
            cond = guide.condition(x[guided], wo[guided], nrm[guided], rough[guided])
            counters.clamped_positions += cond.clamped
            ms = mixed_sample(guide, cond, mats, mid[guided], nrm[guided], wo[guided], u[guided], alpha)
            wi[guided] = ms.wi
            w[guided] = ms.weight
            q[guided] = ms.pdf
            fval[guided] = ms.f
            cos[guided] = ms.cos
            from_guide[guided] = ms.from_guide
            counters.rejected += int(ms.rejected.sum())
            counters.guide_samples += int(ms.from_guide.sum())
            counters.guide_zero_f += int(np.sum(ms.from_guide & ~np.any(ms.f > 0.0, axis=1)))

        bad = ~np.all(np.isfinite(w), axis=1)
        if np.any(bad):
            counters.nonfinite += int(bad.sum())
            w[bad] = 0.0
        prefix = beta[hidx]
        beta[hidx] = prefix * w
        weight[depth, hidx] = w
        scattered[depth, hidx] = True
        if collect:
            keep = ~delta
            verts.append(dict(
                path=hidx[keep], depth=np.full(int(keep.sum()), depth), x=x[keep], wo=wo[keep], normal=nrm[keep],
                roughness=rough[keep], wi=wi[keep], f=fval[keep], cos=cos[keep], q=q[keep],
                from_guide=from_guide[keep], throughput=prefix[keep],
            ))
        # push the origin off the surface on the side wi leaves by; a large tmin instead
        # would skip adjacent faces near edges and leak energy
        side = np.where(dot(ng, wi) >= 0.0, 1.0, -1.0)
        o[hidx] = x + (side * scene.ray_epsilon)[:, None] * ng
        d[hidx] = wi
        alive = hidx[np.any(w > 0.0, axis=1)]

    records = None
    if collect:
        records = _assemble_records(verts, next_info, e_next, weight, scattered)
    return WaveResult(radiance, records, counters)


def _assemble_records(verts, next_info, e_next, weight, scattered) -> PathVertexRecords:
    depth_limit, n = scattered.shape
    l_in = np.zeros((depth_limit, n, 3))
    for k in range(depth_limit - 1, -1, -1):
        l_in[k] = e_next[k]
        if k + 1 < depth_limit:
            l_in[k] += np.where(scattered[k + 1][:, None], weight[k + 1] * l_in[k + 1], 0.0)
    if not verts:
        return PathVertexRecords.empty()
    parts = []
    for v in verts:
        k = int(v["depth"][0]) if len(v["depth"]) else 0
        paths = v["path"]
        m = len(paths)
        nh = np.zeros(m, dtype=bool)
        nx = np.zeros((m, 3))
        nwo = np.zeros((m, 3))
        nn = np.zeros((m, 3))
        nr = np.zeros(m)
        ndl = np.zeros(m, dtype=bool)
        if k in next_info and m:
            hidx, x, wo, nrm, rough, delta = next_info[k]
            pos = np.full(n, -1)
            pos[hidx] = np.arange(len(hidx))
            j = pos[paths]
            ok = j >= 0
            nh[ok] = True
            nx[ok], nwo[ok], nn[ok] = x[j[ok]], wo[j[ok]], nrm[j[ok]]
            nr[ok], ndl[ok] = rough[j[ok]], delta[j[ok]]
        li = l_in[k, paths]
        w = weight[k, paths]
        parts.append(PathVertexRecords(
            x=v["x"], wo=v["wo"], normal=v["normal"], roughness=v["roughness"], wi=v["wi"], f=v["f"],
            cos=v["cos"], q=v["q"], from_guide=v["from_guide"], l_in=li, l_r=w * li,
            throughput=v["throughput"], depth=v["depth"],
            path=paths,
            next_hit=nh, next_x=nx, next_wo=nwo, next_normal=nn, next_roughness=nr, next_delta=ndl,
            next_emission=e_next[k, paths],
        ))
    rec = PathVertexRecords.concatenate(parts)
    # canonical order: by path then depth, independent of how the wave was partitioned
    return rec.subset(np.lexsort((rec.depth, rec.path)))


# --- wave / render loop ------------------------------------------------------------------


@dataclass
class RenderJob:
    scene: Scene
    spp: int
    mode: str = "pt"
    resolution: tuple = (32, 16)
    cache: str = "full"
    seed: int = 0
    wave_spp: int = 1
    tile_size: int = 16
    workers: int = 1
    train_fraction: float = 0.3
    guide_fraction: float = 0.7
    minibatches: int = 4
    max_path_length: int = MAX_PATH_LENGTH
    checkpoints: tuple = ()
    backend: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.spp < 1:
            raise ValueError("spp must be >= 1")

    @property
    def guided(self) -> bool:
        return self.mode != "pt"


@dataclass
class RenderResult:
    film: Film
    system: GuidingSystem | None
    wave_logs: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)
    counters: Counters = field(default_factory=Counters)


def tiles(width: int, height: int, size: int):
    """Row-major tiles as ``(px, py)`` index arrays."""
    out = []
    for ty in range(0, height, size):
        for tx in range(0, width, size):
            ys, xs = np.mgrid[ty:min(ty + size, height), tx:min(tx + size, width)]
            out.append((xs.ravel(), ys.ravel()))
    return out


def wave_sample_count(job: RenderJob, wave: int) -> int:
    return min(job.wave_spp, job.spp - wave * job.wave_spp)


def _wave_inputs(job: RenderJob, tile_list, wave: int, tile_ids):
    """Per-path pixel indices and uniforms for the given tiles; streams are keyed by (seed, tile, wave)."""
    pxs, pys, us = [], [], []
    dims = n_dims(job.max_path_length)
    count = wave_sample_count(job, wave)
    for t in tile_ids:
        px, py = tile_list[t]
        px = np.repeat(px, count)
        py = np.repeat(py, count)
        rng = np.random.default_rng([job.seed, t, wave])
        pxs.append(px)
        pys.append(py)
        us.append(rng.random((len(px), dims)))
    return np.concatenate(pxs), np.concatenate(pys), np.concatenate(us)


def make_guiding(job: RenderJob) -> GuidingSystem:
    m1, m2 = job.resolution
    cfg = GuideConfig(mode="nearest" if job.mode == "df-n" else "linear", m1=m1, m2=m2, cache=job.cache,
                      seed=job.seed)
    return GuidingSystem(job.scene.bounds_min, job.scene.bounds_max, cfg)


def render(job: RenderJob, on_wave=None) -> RenderResult:
    """Wave loop: render ``wave_spp`` samples per pixel, merge records, train while in the window."""
    scene = job.scene
    cam = scene.camera
    film = Film(cam.width, cam.height)
    schedule = TrainSchedule(job.spp, job.wave_spp, job.train_fraction, job.guide_fraction, job.minibatches)
    system = make_guiding(job) if job.guided else None
    trainer = GuidingTrainer(system, schedule) if system is not None else None
    tile_list = tiles(cam.width, cam.height, job.tile_size)
    groups = np.array_split(np.arange(len(tile_list)), max(1, min(job.workers, len(tile_list))))
    result = RenderResult(film, system)
    checkpoints = set(job.checkpoints)
    pool = ThreadPoolExecutor(job.workers) if job.workers > 1 else None
    try:
        for wave in range(schedule.n_waves):
            alpha = schedule.guide_alpha(wave) if job.guided else 0.0
            training = job.guided and schedule.is_training(wave)

            def run(group):
                px, py, u = _wave_inputs(job, tile_list, wave, group)
                orig, dirs = cam.generate_rays(px, py, u[:, :2])
                res = trace_paths(scene, orig, dirs, u, system, alpha, collect=training,
                                  max_path_length=job.max_path_length, backend=job.backend)
                return px, py, res

            outs = list(pool.map(run, groups)) if pool else [run(g) for g in groups]
            offset = 0
            recs = []
            for px, py, res in outs:
                film.splat(px, py, res.radiance)
                result.counters.add(res.counters)
                if res.records is not None:
                    res.records.path = res.records.path + offset
                    recs.append(res.records)
                offset += len(px)
            entry = {"wave": wave, "spp": min((wave + 1) * job.wave_spp, job.spp), "alpha": alpha}
            if training:
                rec = PathVertexRecords.concatenate(recs)
                rng = np.random.default_rng([job.seed, 1 << 20, wave])
                stats = trainer.run_training_frame(rec, wave, rng)
                entry.update(
                    records=stats.n_records, batch_size=stats.batch_size,
                    cache_loss=stats.cache_losses, guide_loss=stats.guide_losses,
                    dropped_low_q=stats.dropped_low_q, rejected=result.counters.rejected,
                    guide_samples=result.counters.guide_samples, guide_zero_f=result.counters.guide_zero_f,
                    param_hash=system.param_hash(),
                )
            result.wave_logs.append(entry)
            spp_done = entry["spp"]
            if spp_done in checkpoints:
                result.checkpoints[spp_done] = film.mean().copy()
            if on_wave is not None:
                on_wave(entry)
    finally:
        if pool:
            pool.shutdown()
    return result
