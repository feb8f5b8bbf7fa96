"""Multi-run experiments: render, score against a reference, write artifacts."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dfguide.guiding.fitting import learned_grid
from dfguide.harness.assets import reference_path, resolve_scene
from dfguide.harness.metrics import MetricReport, relmse
from dfguide.render.film import image_digest, read_pfm, write_pfm, write_png
from dfguide.render.integrator import MODES, RenderJob, render
from dfguide.render.scene import Scene, load_scene

log = logging.getLogger(__name__)

RESOLUTIONS = {"16x8": (16, 8), "32x16": (32, 16), "64x32": (64, 32)}
CACHE_MODES = ("off", "li-only", "full")
# far from any experiment seed so references never share streams with runs
REFERENCE_SEED = 0x5EED_0000
PDF_DUMP_SHAPE = (32, 16)


def parse_resolution(text: str) -> tuple[int, int]:
    if text not in RESOLUTIONS:
        raise ValueError(f"resolution must be one of {sorted(RESOLUTIONS)}, got {text!r}")
    return RESOLUTIONS[text]


def power_of_two_checkpoints(spp: int) -> tuple[int, ...]:
    out = []
    k = 1
    while k < spp:
        out.append(k)
        k *= 2
    out.append(spp)
    return tuple(out)


@dataclass
class ExperimentConfig:
    scene: str
    spp: int
    mode: str = "pt"
    resolution: str = "32x16"
    cache: str = "full"
    seed: int = 0
    runs: int = 1
    out: Path | None = None
    reference: Path | None = None
    workers: int = 1

    def __post_init__(self):
        if self.spp < 1:
            raise ValueError("spp must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.cache not in CACHE_MODES:
            raise ValueError(f"cache must be one of {CACHE_MODES}")
        parse_resolution(self.resolution)
        if self.out is not None:
            self.out = Path(self.out)
        if self.reference is not None:
            self.reference = Path(self.reference)

    @property
    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.runs)]

    def job(self, scene: Scene, seed: int) -> RenderJob:
        return RenderJob(scene, self.spp, mode=self.mode, resolution=parse_resolution(self.resolution),
                         cache=self.cache, seed=seed, workers=self.workers,
                         checkpoints=power_of_two_checkpoints(self.spp))


@dataclass
class ExperimentResult:
    report: MetricReport
    images: list = field(default_factory=list)
    wave_logs: list = field(default_factory=list)
    probe_pdfs: list = field(default_factory=list)
    wall_seconds: list = field(default_factory=list)


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_reference(scene, spp: int, out_path=None, seed: int = REFERENCE_SEED, workers: int = 1):
    """Plain path-traced high-spp image; returns ``(image, content_hash)``.

    The hash is over the stored PFM bytes when ``out_path`` is given, else over
    the float32 pixel data, which is what the PFM holds.
    """
    scene = scene if isinstance(scene, Scene) else load_scene(resolve_scene(scene))
    res = render(RenderJob(scene, spp, mode="pt", seed=seed, wave_spp=min(spp, 1024), workers=workers))
    image = res.film.mean()
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_pfm(out_path, image)
        meta = {"scene": scene.name, "spp": spp, "seed": seed, "sha256": file_hash(out_path)}
        out_path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
        return read_pfm(out_path), meta["sha256"]
    return image, image_digest(image.astype(np.float32))


def load_reference(path) -> tuple[np.ndarray, str]:
    return read_pfm(path), file_hash(path)


def probe_pdf_grids(system, scene: Scene, shape=PDF_DUMP_SHAPE) -> dict[str, np.ndarray]:
    """Learned joint density on a ``shape`` grid of the unit square at each named probe."""
    out = {}
    for p in scene.probes:
        cond = system.condition(p.position[None], p.wo[None], p.normal[None], np.array([p.roughness]))
        out[p.name] = learned_grid(system, cond, *shape)
    return out


def _default_reference(config: ExperimentConfig, scene_file: Path) -> Path | None:
    if config.reference is not None:
        return config.reference
    candidate = reference_path(scene_file.stem)
    return candidate if candidate.exists() else None


def _write_convergence(path: Path, report: MetricReport):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["spp", "mean_relmse"] + [f"seed_{s}" for s in report.seeds])
        for spp in sorted(report.convergence):
            vals = report.convergence[spp]
            w.writerow([spp, repr(float(np.mean(vals)))] + [repr(v) for v in vals])


def _flush(out: Path, report: MetricReport, walls: list):
    (out / "metrics.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    # wall time lives apart so that metrics.json is reproducible bit for bit
    (out / "timing.json").write_text(json.dumps({"wall_seconds": walls}, indent=2) + "\n")
    if report.convergence:
        _write_convergence(out / "convergence.csv", report)


def run_experiment(config: ExperimentConfig, reference: np.ndarray | None = None,
                   reference_hash: str | None = None) -> ExperimentResult:
    scene_file = resolve_scene(config.scene)
    scene = load_scene(scene_file)
    if reference is None:
        ref_file = _default_reference(config, scene_file)
        if ref_file is not None:
            reference, reference_hash = load_reference(ref_file)
        else:
            log.warning("%s: no reference available, relMSE is not computed", scene.name)

    report = MetricReport(scene=scene.name, mode=config.mode, resolution=config.resolution, cache=config.cache,
                          spp=config.spp, seeds=config.seeds, reference_hash=reference_hash)
    result = ExperimentResult(report)
    out = config.out
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    try:
        for seed in config.seeds:
            t0 = time.perf_counter()
            res = render(config.job(scene, seed))
            wall = time.perf_counter() - t0
            image = res.film.mean()
            result.images.append(image)
            result.wave_logs.append(res.wave_logs)
            result.wall_seconds.append(wall)
            report.film_digests.append(res.film.digest())
            if reference is not None:
                report.relmse.append(relmse(image, reference))
                for spp, snap in sorted(res.checkpoints.items()):
                    report.convergence.setdefault(spp, []).append(relmse(snap, reference))
            pdfs = probe_pdf_grids(res.system, scene) if res.system is not None else {}
            result.probe_pdfs.append(pdfs)
            log.info("%s %s seed %d: %.1fs relMSE %s", scene.name, config.mode, seed, wall,
                     report.relmse[-1] if report.relmse else "n/a")
            if out is not None:
                stem = out / f"run_{seed}"
                write_pfm(stem.with_suffix(".pfm"), image)
                write_png(stem.with_suffix(".png"), image)
                if config.mode != "pt":
                    with open(out / f"train_{seed}.jsonl", "w") as fh:
                        for entry in res.wave_logs:
                            if "records" in entry:
                                fh.write(json.dumps(entry, sort_keys=True) + "\n")
                if pdfs:
                    np.savez(out / f"pdf_{seed}.npz", **pdfs)
    finally:
        if out is not None:
            _flush(out, report, result.wall_seconds)
    return result
