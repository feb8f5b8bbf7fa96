"""``dfguide`` command line: single experiments, ablation sweeps and reference generation."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from dfguide.harness.assets import bundled_scene_names, reference_path, resolve_scene
from dfguide.harness.experiment import (CACHE_MODES, RESOLUTIONS, ExperimentConfig, load_reference, make_reference,
                                        run_experiment)
from dfguide.render.integrator import MODES

SWEEPS = {
    "resolution": ("resolution", tuple(RESOLUTIONS)),
    "cache": ("cache", CACHE_MODES),
    "mode": ("mode", MODES),
}


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _common(p: argparse.ArgumentParser):
    p.add_argument("--scene", required=True, help="bundled scene name or path to a scene JSON")
    p.add_argument("--spp", type=_positive, required=True)
    p.add_argument("--mode", choices=MODES, default="pt")
    p.add_argument("--res", choices=sorted(RESOLUTIONS), default="32x16", help="guide resolution M1xM2")
    p.add_argument("--cache", choices=CACHE_MODES, default="full")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=_positive, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--workers", type=_positive, default=1)
    ref = p.add_mutually_exclusive_group()
    ref.add_argument("--reference", type=Path, help="reference PFM (default: the bundled one, if any)")
    ref.add_argument("--make-reference", type=_positive, metavar="N",
                     help="render an N-spp path-traced reference into OUT/reference.pfm first")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfguide", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("render", help="render one configuration for --runs seeds and score it"))
    sweep = sub.add_parser("sweep", help="one report per value of an ablation axis")
    _common(sweep)
    sweep.add_argument("--axis", choices=sorted(SWEEPS), default="resolution")
    ref = sub.add_parser("reference", help="render a high-spp path-traced reference")
    ref.add_argument("--scene", required=True)
    ref.add_argument("--spp", type=_positive, required=True)
    ref.add_argument("--out", type=Path, help="PFM path (default: the bundled reference location)")
    ref.add_argument("--workers", type=_positive, default=1)
    sub.add_parser("scenes", help="list bundled scenes")
    return parser


def _reference_for(args) -> tuple:
    if args.make_reference:
        path = args.out / "reference.pfm"
        if args.make_reference < 64 * args.spp:
            logging.warning("reference spp %d is below 64x the budget", args.make_reference)
        make_reference(args.scene, args.make_reference, path, workers=args.workers)
        return load_reference(path)
    if args.reference:
        return load_reference(args.reference)
    return None, None


def _config(args, out: Path, **over) -> ExperimentConfig:
    kw = dict(scene=args.scene, spp=args.spp, mode=args.mode, resolution=args.res, cache=args.cache,
              seed=args.seed, runs=args.runs, out=out, reference=args.reference, workers=args.workers)
    kw.update(over)
    return ExperimentConfig(**kw)


def _summary(report) -> dict:
    return {"scene": report.scene, "mode": report.mode, "resolution": report.resolution, "cache": report.cache,
            "spp": report.spp, "relmse": report.relmse, "mean_relmse": report.mean_relmse}


def cmd_render(args) -> int:
    reference, ref_hash = _reference_for(args)
    res = run_experiment(_config(args, args.out), reference, ref_hash)
    print(json.dumps(_summary(res.report)))
    return 0


def cmd_sweep(args) -> int:
    reference, ref_hash = _reference_for(args)
    field_name, values = SWEEPS[args.axis]
    for value in values:
        res = run_experiment(_config(args, args.out / f"{args.axis}-{value}", **{field_name: value}),
                             reference, ref_hash)
        print(json.dumps(_summary(res.report)))
    return 0


def cmd_reference(args) -> int:
    out = args.out or reference_path(resolve_scene(args.scene).stem)
    _, digest = make_reference(args.scene, args.spp, out, workers=args.workers)
    print(json.dumps({"path": str(out), "sha256": digest}))
    return 0


def cmd_scenes(args) -> int:
    for name in bundled_scene_names():
        print(name, "(reference)" if reference_path(name).exists() else "")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"render": cmd_render, "sweep": cmd_sweep, "reference": cmd_reference, "scenes": cmd_scenes}
    try:
        return handlers[args.command](args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
