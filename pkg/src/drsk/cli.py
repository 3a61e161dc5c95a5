"""Command-line entry point: ``drsk run | ground-truth | slopes | presets``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, builtin_presets, load_config
from .estimators import METHODS
from .harness import config_ground_truth, emit_report, read_csv, run_experiment, slopes_from_rows, summary

OUT_ENV = "DRSK_OUT_DIR"


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drsk", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a replicated-estimation experiment")
    run.add_argument("--config", type=Path, help="JSON experiment or preset file (default: built-in presets)")
    run.add_argument("--preset", help="preset name inside the config file or the built-in set")
    run.add_argument("--out", type=Path, help=f"output directory (default: ${OUT_ENV} or results/<name>)")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--methods", help=f"comma-separated subset of {','.join(METHODS)}")
    run.add_argument("--repetitions", type=int, help="override the repetition count")
    run.add_argument("--n-grid", help="override the sample sizes, comma-separated")

    gt = sub.add_parser("ground-truth", help="compute the ground-truth value of an experiment")
    gt.add_argument("--config", type=Path)
    gt.add_argument("--preset")

    sl = sub.add_parser("slopes", help="fit log-log MSE slopes from a report CSV")
    sl.add_argument("--report", type=Path, required=True)

    sub.add_parser("presets", help="list the built-in presets")
    return p


def _load(args):
    cfg = load_config(args.config, args.preset)
    d = cfg.to_dict()
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "methods", None):
        d["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if getattr(args, "repetitions", None) is not None:
        d["repetitions"] = args.repetitions
    if getattr(args, "n_grid", None):
        d["n_grid"] = [int(v) for v in args.n_grid.split(",")]
    return type(cfg).from_dict(d)


def _cmd_run(args) -> int:
    cfg = _load(args)
    out = args.out or Path(os.environ.get(OUT_ENV) or Path("results") / cfg.name)
    report = run_experiment(cfg, progress=args.verbose)
    files = emit_report(report, out)
    s = summary(report)
    failed = sum(c["failed"] for c in s["cells"])
    print(f"theta = {report.theta!r} (se {report.theta_se!r})")
    for method, fit in s["slopes"].items():
        slope = "n/a" if fit is None else f"{fit['slope']:+.3f} ± {fit['se']:.3f}"
        print(f"{method:>7}: slope {slope}")
    if failed:
        print(f"{failed} failed cell(s); see summary.json", file=sys.stderr)
    for f in files:
        print(f"wrote {f}")
    return 0


def _cmd_ground_truth(args) -> int:
    cfg = _load(args)
    theta, se = config_ground_truth(cfg)
    print(json.dumps({"name": cfg.name, "theta": theta, "se": se}))
    return 0


def _cmd_slopes(args) -> int:
    rows = read_csv(args.report)
    for method, fit in slopes_from_rows(rows).items():
        if fit is None:
            print(f"{method}\tn/a")
        else:
            print(f"{method}\t{fit[0]!r}\t{fit[1]!r}")
    return 0


def _cmd_presets(args) -> int:
    for name, spec in sorted(builtin_presets().items()):
        print(f"{name:24s} {spec.get('description', '')}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handlers = {"run": _cmd_run, "ground-truth": _cmd_ground_truth, "slopes": _cmd_slopes, "presets": _cmd_presets}
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
