"""Command-line entry point: ``dualfas <experiment> [options]``."""
from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .config import ExperimentConfig
from .validate import format_report, run_validate

RUNNERS = {
    "snr-sweep": experiments.run_snr_sweep,
    "port-sweep": experiments.run_port_sweep,
    "los-compare": experiments.run_los_compare,
    "allocate": experiments.run_allocate,
}


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualfas", description=__doc__)
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in (*RUNNERS, "validate"):
        p = sub.add_parser(kind)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int, dest="n_trials")
        p.add_argument("--out", dest="output_path", help="CSV output path ('-' for stdout)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--W", type=float, help="aperture (wavelengths), both ends")
        p.add_argument("--N", type=int, help="port count, both ends")
        p.add_argument("--k-db", type=float, dest="k_db", help="Rician K-factor in dB")
        p.add_argument("--snr-db", type=_floats, dest="snr_db", help="comma-separated SNR grid in dB")
        p.add_argument("--ports", type=_ints, help="comma-separated port grid")
        p.add_argument("--fixed-snr-db", type=float, dest="fixed_snr_db")
        p.add_argument("--no-optimize", action="store_true")
    return parser


def config_from_args(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
        doc["kind"] = args.kind
        cfg = ExperimentConfig.from_dict(doc)
    else:
        cfg = ExperimentConfig(kind=args.kind)
    changes = {}
    for name in ("seed", "n_trials", "output_path", "fixed_snr_db"):
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    if args.snr_db is not None:
        changes["snr_grid_db"] = args.snr_db
    if args.ports is not None:
        changes["port_grid"] = args.ports
    if args.no_optimize:
        changes["optimize"] = False
    if args.W is not None or args.N is not None:
        g = cfg.geometry
        n = args.N if args.N is not None else g.Nt
        w = args.W if args.W is not None else g.Wt
        changes["geometry"] = type(g)(n, n, w, w)
    if args.k_db is not None:
        changes["coupling"] = type(cfg.coupling)("separable-rician", args.k_db)
        changes["los_k_factor_db"] = args.k_db
    return cfg.replace(**changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (OSError, ValueError) as exc:
        print(f"dualfas: bad configuration: {exc}", file=sys.stderr)
        return 2
    if cfg.kind == "validate":
        results = run_validate(seed=cfg.seed, n_trials=min(cfg.n_trials, 200_000))
        print(format_report(results))
        return 0 if all(r.passed for r in results) else 1
    try:
        rows = RUNNERS[cfg.kind](cfg, workers=args.workers)
    except ValueError as exc:  # e.g. a K-factor the marginals cannot hold
        print(f"dualfas: invalid experiment: {exc}", file=sys.stderr)
        return 2
    try:
        experiments.write_csv(rows, cfg, cfg.output_path)
    except OSError as exc:
        print(f"dualfas: cannot write {cfg.output_path}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
