"""Command line: ``pdsplit solve|sweep|validate``."""
import argparse
import json
import logging
import sys

import numpy as np

from .errors import ValidationError
from .experiment import ALGORITHMS, ExperimentConfig, run_experiment, sweep, validate_config

EXIT_OK, EXIT_INVALID, EXIT_MAXITER = 0, 1, 2


def _synth(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected m,q,k,noise")
    try:
        return (int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad synthetic spec {text!r}") from None


def _add_config_args(p):
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--algo", choices=ALGORITHMS)
    p.add_argument("--problem", choices=("logistic", "lasso"))
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="LIBSVM file")
    src.add_argument("--synth", type=_synth, metavar="m,q,k,noise")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--batches", type=int)
    p.add_argument("--graph", help="ring, path, complete or an edge-list file")
    p.add_argument("--alpha", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--delta-hat", dest="delta_hat", type=float)
    p.add_argument("--rho-frac", dest="rho_frac", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="CSV trace path")
    p.add_argument("--trace-every", dest="trace_every", type=int)


_FIELDS = ("algo", "problem", "lam", "batches", "graph", "alpha", "theta", "delta_hat",
           "rho_frac", "gamma", "r", "s", "seed", "max_iters", "tol", "out", "trace_every")


def config_from_args(ns):
    if ns.config:
        with open(ns.config) as fh:
            cfg = ExperimentConfig.from_json(fh.read())
    else:
        cfg = ExperimentConfig()
    for name in _FIELDS:
        val = getattr(ns, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if ns.data is not None:
        cfg.data, cfg.synth = ns.data, None
    elif ns.synth is not None:
        cfg.data, cfg.synth = None, ns.synth
    return cfg.validate()


def build_parser():
    parser = argparse.ArgumentParser(prog="pdsplit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="run one experiment")
    _add_config_args(p)
    p = sub.add_parser("sweep", help="grid over seeds and parameters")
    _add_config_args(p)
    p.add_argument("--seeds", default="0", help="comma list of seeds")
    p.add_argument("--grid", action="append", default=[], metavar="FIELD=v1,v2",
                   help="numeric config field and values, repeatable")
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("validate", help="run all validators without solving")
    _add_config_args(p)
    p.add_argument("--dump-config", action="store_true", help="print the resolved config")
    return parser


def _summary_line(s):
    return ("algo={algo} seed={seed} status={status} iterations={iterations} "
            "objective={objective!r} gap={gap:.3e} consensus={consensus_error:.3e} "
            "wall_seconds={wall_seconds:.3f}").format(**s)


def _parse_grid(items):
    grid = {}
    valid = {f for f in _FIELDS if f not in ("algo", "graph", "out", "problem")}
    for item in items:
        key, sep, vals = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in valid:
            raise ValidationError(f"bad grid entry {item!r}")
        conv = int if key in ("batches", "seed", "max_iters", "trace_every") else float
        grid[key] = [conv(v) for v in vals.split(",")]
    return grid


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        if ns.command == "validate":
            report = validate_config(cfg)
            if ns.dump_config:
                print(cfg.to_json())
            print(json.dumps({k: (float(v) if isinstance(v, (float, np.floating)) else v)
                              for k, v in report.items()}, sort_keys=True))
            return EXIT_OK
        if ns.command == "solve":
            summary = run_experiment(cfg)
            print(_summary_line(summary))
            return EXIT_OK if summary["status"] == "converged" else EXIT_MAXITER
        seeds = [int(s) for s in ns.seeds.split(",")]
        results = sweep(cfg, _parse_grid(ns.grid), seeds, ns.workers)
        for s in results:
            print(_summary_line(s))
        return EXIT_OK if all(s["status"] == "converged" for s in results) else EXIT_MAXITER
    except (ValidationError, OSError) as exc:
        print(f"pdsplit: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
