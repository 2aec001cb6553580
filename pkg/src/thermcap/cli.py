"""Command-line entry point.

    thermcap capacity --config c.json [--gamma 0.5 ...] [--level 6]
    thermcap delta --config c.json
    thermcap dimrho --config c.json
    thermcap simulate --config c.json [--trial 0] [--out path.csv]
    thermcap experiment run c.json [--out DIR] [--workers N]
    thermcap report DIR

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import json
import os
import sys

import numpy as np

from .capacity import estimate_delta, level_energies, min_energy
from .experiments import (ConfigError, NumericalError, _jsonable, cover_path, load_config,
                          run_experiment, write_report)
from .fractal_sets import natural_measure
from .kernels import QuadratureError
from .parabolic import estimate_dim_rho
from .stochastic import RngStream

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _emit(obj, out_dir=None, name=None):
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text + "\n")
    print(text)


def _gammas(cfg):
    g = cfg.gamma_grid
    if not g:
        return None
    return [float(x) for x in np.round(np.arange(g["min"], g["max"] + 1e-9, g["step"]), 10)]


def _levels(cfg):
    lv = cfg.levels
    return list(range(int(lv["min"]), int(lv["max"]) + 1)) if lv else None


def cmd_capacity(args):
    cfg = load_config(args.config)
    gammas = args.gamma or _gammas(cfg) or [0.0]
    level = args.level if args.level is not None else (_levels(cfg) or [6])[-1]
    if args.plain:
        mu = natural_measure(cfg.set, level)
        reps = [min_energy(mu, g) for g in gammas]
        n = mu.n
    else:
        _, reps = level_energies(cfg.set, gammas, level)
        n = len(reps[0].weights) if reps and reps[0].weights is not None else None
    out = {"level": level, "atoms": n, "diagonal": "zero" if args.plain else "cell self-energy",
           "reports": [r.to_dict() for r in reps]}
    _emit(out, args.out or cfg.out_dir, "capacity.json")


def cmd_delta(args):
    cfg = load_config(args.config)
    est = estimate_delta(cfg.set, gammas=_gammas(cfg), levels=_levels(cfg))
    _emit(est.to_dict(), args.out or cfg.out_dir, "delta.json")


def cmd_dimrho(args):
    cfg = load_config(args.config)
    rep = estimate_dim_rho(cfg.set, scales=cfg.scales, offset_pass=args.offset)
    _emit(rep.to_dict(), args.out or cfg.out_dir, "dimrho.json")


def cmd_simulate(args):
    cfg = load_config(args.config)
    stream = RngStream(cfg.seed, (args.trial,))
    parts = list(cover_path(cfg.set.time, cfg.h, cfg.d, stream))
    t = np.concatenate([p[0] for p in parts])
    w = np.vstack([p[1] for p in parts])
    cols = ",".join(["t"] + [f"x{k + 1}" for k in range(cfg.d)])
    out = args.out or sys.stdout
    np.savetxt(out, np.column_stack([t, w]), delimiter=",", header=cols, comments="")


def cmd_experiment(args):
    cfg = load_config(args.config)
    if args.workers:
        cfg.params["workers"] = args.workers
    rep = run_experiment(cfg)
    out = args.out or cfg.out_dir or "out"
    write_report(rep, out, cfg)
    print(json.dumps(_jsonable({"out_dir": out, "verdicts": rep.verdicts}), indent=2, sort_keys=True))


def cmd_report(args):
    path = os.path.join(args.dir, "report.json")
    try:
        with open(path) as fh:
            rep = json.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"no report.json in {args.dir}") from e
    cfg = rep["config"]
    print(f"kind: {cfg['kind']}  trials: {len(rep['trials'])}  seed: {cfg['seed']}")
    for k, v in sorted(rep["verdicts"].items()):
        print(f"  {k}: {v}")
    for f in rep.get("flags", []):
        print(f"  flag: {f}")


def build_parser():
    p = argparse.ArgumentParser(prog="thermcap", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("capacity", help="minimal energy on a natural measure")
    c.add_argument("--config", required=True)
    c.add_argument("--gamma", type=float, action="append")
    c.add_argument("--level", type=int)
    c.add_argument("--plain", action="store_true",
                   help="zero-diagonal kernel on the product natural measure")
    c.add_argument("--out")
    c.set_defaults(fn=cmd_capacity)

    c = sub.add_parser("delta", help="estimate the critical energy exponent")
    c.add_argument("--config", required=True)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_delta)

    c = sub.add_parser("dimrho", help="parabolic box-counting dimension of E x F")
    c.add_argument("--config", required=True)
    c.add_argument("--offset", action="store_true", help="add a half-cell offset pass")
    c.add_argument("--out")
    c.set_defaults(fn=cmd_dimrho)

    c = sub.add_parser("simulate", help="dump one trial's Brownian path on E as CSV")
    c.add_argument("--config", required=True)
    c.add_argument("--trial", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_simulate)

    c = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    esub = c.add_subparsers(dest="action", required=True)
    r = esub.add_parser("run")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.set_defaults(fn=cmd_experiment)

    c = sub.add_parser("report", help="summarize a report directory")
    c.add_argument("dir")
    c.set_defaults(fn=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    try:
        args.fn(args)
    except (ConfigError, ValueError, KeyError, FileNotFoundError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        return EXIT_OK
    except (NumericalError, QuadratureError, MemoryError, FloatingPointError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
