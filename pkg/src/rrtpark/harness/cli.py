"""Command-line entry point: ``python -m rrtpark <subcommand> ...``.

Exit codes: 0 success, 2 invalid configuration, 3 divergent or
out-of-range analytic bound.
"""
from __future__ import annotations

import argparse
import sys
import time

from .. import __version__
from ..car_laws import AlphaOutOfRange, parse_law_spec
from ..exact_kit import exact_expected_flux, first_moment_bound, fpt_table
from . import experiments as ex
from .output import to_csv, to_json, write_text

EXIT_OK, EXIT_CONFIG, EXIT_BOUND = 0, 2, 3


class ConfigError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number list: {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}")
    return tuple(int(v) for v in vals)


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--law", default="binary:alpha=0.5", help="car law spec")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--trials", type=int, default=200)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="output path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--dump-trials", default=None, metavar="PATH",
                        help="also write raw per-trial values as CSV")

    p = argparse.ArgumentParser(prog="rrtpark", description="Parking on random recursive trees.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sim-flux", parents=[common], help="flux per vertex over tree sizes")
    s.add_argument("--n", type=_ints, required=True, help="comma-separated sizes")

    s = sub.add_parser("window", parents=[common], help="flux along alpha_n = c (log n)^-p")
    s.add_argument("--n", type=_ints, required=True)
    s.add_argument("--p", type=_floats, required=True)
    s.add_argument("--c", type=float, default=1.0)

    s = sub.add_parser("theta", parents=[common], help="first size with flux >= C")
    s.add_argument("--alpha", type=_floats, required=True)
    s.add_argument("--C", type=int, default=1)
    s.add_argument("--n-cap", type=int, default=10_000_000)

    s = sub.add_parser("spine", parents=[common], help="empty spine vertices of the limit tree")
    s.add_argument("--K", type=int, default=10)

    s = sub.add_parser("root-empty", parents=[common], help="empty root of the age-t tree")
    s.add_argument("--t", type=_floats, required=True)

    s = sub.add_parser("subcritical", parents=[common],
                       help="mean flux of the age-t tree with alpha_t^beta* t = c/2")
    s.add_argument("--t", type=_floats, required=True)

    s = sub.add_parser("bs-ball", parents=[common], help="ball statistics around uniform vertices")
    s.add_argument("--n", type=int, default=100_000)
    s.add_argument("--r", type=int, default=1)
    s.add_argument("--pairs", type=int, default=1000, help="vertex pairs per tree")

    s = sub.add_parser("fpt-enum", parents=[common], help="fully parked plane tree counts")
    s.add_argument("--n-max", type=int, default=5)
    s.add_argument("--K", type=int, default=2)

    s = sub.add_parser("bound", parents=[common], help="first-moment bound on root visits")
    s.add_argument("--t", type=float, required=True)
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--n-max", type=int, default=5)
    s.add_argument("--m-max", type=int, default=5)
    s.add_argument("--cst", type=float, default=1.0)

    s = sub.add_parser("exact-flux", parents=[common], help="exact mean flux for tiny trees")
    s.add_argument("--n", type=_ints, required=True)
    return p


def _config(args) -> ex.ExperimentConfig:
    cmd = args.command
    kw = dict(experiment=cmd, law=args.law, trials=args.trials,
              seed=args.seed, workers=args.workers)
    if cmd == "sim-flux":
        return ex.ExperimentConfig(grid=args.n, **kw)
    if cmd == "window":
        return ex.ExperimentConfig(grid=args.n, p_grid=args.p, alpha_c=args.c, **kw)
    if cmd == "theta":
        return ex.ExperimentConfig(grid=args.alpha, params={"C": args.C, "n_cap": args.n_cap}, **kw)
    if cmd == "spine":
        return ex.ExperimentConfig(params={"K": args.K}, **kw)
    if cmd in ("root-empty", "subcritical"):
        return ex.ExperimentConfig(grid=args.t, **kw)
    if cmd == "bs-ball":
        return ex.ExperimentConfig(params={"n": args.n, "r": args.r, "pairs": args.pairs}, **kw)
    raise ConfigError(f"no experiment for {cmd}")


def _validate(cfg: ex.ExperimentConfig) -> None:
    spec = parse_law_spec(cfg.law)
    cmd = cfg.experiment
    if cmd in ("sim-flux", "window", "theta", "root-empty", "subcritical") and not cfg.grid:
        raise ConfigError("grid must be nonempty")
    if cmd in ("sim-flux", "spine", "root-empty") and spec.alpha is None:
        raise ConfigError("law spec needs an alpha for this experiment")
    if cmd == "sim-flux" and min(cfg.grid) < 1:
        raise ConfigError("tree sizes must be positive")
    if cmd == "window" and not cfg.p_grid:
        raise ConfigError("window needs at least one exponent p")
    if cmd == "theta" and not all(0 < a <= spec.max_alpha for a in cfg.grid):
        raise ConfigError("alpha grid must lie in (0, max alpha of the family]")


def _run_experiment(args) -> tuple[dict, list[dict], list[tuple], int]:
    cfg = _config(args)
    _validate(cfg)
    res = ex.run_experiment(cfg)
    return cfg.to_dict(), res.rows, res.trials, EXIT_OK


def _run_fpt(args):
    if not 1 <= args.n_max <= 9 or args.K < 1:
        raise ConfigError("fpt-enum needs 1 <= n-max <= 9 and K >= 1")
    rows = [{"n": n, "m": m, "K": args.K, "count": c} for n, m, c in fpt_table(args.n_max, args.K)]
    return {"experiment": "fpt-enum", "n_max": args.n_max, "K": args.K}, rows, [], EXIT_OK


def _run_bound(args):
    spec = parse_law_spec(args.law)
    config = {"experiment": "bound", "law": args.law, "t": args.t, "alpha": args.alpha,
              "n_max": args.n_max, "m_max": args.m_max, "cst": args.cst}
    try:
        b = first_moment_bound(args.t, spec.family, args.alpha, args.n_max, args.m_max, args.cst)
    except AlphaOutOfRange as err:
        print(f"error: {err}", file=sys.stderr)
        return config, [], [], EXIT_BOUND
    row = {"t": b.t, "alpha": b.alpha, "n_max": b.n_max, "m_max": b.m_max,
           "truncated_sum": b.truncated_sum, "coarse_sum": b.coarse_sum,
           "closed_form": b.closed_form, "tail": b.tail,
           "diverged": int(b.diverged), "alpha_small": int(b.alpha_small)}
    code = EXIT_BOUND if b.diverged or not b.alpha_small else EXIT_OK
    if code:
        print("warning: closed-form bound diverges or alpha is outside the small-alpha range",
              file=sys.stderr)
    return config, [row], [], code


def _run_exact(args):
    spec = parse_law_spec(args.law)
    if spec.alpha is None:
        raise ConfigError("law spec needs an alpha")
    law = spec.law()
    rows = [{"n": n, "alpha": spec.alpha, "exact_mean_flux": exact_expected_flux(n, law)}
            for n in args.n]
    return {"experiment": "exact-flux", "law": args.law, "grid": list(args.n)}, rows, [], EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code else EXIT_OK
    if args.trials < 1 or args.workers < 1:
        print("error: trials and workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    runners = {"fpt-enum": _run_fpt, "bound": _run_bound, "exact-flux": _run_exact}
    start = time.perf_counter()
    try:
        config, rows, raw, code = runners.get(args.command, _run_experiment)(args)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    elapsed = time.perf_counter() - start
    if args.format == "csv":
        text = to_csv(rows)
    else:
        text = to_json(config, rows, __version__, elapsed)
    write_text(args.out, text, sys.stdout)
    if args.dump_trials and raw:
        names = ("grid", "trial", "value") if len(raw[0]) == 3 else None
        dump = [dict(zip(names, r)) if names else {f"c{i}": v for i, v in enumerate(r)}
                for r in raw]
        write_text(args.dump_trials, to_csv(dump), sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
