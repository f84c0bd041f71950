"""Command-line entry point.

Subcommands: generate | calibrate | probability | bsm | compare | curve.
Exit codes: 0 success, 1 usage error, 2 numerical/solver failure, 3 I/O
failure.  Human-readable output goes to stdout; data files are written only
through --out / --output-dir.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bsm_ref, experiments, learner, vasicek
from .errors import CalibrationError, ConfigError, InvalidInputError, MqlvError, SolverFailure

__all__ = ["main"]

_S4_DEFAULTS = {"kappa": 0.01, "b": 1.0, "sigma": 0.15, "s0": 1.0, "maturity": 0.5, "steps": 5}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the CLI contract reserves 2
    # for numerical failures, so usage problems are remapped to 1.
    def error(self, message: str):
        raise _UsageError(message)


def _default_threads() -> int:
    env = os.environ.get("MQLV_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise _UsageError(f"MQLV_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _add_vasicek_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa", type=float, default=_S4_DEFAULTS["kappa"], help="speed of mean reversion (default %(default)s)")
    p.add_argument("--b", type=float, default=_S4_DEFAULTS["b"], help="long-term mean level (default %(default)s)")
    p.add_argument("--sigma", type=float, default=_S4_DEFAULTS["sigma"], help="volatility (default %(default)s)")
    p.add_argument("--s0", type=float, default=_S4_DEFAULTS["s0"], help="initial level (default %(default)s)")
    p.add_argument("--maturity", type=float, default=_S4_DEFAULTS["maturity"], help="horizon in years (default %(default)s)")
    p.add_argument("--steps", type=int, default=_S4_DEFAULTS["steps"], help="number of time steps (default %(default)s)")
    p.add_argument("--paths", type=int, default=40000, help="number of Monte Carlo paths (default %(default)s)")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mqlv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    g = sub.add_parser("generate", help="simulate a path grid and write it as long-form CSV")
    _add_vasicek_flags(g)
    g.add_argument("--seed", type=int, default=0, help="master seed (default %(default)s)")
    g.add_argument("--out", required=True, help="output CSV path (path_id,step,time,value)")
    g.add_argument("--threads", type=int, default=None, help="worker threads (default: cores, or MQLV_THREADS)")

    c = sub.add_parser("calibrate", help="fit mean-reversion parameters to a series CSV")
    c.add_argument("--series", required=True, help="input CSV with header time,value")
    c.add_argument("--dt", type=float, required=True, help="time step between observations")
    c.add_argument("--seed", type=int, default=0, help="seed for the regenerated comparison path (default %(default)s)")
    c.add_argument("--output-dir", default=None, help="write report.txt, regenerated.csv and calibration.png here")

    p = sub.add_parser("probability", help="estimate the event probability at t=0")
    _add_vasicek_flags(p)
    p.add_argument("--paths-file", default=None, help="read the grid from this CSV instead of simulating")
    p.add_argument("--strike", type=float, required=True, help="event threshold")
    p.add_argument("--lambda", dest="lam", type=float, default=1e-3, help="risk aversion (default %(default)s)")
    p.add_argument("--dropout-p", type=float, default=1.0, help="Bernoulli keep-probability for targets (default %(default)s)")
    p.add_argument("--m-basis", type=int, default=12, help="number of basis functions (default %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="seed for simulation and dropout (default %(default)s)")
    p.add_argument("--output-dir", default=None, help="write estimate.json, fit_phi.csv and fit_weights.csv here")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: cores, or MQLV_THREADS)")

    b = sub.add_parser("bsm", help="closed-form digital reference value")
    b.add_argument("--s0", type=float, required=True, help="spot level")
    b.add_argument("--k", type=float, required=True, help="strike")
    b.add_argument("--sigma", type=float, required=True, help="volatility")
    b.add_argument("--r", type=float, default=0.0, help="rate (default %(default)s)")
    b.add_argument("--t", type=float, required=True, help="maturity in years")

    for name, hlp in (("compare", "reproduce a comparison table from a config file"),
                      ("curve", "fit a dense strike curve and report its RMSE")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=True, help="INI config with [vasicek] [grid] [learner] [strikes] [output]")
        s.add_argument("--threads", type=int, default=None, help="worker threads (default: cores, or MQLV_THREADS)")

    return parser


def _threads(args: argparse.Namespace) -> int:
    if getattr(args, "threads", None) is not None:
        if args.threads < 1:
            raise _UsageError("--threads must be >= 1")
        return args.threads
    return _default_threads()


def _params_from_flags(args: argparse.Namespace) -> vasicek.VasicekParams:
    return vasicek.VasicekParams(kappa=args.kappa, b=args.b, sigma=args.sigma, s0=args.s0)


def _cmd_generate(args: argparse.Namespace) -> int:
    params = _params_from_flags(args)
    grid = vasicek.simulate(params, args.maturity, args.steps, args.paths, args.seed, threads=_threads(args))
    vasicek.write_paths_csv(grid, args.out)
    term = grid.terminal()
    print(f"wrote {grid.n_paths} paths x {grid.n_steps + 1} points to {args.out}")
    print(
        f"terminal mean {term.mean():.6f} (analytic {vasicek.analytic_mean(params, args.maturity):.6f}), "
        f"variance {term.var():.6g} (analytic {vasicek.analytic_var(params, args.maturity):.6g})"
    )
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    report = experiments.run_calibration_demo(args.series, args.dt, seed=args.seed)
    text = experiments.calibration_report_text(report)
    print(text, end="")
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text, encoding="utf-8")
        vasicek.write_series_csv(report.times, report.regenerated, out / "regenerated.csv")
        from . import figures

        figures.calibration_figure(report, out / "calibration.png")
        print(f"wrote report.txt, regenerated.csv, calibration.png to {out}")
    return 0


def _cmd_probability(args: argparse.Namespace) -> int:
    params = _params_from_flags(args)
    if args.paths_file:
        grid = vasicek.read_paths_csv(args.paths_file)
    else:
        grid = vasicek.simulate(params, args.maturity, args.steps, args.paths, args.seed, threads=_threads(args))
    config = learner.LearnerConfig(
        lam=args.lam, dropout_p=args.dropout_p, m_basis=args.m_basis, seed=args.seed
    )
    result = learner.fit(grid, params, args.strike, config)
    est = learner.event_probability(result)
    print(json.dumps(est.as_record()))
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "estimate.json").write_text(json.dumps(est.as_record(), indent=2) + "\n", encoding="utf-8")
        learner.write_fit_csvs(result, out / "fit_phi.csv", out / "fit_weights.csv")
        print(f"wrote estimate.json, fit_phi.csv, fit_weights.csv to {out}")
    return 0


def _cmd_bsm(args: argparse.Namespace) -> int:
    inputs = bsm_ref.BsmInputs(s0=args.s0, k=args.k, sigma=args.sigma, r=args.r, t=args.t)
    prob = bsm_ref.digital_probability(inputs)
    price = bsm_ref.digital_price(inputs)
    print(json.dumps({"probability": prob, "percent": round(100 * prob, 6), "discounted_price": price}))
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    config = experiments.load_config(args.config)
    rows = experiments.run_comparison(config, threads=_threads(args))
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    experiments.write_comparison_csv(rows, out / "comparison.csv")
    text = experiments.comparison_report_text(config, rows)
    (out / "report.txt").write_text(text, encoding="utf-8")
    from . import figures

    figures.comparison_figure(rows, out / "comparison.png")
    print(text, end="")
    print(f"wrote comparison.csv, report.txt, comparison.png to {out}")
    return 0


def _cmd_curve(args: argparse.Namespace) -> int:
    config = experiments.load_config(args.config)
    strikes, mqlv_curve, bsm_curve, rmse_pp = experiments.run_strike_curve(config, threads=_threads(args))
    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    experiments.write_curve_csv(strikes, mqlv_curve, bsm_curve, out / "curve.csv")
    text = experiments.curve_report_text(config, strikes, mqlv_curve, bsm_curve, rmse_pp)
    (out / "report.txt").write_text(text, encoding="utf-8")
    from . import figures

    figures.curve_figure(strikes, mqlv_curve, bsm_curve, rmse_pp, out / "curve.png")
    print(text, end="")
    print(f"wrote curve.csv, report.txt, curve.png to {out}")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "calibrate": _cmd_calibrate,
    "probability": _cmd_probability,
    "bsm": _cmd_bsm,
    "compare": _cmd_compare,
    "curve": _cmd_curve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolverFailure as exc:
        step = f" at step {exc.step}" if exc.step is not None else ""
        print(f"solver failure{step}: {exc}", file=sys.stderr)
        return 2
    except (CalibrationError, InvalidInputError, MqlvError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
