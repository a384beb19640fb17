"""Command-line interface.

Subcommands: fit, test, mc-size, mc-power, mc-rate, limit, bound, empirics,
export-residuals.  Human-readable output goes to stdout; --out writes a
machine-readable file (JSON when the path ends in .json, CSV otherwise) whose
JSON form carries the full configuration fingerprint.  Exit codes: 0 success,
1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from ._version import __version__
from .asymptotics import BoundInputs, estimate_limit_params, kink_limit_draw, minimax_lower_bound, tn_limit_draw
from .continuity import run_test
from .dataio import (
    EmpiricsSpec,
    ar1_residual_export,
    load_dataset,
    read_dataset_csv,
    report_to_json,
    run_empirics,
    _read_rows,
)
from .estimation import build_grid, fit, robust_standard_errors
from .exceptions import (
    DegenerateFitError,
    EmptyGridError,
    InvalidConfigError,
    KinkRegError,
    ParseError,
    SchemaError,
    SingularDesignError,
)
from .montecarlo import ExperimentConfig, rate_study, size_power_experiment
from .rng import substream

_CONFIG_ERRORS = (InvalidConfigError, EmptyGridError)
_DATA_ERRORS = (ParseError, SchemaError, SingularDesignError, DegenerateFitError, OSError)


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; the CLI contract reserves 2
    # for data errors, so convert to a config error instead.
    def error(self, message):
        raise _ArgumentError(message)


def _check_thread_env() -> None:
    raw = os.environ.get("KINKREG_THREADS")
    if raw is None:
        return
    try:
        value = int(raw)
    except ValueError:
        raise InvalidConfigError(f"KINKREG_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise InvalidConfigError("KINKREG_THREADS must be >= 1")
    # Accepted for scheduling only; numerical output never depends on it.


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok)
    except ValueError:
        raise InvalidConfigError(f"expected a comma-separated integer list, got {text!r}") from None


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", choices=("observed", "equidistant"), default="observed")
    p.add_argument("--trim", type=float, default=0.10, help="total trimmed fraction of extreme q values")
    p.add_argument("--points", type=int, default=None, help="equidistant grid size (default n//2)")


def _write_out(path: str, csv_text: str, payload: dict) -> None:
    out = Path(path)
    if out.suffix.lower() == ".json":
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        out.write_text(csv_text)


def _fingerprint(args: argparse.Namespace, **extra) -> dict:
    fp = {k: v for k, v in vars(args).items() if k != "func" and not callable(v)}
    fp["package_version"] = __version__
    fp.update(extra)
    return fp


def _cmd_fit(args) -> int:
    ds = read_dataset_csv(args.data)
    grid = build_grid(ds, strategy=args.grid, trim_fraction=args.trim, n_points=args.points)
    res = fit(ds, grid, constrained=args.constrained)
    se = robust_standard_errors(ds, res)
    print(res.summary())
    print(f"  robust se    : {np.array2string(se, precision=6)}")
    if args.out:
        rows = ["tau,ssr"] + [f"{t:.17g},{s:.17g}" for t, s in res.profile]
        payload = _fingerprint(
            args,
            tau=res.theta.tau,
            beta=res.theta.beta.tolist(),
            delta=res.theta.delta.tolist(),
            ssr=res.ssr_min,
            regimes=[res.regime.n_lower, res.regime.n_upper],
            robust_se=se.tolist(),
        )
        _write_out(args.out, "\n".join(rows) + "\n", payload)
    return 0


def _cmd_test(args) -> int:
    ds = read_dataset_csv(args.data)
    grid = build_grid(ds, strategy=args.grid, trim_fraction=args.trim, n_points=args.points)
    report = run_test(ds, grid, n_boot=args.boot, dist=args.multiplier, seed=args.seed)
    print(report.summary())
    if args.out:
        rows = ["t_n_star"] + [f"{t:.17g}" for t in report.boot_stats]
        payload = _fingerprint(args, t_n=report.t_n, p_star=report.p_star, config=report.config)
        _write_out(args.out, "\n".join(rows) + "\n", payload)
    return 0


def _cmd_mc_table(args) -> int:
    cfg = ExperimentConfig(
        setting=args.setting,
        n_values=_int_list(args.n),
        schedules=tuple(args.schedules.split(",")),
        reps=args.reps,
        seed=args.seed,
        multiplier=args.multiplier,
        trim_fraction=args.trim,
    )
    table = size_power_experiment(cfg)
    print(table.summary())
    if args.out:
        payload = _fingerprint(
            args,
            rows=[{"schedule": lbl, "n": n, "delta": float(d), "rates": r.tolist()}
                  for (lbl, n), d, r in zip(table.row_keys, table.deltas, table.rates)],
            sizes=list(table.sizes),
        )
        _write_out(args.out, table.to_csv(), payload)
    return 0


def _cmd_mc_rate(args) -> int:
    study = rate_study(
        args.setting,
        args.delta,
        _int_list(args.n),
        reps=args.reps,
        seed=args.seed,
        constrained=args.constrained,
    )
    print(study.summary())
    if args.out:
        rows = ["n,median_abs_err"] + [f"{n},{m:.17g}" for n, m in zip(study.n_values, study.median_abs_err)]
        payload = _fingerprint(args, medians=study.median_abs_err.tolist(), slope=study.slope)
        _write_out(args.out, "\n".join(rows) + "\n", payload)
    return 0


def _cmd_limit(args) -> int:
    draws = np.empty(args.draws)
    if args.law == "kink":
        if args.a is None or args.b is None:
            raise InvalidConfigError("--a and --b are required for the kink limit law")
        for i in range(args.draws):
            draws[i] = kink_limit_draw(args.a, args.b, g_max=args.gmax, n_grid=args.ngrid, rng=substream(args.seed, i))
    else:
        if not args.data:
            raise InvalidConfigError("--data is required for the tn limit law (plug-in estimation)")
        ds = read_dataset_csv(args.data)
        grid = build_grid(ds, strategy=args.grid, trim_fraction=args.trim, n_points=args.points)
        params = estimate_limit_params(ds, fit(ds, grid, constrained=False), third_row=args.third_row)
        for i in range(args.draws):
            draws[i] = tn_limit_draw(params, g_max=args.gmax, n_grid=args.ngrid, rng=substream(args.seed, i))
    qs = np.quantile(draws, [0.05, 0.25, 0.5, 0.75, 0.95])
    print(f"{args.law} limit law, {args.draws} draws (seed {args.seed})")
    print("  quantiles 5/25/50/75/95%:", np.array2string(qs, precision=4))
    if args.out:
        rows = ["draw"] + [f"{v:.17g}" for v in draws]
        payload = _fingerprint(args, quantiles=qs.tolist())
        _write_out(args.out, "\n".join(rows) + "\n", payload)
    return 0


def _cmd_bound(args) -> int:
    inp = BoundInputs(
        n=args.n,
        varphi=args.varphi,
        kappa0=args.kappa0,
        sigma_lower2=args.sigma2,
        f_upper=args.fbar,
        eta=args.eta,
    )
    value = minimax_lower_bound(inp)
    print(f"minimax l1 risk lower bound: {value:.10g}")
    if args.out:
        payload = _fingerprint(args, bound=value)
        _write_out(args.out, f"bound\n{value:.17g}\n", payload)
    return 0


def _cmd_empirics(args) -> int:
    spec = EmpiricsSpec(
        path=args.data,
        year_col=args.year_col,
        growth_col=args.growth_col,
        debt_col=args.debt_col,
        n_boot=args.boot,
        seed=args.seed,
        multiplier=args.multiplier,
        grid_strategy=args.grid,
        trim_fraction=args.trim,
        residuals_out=args.residuals_out,
    )
    report = run_empirics(spec)
    print(report.summary())
    if args.out:
        _write_out(args.out, report_to_json(report), json.loads(report_to_json(report)))
    return 0


def _cmd_export_residuals(args) -> int:
    cols = _read_rows(args.data, (args.growth_col, args.debt_col))
    ar1_residual_export(cols[args.growth_col], cols[args.debt_col], args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kinkreg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"kinkreg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="profiled least-squares threshold fit")
    p.add_argument("data")
    p.add_argument("--constrained", action="store_true", help="impose the continuity (kink) restriction")
    _add_grid_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("test", help="wild-bootstrap continuity test")
    p.add_argument("data")
    _add_grid_flags(p)
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--multiplier", choices=("rademacher", "mammen", "gaussian"), default="rademacher")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_test)

    for name, help_text in (("mc-size", "warp-speed size table"), ("mc-power", "warp-speed power table")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--setting", choices=("A", "B", "C"), default="A" if name == "mc-size" else "B")
        p.add_argument("--n", default="100,250,500", help="comma-separated sample sizes")
        p.add_argument("--schedules", default="fixed2", help="comma-separated delta schedule names")
        p.add_argument("--reps", type=int, default=2000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--multiplier", choices=("rademacher", "mammen", "gaussian"), default="rademacher")
        p.add_argument("--trim", type=float, default=0.10)
        p.add_argument("--out")
        p.set_defaults(func=_cmd_mc_table)

    p = sub.add_parser("mc-rate", help="convergence-rate study of the threshold estimator")
    p.add_argument("--setting", choices=("A", "B", "C"), default="A")
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--n", default="250,1000,4000")
    p.add_argument("--reps", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_mc_rate)

    p = sub.add_parser("limit", help="simulate the nonstandard limit laws")
    p.add_argument("law", choices=("kink", "tn"))
    p.add_argument("--a", type=float, default=None, help="noise scale (kink law)")
    p.add_argument("--b", type=float, default=None, help="cubic drift scale (kink law)")
    p.add_argument("--data", default=None, help="dataset CSV for plug-in estimation (tn law)")
    _add_grid_flags(p)
    p.add_argument("--third-row", choices=("printed", "slope-only"), default="printed")
    p.add_argument("--gmax", type=float, default=None)
    p.add_argument("--ngrid", type=int, default=5000)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_limit)

    p = sub.add_parser("bound", help="closed-form minimax risk lower bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--varphi", type=float, default=0.0)
    p.add_argument("--kappa0", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0, help="lower bound on the conditional error variance")
    p.add_argument("--fbar", type=float, default=1.0, help="upper bound on the threshold-variable density")
    p.add_argument("--eta", type=float, default=1.0, help="diameter of the threshold parameter space")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("empirics", help="growth/debt empirical pipeline")
    p.add_argument("data")
    p.add_argument("--year-col", default="year")
    p.add_argument("--growth-col", default="growth")
    p.add_argument("--debt-col", default="debt")
    _add_grid_flags(p)
    p.add_argument("--boot", type=int, default=10000)
    p.add_argument("--multiplier", choices=("rademacher", "mammen", "gaussian"), default="rademacher")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--residuals-out", default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_empirics)

    p = sub.add_parser("export-residuals", help="AR(1) residual scatter data export")
    p.add_argument("data")
    p.add_argument("--growth-col", default="growth")
    p.add_argument("--debt-col", default="debt")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_residuals)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        _check_thread_env()
        args = parser.parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (_ArgumentError, *_CONFIG_ERRORS) as exc:
        print(f"kinkreg: configuration error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"kinkreg: data error: {exc}", file=sys.stderr)
        return 2
    except KinkRegError as exc:
        print(f"kinkreg: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
