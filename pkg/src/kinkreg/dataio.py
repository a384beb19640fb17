"""CSV ingestion, dataset round-tripping, the growth/debt empirical pipeline
and the AR(1)-residual scatter export.

The empirical pipeline expects annual macro files with a header row and
comma-separated numeric cells: one column of years, one of real GDP growth
y_t and one of the debt-to-GDP ratio q_t (conventionally the previous year's
ratio).  The fitted model regresses y_t on (1, y_{t-1}, q_t) with q_t as the
threshold variable, so the first file row is consumed by the lag.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__ as _pkg_version
from .continuity import MultiplierDistribution, TestReport, run_test
from .estimation import FitResult, build_grid, robust_covariance, robust_standard_errors
from .exceptions import ParseError, SchemaError, SingularDesignError
from .model import Dataset

__all__ = [
    "EmpiricsSpec",
    "EmpiricsReport",
    "load_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
    "ar1_residual_export",
    "run_empirics",
]


@dataclass(frozen=True)
class EmpiricsSpec:
    """Configuration of the growth/debt empirical pipeline."""

    path: str | Path
    year_col: str = "year"
    growth_col: str = "growth"
    debt_col: str = "debt"
    n_boot: int = 10000
    seed: int = 0
    multiplier: MultiplierDistribution = "rademacher"
    grid_strategy: str = "observed"
    trim_fraction: float = 0.10
    residuals_out: str | Path | None = None


def _read_rows(path: str | Path, required: tuple[str, ...]) -> dict[str, np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file or missing header row")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {missing}; found {reader.fieldnames}")
        cols: dict[str, list[float]] = {c: [] for c in required}
        for i, row in enumerate(reader, start=2):  # header is line 1
            for c in required:
                cell = row[c]
                try:
                    cols[c].append(float(cell))
                except (TypeError, ValueError):
                    raise ParseError(
                        f"{path}: cannot parse {cell!r} as a number (line {i}, column {c!r})",
                        row=i,
                        column=c,
                    ) from None
    return {c: np.asarray(v, dtype=np.float64) for c, v in cols.items()}


def load_dataset(path: str | Path, spec: EmpiricsSpec) -> Dataset:
    """Read a growth/debt file and assemble the lagged threshold dataset.

    Builds rows (1, y_{t-1}, q_t) with threshold variable q_t; the first
    observation is dropped for the lag, so a file with T data rows yields
    n = T - 1.
    """
    cols = _read_rows(path, (spec.year_col, spec.growth_col, spec.debt_col))
    y = cols[spec.growth_col]
    q = cols[spec.debt_col]
    if y.shape[0] < 31:
        raise SchemaError(f"{path}: need at least 31 data rows, found {y.shape[0]}")
    return Dataset.from_regressors(y=y[1:], q=q[1:], x2=y[:-1])


def write_dataset_csv(ds: Dataset, path: str | Path) -> None:
    """Write a dataset as CSV (columns y, q, x0..x{d-1}) at full precision."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "q"] + [f"x{j}" for j in range(ds.d)])
        for i in range(ds.n):
            writer.writerow([f"{v:.17g}" for v in (ds.y[i], ds.q[i], *ds.x[i])])


def read_dataset_csv(path: str | Path) -> Dataset:
    """Read a dataset written by :func:`write_dataset_csv`."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["y", "q"]:
            raise SchemaError(f"{path}: expected header starting with 'y,q'")
        rows = []
        for i, row in enumerate(reader, start=2):
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(f"{path}: bad numeric cell on line {i}: {exc}", row=i) from None
    arr = np.asarray(rows, dtype=np.float64)
    return Dataset(y=arr[:, 0], x=arr[:, 2:], q=arr[:, 1])


def ar1_residual_export(y, q, out_path: str | Path) -> np.ndarray:
    """Regress y_t on (1, y_{t-1}), write (q_t, residual_t) rows as CSV.

    Returns the residuals (length n - 1).  A constant series makes the
    autoregression rank deficient; residuals then fall back to deviations
    from the mean and a warning is emitted.
    """
    y = np.asarray(y, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if y.shape != q.shape or y.ndim != 1:
        raise SchemaError("y and q must be 1-d arrays of equal length")
    resp = y[1:]
    design = np.column_stack([np.ones(resp.shape[0]), y[:-1]])
    coef, _, rank, _ = np.linalg.lstsq(design, resp, rcond=None)
    if rank < 2:
        warnings.warn(
            "autoregression design is rank deficient (constant series); "
            "exporting deviations from the mean",
            RuntimeWarning,
            stacklevel=2,
        )
        resid = resp - resp.mean()
    else:
        resid = resp - design @ coef
    out_path = Path(out_path)
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q", "residual"])
        for qi, ri in zip(q[1:], resid):
            writer.writerow([f"{qi:.17g}", f"{ri:.17g}"])
    return resid


def _regime_coefficients(ds: Dataset, fit_result: FitResult):
    """Per-regime coefficient blocks of a jump fit with sandwich errors.

    The upper-regime coefficients are beta + delta, so their variances pick
    up the covariance between the two blocks.
    """
    theta = fit_result.theta
    d = ds.d
    cov = robust_covariance(ds, fit_result)
    lower = theta.beta
    upper = theta.beta + theta.delta
    se_lower = np.sqrt(np.maximum(np.diag(cov)[:d], 0.0))
    var_upper = np.diag(cov)[:d] + np.diag(cov)[d:] + 2.0 * np.diag(cov[:d, d:])
    se_upper = np.sqrt(np.maximum(var_upper, 0.0))
    return (lower, se_lower), (upper, se_upper)


@dataclass(frozen=True)
class EmpiricsReport:
    """Jump and kink fits, robust standard errors and the continuity test."""

    fit_jump: FitResult
    fit_kink: FitResult
    se_jump: np.ndarray
    se_kink: np.ndarray
    lower_coef: np.ndarray
    lower_se: np.ndarray
    upper_coef: np.ndarray
    upper_se: np.ndarray
    test: TestReport
    residuals_path: str | None
    config: dict = field(default_factory=dict)

    def summary(self) -> str:
        fj, fk = self.fit_jump, self.fit_kink
        lines = ["growth/debt threshold analysis", ""]
        lines.append(f"jump fit: threshold {fj.theta.tau:.4g}, regimes {fj.regime.n_lower}/{fj.regime.n_upper}")
        lines.append(f"  lower regime coef: {np.array2string(self.lower_coef, precision=4)}")
        lines.append(f"   (robust se)     : {np.array2string(self.lower_se, precision=4)}")
        lines.append(f"  upper regime coef: {np.array2string(self.upper_coef, precision=4)}")
        lines.append(f"   (robust se)     : {np.array2string(self.upper_se, precision=4)}")
        lines.append(
            f"kink fit: threshold {fk.theta.tau:.4g} (se {self.se_kink[-1]:.4g}), "
            f"regimes {fk.regime.n_lower}/{fk.regime.n_upper}"
        )
        lines.append(f"  beta, slope change: {np.array2string(np.concatenate([fk.theta.beta, [fk.theta.delta3]]), precision=4)}")
        lines.append(f"   (robust se)      : {np.array2string(self.se_kink[:-1], precision=4)}")
        lines.append("")
        lines.append(f"continuity test: T_n = {self.test.t_n:.4g}, p* = {self.test.p_star:.4g} "
                     f"({self.test.n_boot} bootstrap draws)")
        if self.residuals_path:
            lines.append(f"AR(1) residual scatter written to {self.residuals_path}")
        return "\n".join(lines)


def run_empirics(spec: EmpiricsSpec) -> EmpiricsReport:
    """Full pipeline: load, fit jump and kink models, test continuity and
    export the AR(1) residual scatter data."""
    cols = _read_rows(spec.path, (spec.year_col, spec.growth_col, spec.debt_col))
    ds = load_dataset(spec.path, spec)
    grid = build_grid(ds, strategy=spec.grid_strategy, trim_fraction=spec.trim_fraction)
    report = run_test(ds, grid, n_boot=spec.n_boot, dist=spec.multiplier, seed=spec.seed)
    fit_u, fit_c = report.fit_u, report.fit_c

    (lower, se_lower), (upper, se_upper) = _regime_coefficients(ds, fit_u)
    se_jump = robust_standard_errors(ds, fit_u)
    try:
        se_kink = robust_standard_errors(ds, fit_c)
    except SingularDesignError:
        se_kink = np.full(ds.d + 2, np.nan)

    residuals_path = None
    if spec.residuals_out is not None:
        ar1_residual_export(cols[spec.growth_col], cols[spec.debt_col], spec.residuals_out)
        residuals_path = str(spec.residuals_out)

    config = {
        "package_version": _pkg_version,
        "path": str(spec.path),
        "n": ds.n,
        "n_boot": spec.n_boot,
        "seed": spec.seed,
        "multiplier": spec.multiplier,
        "grid_strategy": spec.grid_strategy,
        "trim_fraction": spec.trim_fraction,
    }
    return EmpiricsReport(
        fit_jump=fit_u,
        fit_kink=fit_c,
        se_jump=se_jump,
        se_kink=se_kink,
        lower_coef=lower,
        lower_se=se_lower,
        upper_coef=upper,
        upper_se=se_upper,
        test=report,
        residuals_path=residuals_path,
        config=config,
    )


def report_to_json(report: EmpiricsReport) -> str:
    """Machine-readable rendering of an empirics report."""
    fj, fk = report.fit_jump, report.fit_kink
    payload = {
        "config": report.config,
        "jump": {
            "tau": fj.theta.tau,
            "beta": fj.theta.beta.tolist(),
            "delta": fj.theta.delta.tolist(),
            "lower_coef": report.lower_coef.tolist(),
            "lower_se": report.lower_se.tolist(),
            "upper_coef": report.upper_coef.tolist(),
            "upper_se": report.upper_se.tolist(),
            "ssr": fj.ssr_min,
            "regimes": [fj.regime.n_lower, fj.regime.n_upper],
        },
        "kink": {
            "tau": fk.theta.tau,
            "beta": fk.theta.beta.tolist(),
            "delta3": fk.theta.delta3,
            "se": report.se_kink.tolist(),
            "ssr": fk.ssr_min,
            "regimes": [fk.regime.n_lower, fk.regime.n_upper],
        },
        "continuity_test": {
            "t_n": report.test.t_n,
            "p_star": report.test.p_star,
            "n_boot": report.test.n_boot,
            "seed": report.test.seed,
        },
    }
    return json.dumps(payload, indent=2)
