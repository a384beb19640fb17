"""Monte Carlo harness: simulation designs, warp-speed size/power tables and
a convergence-rate study for the threshold estimators.

Three data generating processes are supported, all with conditionally
heteroskedastic normal errors:

    A (kink):  y = 2 + 3q + delta * q * 1{q > 0},  q ~ N(0, 1),  u = |q| e
    B (jump):  y = 2 + 3q + delta * q * 1{q > 2},  q ~ N(2, 1),  u = |q| e
    C (jump):  y = 2 + 3x + delta * x * 1{q > 2},  q, x ~ N(2, 1)
               independent,  u = |q - 2| e

with e ~ N(0, 1).  In settings A and C the error scale is the centred
threshold variable, so the conditional variance vanishes at the threshold;
in setting B it is the raw threshold variable (E u^2 = 5).

Size/power tables use the warp-speed method (Giacomini, Politis and White,
2013): one bootstrap statistic per replication, pooled across replications to
form critical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .continuity import MultiplierDistribution, draw_multipliers, tn_statistic, _bootstrap_tn
from .estimation import GridProfiler, build_grid
from .exceptions import DegenerateFitError, EmptyGridError, InvalidConfigError, SingularDesignError
from .model import Dataset, fitted_values
from .rng import substream

__all__ = [
    "DgpSetting",
    "DeltaSchedule",
    "DELTA_SCHEDULES",
    "ExperimentConfig",
    "SizePowerTable",
    "RateStudy",
    "simulate_dgp",
    "warp_speed_rates",
    "size_power_experiment",
    "rate_study",
]


@dataclass(frozen=True)
class DgpSetting:
    """One simulation design: setting letter, sample size and threshold shift."""

    setting: str
    n: int
    delta: float

    def __post_init__(self) -> None:
        if self.setting not in ("A", "B", "C"):
            raise InvalidConfigError(f"setting must be A, B or C, got {self.setting!r}")
        if self.n < 50:
            raise InvalidConfigError("n must be at least 50")
        if not math.isfinite(self.delta):
            raise InvalidConfigError("delta must be finite")

    @property
    def tau0(self) -> float:
        """True threshold: the mean of q (0 in setting A, 2 in B and C)."""
        return 0.0 if self.setting == "A" else 2.0


def simulate_dgp(cfg: DgpSetting, rng: np.random.Generator) -> Dataset:
    """Draw one dataset from the configured design.

    Draw order is fixed (q, then x for setting C, then e) so that a given
    stream always yields the same dataset.
    """
    n = cfg.n
    if cfg.setting == "A":
        q = rng.standard_normal(n)
        x2 = None
        signal_var = q
        scale = np.abs(q)
    elif cfg.setting == "B":
        q = 2.0 + rng.standard_normal(n)
        x2 = None
        signal_var = q
        scale = np.abs(q)
    else:
        q = 2.0 + rng.standard_normal(n)
        x2 = 2.0 + rng.standard_normal(n)
        signal_var = x2
        scale = np.abs(q - 2.0)
    e = rng.standard_normal(n)
    y = 2.0 + 3.0 * signal_var + cfg.delta * signal_var * (q > cfg.tau0) + scale * e
    return Dataset.from_regressors(y=y, q=q, x2=x2)


@dataclass(frozen=True)
class DeltaSchedule:
    """Threshold-shift magnitude delta(n) = d0 * n**(-varphi)."""

    d0: float
    varphi: float
    name: str = ""

    def __call__(self, n: int) -> float:
        return self.d0 * float(n) ** (-self.varphi)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.varphi == 0.0:
            return f"{self.d0:g}"
        return f"{self.d0:.4g}*n^-{self.varphi:g}"


_SQRT10 = 10.0**0.5

#: Named schedules covering the standard size/power designs: a fixed shift of
#: 2, three n**(-1/4) decays anchored at 0.25/0.5/1 for n = 100, one
#: n**(-1/2) decay, and no shift at all.
DELTA_SCHEDULES: dict[str, DeltaSchedule] = {
    "fixed2": DeltaSchedule(2.0, 0.0, "fixed2"),
    "root4-small": DeltaSchedule(_SQRT10 / 4.0, 0.25, "root4-small"),
    "root4-mid": DeltaSchedule(_SQRT10 / 2.0, 0.25, "root4-mid"),
    "root4-large": DeltaSchedule(_SQRT10, 0.25, "root4-large"),
    "root2-small": DeltaSchedule(_SQRT10 / 4.0, 0.5, "root2-small"),
    "zero": DeltaSchedule(0.0, 0.0, "zero"),
}


def _resolve_schedule(schedule: str | DeltaSchedule) -> DeltaSchedule:
    if isinstance(schedule, DeltaSchedule):
        return schedule
    try:
        return DELTA_SCHEDULES[schedule]
    except KeyError:
        raise InvalidConfigError(
            f"unknown delta schedule {schedule!r}; known: {sorted(DELTA_SCHEDULES)}"
        ) from None


@dataclass(frozen=True)
class ExperimentConfig:
    """Size/power experiment layout.

    One row of the resulting table per (delta schedule, n) pair; one column
    per nominal size.  The threshold grid is rebuilt per replication with the
    configured strategy (default: n // 2 equidistant points inside the 10%
    trimmed range of q).
    """

    setting: str
    n_values: tuple[int, ...]
    schedules: tuple = ("fixed2",)
    sizes: tuple[float, ...] = (0.1, 0.05, 0.01)
    reps: int = 2000
    seed: int = 0
    grid_strategy: str = "equidistant"
    trim_fraction: float = 0.10
    multiplier: MultiplierDistribution = "rademacher"

    def __post_init__(self) -> None:
        if self.reps < 100:
            raise InvalidConfigError("reps must be at least 100")
        if not self.n_values:
            raise InvalidConfigError("need at least one sample size")
        for s in self.sizes:
            if not 0.0 < s < 1.0:
                raise InvalidConfigError("nominal sizes must be in (0, 1)")


@dataclass(frozen=True)
class SizePowerTable:
    """Rejection frequencies, rows keyed by (schedule label, n)."""

    setting: str
    sizes: tuple[float, ...]
    row_keys: tuple[tuple[str, int], ...]
    deltas: np.ndarray
    rates: np.ndarray  # shape (n_rows, n_sizes)
    n_failed: np.ndarray
    reps: int
    seed: int

    def flagged(self) -> np.ndarray:
        """Rows where more than 1% of replications failed and were skipped."""
        return self.n_failed > 0.01 * self.reps

    def to_csv(self) -> str:
        header = ["schedule", "n", "delta"] + [f"s={s:g}" for s in self.sizes] + ["failed"]
        lines = [",".join(header)]
        for i, (label, n) in enumerate(self.row_keys):
            cells = [label, str(n), f"{self.deltas[i]:.6g}"]
            cells += [f"{r:.6g}" for r in self.rates[i]]
            cells.append(str(int(self.n_failed[i])))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        widths = max(12, *(len(lbl) for lbl, _ in self.row_keys))
        head = f"{'schedule':<{widths}} {'n':>6} {'delta':>8} " + " ".join(f"{f's={s:g}':>8}" for s in self.sizes)
        lines = [f"rejection rates, setting {self.setting} ({self.reps} warp-speed replications)", head]
        for i, (label, n) in enumerate(self.row_keys):
            row = f"{label:<{widths}} {n:>6} {self.deltas[i]:>8.4g} " + " ".join(f"{r:>8.4g}" for r in self.rates[i])
            if self.n_failed[i]:
                row += f"   [{int(self.n_failed[i])} failed]"
            lines.append(row)
        return "\n".join(lines)


def warp_speed_rates(t_stats: np.ndarray, boot_stats: np.ndarray, sizes=(0.1, 0.05, 0.01)) -> np.ndarray:
    """Warp-speed rejection frequencies.

    For each nominal size s the critical value is the order statistic of the
    pooled bootstrap draws at index ceil((1 - s) * R) (1-based), and a
    replication rejects when its statistic strictly exceeds it.
    """
    t_stats = np.asarray(t_stats, dtype=np.float64)
    boot_stats = np.asarray(boot_stats, dtype=np.float64)
    if t_stats.shape != boot_stats.shape or t_stats.ndim != 1:
        raise InvalidConfigError("t_stats and boot_stats must be 1-d arrays of equal length")
    r = t_stats.shape[0]
    if r == 0:
        raise InvalidConfigError("need at least one replication")
    boot_sorted = np.sort(boot_stats)
    rates = np.empty(len(sizes))
    for j, s in enumerate(sizes):
        # snap guard: (1-s)*r can land an ulp above an integer
        k = int(math.ceil((1.0 - s) * r - 1e-9))
        k = min(max(k, 1), r)
        cv = boot_sorted[k - 1]
        rates[j] = np.count_nonzero(t_stats > cv) / r
    return rates


_SKIPPABLE = (SingularDesignError, EmptyGridError, DegenerateFitError)


def _one_replication(cfg_dgp: DgpSetting, cfg: ExperimentConfig, rng_data, rng_boot) -> tuple[float, float]:
    """Simulate, fit both estimators, and return (T_n, one bootstrap T_n*)."""
    ds = simulate_dgp(cfg_dgp, rng_data)
    grid = build_grid(ds, strategy=cfg.grid_strategy, trim_fraction=cfg.trim_fraction)
    profiler = GridProfiler(ds, grid)
    fit_u = profiler.fit(constrained=False)
    fit_c = profiler.fit(constrained=True)
    t_n = tn_statistic(ds.n, fit_c.ssr_min, fit_u.ssr_min)
    resid_u = ds.y - fitted_values(ds, fit_u.theta)
    mean_c = fitted_values(ds, fit_c.theta)
    eta = draw_multipliers(ds.n, cfg.multiplier, rng_boot)
    t_star = _bootstrap_tn(profiler, mean_c + resid_u * eta, ds.n)
    return t_n, t_star


def size_power_experiment(cfg: ExperimentConfig) -> SizePowerTable:
    """Run the warp-speed experiment over every (schedule, n) cell.

    Replication r of cell (i, n) draws its data from the stream
    ``(seed, i, n, r, 0)`` and its multipliers from ``(seed, i, n, r, 1)``,
    so identical configurations give bit-identical tables.  Replications
    whose fit fails are skipped and counted.
    """
    schedules = [_resolve_schedule(s) for s in cfg.schedules]
    row_keys: list[tuple[str, int]] = []
    deltas: list[float] = []
    all_rates: list[np.ndarray] = []
    n_failed: list[int] = []
    for i, sched in enumerate(schedules):
        for n in cfg.n_values:
            delta = sched(n)
            cfg_dgp = DgpSetting(setting=cfg.setting, n=n, delta=delta)
            t_stats = np.full(cfg.reps, np.nan)
            boot_stats = np.full(cfg.reps, np.nan)
            failed = 0
            for r in range(cfg.reps):
                try:
                    t_stats[r], boot_stats[r] = _one_replication(
                        cfg_dgp, cfg, substream(cfg.seed, i, n, r, 0), substream(cfg.seed, i, n, r, 1)
                    )
                except _SKIPPABLE:
                    failed += 1
            ok = ~np.isnan(t_stats)
            rates = warp_speed_rates(t_stats[ok], boot_stats[ok], cfg.sizes)
            row_keys.append((sched.label, n))
            deltas.append(delta)
            all_rates.append(rates)
            n_failed.append(failed)
    return SizePowerTable(
        setting=cfg.setting,
        sizes=tuple(cfg.sizes),
        row_keys=tuple(row_keys),
        deltas=np.array(deltas),
        rates=np.vstack(all_rates),
        n_failed=np.array(n_failed),
        reps=cfg.reps,
        seed=cfg.seed,
    )


@dataclass(frozen=True)
class RateStudy:
    """Median |tau_hat - tau0| by sample size and the fitted log-log slope."""

    setting: str
    delta: float
    constrained: bool
    n_values: tuple[int, ...]
    median_abs_err: np.ndarray
    slope: float
    reps: int
    seed: int

    def summary(self) -> str:
        kind = "constrained" if self.constrained else "unconstrained"
        lines = [f"rate study, setting {self.setting}, delta={self.delta:g}, {kind} ({self.reps} reps/n)"]
        for n, med in zip(self.n_values, self.median_abs_err):
            lines.append(f"  n={n:>6}: median |tau_hat - tau0| = {med:.6g}")
        lines.append(f"  log-log slope: {self.slope:.4f}")
        return "\n".join(lines)


def rate_study(
    setting: str,
    delta: float,
    n_values,
    reps: int = 400,
    seed: int = 0,
    constrained: bool = False,
    grid_strategy: str = "equidistant",
    trim_fraction: float = 0.10,
) -> RateStudy:
    """Estimate the convergence rate of the threshold estimator empirically.

    Fits the requested estimator on ``reps`` fresh datasets per sample size
    and regresses log median absolute threshold error on log n.
    """
    n_values = tuple(int(n) for n in n_values)
    if len(n_values) < 3 or any(b <= a for a, b in zip(n_values, n_values[1:])):
        raise InvalidConfigError("n_values must be increasing with at least 3 entries")
    medians = np.empty(len(n_values))
    for j, n in enumerate(n_values):
        cfg_dgp = DgpSetting(setting=setting, n=n, delta=delta)
        errs = np.full(reps, np.nan)
        for r in range(reps):
            try:
                ds = simulate_dgp(cfg_dgp, substream(seed, j, n, r))
                grid = build_grid(ds, strategy=grid_strategy, trim_fraction=trim_fraction)
                res = GridProfiler(ds, grid).fit(constrained=constrained)
                errs[r] = abs(res.theta.tau - cfg_dgp.tau0)
            except _SKIPPABLE:
                pass
        medians[j] = np.nanmedian(errs)
    slope = float(np.polyfit(np.log(np.asarray(n_values, dtype=float)), np.log(medians), 1)[0])
    return RateStudy(
        setting=setting,
        delta=float(delta),
        constrained=constrained,
        n_values=n_values,
        median_abs_err=medians,
        slope=slope,
        reps=reps,
        seed=seed,
    )
