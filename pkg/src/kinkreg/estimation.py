"""Profiled least-squares estimation of the threshold regression model.

Both estimators minimise the mean squared residual over a finite grid of
threshold candidates, profiling out the coefficients at each candidate:

* unconstrained (jump) fit: separate coefficient vectors on each side of the
  threshold, obtained by regressing y on the augmented regressors
  ``(x_i', x_i' 1{q_i > tau})``;
* constrained (kink) fit: the continuity restriction
  ``delta1 + delta3 tau = 0, delta2 = 0`` is imposed, which reduces the model
  to a regression of y on the d+1 regressors ``(x_i', (q_i - tau) 1{q_i > tau})``.

Because the unconstrained objective is a step function of tau and both
objectives are quadratic in the coefficients, profiling over the whole grid
reduces to prefix-sum updates of the normal equations.  :class:`GridProfiler`
precomputes every quantity that depends only on the design, so refitting with
a new response (as the wild bootstrap does thousands of times) costs a few
vectorised passes instead of a fresh grid search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .exceptions import EmptyGridError, InvalidConfigError, SingularDesignError
from .model import Dataset, RegimeSplit, ThetaPoint, augmented_regressors

__all__ = [
    "ThresholdGrid",
    "FitResult",
    "build_grid",
    "profile_fit",
    "fit",
    "GridProfiler",
    "robust_covariance",
    "robust_standard_errors",
]

GridStrategy = Literal["observed", "equidistant"]

# Rank-deficiency cutoff for an n x k design: smallest singular value at or
# below eps * max(n, k) * largest singular value counts as zero.  The same
# rule applied to normal equations squares the factor.
_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class ThresholdGrid:
    """Strictly increasing threshold candidates with their construction recipe."""

    points: np.ndarray
    strategy: GridStrategy
    trim_fraction: float
    min_per_regime: int

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).ravel()
        object.__setattr__(self, "points", pts)
        if pts.size == 0:
            raise EmptyGridError("threshold grid has no points")
        if np.any(np.diff(pts) <= 0):
            raise InvalidConfigError("grid points must be strictly increasing")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def build_grid(
    ds: Dataset,
    strategy: GridStrategy = "observed",
    trim_fraction: float = 0.10,
    n_points: int | None = None,
    min_per_regime: int | None = None,
) -> ThresholdGrid:
    """Construct the threshold candidate grid.

    Parameters
    ----------
    ds : Dataset
    strategy : {"observed", "equidistant"}
        "observed" uses the sorted unique values of q inside the trimmed
        range; "equidistant" uses ``n_points`` equally spaced values spanning
        it (default ``n // 2``, the usual simulation choice).
    trim_fraction : float
        Total fraction of extreme q values discarded, split evenly between
        the tails.
    n_points : int, optional
        Number of points for the equidistant strategy (ignored otherwise).
    min_per_regime : int, optional
        Candidates leaving fewer observations than this on either side are
        dropped.  Defaults to d + 2, which keeps each regime overdetermined
        with a spare observation.

    Raises
    ------
    EmptyGridError
        If no candidate survives trimming and the regime-count filter.
    """
    if not 0.0 <= trim_fraction < 0.5:
        raise InvalidConfigError(f"trim_fraction must be in [0, 0.5), got {trim_fraction}")
    if strategy not in ("observed", "equidistant"):
        raise InvalidConfigError(f"unknown grid strategy {strategy!r}")
    mpr = ds.d + 2 if min_per_regime is None else int(min_per_regime)
    if mpr < 1:
        raise InvalidConfigError("min_per_regime must be at least 1")

    qs = np.sort(ds.q)
    n = ds.n
    # Guard against trim/2 * n landing an ulp under an integer.
    n_tail = int(math.floor(trim_fraction / 2.0 * n + 1e-9))
    lo, hi = qs[n_tail], qs[n - 1 - n_tail]

    if strategy == "observed":
        uq = np.unique(ds.q)
        candidates = uq[(uq >= lo) & (uq <= hi)]
    else:
        if n_points is None:
            n_points = n // 2
        if n_points < 2:
            raise InvalidConfigError("equidistant grid needs n_points >= 2")
        candidates = np.linspace(lo, hi, int(n_points))
        candidates = np.unique(candidates)  # collapses degenerate lo == hi

    n_lower = np.searchsorted(qs, candidates, side="right")
    keep = (n_lower >= mpr) & (n - n_lower >= mpr)
    candidates = candidates[keep]
    if candidates.size == 0:
        raise EmptyGridError(
            "no threshold candidate survives trimming and the "
            f"min-per-regime filter (min_per_regime={mpr})"
        )
    return ThresholdGrid(points=candidates, strategy=strategy, trim_fraction=float(trim_fraction), min_per_regime=mpr)


@dataclass(frozen=True)
class FitResult:
    """Output of a profiled least-squares threshold fit.

    Attributes
    ----------
    theta : ThetaPoint
        Estimated coefficients and threshold.
    ssr_min : float
        Minimised mean squared residual.
    constrained : bool
        Whether the continuity restriction was imposed.
    regime : RegimeSplit
        Observation counts below/above the estimated threshold.
    profile : ndarray, shape (m, 2)
        Columns (tau, profiled SSR); NaN SSR marks grid points skipped for
        rank deficiency.
    grid : ThresholdGrid
    failed_taus : ndarray
        Grid points skipped because their design was singular.
    """

    theta: ThetaPoint
    ssr_min: float
    constrained: bool
    regime: RegimeSplit
    profile: np.ndarray
    grid: ThresholdGrid
    failed_taus: np.ndarray

    def summary(self) -> str:
        kind = "constrained (kink)" if self.constrained else "unconstrained (jump)"
        lines = [
            f"{kind} threshold fit",
            f"  threshold    : {self.theta.tau:.6g}",
            f"  beta         : {np.array2string(self.theta.beta, precision=6)}",
            f"  delta        : {np.array2string(self.theta.delta, precision=6)}",
            f"  ssr (mean)   : {self.ssr_min:.6g}",
            f"  regimes      : {self.regime.n_lower} below, {self.regime.n_upper} above",
            f"  grid         : {self.grid.n_points} points ({self.grid.strategy}), "
            f"{self.failed_taus.size} skipped",
        ]
        return "\n".join(lines)


def _lstsq_rank_checked(a: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Least squares via SVD with the eps*max(dim) rank rule; returns
    (coefficients, mean squared residual)."""
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < a.shape[1]:
        raise SingularDesignError(f"design has rank {rank} < {a.shape[1]} columns")
    resid = y - a @ coef
    return coef, float(resid @ resid) / a.shape[0]


def _kink_regressors(ds: Dataset, tau: float) -> np.ndarray:
    """Regressors (x_i', (q_i - tau) 1{q_i > tau}) of the continuity-restricted model."""
    ramp = np.where(ds.q > tau, ds.q - tau, 0.0)
    return np.hstack([ds.x, ramp[:, None]])


def _theta_constrained(beta: np.ndarray, delta3: float, tau: float) -> ThetaPoint:
    d = beta.shape[0]
    delta = np.zeros(d)
    delta[0] = -delta3 * tau
    delta[-1] = delta3
    return ThetaPoint(beta=beta, delta=delta, tau=tau)


def profile_fit(ds: Dataset, tau: float, constrained: bool = False) -> tuple[ThetaPoint, float]:
    """Profile the coefficients at a fixed threshold candidate.

    Returns the profiled parameter point and the profiled mean squared
    residual.  Raises :class:`SingularDesignError` when the design at ``tau``
    is rank deficient beyond tolerance.
    """
    tau = float(tau)
    if constrained:
        coef, val = _lstsq_rank_checked(_kink_regressors(ds, tau), ds.y)
        theta = _theta_constrained(coef[:-1], float(coef[-1]), tau)
    else:
        coef, val = _lstsq_rank_checked(augmented_regressors(ds, tau), ds.y)
        theta = ThetaPoint(beta=coef[: ds.d], delta=coef[ds.d :], tau=tau)
    return theta, val


class GridProfiler:
    """Design-side cache for profiling both estimators over a fixed grid.

    All quantities depending only on ``(x, q, grid)`` -- regime prefix sums,
    per-candidate normal-equation matrices and their inverses, rank masks --
    are computed once.  Each call with a new response then reduces to prefix
    sums of y-moments and batched matrix-vector products, which is what makes
    bootstrap refits cheap.

    Grid points whose design is rank deficient are marked invalid and skipped
    (their profiled SSR is NaN); a fit raises :class:`SingularDesignError`
    only when every point is invalid.
    """

    def __init__(self, ds: Dataset, grid: ThresholdGrid):
        self.ds = ds
        self.grid = grid
        n, d = ds.n, ds.d
        order = np.argsort(ds.q, kind="stable")
        self._order = order
        qs = ds.q[order]
        xs = ds.x[order]
        self._qs = qs
        self._xs = xs

        taus = grid.points
        self._n_lower = np.searchsorted(qs, taus, side="right")

        # prefix sums with a leading zero slot so that sums over the lower
        # regime are a single fancy index
        cxx = np.zeros((n + 1, d, d))
        np.cumsum(np.einsum("ni,nj->nij", xs, xs), axis=0, out=cxx[1:])
        cx = np.zeros((n + 1, d))
        np.cumsum(xs, axis=0, out=cx[1:])
        cxq = np.zeros((n + 1, d))
        np.cumsum(xs * qs[:, None], axis=0, out=cxq[1:])
        cq = np.concatenate([[0.0], np.cumsum(qs)])
        cq2 = np.concatenate([[0.0], np.cumsum(qs * qs)])

        k = self._n_lower
        s_full = cxx[n]
        s_lo = cxx[k]
        s_up = s_full - s_lo

        # constrained system: [[S_full, w], [w', s]] with
        # w(tau) = sum_{q>tau} x (q - tau),  s(tau) = sum_{q>tau} (q - tau)^2
        m_up = (n - k).astype(np.float64)
        w = (cxq[n] - cxq[k]) - taus[:, None] * (cx[n] - cx[k])
        s_ramp = (cq2[n] - cq2[k]) - 2.0 * taus * (cq[n] - cq[k]) + taus**2 * m_up
        a_con = np.empty((taus.size, d + 1, d + 1))
        a_con[:, :d, :d] = s_full
        a_con[:, :d, d] = w
        a_con[:, d, :d] = w
        a_con[:, d, d] = s_ramp

        self._inv_lo, self._valid_lo = _masked_inverse(s_lo, n)
        self._inv_up, self._valid_up = _masked_inverse(s_up, n)
        self._valid_u = self._valid_lo & self._valid_up
        self._inv_con, self._valid_c = _masked_inverse(a_con, n)
        # points the fast path cannot solve are retried with lstsq per call
        self._fallback_u = np.flatnonzero(~self._valid_u)
        self._fallback_c = np.flatnonzero(~self._valid_c)

    # -- per-response profiling -------------------------------------------

    def _y_moments(self, y: np.ndarray):
        n, d = self.ds.n, self.ds.d
        ys = y[self._order]
        cz = np.zeros((n + 1, d))
        np.cumsum(self._xs * ys[:, None], axis=0, out=cz[1:])
        cy2 = np.concatenate([[0.0], np.cumsum(ys * ys)])
        cyq = np.concatenate([[0.0], np.cumsum(ys * self._qs)])
        cy = np.concatenate([[0.0], np.cumsum(ys)])
        return ys, cz, cy2, cyq, cy

    def profile_ssr(self, y: np.ndarray, constrained: bool) -> tuple[np.ndarray, np.ndarray]:
        """Profiled mean squared residual at every grid point for response y.

        Returns ``(ssr, coefficients)`` where invalid grid points carry NaN;
        coefficients are per-point profiled solutions (unconstrained: the
        2d-vector (beta', (beta+delta)')-style per-regime stack; constrained:
        the (d+1)-vector (beta', delta3)).
        """
        n, d = self.ds.n, self.ds.d
        k = self._n_lower
        _, cz, cy2, cyq, cy = self._y_moments(y)
        if constrained:
            rhs = np.empty((k.size, d + 1))
            rhs[:, :d] = cz[n]
            rhs[:, d] = (cyq[n] - cyq[k]) - self.grid.points * (cy[n] - cy[k])
            coef = np.einsum("mij,mj->mi", self._inv_con, rhs)
            ssr = (cy2[n] - np.einsum("mi,mi->m", rhs, coef)) / n
            ssr[~self._valid_c] = np.nan
        else:
            b_lo = cz[k]
            b_up = cz[n] - b_lo
            c_lo = np.einsum("mij,mj->mi", self._inv_lo, b_lo)
            c_up = np.einsum("mij,mj->mi", self._inv_up, b_up)
            ssr_lo = cy2[k] - np.einsum("mi,mi->m", b_lo, c_lo)
            ssr_up = (cy2[n] - cy2[k]) - np.einsum("mi,mi->m", b_up, c_up)
            ssr = (ssr_lo + ssr_up) / n
            ssr[~self._valid_u] = np.nan
            coef = np.concatenate([c_lo, c_up], axis=1)
        # the shortcut formula can go an ulp negative on perfect fits
        np.maximum(ssr, 0.0, out=ssr)
        self._svd_fallback(y, constrained, ssr, coef)
        return ssr, coef

    def _svd_fallback(self, y: np.ndarray, constrained: bool, ssr: np.ndarray, coef: np.ndarray) -> None:
        """Retry grid points the prefix-sum path could not solve with the
        rank-revealing least-squares solver; unresolved points stay NaN."""
        idx = self._fallback_c if constrained else self._fallback_u
        for j in idx:
            tau = float(self.grid.points[j])
            a = _kink_regressors(self.ds, tau) if constrained else augmented_regressors(self.ds, tau)
            try:
                c, val = _lstsq_rank_checked(a, y)
            except SingularDesignError:
                continue
            ssr[j] = val
            if constrained:
                coef[j] = c
            else:
                d = self.ds.d
                coef[j, :d] = c[:d]
                coef[j, d:] = c[:d] + c[d:]

    def min_ssr(self, y: np.ndarray, constrained: bool) -> float:
        """Minimum profiled mean squared residual over the grid."""
        ssr, _ = self.profile_ssr(y, constrained)
        if np.isnan(ssr).all():
            raise SingularDesignError("design is rank deficient at every grid point")
        return float(np.nanmin(ssr))

    def fit(self, y: np.ndarray | None = None, *, constrained: bool = False) -> FitResult:
        """Full grid search for the given response (defaults to the dataset's y)."""
        y = self.ds.y if y is None else np.asarray(y, dtype=np.float64)
        ssr, coef = self.profile_ssr(y, constrained)
        valid = ~np.isnan(ssr)
        if not valid.any():
            raise SingularDesignError("design is rank deficient at every grid point")
        best = int(np.nanargmin(ssr))  # first minimiser = smallest tau
        tau = float(self.grid.points[best])
        d = self.ds.d
        if constrained:
            theta = _theta_constrained(coef[best, :d], float(coef[best, d]), tau)
        else:
            c_lo = coef[best, :d]
            c_up = coef[best, d:]
            theta = ThetaPoint(beta=c_lo, delta=c_up - c_lo, tau=tau)
        return FitResult(
            theta=theta,
            ssr_min=float(ssr[best]),
            constrained=constrained,
            regime=RegimeSplit(n_lower=int(self._n_lower[best]), n_upper=int(self.ds.n - self._n_lower[best])),
            profile=np.column_stack([self.grid.points, ssr]),
            grid=self.grid,
            failed_taus=self.grid.points[~valid],
        )


def _masked_inverse(mats: np.ndarray, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert a stack of normal-equation matrices, masking ill-posed ones.

    Working on the Gram matrix squares the design's condition number and
    floods the small eigenvalues with roundoff of size eps * lambda_max, so
    the guard keeps only matrices whose smallest eigenvalue clears
    eps * max(n_rows, k) * lambda_max.  Points failing the guard are retried
    with the rank-revealing SVD path by the caller.
    """
    k = mats.shape[-1]
    eig = np.linalg.eigvalsh(mats)
    lam_min, lam_max = eig[:, 0], eig[:, -1]
    cutoff = _EPS * max(n_rows, k)
    valid = lam_min > np.maximum(lam_max, 0.0) * cutoff
    inv = np.zeros_like(mats)
    if valid.any():
        try:
            inv[valid] = np.linalg.inv(mats[valid])
        except np.linalg.LinAlgError:
            for j in np.flatnonzero(valid):
                try:
                    inv[j] = np.linalg.inv(mats[j])
                except np.linalg.LinAlgError:
                    valid[j] = False
    return inv, valid


def fit(ds: Dataset, grid: ThresholdGrid, constrained: bool = False) -> FitResult:
    """Profiled least squares over ``grid``.

    Evaluates the profiled SSR at every candidate, skipping (and recording)
    rank-deficient candidates, and returns the fit at the SSR-minimising
    threshold; exact ties resolve to the smallest tau.
    """
    return GridProfiler(ds, grid).fit(constrained=constrained)


# -- reporting-grade standard errors --------------------------------------


def robust_covariance(ds: Dataset, fit_result: FitResult) -> np.ndarray:
    """Heteroskedasticity-consistent sandwich covariance, threshold held fixed.

    Unconstrained fits: covariance of the 2d coefficient estimates on the
    augmented regressors.  Constrained fits: covariance of (beta, delta3,
    tau), where the tau column of the gradient is -delta3 * 1{q > tau}.
    """
    theta = fit_result.theta
    if fit_result.constrained:
        g = _kink_regressors(ds, theta.tau)
        coef = np.concatenate([theta.beta, [theta.delta3]])
        resid = ds.y - g @ coef
        tau_grad = np.where(ds.q > theta.tau, -theta.delta3, 0.0)
        g = np.hstack([g, tau_grad[:, None]])
    else:
        g = augmented_regressors(ds, theta.tau)
        resid = ds.y - g @ theta.alpha

    gtg = g.T @ g
    eig = np.linalg.eigvalsh(gtg)
    if eig[0] <= max(eig[-1], 0.0) * (_EPS * max(ds.n, g.shape[1])) ** 2:
        raise SingularDesignError("sandwich bread is rank deficient")
    bread = np.linalg.inv(gtg)
    gu = g * resid[:, None]
    meat = gu.T @ gu
    return bread @ meat @ bread


def robust_standard_errors(ds: Dataset, fit_result: FitResult) -> np.ndarray:
    """Sandwich standard errors for the reported coefficients.

    Unconstrained fits return 2d values (for beta then delta); constrained
    fits return d+2 values (beta, delta3, tau).
    """
    cov = robust_covariance(ds, fit_result)
    return np.sqrt(np.maximum(np.diag(cov), 0.0))
