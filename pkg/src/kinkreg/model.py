"""Data model and objective function for two-regime threshold regression.

The regression is

    y_i = x_i' beta + x_i' delta * 1{q_i > tau} + u_i,

where the regressor vector is structured as x_i = (1, x_{i2}', q_i)' so that
the threshold variable is itself a regressor.  The shift vector is
partitioned conformably as delta = (delta1, delta2', delta3)'.  The model is
continuous in q at the threshold (a "kink") exactly when
delta1 + delta3 * tau = 0 and delta2 = 0; otherwise the regression function
jumps at tau.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidConfigError

__all__ = ["Dataset", "ThetaPoint", "RegimeSplit", "augmented_regressors", "ssr"]


@dataclass(frozen=True)
class Dataset:
    """Observations ``(y_i, x_i, q_i)`` with the structured regressor layout.

    Parameters
    ----------
    y : ndarray, shape (n,)
        Response.
    x : ndarray, shape (n, d)
        Regressors.  Column 0 must be identically one and column d-1 must
        equal ``q`` elementwise; d >= 2.
    q : ndarray, shape (n,)
        Threshold variable.
    """

    y: np.ndarray
    x: np.ndarray
    q: np.ndarray

    def __post_init__(self) -> None:
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.float64))
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.float64))
        q = np.ascontiguousarray(np.asarray(self.q, dtype=np.float64))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "q", q)
        if y.ndim != 1 or q.ndim != 1 or x.ndim != 2:
            raise InvalidConfigError("y and q must be 1-d, x must be 2-d")
        n, d = x.shape
        if d < 2:
            raise InvalidConfigError(f"need at least an intercept and the threshold variable, got d={d}")
        if y.shape[0] != n or q.shape[0] != n:
            raise InvalidConfigError("y, x and q must have the same number of rows")
        if n < 2 * (d + 2):
            raise InvalidConfigError(f"n={n} is too small: both regimes must be estimable, need n >= {2 * (d + 2)}")
        if not (np.isfinite(y).all() and np.isfinite(x).all() and np.isfinite(q).all()):
            raise InvalidConfigError("all entries must be finite")
        if not np.all(x[:, 0] == 1.0):
            raise InvalidConfigError("column 0 of x must be identically 1")
        if not np.array_equal(x[:, -1], q):
            raise InvalidConfigError("last column of x must equal q")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_regressors(cls, y, q, x2=None) -> "Dataset":
        """Assemble a dataset from the response, threshold variable and
        optional middle regressors, adding the intercept and q columns."""
        y = np.asarray(y, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        cols = [np.ones_like(q)]
        if x2 is not None:
            x2 = np.asarray(x2, dtype=np.float64)
            if x2.ndim == 1:
                x2 = x2[:, None]
            cols.append(x2)
        cols.append(q)
        return cls(y=y, x=np.column_stack(cols), q=q)


@dataclass(frozen=True)
class ThetaPoint:
    """Full parameter point theta = (beta', delta', tau)'.

    ``delta`` is partitioned as (delta1, delta2', delta3) to match the
    regressor layout (intercept, middle block, threshold variable).
    """

    beta: np.ndarray
    delta: np.ndarray
    tau: float

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=np.float64).ravel()
        delta = np.asarray(self.delta, dtype=np.float64).ravel()
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "tau", float(self.tau))
        if beta.shape != delta.shape:
            raise InvalidConfigError("beta and delta must have the same length")
        if beta.shape[0] < 2:
            raise InvalidConfigError("beta and delta must have length d >= 2")

    @property
    def d(self) -> int:
        return self.beta.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        """Stacked coefficient vector (beta', delta')'."""
        return np.concatenate([self.beta, self.delta])

    @property
    def delta1(self) -> float:
        return float(self.delta[0])

    @property
    def delta2(self) -> np.ndarray:
        return self.delta[1:-1]

    @property
    def delta3(self) -> float:
        return float(self.delta[-1])

    def continuity_tolerance(self) -> float:
        """Scale-aware slack for the continuity predicate."""
        return 1e-10 * (1.0 + abs(self.delta3) * abs(self.tau))

    def is_continuous(self, tol_cont: float | None = None) -> bool:
        """Whether the regression function is continuous at ``tau``:
        |delta1 + delta3 * tau| <= tol and ||delta2||_inf <= tol."""
        tol = self.continuity_tolerance() if tol_cont is None else float(tol_cont)
        kink_gap = abs(self.delta1 + self.delta3 * self.tau)
        mid = float(np.max(np.abs(self.delta2))) if self.delta2.size else 0.0
        return kink_gap <= tol and mid <= tol


@dataclass(frozen=True)
class RegimeSplit:
    """Observation counts on each side of a threshold (q <= tau vs q > tau)."""

    n_lower: int
    n_upper: int

    @classmethod
    def from_data(cls, q: np.ndarray, tau: float) -> "RegimeSplit":
        n_upper = int(np.count_nonzero(q > tau))
        return cls(n_lower=q.shape[0] - n_upper, n_upper=n_upper)

    @property
    def n(self) -> int:
        return self.n_lower + self.n_upper


def augmented_regressors(ds: Dataset, tau: float) -> np.ndarray:
    """Return the n x 2d matrix with rows ``(x_i', x_i' * 1{q_i > tau})``.

    The indicator is strict, so observations with q_i == tau sit in the
    lower regime.
    """
    indic = (ds.q > tau).astype(np.float64)
    return np.hstack([ds.x, ds.x * indic[:, None]])


def fitted_values(ds: Dataset, theta: ThetaPoint) -> np.ndarray:
    """Regression function x_i'beta + x_i'delta * 1{q_i > tau} at theta."""
    base = ds.x @ theta.beta
    shift = ds.x @ theta.delta
    return base + np.where(ds.q > theta.tau, shift, 0.0)


def ssr(ds: Dataset, theta: ThetaPoint) -> float:
    """Mean squared residual (1/n) * sum_i (y_i - x_i(tau)'alpha)^2."""
    if theta.d != ds.d:
        raise InvalidConfigError(f"theta has d={theta.d} but dataset has d={ds.d}")
    resid = ds.y - fitted_values(ds, theta)
    return float(resid @ resid) / ds.n
