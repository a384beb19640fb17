"""Nonstandard limit laws of the threshold estimators and the minimax bound.

Under the continuity restriction the centred threshold estimate converges at
the cube-root rate to the minimiser over g of

    b |g|^3 + 2 a W(g^3),

where W is a two-sided Brownian motion evaluated at cubed time,
a = d30 * sqrt(sigma2(tau0) * f(tau0) / 3) and b = d30^2 * f(tau0) / 3.
Sign convention: the drift b|g|^3 grows like |g|^3 while the noise term only
fluctuates like |g|^(3/2), so the process diverges to +inf in both tails and
has an almost surely finite argmin (an argmax of the same expression would
sit at infinity).  Because W is sign-symmetric in law, the argmins of
b|g|^3 - 2aW(g^3) and b|g|^3 + 2aW(g^3) are equal in law, so simulating the
"+" form loses nothing.

The continuity statistic converges to

    ( min_l K - min_h K - min_g K ) / sigma^2,

where the h- and l-sections of the Gaussian process K are quadratic forms
with closed-form minima and the g-section is the process above.
:func:`tn_limit_draw` evaluates the quadratic minima exactly and simulates
the g-section on a grid.

:func:`minimax_lower_bound` evaluates the closed-form lower bound on the
worst-case l1 risk of any threshold estimator when the kink/jump type is
unknown.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .estimation import FitResult
from .exceptions import InvalidConfigError
from .model import Dataset, augmented_regressors

__all__ = [
    "LimitParams",
    "BoundInputs",
    "kink_limit_draw",
    "tn_limit_draw",
    "minimax_lower_bound",
    "estimate_limit_params",
    "restriction_matrix",
    "default_g_max",
]


@dataclass(frozen=True)
class LimitParams:
    """Plug-in inputs of the limit laws.

    Attributes
    ----------
    d30 : float
        Local slope change (nonzero).
    sigma2_tau0 : float
        Conditional error variance at the threshold.
    f_tau0 : float
        Density of q at the threshold.
    m_mat, omega : ndarray, shape (2d, 2d)
        Second-moment and error-weighted second-moment matrices of the
        augmented regressors.
    r_mat : ndarray, shape (d + 2, 2d)
        Restriction matrix mapping the augmented regressors onto the
        constrained model's local coordinates.
    sigma2 : float
        Unconditional error variance.
    """

    d30: float
    sigma2_tau0: float
    f_tau0: float
    m_mat: np.ndarray
    omega: np.ndarray
    r_mat: np.ndarray
    sigma2: float

    def __post_init__(self) -> None:
        m = np.asarray(self.m_mat, dtype=np.float64)
        om = np.asarray(self.omega, dtype=np.float64)
        r = np.asarray(self.r_mat, dtype=np.float64)
        object.__setattr__(self, "m_mat", m)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "r_mat", r)
        if self.d30 == 0.0:
            raise InvalidConfigError("d30 must be nonzero")
        if self.sigma2_tau0 <= 0.0 or self.f_tau0 <= 0.0 or self.sigma2 <= 0.0:
            raise InvalidConfigError("sigma2_tau0, f_tau0 and sigma2 must be positive")
        td = m.shape[0]
        if td % 2 or m.shape != (td, td) or om.shape != (td, td):
            raise InvalidConfigError("m_mat and omega must be square of even dimension 2d")
        d = td // 2
        if r.shape != (d + 2, td):
            raise InvalidConfigError(f"r_mat must have shape ({d + 2}, {td})")
        if np.linalg.eigvalsh(m)[0] <= 0.0:
            raise InvalidConfigError("m_mat must be positive definite")

    @property
    def a(self) -> float:
        """Noise scale of the g-section."""
        return self.d30 * math.sqrt(self.sigma2_tau0 * self.f_tau0 / 3.0)

    @property
    def b(self) -> float:
        """Cubic drift scale of the g-section."""
        return self.d30**2 * self.f_tau0 / 3.0


def _g_section(a: float, b: float, g_max: float, n_grid: int, rng: np.random.Generator):
    """Simulate b|g|^3 + 2a W(g^3) on a symmetric grid; return (grid, values).

    The two-sided Brownian motion uses independent paths for g < 0 and g > 0,
    each evaluated at the cubed grid times via exact Gaussian increments.
    """
    if a <= 0.0 or b <= 0.0:
        raise InvalidConfigError("a and b must be positive")
    if n_grid < 100:
        raise InvalidConfigError("n_grid must be at least 100")
    if not g_max > 0.0:
        raise InvalidConfigError("g_max must be positive")
    g_pos = np.linspace(0.0, g_max, n_grid + 1)[1:]
    t = g_pos**3
    sd = np.sqrt(np.diff(t, prepend=0.0))
    incr = rng.standard_normal((2, n_grid)) * sd
    w_neg = np.cumsum(incr[0])  # B1 at |g|^3, g < 0
    w_pos = np.cumsum(incr[1])  # B2 at g^3, g > 0
    drift = b * t
    vals = np.concatenate([(drift + 2.0 * a * w_neg)[::-1], [0.0], drift + 2.0 * a * w_pos])
    grid = np.concatenate([-g_pos[::-1], [0.0], g_pos])
    return grid, vals


def default_g_max(a: float, b: float) -> float:
    """Ten characteristic argmin scales (a/b)^(2/3); Brownian scaling makes
    the argmin distribution proportional to that scale."""
    return 10.0 * (a / b) ** (2.0 / 3.0)


def kink_limit_draw(
    a: float,
    b: float,
    g_max: float | None = None,
    n_grid: int = 5000,
    rng: np.random.Generator | None = None,
) -> float:
    """One draw from the cube-root limit law: argmin of b|g|^3 + 2a W(g^3).

    A draw landing in the outer 5% of [-g_max, g_max] is flagged with a
    warning recommending the default window 10 * (a/b)^(2/3).
    """
    if rng is None:
        rng = np.random.default_rng()
    if g_max is None:
        g_max = default_g_max(a, b)
    elif g_max < (a / b) ** (2.0 / 3.0):
        raise InvalidConfigError(
            f"g_max={g_max:g} is below the argmin scale (a/b)^(2/3)={(a / b) ** (2 / 3):g}; "
            f"use at least the default {default_g_max(a, b):g}"
        )
    grid, vals = _g_section(a, b, g_max, n_grid, rng)
    draw = float(grid[np.argmin(vals)])
    if abs(draw) > 0.95 * g_max:
        warnings.warn(
            f"argmin {draw:g} fell in the outer 5% of the simulation window; "
            f"recommended g_max = {default_g_max(a, b):g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return draw


def tn_limit_draw(
    params: LimitParams,
    g_max: float | None = None,
    n_grid: int = 5000,
    rng: np.random.Generator | None = None,
) -> float:
    """One draw from the limit distribution of the continuity statistic.

    The h- and l-section minima are the closed forms -B' M^{-1} B and
    -B' R' (R M R')^+ R B with B ~ N(0, Omega) (pseudo-inverse when R M R' is
    singular); the g-section minimum is simulated.  Draw order is fixed:
    first B, then the Brownian increments.
    """
    if rng is None:
        rng = np.random.default_rng()
    m, om, r = params.m_mat, params.omega, params.r_mat
    # PSD square root of Omega for the Gaussian score draw
    lam, vec = np.linalg.eigh(om)
    if lam[0] < -1e-8 * max(lam[-1], 1.0):
        raise InvalidConfigError("omega must be positive semidefinite")
    root = vec * np.sqrt(np.clip(lam, 0.0, None))
    b_vec = root @ rng.standard_normal(m.shape[0])

    min_h = -float(b_vec @ np.linalg.solve(m, b_vec))
    rb = r @ b_vec
    rmr = r @ m @ r.T
    min_l = -float(rb @ (np.linalg.pinv(rmr, hermitian=True) @ rb))

    a, b = params.a, params.b
    if g_max is None:
        g_max = default_g_max(a, b)
    _, vals = _g_section(a, b, g_max, n_grid, rng)
    min_g = float(np.min(vals))  # <= 0 since the value at g = 0 is 0
    return (min_l - min_h - min_g) / params.sigma2


def restriction_matrix(d: int, tau0: float, threshold_loading: float) -> np.ndarray:
    """Matrix R mapping augmented regressors onto the constrained model's
    local coordinates.

    Rows: the d base-regressor coordinates, the kink ramp
    (q - tau0) 1{q > tau0}, and the threshold direction with the given
    loading (conventionally -(beta3 + delta3); a first-principles derivative
    of the kink model gives -delta3, selectable upstream).
    """
    r = np.zeros((d + 2, 2 * d))
    r[:d, :d] = np.eye(d)
    r[d, d] = -tau0
    r[d, 2 * d - 1] = 1.0
    r[d + 1, d] = -threshold_loading
    return r


def estimate_limit_params(
    ds: Dataset,
    fit_u: FitResult,
    varphi: float = 0.0,
    third_row: str = "printed",
) -> LimitParams:
    """Plug-in limit parameters from data and an unconstrained fit.

    Sample moments give M and Omega; a Gaussian kernel density with the
    Silverman bandwidth gives f at the estimated threshold; a Nadaraya-Watson
    smoother of the squared residuals (same kernel and bandwidth) gives the
    conditional error variance there.  ``third_row`` selects the loading of
    the threshold direction in R: "printed" uses -(beta3 + delta3),
    "slope-only" uses -delta3.
    """
    if third_row not in ("printed", "slope-only"):
        raise InvalidConfigError("third_row must be 'printed' or 'slope-only'")
    theta = fit_u.theta
    tau_hat = theta.tau
    g = augmented_regressors(ds, tau_hat)
    resid = ds.y - g @ theta.alpha
    n = ds.n

    m_mat = g.T @ g / n
    omega = (g * resid[:, None] ** 2).T @ g / n

    kde = stats.gaussian_kde(ds.q, bw_method="silverman")
    f_hat = float(kde(tau_hat)[0])
    h = float(kde.factor) * float(np.std(ds.q, ddof=1))
    kern = np.exp(-0.5 * ((ds.q - tau_hat) / h) ** 2)
    sigma2_tau0 = float(kern @ resid**2) / float(np.sum(kern))

    d30 = theta.delta3 * float(n) ** varphi
    loading = theta.beta[-1] + theta.delta3 if third_row == "printed" else theta.delta3
    r_mat = restriction_matrix(ds.d, tau_hat, loading)
    return LimitParams(
        d30=d30,
        sigma2_tau0=sigma2_tau0,
        f_tau0=f_hat,
        m_mat=m_mat,
        omega=omega,
        r_mat=r_mat,
        sigma2=float(resid @ resid) / n,
    )


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the minimax lower bound.

    kappa0 scales the minimal slope change kappa = kappa0 * n**(-varphi);
    sigma_lower2 bounds the conditional error variance from below, f_upper
    bounds the threshold-variable density from above, and eta is the
    diameter of the threshold parameter space.
    """

    n: int
    varphi: float
    kappa0: float
    sigma_lower2: float
    f_upper: float
    eta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.varphi < 0.5:
            raise InvalidConfigError("varphi must lie in [0, 1/2)")
        if self.n < 1:
            raise InvalidConfigError("n must be positive")
        if min(self.kappa0, self.sigma_lower2, self.f_upper, self.eta) <= 0.0:
            raise InvalidConfigError("kappa0, sigma_lower2, f_upper and eta must be positive")


def minimax_lower_bound(inp: BoundInputs) -> float:
    """Closed-form lower bound on the worst-case l1 risk of any threshold
    estimator when the threshold type (kink or jump) is unknown.

    Returns sigma_lower^(2/3) / (3 f_upper^(1/3) kappa0^(2/3)) *
    n^((2 varphi - 1)/3) when n^(1 - 2 varphi) >= 3 sigma_lower^2 /
    (f_upper kappa^2 eta^3), and eta / 4 otherwise.
    """
    n = float(inp.n)
    kappa = inp.kappa0 * n ** (-inp.varphi)
    threshold = 3.0 * inp.sigma_lower2 / (inp.f_upper * kappa**2 * inp.eta**3)
    if n ** (1.0 - 2.0 * inp.varphi) >= threshold:
        const = inp.sigma_lower2 ** (1.0 / 3.0) / (3.0 * inp.f_upper ** (1.0 / 3.0) * inp.kappa0 ** (2.0 / 3.0))
        return const * n ** ((2.0 * inp.varphi - 1.0) / 3.0)
    return inp.eta / 4.0
