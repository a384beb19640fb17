import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from kinkreg.estimation import (
    GridProfiler,
    build_grid,
    fit,
    profile_fit,
    robust_covariance,
    robust_standard_errors,
)
from kinkreg.exceptions import EmptyGridError, InvalidConfigError, SingularDesignError
from kinkreg.model import Dataset, augmented_regressors

from conftest import make_jump_dataset, make_kink_dataset


class TestBuildGrid:
    def test_observed_trimming_order_statistics(self):
        # q = 1..20 with 10% total trim drops one point per tail; with the
        # regime filter disabled the candidates are exactly {2, ..., 19}
        ds = Dataset.from_regressors(y=np.arange(20.0), q=np.arange(1.0, 21.0))
        grid = build_grid(ds, "observed", trim_fraction=0.10, min_per_regime=1)
        assert_array_equal(grid.points, np.arange(2.0, 20.0))

    def test_min_per_regime_filter(self):
        # with the default d + 2 = 4 filter the edge candidates drop out
        ds = Dataset.from_regressors(y=np.arange(20.0), q=np.arange(1.0, 21.0))
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        assert_array_equal(grid.points, np.arange(4.0, 17.0))

    def test_equidistant_point_count(self):
        ds, _, _ = make_jump_dataset(n=100, d=2, seed=4)
        grid = build_grid(ds, "equidistant", trim_fraction=0.10, n_points=50)
        assert grid.n_points == 50
        qs = np.sort(ds.q)
        assert grid.points[0] == qs[5] and grid.points[-1] == qs[94]

    def test_equidistant_default_points(self):
        ds, _, _ = make_jump_dataset(n=100, d=2, seed=4)
        grid = build_grid(ds, "equidistant", trim_fraction=0.10)
        assert grid.n_points == 50

    def test_degenerate_support_raises(self):
        y = np.arange(12.0)
        q = np.full(12, 3.0)
        x = np.column_stack([np.ones(12), np.arange(12.0), q])
        ds = Dataset(y=y, x=x, q=q)
        with pytest.raises(EmptyGridError):
            build_grid(ds, "observed")

    def test_validation(self):
        ds, _, _ = make_jump_dataset(n=40, seed=0)
        with pytest.raises(InvalidConfigError):
            build_grid(ds, "observed", trim_fraction=0.5)
        with pytest.raises(InvalidConfigError):
            build_grid(ds, "nearest")
        with pytest.raises(InvalidConfigError):
            build_grid(ds, "equidistant", n_points=1)


class TestProfileFit:
    def test_noiseless_jump_recovery(self):
        ds, beta, delta = make_jump_dataset(n=80, d=2, noise=0.0, seed=7)
        theta, val = profile_fit(ds, 2.0, constrained=False)
        assert val <= 1e-20
        assert_allclose(theta.beta, beta, atol=1e-9)
        assert_allclose(theta.delta, delta, atol=1e-9)

    def test_constrained_output_is_continuous(self):
        ds, _, _ = make_jump_dataset(n=120, d=3, noise=1.0, seed=8, het=True)
        for tau in np.quantile(ds.q, [0.3, 0.5, 0.7]):
            theta, _ = profile_fit(ds, tau, constrained=True)
            assert theta.is_continuous()
            assert_array_equal(theta.delta2, np.zeros(1))
            # left and right limits of the fitted line agree at tau
            x_at = np.array([1.0, 1.3, tau])
            left = x_at @ theta.beta
            right = x_at @ (theta.beta + theta.delta)
            assert abs(left - right) <= 1e-10 * (1.0 + abs(left))

    def test_matches_dense_normal_equations(self):
        ds, _, _ = make_jump_dataset(n=12, d=2, noise=1.0, seed=12)
        tau = float(np.median(ds.q))
        theta, _ = profile_fit(ds, tau, constrained=False)
        g = augmented_regressors(ds, tau)
        ref = np.linalg.solve(g.T @ g, g.T @ ds.y)
        assert_allclose(theta.alpha, ref, rtol=1e-8)

    def test_singular_design_raises(self):
        # constant middle regressor makes the augmented design rank deficient
        n = 16
        q = np.linspace(0.0, 3.0, n)
        x = np.column_stack([np.ones(n), np.ones(n), q])
        ds = Dataset(y=np.arange(16.0), x=x, q=q)
        with pytest.raises(SingularDesignError):
            profile_fit(ds, 1.5, constrained=False)


class TestFit:
    def test_noiseless_jump_observed_grid(self):
        ds, beta, delta = make_jump_dataset(n=150, d=2, noise=0.0, seed=21)
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        res = fit(ds, grid, constrained=False)
        # the SSR-zero grid point is the largest observation at or below the
        # true threshold
        expected = ds.q[ds.q <= 2.0].max()
        assert res.theta.tau == expected
        assert res.ssr_min <= 1e-13 * np.mean(ds.y**2)
        assert_allclose(res.theta.beta, beta, atol=1e-7)

    def test_noiseless_kink_constrained(self):
        ds = make_kink_dataset(n=151, tau0=0.0, delta3=2.0)
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        res = fit(ds, grid, constrained=True)
        assert res.ssr_min <= 1e-13 * np.mean(ds.y**2)
        assert res.theta.tau == 0.0
        assert_allclose(res.theta.beta, np.array([2.0, 3.0]), atol=1e-8)
        assert_allclose(res.theta.delta3, 2.0, atol=1e-8)
        assert res.theta.is_continuous()

    def test_nesting_constrained_at_least_unconstrained(self):
        for seed in range(5):
            ds, _, _ = make_jump_dataset(n=90, d=3, noise=1.0, seed=seed, het=True)
            grid = build_grid(ds, "observed", trim_fraction=0.10)
            pro = GridProfiler(ds, grid)
            assert pro.fit(constrained=True).ssr_min >= pro.fit(constrained=False).ssr_min - 1e-12

    def test_tie_break_smallest_tau(self):
        # the unconstrained objective is a step function of tau, so an
        # equidistant grid oversampling the gaps produces exact ties; the
        # reported minimiser must be the smallest tied grid point
        ds, _, _ = make_jump_dataset(n=40, d=2, noise=1.0, seed=3)
        grid = build_grid(ds, "equidistant", trim_fraction=0.10, n_points=400)
        res = fit(ds, grid, constrained=False)
        ties = grid.points[res.profile[:, 1] == res.ssr_min]
        assert ties.size > 1  # the gap oversampling really created ties
        assert res.theta.tau == ties[0]

    def test_profile_matches_pointwise_fit(self):
        ds, _, _ = make_jump_dataset(n=70, d=2, noise=1.0, seed=33, het=True)
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        res = fit(ds, grid, constrained=False)
        assert res.ssr_min == np.nanmin(res.profile[:, 1])
        for i in range(0, grid.n_points, 7):
            _, val = profile_fit(ds, grid.points[i], constrained=False)
            assert_allclose(res.profile[i, 1], val, rtol=1e-10)

    def test_failed_points_skipped_and_recorded(self):
        # make the middle regressor constant below q = 1 so early grid
        # points have a collinear lower regime
        n = 60
        rng = np.random.default_rng(5)
        q = np.sort(rng.uniform(0.0, 4.0, n))
        x2 = np.where(q <= 1.0, 1.0, rng.standard_normal(n))
        y = rng.standard_normal(n)
        ds = Dataset.from_regressors(y=y, q=q, x2=x2)
        grid = build_grid(ds, "observed", trim_fraction=0.0, min_per_regime=ds.d + 2)
        res = fit(ds, grid, constrained=False)
        assert res.failed_taus.size > 0
        assert np.isnan(res.profile[:, 1]).sum() == res.failed_taus.size
        assert np.isfinite(res.ssr_min)

    def test_all_points_failing_raises(self):
        n = 30
        q = np.linspace(0.0, 3.0, n)
        x = np.column_stack([np.ones(n), np.full(n, 2.0), q])
        ds = Dataset(y=np.arange(30.0), x=x, q=q)
        with pytest.raises(SingularDesignError):
            fit(ds, build_grid(ds, "observed", trim_fraction=0.10), constrained=False)


class TestEquivariance:
    def test_two_step_equals_brute_force_everywhere(self):
        for seed in (0, 1):
            ds, _, _ = make_jump_dataset(n=80, d=3, noise=1.5, seed=seed, het=True)
            grid = build_grid(ds, "observed", trim_fraction=0.10)
            pro = GridProfiler(ds, grid)
            for constrained in (False, True):
                ssr_fast, _ = pro.profile_ssr(ds.y, constrained)
                for i, tau in enumerate(grid.points):
                    _, ref = profile_fit(ds, tau, constrained=constrained)
                    assert abs(ssr_fast[i] - ref) <= 1e-10 * max(ref, 1e-30)

    def test_shift_equivariance_in_q(self):
        ds, _, _ = make_jump_dataset(n=120, d=2, noise=1.0, seed=17)
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        base = fit(ds, grid, constrained=False)
        for c in (1.0, -2.5, 30.0):
            x = ds.x.copy()
            x[:, -1] = ds.q + c
            ds_c = Dataset(y=ds.y, x=x, q=ds.q + c)
            res = fit(ds_c, build_grid(ds_c, "observed", trim_fraction=0.10), constrained=False)
            assert_allclose(res.theta.tau, base.theta.tau + c, atol=1e-9)
            assert_allclose(res.ssr_min, base.ssr_min, rtol=1e-9)

    def test_scale_equivariance_in_y(self):
        ds, _, _ = make_jump_dataset(n=100, d=2, noise=1.0, seed=19)
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        base = fit(ds, grid, constrained=False)
        for c in (0.1, 3.0, 100.0):
            res = fit(Dataset(y=c * ds.y, x=ds.x, q=ds.q), grid, constrained=False)
            assert res.theta.tau == base.theta.tau
            assert_allclose(res.theta.alpha, c * base.theta.alpha, rtol=1e-9)
            assert_allclose(res.ssr_min, c**2 * base.ssr_min, rtol=1e-9)


class TestRobustStandardErrors:
    def test_zero_residuals_zero_se(self):
        ds, _, _ = make_jump_dataset(n=80, d=2, noise=0.0, seed=7)
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        res = fit(ds, grid, constrained=False)
        se = robust_standard_errors(ds, res)
        assert se.shape == (2 * ds.d,)
        assert np.all(se <= 1e-9)

    def test_matches_classical_under_homoskedasticity(self):
        ds, _, _ = make_jump_dataset(n=100_000, d=2, noise=1.0, seed=23, het=False)
        grid = build_grid(ds, "equidistant", trim_fraction=0.10, n_points=200)
        res = fit(ds, grid, constrained=False)
        se = robust_standard_errors(ds, res)
        g = augmented_regressors(ds, res.theta.tau)
        resid = ds.y - g @ res.theta.alpha
        s2 = float(resid @ resid) / (ds.n - g.shape[1])
        classical = np.sqrt(s2 * np.diag(np.linalg.inv(g.T @ g)))
        assert_allclose(se, classical, rtol=0.05)

    def test_constrained_reports_threshold_se(self):
        ds = make_kink_dataset(n=400, tau0=1.0, delta3=2.0, noise=0.5, seed=29)
        grid = build_grid(ds, "observed", trim_fraction=0.10)
        res = fit(ds, grid, constrained=True)
        se = robust_standard_errors(ds, res)
        assert se.shape == (ds.d + 2,)
        assert np.all(se > 0.0)
        cov = robust_covariance(ds, res)
        assert cov.shape == (ds.d + 2, ds.d + 2)
        assert_allclose(cov, cov.T, atol=1e-12)
