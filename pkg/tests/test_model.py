import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from kinkreg.exceptions import InvalidConfigError
from kinkreg.model import Dataset, RegimeSplit, ThetaPoint, augmented_regressors, fitted_values, ssr

from conftest import make_jump_dataset


def _tiny_dataset():
    # 12 observations, d = 3, with one row (1, 3, 2) at q = 2
    q = np.array([2.0, -1.0, 0.5, 1.5, 3.0, -2.0, 0.0, 1.0, 2.5, -0.5, 4.0, 1.2])
    x2 = np.array([3.0, 1.0, -1.0, 2.0, 0.5, 1.5, -2.0, 0.2, 1.1, -0.3, 2.2, 0.9])
    y = np.arange(12.0)
    return Dataset.from_regressors(y=y, q=q, x2=x2)


class TestDataset:
    def test_shape_and_columns(self):
        ds = _tiny_dataset()
        assert ds.n == 12 and ds.d == 3
        assert_array_equal(ds.x[:, 0], np.ones(12))
        assert_array_equal(ds.x[:, -1], ds.q)

    def test_rejects_bad_first_column(self):
        ds = _tiny_dataset()
        x = ds.x.copy()
        x[0, 0] = 2.0
        with pytest.raises(InvalidConfigError):
            Dataset(y=ds.y, x=x, q=ds.q)

    def test_rejects_mismatched_threshold_column(self):
        ds = _tiny_dataset()
        x = ds.x.copy()
        x[3, -1] += 1.0
        with pytest.raises(InvalidConfigError):
            Dataset(y=ds.y, x=x, q=ds.q)

    def test_rejects_small_n(self):
        # n must be at least 2 (d + 2)
        with pytest.raises(InvalidConfigError):
            Dataset.from_regressors(y=np.arange(7.0), q=np.arange(7.0))

    def test_rejects_nonfinite(self):
        ds = _tiny_dataset()
        y = ds.y.copy()
        y[1] = np.nan
        with pytest.raises(InvalidConfigError):
            Dataset(y=y, x=ds.x, q=ds.q)


class TestAugmentedRegressors:
    def test_indicator_never_fires_above_support(self):
        ds = _tiny_dataset()
        g = augmented_regressors(ds, ds.q.max())
        assert_array_equal(g[:, ds.d:], np.zeros((ds.n, ds.d)))

    def test_indicator_always_fires_below_support(self):
        ds = _tiny_dataset()
        g = augmented_regressors(ds, ds.q.min() - 1.0)
        assert_array_equal(g[:, ds.d:], ds.x)

    def test_single_row_value(self):
        # row with x = (1, 3, 2), q = 2 and tau = 1.5 doubles up
        ds = _tiny_dataset()
        g = augmented_regressors(ds, 1.5)
        assert_array_equal(g[0], np.array([1.0, 3.0, 2.0, 1.0, 3.0, 2.0]))

    def test_boundary_point_in_lower_regime(self):
        ds = _tiny_dataset()
        g = augmented_regressors(ds, 2.0)  # q = 2 sits in the lower regime
        assert_array_equal(g[0, ds.d:], np.zeros(ds.d))


class TestSsr:
    def test_zero_coefficients_give_mean_square(self):
        ds = _tiny_dataset()
        theta = ThetaPoint(beta=np.zeros(3), delta=np.zeros(3), tau=1.0)
        assert_allclose(ssr(ds, theta), np.mean(ds.y**2), rtol=1e-14)

    def test_noiseless_data_fit_exactly(self):
        ds, beta, delta = make_jump_dataset(n=60, d=2, noise=0.0, seed=3)
        theta = ThetaPoint(beta=beta, delta=delta, tau=2.0)
        assert ssr(ds, theta) <= 1e-24

    def test_hand_computed_value(self):
        # three design points (q, y) = (0,0), (1,1), (2,4) fitted by y = q
        # leave residuals (0, 0, 2); the mean of squares is invariant under
        # replicating the points, which satisfies the minimum-n invariant
        q = np.tile(np.array([0.0, 1.0, 2.0]), 4)
        y = np.tile(np.array([0.0, 1.0, 4.0]), 4)
        ds = Dataset.from_regressors(y=y, q=q)
        theta = ThetaPoint(beta=np.array([0.0, 1.0]), delta=np.zeros(2), tau=0.5)
        assert_allclose(ssr(ds, theta), 4.0 / 3.0, rtol=1e-14)

    def test_step_function_in_tau(self):
        # ssr is constant for tau between consecutive order statistics of q
        ds, beta, delta = make_jump_dataset(n=40, d=2, noise=0.5, seed=9)
        qs = np.sort(ds.q)
        theta_mid = lambda t: ThetaPoint(beta=beta, delta=delta, tau=t)
        lo, hi = qs[10], qs[11]
        vals = [ssr(ds, theta_mid(t)) for t in np.linspace(lo, hi - 1e-12, 5)]
        assert_allclose(vals, vals[0], rtol=0, atol=0)

    def test_scaling_in_y(self):
        ds, beta, delta = make_jump_dataset(n=50, d=2, noise=1.0, seed=5)
        theta = ThetaPoint(beta=beta, delta=delta, tau=1.7)
        base = ssr(ds, theta)
        for c in (0.1, 3.0, 100.0):
            ds_c = Dataset(y=c * ds.y, x=ds.x, q=ds.q)
            theta_c = ThetaPoint(beta=c * beta, delta=c * delta, tau=1.7)
            assert_allclose(ssr(ds_c, theta_c), c**2 * base, rtol=1e-12)

    def test_nonnegative(self):
        ds, _, _ = make_jump_dataset(n=40, d=3, noise=2.0, seed=1)
        rng = np.random.default_rng(0)
        for _ in range(50):
            theta = ThetaPoint(beta=rng.standard_normal(3), delta=rng.standard_normal(3), tau=rng.uniform(0, 4))
            assert ssr(ds, theta) >= 0.0


class TestThetaPoint:
    def test_partition_accessors(self):
        theta = ThetaPoint(beta=np.array([1.0, 2.0, 3.0, 4.0]), delta=np.array([5.0, 6.0, 7.0, 8.0]), tau=0.5)
        assert theta.delta1 == 5.0
        assert_array_equal(theta.delta2, np.array([6.0, 7.0]))
        assert theta.delta3 == 8.0
        assert_array_equal(theta.alpha, np.concatenate([theta.beta, theta.delta]))

    def test_continuity_predicate(self):
        tau = 1.6
        kink = ThetaPoint(beta=np.array([1.0, 2.0]), delta=np.array([-2.0 * tau, 2.0]), tau=tau)
        assert kink.is_continuous()
        jump = ThetaPoint(beta=np.array([1.0, 2.0]), delta=np.array([0.5, 2.0]), tau=tau)
        assert not jump.is_continuous()

    def test_continuity_middle_block(self):
        tau = 0.9
        theta = ThetaPoint(beta=np.zeros(3), delta=np.array([-1.0 * tau, 0.5, 1.0]), tau=tau)
        assert not theta.is_continuous()
        theta2 = ThetaPoint(beta=np.zeros(3), delta=np.array([-1.0 * tau, 0.0, 1.0]), tau=tau)
        assert theta2.is_continuous()

    def test_tolerance_is_scale_aware(self):
        # a relative perturbation at 1e-12 of a huge delta3 * tau stays continuous
        tau, d3 = 1e4, 1e4
        gap = 1e-12 * d3 * tau
        theta = ThetaPoint(beta=np.zeros(2), delta=np.array([-d3 * tau + gap, d3]), tau=tau)
        assert theta.is_continuous()


def test_regime_split_counts():
    ds = _tiny_dataset()
    split = RegimeSplit.from_data(ds.q, 1.5)
    assert split.n_lower + split.n_upper == ds.n
    assert split.n_upper == int(np.sum(ds.q > 1.5))


def test_fitted_values_match_ssr():
    ds, beta, delta = make_jump_dataset(n=30, d=2, noise=0.3, seed=2)
    theta = ThetaPoint(beta=beta, delta=delta, tau=2.2)
    resid = ds.y - fitted_values(ds, theta)
    assert_allclose(ssr(ds, theta), np.mean(resid**2), rtol=1e-14)
