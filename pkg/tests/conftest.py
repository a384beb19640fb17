import numpy as np
import pytest

from kinkreg.model import Dataset


def make_jump_dataset(n=200, d=2, tau0=2.0, delta=None, noise=1.0, seed=0, het=False):
    """Random two-regime dataset with a known threshold."""
    rng = np.random.default_rng(seed)
    q = tau0 + rng.standard_normal(n)
    cols = [np.ones(n)]
    if d == 3:
        cols.append(tau0 + rng.standard_normal(n))
    cols.append(q)
    x = np.column_stack(cols)
    beta = np.arange(1.0, d + 1.0)
    if delta is None:
        delta = np.linspace(1.0, 0.5, d)
    delta = np.asarray(delta, dtype=float)
    scale = np.abs(q) if het else 1.0
    u = noise * scale * rng.standard_normal(n)
    y = x @ beta + (x @ delta) * (q > tau0) + u
    return Dataset(y=y, x=x, q=q), beta, delta


def make_kink_dataset(n=200, tau0=0.0, delta3=2.0, noise=0.0, seed=0):
    """Dataset that is exactly continuous at tau0 (a kink), optionally noisy."""
    rng = np.random.default_rng(seed)
    q = tau0 + rng.standard_normal(n)
    if noise == 0.0:
        # place one observation exactly at the threshold so observed grids
        # contain tau0 and the noiseless fit can be exact
        q[0] = tau0
    y = 2.0 + 3.0 * q + delta3 * np.where(q > tau0, q - tau0, 0.0)
    if noise:
        y = y + noise * rng.standard_normal(n)
    return Dataset.from_regressors(y=y, q=q)


@pytest.fixture
def jump_ds():
    ds, beta, delta = make_jump_dataset(n=300, d=2, seed=11)
    return ds
