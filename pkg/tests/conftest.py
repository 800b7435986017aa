import numpy as np
import pytest

from labelmarket.data import LabelledPool, Normalization


def make_pool(X_lab, y_lab, X_pool, y_pool, X_val=None, y_val=None):
    X_lab = np.asarray(X_lab, dtype=float)
    X_pool = np.asarray(X_pool, dtype=float).reshape(-1, X_lab.shape[1])
    d = X_lab.shape[1]
    return LabelledPool(
        X_labelled=X_lab,
        y_labelled=np.asarray(y_lab, dtype=float),
        X_pool=X_pool,
        y_pool=np.asarray(y_pool, dtype=float),
        feature_names=tuple(f"f{i}" for i in range(d)),
        normalization=Normalization(np.zeros(d), np.ones(d)),
        X_val=None if X_val is None else np.asarray(X_val, dtype=float),
        y_val=None if y_val is None else np.asarray(y_val, dtype=float),
    )


def random_market_data(seed, k=12, n_pool=40, dim=3, noise=1.0):
    """Small linear-model market with an intercept column."""
    rng = np.random.default_rng(seed)
    beta = rng.normal(size=dim + 1)

    def draw(n):
        X = np.column_stack([np.ones(n), rng.normal(size=(n, dim))])
        return X, X @ beta + rng.normal(scale=noise, size=n)

    Xl, yl = draw(k)
    Xp, yp = draw(n_pool)
    Xv, yv = draw(30)
    return make_pool(Xl, yl, Xp, yp, Xv, yv), rng.uniform(0.0, 0.05, n_pool)


@pytest.fixture
def small_market():
    return random_market_data(0)
