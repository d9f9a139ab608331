import numpy as np
import pytest

from barn.forest import RandomForestRegressor


def test_depth_zero_is_global_mean():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(80, 3))
    y = rng.normal(size=80)
    forest = RandomForestRegressor(n_trees=5, max_depth=0).fit(X, y, rng)
    preds = forest.predict(X)
    # each depth-0 tree is the mean of its bootstrap sample
    assert np.allclose(preds, preds[0])
    assert abs(preds[0] - y.mean()) < 3 * y.std() / np.sqrt(len(y))


def test_fits_a_step_function():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(300, 2))
    y = np.where(X[:, 0] > 0, 2.0, -2.0)
    forest = RandomForestRegressor().fit(X, y, rng)
    preds = forest.predict(X)
    assert np.mean((preds - y) ** 2) < 0.25 * np.var(y)


def test_deterministic_given_seed():
    rng_data = np.random.default_rng(2)
    X = rng_data.normal(size=(60, 4))
    y = rng_data.normal(size=60)
    p1 = RandomForestRegressor().fit(X, y, np.random.default_rng(5)).predict(X)
    p2 = RandomForestRegressor().fit(X, y, np.random.default_rng(5)).predict(X)
    np.testing.assert_array_equal(p1, p2)


def test_predict_before_fit_raises():
    with pytest.raises(RuntimeError):
        RandomForestRegressor().predict(np.zeros((2, 2)))


def test_constant_target_predicts_constant():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 2))
    y = np.full(50, 3.5)
    preds = RandomForestRegressor().fit(X, y, rng).predict(X)
    np.testing.assert_allclose(preds, 3.5)
