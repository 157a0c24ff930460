import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from majperc.estimators import (CrossingProbability, MajorityDynamics, ThresholdEstimator, check_configs,
                                check_grid_points)


def test_check_configs():
    assert check_configs(np.ones((3, 4))).shape == (1, 3, 4)
    with pytest.raises(ValueError):
        check_configs(np.full((2, 2), 2))
    with pytest.raises(ValueError):
        check_configs(np.ones(4))


def test_check_grid_points():
    assert check_grid_points([[0.1], [0.2]]).tolist() == [0.1, 0.2]
    with pytest.raises(ValueError):
        check_grid_points([0.5, 1.5], 0, 1)


def test_majority_dynamics_transformer():
    rng = np.random.default_rng(1)
    X = (rng.random((4, 6, 5)) < 0.6).astype(int)
    m = MajorityDynamics(t=1.0, seed=3)
    Y = m.fit_transform(X)
    assert Y.shape == X.shape and set(np.unique(Y)) <= {0, 1}
    assert np.array_equal(Y, clone(m).fit(X).transform(X))
    assert np.array_equal(MajorityDynamics(t=0.0).fit_transform(X), X)
    with pytest.raises(ValueError):
        m.transform(X[:, :3])
    with pytest.raises(NotFittedError):
        MajorityDynamics().transform(X)
    assert m.get_params()["t"] == 1.0 and m.set_params(t=2.0).t == 2.0


def test_crossing_probability_estimator():
    est = CrossingProbability(n=4, replicas=200, seed=2).fit([0.3, 0.9])
    pred = est.predict([0.3, 0.6, 0.9])
    assert pred[0] <= pred[1] <= pred[2]
    assert est.ci_.shape == (2, 2)


def test_threshold_estimator():
    est = ThresholdEstimator(n=4, tol=0.05, max_per_point=256).fit([0.0])
    assert 0.3 < est.predict([0.0])[0] < 0.8
    with pytest.raises(NotFittedError):
        ThresholdEstimator().predict([0.0])
