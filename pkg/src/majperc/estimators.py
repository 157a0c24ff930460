"""scikit-learn style wrappers around the simulation and estimation routines.

``MajorityDynamics`` is a transformer mapping 0/1 configurations to their
state at time ``t``. ``CrossingProbability`` and ``ThresholdEstimator`` fit
on a 1-d array of densities or times and predict by linear interpolation
between the fitted points.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .clocks import ClockStream, SeedSpec
from .dynamics import evolve_forward
from .estimation import EventSpec, mc_event_prob, threshold_search
from .grid import BoundaryPolicy, Rect, SpinConfig


def check_configs(X) -> np.ndarray:
    """Validate a single ``(h, w)`` configuration or a ``(batch, h, w)`` stack of 0/1 values."""
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=None)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected a (h, w) or (batch, h, w) array, got shape {X.shape}")
    if not np.isin(X, (0, 1)).all():
        raise ValueError("configurations must contain only 0 and 1")
    return X.astype(np.uint8)


def check_grid_points(X, lo: float = 0.0, hi: float = np.inf, name: str = "X") -> np.ndarray:
    """Validate a 1-d array (or single column) of parameter values in ``[lo, hi]``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    X = check_array(X, ensure_2d=False)
    if X.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if np.any(X < lo) or np.any(X > hi):
        raise ValueError(f"{name} values must lie in [{lo}, {hi}]")
    return X


def _interp(x, xs, ys) -> np.ndarray:
    order = np.argsort(xs)
    return np.interp(x, np.asarray(xs)[order], np.asarray(ys)[order])


class MajorityDynamics(TransformerMixin, BaseEstimator):
    """Run the dynamics from each input configuration up to time ``t``.

    Configuration ``i`` of a batch uses the clocks of replica
    ``first_replica + i`` under ``seed``. ``fit`` only records the grid shape.
    """

    def __init__(self, t: float = 1.0, policy: str = "free_finite", seed: int = 0, first_replica: int = 0):
        self.t = t
        self.policy = policy
        self.seed = seed
        self.first_replica = first_replica

    def fit(self, X, y=None):
        X = check_configs(X)
        if self.t < 0:
            raise ValueError("t must be non-negative")
        BoundaryPolicy.parse(self.policy)
        self.shape_ = X.shape[1:]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "shape_")
        X = check_configs(X)
        if X.shape[1:] != self.shape_:
            raise ValueError(f"fitted on shape {self.shape_}, got {X.shape[1:]}")
        h, w = self.shape_
        region = Rect(1, w, 1, h)
        out = np.empty_like(X)
        for i, bits in enumerate(X):
            clocks = ClockStream(SeedSpec(int(self.seed), self.first_replica + i))
            out[i] = evolve_forward(SpinConfig(region, bits), clocks, self.t, self.policy).bits
        return out


class CrossingProbability(RegressorMixin, BaseEstimator):
    """Monte Carlo horizontal crossing probability of ``H(lam n, n)`` as a function of ``p``."""

    def __init__(self, n: int = 32, lam: float = 2.0, t: float = 0.0, policy: str = "frozen_zero",
                 replicas: int = 1000, seed: int = 0, threads: int | None = None):
        self.n = n
        self.lam = lam
        self.t = t
        self.policy = policy
        self.replicas = replicas
        self.seed = seed
        self.threads = threads

    def fit(self, X, y=None):
        ps = check_grid_points(X, 0.0, 1.0, "p")
        spec = EventSpec.h_crossing(self.n, self.lam, self.t, 0.5, self.policy)
        self.estimates_ = [mc_event_prob(spec.with_p(float(p)), self.replicas, self.seed, threads=self.threads)
                           for p in ps]
        self.p_ = ps
        self.prob_ = np.array([e.p_hat for e in self.estimates_])
        self.ci_ = np.array([e.ci for e in self.estimates_])
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "prob_")
        return _interp(check_grid_points(X, 0.0, 1.0, "p"), self.p_, self.prob_)


class ThresholdEstimator(RegressorMixin, BaseEstimator):
    """Finite-size threshold ``p*(t)`` by bisection, fitted on a grid of times."""

    def __init__(self, n: int = 64, lam: float = 2.0, target: float = 0.5, tol: float = 0.004, seed: int = 0,
                 policy: str = "frozen_zero", max_per_point: int = 4096, budget: int = 500_000,
                 threads: int | None = None):
        self.n = n
        self.lam = lam
        self.target = target
        self.tol = tol
        self.seed = seed
        self.policy = policy
        self.max_per_point = max_per_point
        self.budget = budget
        self.threads = threads

    def fit(self, X, y=None):
        ts = check_grid_points(X, 0.0, np.inf, "t")
        self.estimates_ = [threshold_search(float(t), self.n, self.lam, self.target, self.tol, self.seed,
                                            self.policy, max_per_point=self.max_per_point, budget=self.budget,
                                            threads=self.threads) for t in ts]
        self.t_ = ts
        self.p_star_ = np.array([e.p_star for e in self.estimates_])
        self.ci_ = np.array([e.ci for e in self.estimates_])
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "p_star_")
        return _interp(check_grid_points(X, 0.0, np.inf, "t"), self.t_, self.p_star_)
