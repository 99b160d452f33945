"""scikit-learn style wrappers over the functional API."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import box_dimension
from .measures import DiscreteMeasure, riesz_potential
from .minimize import MinimizeOptions, ProblemSpec, minimize
from .witness import feasible_init

__all__ = ["BoxCountingDimension", "RieszPotentialTransformer", "HolderEnergyMinimizer"]


class BoxCountingDimension(BaseEstimator):
    """Box-counting dimension of a point cloud or polyline.

    Attributes
    ----------
    dimension_ : float
    r_squared_ : float
    result_ : BoxDimensionResult
    """

    def __init__(self, scales=None, polyline=False, min_window=4, saturation=0.25):
        self.scales = scales
        self.polyline = polyline
        self.min_window = min_window
        self.saturation = saturation

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        self.result_ = box_dimension(X, scales=self.scales, polyline=self.polyline,
                                     min_window=self.min_window, saturation=self.saturation)
        self.dimension_ = self.result_.estimate
        self.r_squared_ = self.result_.r_squared
        self.n_features_in_ = X.shape[1]
        return self


class RieszPotentialTransformer(TransformerMixin, BaseEstimator):
    """Learn a discrete measure from atoms; transform points into its Riesz potential.

    ``fit(X, sample_weight=None)`` stores the atoms (uniform weights summing to
    one unless given); ``transform(Y)`` returns a column of potentials.
    """

    def __init__(self, alpha=1.0):
        self.alpha = alpha

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X)
        if sample_weight is None:
            sample_weight = np.full(X.shape[0], 1.0 / X.shape[0])
        self.measure_ = DiscreteMeasure(X, np.asarray(sample_weight, dtype=float))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "measure_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return riesz_potential(self.measure_, X, self.alpha)[:, None]


class HolderEnergyMinimizer(BaseEstimator):
    """Minimize a Riesz energy functional over a Holder ball of fields.

    ``fit(X=None, sample_weight=None)``: ``X`` holds the medium atoms for the
    mutual and p-potential objectives and is ignored for the self energy.
    ``predict(T)`` returns the fitted field at the grid node nearest to each
    parameter point.
    """

    def __init__(self, objective="self", alpha=0.5, gamma=0.6, rho=1.0, k=1, n=2, m=257,
                 p_power=1.0, restarts=0, max_iters=200, seed=0):
        self.objective = objective
        self.alpha = alpha
        self.gamma = gamma
        self.rho = rho
        self.k = k
        self.n = n
        self.m = m
        self.p_power = p_power
        self.restarts = restarts
        self.max_iters = max_iters
        self.seed = seed

    def fit(self, X=None, y=None, sample_weight=None):
        medium = None
        if self.objective != "self":
            if X is None:
                raise ValueError(f"objective {self.objective!r} needs medium atoms X")
            X = check_array(X)
            w = np.full(X.shape[0], 1.0 / X.shape[0]) if sample_weight is None else sample_weight
            medium = DiscreteMeasure(X, w)
        self.problem_ = ProblemSpec(self.objective, self.alpha, self.gamma, self.rho, self.k,
                                    self.n, self.m, medium=medium, p_power=self.p_power)
        init = feasible_init(self.problem_, seed=self.seed)
        options = MinimizeOptions(max_iters=self.max_iters, restarts=self.restarts, seed=self.seed)
        self.result_ = minimize(self.problem_, init, options)
        self.field_ = self.result_.field
        self.objective_ = self.result_.objective_value
        return self

    def predict(self, T):
        check_is_fitted(self, "field_")
        T = check_array(np.asarray(T, dtype=float).reshape(-1, self.k))
        idx = np.clip(np.rint(T * (self.m - 1)).astype(int), 0, self.m - 1)
        return self.field_.values[tuple(idx.T)]
