"""scikit-learn compatible front end for the product-graph learner."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .graphrep import ProductKind, compose_product, laplacian_from_weights
from .solver import Moments, SolverConfig, ksgl_solve, logdet_pseudo, product_laplacian


class KroneckerGraphLearner(BaseEstimator):
    """Learn two factor graphs whose Kronecker (or strong) product explains smooth signals.

    Parameters
    ----------
    p1, p2 : int
        Factor node counts. Samples are vectors of length ``p1 * p2`` with
        node ``(i1, i2)`` at position ``i1 * p2 + i2``, or arrays of shape
        ``(n, p1, p2)``.
    kind : {"kronecker", "strong"}
    alpha1, alpha2 : float or None
        l1 penalties on the factor weights; ``None`` uses ``0.01`` times the
        median positive pairwise squared distance of the data.
    eta0, backtrack, tol_inner, tol_outer, max_inner, max_outer
        Step-size and stopping controls, see :class:`SolverConfig`.

    Attributes
    ----------
    w1_, w2_ : ndarray
        Learned half-vectorized factor weights.
    weights_ : ndarray
        Learned product-graph weights.
    laplacian_ : ndarray of shape (p1*p2, p1*p2)
    laplacian1_, laplacian2_ : ndarray
        Factor Laplacians.
    objective_trace_ : list of float
    n_iter_ : int
        Outer sweeps performed.
    converged_ : bool
    state_ : SolverState
    """

    def __init__(self, p1=2, p2=2, kind="kronecker", alpha1=None, alpha2=None, eta0=1e-2,
                 backtrack=0.5, tol_inner=1e-6, tol_outer=1e-5, max_inner=1000, max_outer=50):
        self.p1 = p1
        self.p2 = p2
        self.kind = kind
        self.alpha1 = alpha1
        self.alpha2 = alpha2
        self.eta0 = eta0
        self.backtrack = backtrack
        self.tol_inner = tol_inner
        self.tol_outer = tol_outer
        self.max_inner = max_inner
        self.max_outer = max_outer

    def solver_config(self) -> SolverConfig:
        return SolverConfig(alpha1=self.alpha1, alpha2=self.alpha2, eta0=self.eta0,
                            backtrack=self.backtrack, tol_inner=self.tol_inner,
                            tol_outer=self.tol_outer, max_inner=self.max_inner,
                            max_outer=self.max_outer, kind=self.kind)

    def _validate_samples(self, X) -> np.ndarray:
        X = check_array(X, allow_nd=True, ensure_min_samples=1, ensure_min_features=1)
        p = self.p1 * self.p2
        if X.ndim == 3:
            if X.shape[1:] != (self.p1, self.p2):
                raise ValueError(f"expected samples of shape (n, {self.p1}, {self.p2}), "
                                 f"got {X.shape}")
            X = X.reshape(X.shape[0], p)
        if X.ndim != 2 or X.shape[1] != p:
            raise ValueError(f"expected {p} = p1*p2 features, got shape {X.shape}")
        return X

    def fit(self, X, y=None, init=None):
        """Fit factor graphs to the samples ``X``."""
        X = self._validate_samples(X)
        return self._fit_moments(Moments.from_samples(X), init)

    def fit_covariance(self, S, init=None):
        """Fit from a precomputed ``(p, p)`` second-moment matrix."""
        S = check_array(S)
        return self._fit_moments(Moments.from_covariance(S), init)

    def _fit_moments(self, moments: Moments, init):
        config = self.solver_config()
        state = ksgl_solve(moments, config, p1=self.p1, p2=self.p2, init=init)
        default = moments.default_alpha()
        self.alpha1_ = default if config.alpha1 is None else config.alpha1
        self.alpha2_ = default if config.alpha2 is None else config.alpha2
        self.state_ = state
        self.w1_ = state.w1
        self.w2_ = state.w2
        self.weights_ = compose_product(state.w1, state.w2, config.kind).w
        self.laplacian_ = product_laplacian(state.w1, state.w2, config.kind)
        self.laplacian1_ = laplacian_from_weights(state.w1)
        self.laplacian2_ = laplacian_from_weights(state.w2)
        self.objective_trace_ = list(state.objective_trace)
        self.n_iter_ = state.outer_sweeps
        self.converged_ = state.converged
        return self

    def score(self, X, y=None) -> float:
        """Average IGMRF log-likelihood of ``X`` under the learned graph, up to a constant."""
        check_is_fitted(self, "laplacian_")
        X = self._validate_samples(X)
        S = X.T @ X / X.shape[0]
        return 0.5 * (logdet_pseudo(self.laplacian_) - float(np.sum(self.laplacian_ * S)))

    @property
    def product_kind(self) -> ProductKind:
        return ProductKind.parse(self.kind)
