"""Penalized maximum-likelihood learning of Kronecker and strong product graphs.

The objective, for factor weights ``w1 >= 0`` and ``w2 >= 0``, is

    <L, S> - logdet(L + J) + alpha1 * sum(w1) + alpha2 * sum(w2)

where ``L`` is the Laplacian of the product graph, ``S`` the (uncentered)
sample covariance and ``J = 11^T / p``.  It is minimized by alternating
projected gradient descent with backtracking, one factor at a time; each
sub-problem is convex.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy import linalg
from scipy.linalg import lapack

from .exceptions import DisconnectedProduct, LineSearchFailure
from .graphrep import (
    ProductKind,
    adjacency_from_weights,
    as_sym_matrix,
    n_nodes,
    pair_nodes,
    product_adjacency,
)

MAX_HALVINGS = 60
BB_MIN, BB_MAX = 1e-10, 1e10


@dataclass
class SolverConfig:
    """Penalties, step control and stopping rules.

    ``alpha1``/``alpha2`` set to ``None`` select the data-driven default
    ``0.01 * median`` of the positive pairwise squared distances.
    """

    alpha1: float | None = None
    alpha2: float | None = None
    eta0: float = 1e-2
    backtrack: float = 0.5
    tol_inner: float = 1e-6
    tol_outer: float = 1e-5
    max_inner: int = 1000
    max_outer: int = 50
    kind: ProductKind = ProductKind.KRONECKER

    def __post_init__(self):
        self.kind = ProductKind.parse(self.kind)
        for name in ("alpha1", "alpha2"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ValueError(f"{name} must be >= 0, got {value}")
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be > 0, got {self.eta0}")
        if not 0 < self.backtrack < 1:
            raise ValueError(f"backtrack must lie in (0, 1), got {self.backtrack}")
        if not (self.tol_inner > 0 and self.tol_outer > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ValueError("iteration caps must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown solver config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "SolverConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class SolverState:
    w1: np.ndarray
    w2: np.ndarray
    objective_trace: list = field(default_factory=list)
    outer_sweeps: int = 0
    converged: bool = False
    termination_reason: str | None = None
    inner_iterations: int = 0

    @property
    def p1(self) -> int:
        return n_nodes(self.w1.size)

    @property
    def p2(self) -> int:
        return n_nodes(self.w2.size)

    def to_dict(self) -> dict:
        return {
            "w1": self.w1.tolist(),
            "w2": self.w2.tolist(),
            "objective_trace": [float(v) for v in self.objective_trace],
            "outer_sweeps": self.outer_sweeps,
            "converged": self.converged,
            "termination_reason": self.termination_reason,
            "inner_iterations": self.inner_iterations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverState":
        d = dict(d)
        d["w1"] = np.asarray(d["w1"], dtype=float)
        d["w2"] = np.asarray(d["w2"], dtype=float)
        return cls(**d)


@dataclass
class Moments:
    """Sample covariance ``S`` and pairwise squared distances ``K``."""

    S: np.ndarray
    K: np.ndarray

    @classmethod
    def from_covariance(cls, S) -> "Moments":
        S = as_sym_matrix(S, name="covariance", tol=1e-12)
        return cls(S, distance_matrix(S))

    @classmethod
    def from_samples(cls, X) -> "Moments":
        return cls.from_covariance(sample_covariance(X))

    @property
    def p(self) -> int:
        return self.S.shape[0]

    def default_alpha(self) -> float:
        pos = self.K[self.K > 0]
        return 0.01 * float(np.median(pos)) if pos.size else 0.0


def sample_covariance(X) -> np.ndarray:
    """``(1/n) sum_k x_k x_k^T`` without mean removal.

    ``X`` is an ``(n, p)`` array or anything with a ``samples`` attribute.
    """
    X = np.asarray(getattr(X, "samples", X), dtype=float)
    if X.ndim != 2:
        raise ValueError(f"samples must be 2-D (n, p), got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValueError("cannot form a sample covariance from zero samples")
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def distance_matrix(S) -> np.ndarray:
    """``K[i, j] = S[i, i] - 2 S[i, j] + S[j, j]`` with an exactly zero diagonal."""
    S = np.asarray(S, dtype=float)
    d = np.diag(S)
    K = d[:, None] + d[None, :] - 2.0 * S
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 0.0)
    return K


def product_laplacian(w1, w2, kind=ProductKind.KRONECKER) -> np.ndarray:
    W = product_adjacency(w1, w2, kind)
    L = -W
    L[np.diag_indices_from(L)] = W.sum(axis=1)
    return L


def _cholesky(L):
    p = L.shape[0]
    try:
        return linalg.cho_factor(L + 1.0 / p, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise DisconnectedProduct("L + J is not positive definite; the product graph "
                                  "is disconnected at these weights") from None


def logdet_pseudo(L) -> float:
    """Log pseudo-determinant of a connected Laplacian, as ``logdet(L + J)``."""
    c, _ = _cholesky(np.asarray(L, dtype=float))
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def dirichlet_energy(w_prod, K) -> float:
    """``sum_m w_m K_m`` over all pairs; equals ``<L(w), S>`` when ``K`` is built from ``S``."""
    w_prod = np.asarray(getattr(w_prod, "w", w_prod), dtype=float)
    rows, cols = pair_nodes(np.asarray(K).shape[0])
    return float(w_prod @ K[rows, cols])


def _alphas(config: SolverConfig | None, moments: Moments) -> tuple[float, float]:
    if config is None:
        return 0.0, 0.0
    default = None
    a1, a2 = config.alpha1, config.alpha2
    if a1 is None or a2 is None:
        default = moments.default_alpha()
    return (default if a1 is None else a1), (default if a2 is None else a2)


def _as_vec(w) -> np.ndarray:
    return np.asarray(getattr(w, "w", w), dtype=float).ravel()


def objective(w1, w2, moments: Moments, config: SolverConfig | None = None,
              kind=None) -> float:
    """Penalized negative log-likelihood at ``(w1, w2)``.

    ``kind`` overrides ``config.kind``; a ``None`` config means no penalty
    and a Kronecker product unless ``kind`` says otherwise.
    """
    w1, w2 = _as_vec(w1), _as_vec(w2)
    if kind is None:
        kind = config.kind if config is not None else ProductKind.KRONECKER
    a1, a2 = _alphas(config, moments)
    L = product_laplacian(w1, w2, kind)
    return _objective_from_laplacian(L, moments.S, w1, w2, a1, a2)


def _objective_from_laplacian(L, S, w1, w2, a1, a2) -> float:
    smooth = float(np.sum(L * S))
    return smooth - logdet_pseudo(L) + a1 * float(w1.sum()) + a2 * float(w2.sum())


def _residual_distances(L, S) -> np.ndarray:
    """Pairwise-distance transform of ``S - (L + J)^{-1}``."""
    c, _ = _cholesky(L)
    inv, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise DisconnectedProduct("L + J could not be inverted")
    sigma = np.tril(inv) + np.tril(inv, -1).T
    return distance_matrix(S - sigma)


def _factor_gradient(which: int, w1, w2, moments: Moments, kind, alpha: float) -> np.ndarray:
    kind = ProductKind.parse(kind)
    w1, w2 = _as_vec(w1), _as_vec(w2)
    p1, p2 = n_nodes(w1.size), n_nodes(w2.size)
    if p1 * p2 != moments.p:
        raise ValueError(f"factor sizes {p1}x{p2} do not match moments of size {moments.p}")
    L = product_laplacian(w1, w2, kind)
    D = _residual_distances(L, moments.S).reshape(p1, p2, p1, p2)
    if which == 1:
        other = adjacency_from_weights(w2)
        if kind is ProductKind.STRONG:
            other += np.eye(p2)
        G = np.einsum("ibjd,bd->ij", D, other)
        rows, cols = pair_nodes(p1)
    else:
        other = adjacency_from_weights(w1)
        if kind is ProductKind.STRONG:
            other += np.eye(p1)
        G = np.einsum("aibj,ab->ij", D, other)
        rows, cols = pair_nodes(p2)
    return G[rows, cols] + alpha


def gradient_w1(w1, w2, moments: Moments, kind=ProductKind.KRONECKER,
                alpha1: float = 0.0) -> np.ndarray:
    """Gradient of the objective with respect to the factor-1 weights.

    Entry ``m`` (pair ``(i, j)``) is ``<W2', K[I1, J1]> - <W2', M[I1, J1]> + alpha1``
    with ``M`` the distance transform of ``(L + J)^{-1}`` and ``W2' = W2``
    (Kronecker) or ``W2 + I`` (strong).
    """
    return _factor_gradient(1, w1, w2, moments, kind, alpha1)


def gradient_w2(w1, w2, moments: Moments, kind=ProductKind.KRONECKER,
                alpha2: float = 0.0) -> np.ndarray:
    """Gradient with respect to the factor-2 weights; blocks ``[I2, J2]``, weighted by ``W1'``."""
    return _factor_gradient(2, w1, w2, moments, kind, alpha2)


def _rel_change(new, old) -> float:
    scale = max(float(np.max(np.abs(old), initial=0.0)), 1e-12)
    return float(np.max(np.abs(new - old), initial=0.0)) / scale


def pgd_inner(target: int, state: SolverState, moments: Moments,
              config: SolverConfig) -> SolverState:
    """Projected gradient descent on one factor with the other held fixed.

    The first step tries ``eta = eta0``, later ones the Barzilai-Borwein step
    of the last move; the trial is shrunk by ``config.backtrack`` until the
    projected point keeps ``L + J`` positive definite and does not increase
    the objective.  Updates ``state`` in place and returns it.
    """
    if target not in (1, 2):
        raise ValueError(f"target must be 1 or 2, got {target}")
    kind = config.kind
    a1, a2 = _alphas(config, moments)
    alpha = a1 if target == 1 else a2

    def weights(new):
        return (new, state.w2) if target == 1 else (state.w1, new)

    w = np.array(state.w1 if target == 1 else state.w2, dtype=float)
    f = objective(state.w1, state.w2, moments, config)
    if not state.objective_trace:
        state.objective_trace.append(f)

    eta_start = config.eta0
    w_prev = grad_prev = None
    for _ in range(config.max_inner):
        grad = _factor_gradient(target, *weights(w), moments, kind, alpha)
        if w_prev is not None:
            eta_start = _bb_step(w - w_prev, grad - grad_prev, eta_start)
        eta = eta_start
        for _ in range(MAX_HALVINGS + 1):
            w_new = np.maximum(w - eta * grad, 0.0)
            step = _rel_change(w_new, w)
            if step < config.tol_inner:
                # step is below the stopping resolution: stationary for this factor
                return _finish_inner(state, target, w, f, converged=True)
            try:
                f_new = objective(*weights(w_new), moments, config)
            except DisconnectedProduct:
                f_new = math.inf
            if f_new <= f:
                break
            eta *= config.backtrack
        else:
            raise LineSearchFailure(
                f"no feasible decrease for factor {target} after {MAX_HALVINGS} halvings",
                factor=target,
            )
        w_prev, grad_prev = w, grad
        w, f = w_new, f_new
        state.objective_trace.append(f)
        state.inner_iterations += 1
        if target == 1:
            state.w1 = w
        else:
            state.w2 = w
        if step < config.tol_inner:
            return _finish_inner(state, target, w, f, converged=True)
    return _finish_inner(state, target, w, f, converged=False)


def _bb_step(s, y, fallback: float) -> float:
    """Barzilai-Borwein trial step ``s.s / s.y``; ``fallback`` when curvature is not positive."""
    sy = float(s @ y)
    if sy <= 0:
        return fallback
    return float(np.clip(float(s @ s) / sy, BB_MIN, BB_MAX))


def _finish_inner(state, target, w, f, converged):
    if target == 1:
        state.w1 = w
    else:
        state.w2 = w
    state.termination_reason = "tolerance" if converged else "max_iterations"
    return state


def _rebalance(state: SolverState, moments: Moments, config: SolverConfig) -> None:
    """Move along ``(a w1, w2 / a)`` to the penalty-minimizing scale.

    The Kronecker product, hence every term but the penalty, is unchanged along
    that curve, and alternating steps only drift along it very slowly.
    """
    a1, a2 = _alphas(config, moments)
    s1, s2 = float(state.w1.sum()), float(state.w2.sum())
    if min(a1, a2, s1, s2) <= 0:
        return
    a = math.sqrt((a2 * s2) / (a1 * s1))
    w1, w2 = state.w1 * a, state.w2 / a
    f_new = objective(w1, w2, moments, config)
    if f_new <= state.objective_trace[-1]:
        state.w1, state.w2 = w1, w2
        state.objective_trace.append(f_new)


def ksgl_solve(data, config: SolverConfig | None = None, *, p1: int | None = None,
               p2: int | None = None, init=None) -> SolverState:
    """Learn both factor graphs by alternating projected gradient descent.

    Parameters
    ----------
    data : Dataset, ndarray of shape (n, p1*p2), or Moments
        Signals (vectorized with ``(i1, i2) -> i1 * p2 + i2``) or precomputed
        moments.  Factor sizes come from ``data.spec`` when available,
        otherwise from ``p1``/``p2``.
    config : SolverConfig, optional
    init : tuple of arrays, optional
        Starting ``(w1, w2)``; defaults to ``1/p1`` and ``1/p2`` everywhere.

    Returns
    -------
    SolverState
    """
    config = SolverConfig() if config is None else config
    spec = getattr(data, "spec", None)
    if spec is not None:
        if p1 is not None and (p1, p2) != (spec.p1, spec.p2):
            raise ValueError(f"p1/p2 ({p1}, {p2}) disagree with dataset spec {spec}")
        p1, p2 = spec.p1, spec.p2
    moments = data if isinstance(data, Moments) else Moments.from_samples(data)
    if p1 is None or p2 is None:
        raise ValueError("factor sizes p1 and p2 are required")
    if p1 * p2 != moments.p:
        raise ValueError(f"p1 * p2 = {p1 * p2} does not match signal dimension {moments.p}")

    if init is None:
        w1 = np.full(p1 * (p1 - 1) // 2, 1.0 / p1)
        w2 = np.full(p2 * (p2 - 1) // 2, 1.0 / p2)
    else:
        w1, w2 = (np.array(_as_vec(w), dtype=float) for w in init)
    state = SolverState(w1, w2)
    # raises DisconnectedProduct up front for an infeasible start
    state.objective_trace.append(objective(w1, w2, moments, config))

    for sweep in range(1, config.max_outer + 1):
        prev1, prev2 = state.w1.copy(), state.w2.copy()
        try:
            pgd_inner(1, state, moments, config)
            pgd_inner(2, state, moments, config)
        except LineSearchFailure as exc:
            exc.sweep = sweep
            state.termination_reason = "line_search_failure"
            exc.args = (f"outer sweep {sweep}: {exc.args[0]}",)
            exc.state = state
            raise
        if config.kind is ProductKind.KRONECKER:
            _rebalance(state, moments, config)
        state.outer_sweeps = sweep
        if max(_rel_change(state.w1, prev1), _rel_change(state.w2, prev2)) < config.tol_outer:
            state.converged = True
            state.termination_reason = "tolerance"
            return state
    state.converged = False
    state.termination_reason = "max_iterations"
    return state
