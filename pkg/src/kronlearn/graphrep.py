"""Graph representations and the linear maps between them.

Edge weights of an undirected graph on ``p`` nodes are stored half-vectorized:
a vector of length ``p(p-1)/2`` holding the strict lower triangle of the
adjacency matrix in column-major order.  With 1-based nodes, the pair
``(i, j)``, ``i > j``, lives at position ``i - j + (j - 1)(2p - j)/2``.

Product graphs on ``p1 * p2`` nodes use the flattening
``(i1, i2) -> (i1 - 1) * p2 + i2``, which is the index layout of
:func:`numpy.kron`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np


class ProductKind(str, enum.Enum):
    KRONECKER = "kronecker"
    STRONG = "strong"

    @classmethod
    def parse(cls, value) -> "ProductKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown product kind {value!r}; expected 'kronecker' or 'strong'"
            ) from None


def n_pairs(p: int) -> int:
    return p * (p - 1) // 2


def n_nodes(m: int) -> int:
    """Node count ``p`` such that ``p(p-1)/2 == m``."""
    p = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if n_pairs(p) != m:
        raise ValueError(f"{m} is not a triangular number p(p-1)/2")
    return p


@lru_cache(maxsize=64)
def _pair_arrays(p: int):
    # triu_indices enumerates row-major upper pairs (j, i), j < i; transposed,
    # that is exactly the column-major lower-triangular order.
    j, i = np.triu_indices(p, k=1)
    i.setflags(write=False)
    j.setflags(write=False)
    return i, j


def pair_nodes(p: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based ``(rows, cols)`` of every pair in weight-vector order (rows > cols)."""
    return _pair_arrays(p)


def pair_index(i: int, j: int, p: int) -> int:
    """1-based weight-vector position of the 1-based node pair ``(i, j)``, ``i > j``.

    >>> pair_index(3, 2, 4)
    4
    """
    if not (1 <= j < i <= p):
        raise ValueError(f"pair_index requires 1 <= j < i <= p, got i={i}, j={j}, p={p}")
    return i - j + (j - 1) * (2 * p - j) // 2


def pair_from_index(m: int, p: int) -> tuple[int, int]:
    """Inverse of :func:`pair_index`."""
    if not 1 <= m <= n_pairs(p):
        raise ValueError(f"index {m} out of range for p={p}")
    rows, cols = _pair_arrays(p)
    return int(rows[m - 1]) + 1, int(cols[m - 1]) + 1


@dataclass(frozen=True)
class WeightVector:
    """Nonnegative half-vectorized edge weights of a graph on ``p`` nodes."""

    p: int
    w: np.ndarray

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"node count must be an integer >= 2, got {self.p}")
        w = np.array(self.w, dtype=float).ravel()
        if w.size != n_pairs(self.p):
            raise ValueError(
                f"weight vector for p={self.p} needs {n_pairs(self.p)} entries, got {w.size}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "w", w)

    @classmethod
    def from_vector(cls, w) -> "WeightVector":
        w = np.asarray(w, dtype=float).ravel()
        return cls(n_nodes(w.size), w)

    @classmethod
    def from_adjacency(cls, W) -> "WeightVector":
        W = as_sym_matrix(W)
        rows, cols = pair_nodes(W.shape[0])
        return cls(W.shape[0], W[rows, cols])

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self.w))

    def adjacency(self) -> np.ndarray:
        return adjacency_from_weights(self)

    def laplacian(self) -> np.ndarray:
        return laplacian_from_weights(self)

    def __len__(self):
        return self.w.size

    def __eq__(self, other):
        if not isinstance(other, WeightVector):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.w, other.w)

    __hash__ = None


@dataclass(frozen=True)
class ProductSpec:
    p1: int
    p2: int
    kind: ProductKind = ProductKind.KRONECKER

    def __post_init__(self):
        if self.p1 < 2 or self.p2 < 2:
            raise ValueError(f"factor sizes must be >= 2, got p1={self.p1}, p2={self.p2}")
        object.__setattr__(self, "p1", int(self.p1))
        object.__setattr__(self, "p2", int(self.p2))
        object.__setattr__(self, "kind", ProductKind.parse(self.kind))

    @property
    def p(self) -> int:
        return self.p1 * self.p2

    def flat_index(self, i1: int, i2: int) -> int:
        """1-based product node index of the 1-based factor nodes ``(i1, i2)``."""
        if not (1 <= i1 <= self.p1 and 1 <= i2 <= self.p2):
            raise ValueError(f"node ({i1}, {i2}) out of range for {self.p1}x{self.p2}")
        return (i1 - 1) * self.p2 + i2


def as_sym_matrix(Q, *, name: str = "matrix", tol: float = 0.0) -> np.ndarray:
    """Validate a square symmetric matrix and return it as a float array.

    Entries within ``tol`` of symmetric are snapped to the exact average.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"{name} must be square, got shape {Q.shape}")
    if not np.array_equal(Q, Q.T):
        if tol > 0 and np.allclose(Q, Q.T, rtol=0, atol=tol):
            return 0.5 * (Q + Q.T)
        raise ValueError(f"{name} must be symmetric")
    return Q


def _weights(wv) -> np.ndarray:
    if isinstance(wv, WeightVector):
        return wv.w
    return np.asarray(wv, dtype=float).ravel()


def adjacency_from_weights(wv) -> np.ndarray:
    """Symmetric adjacency matrix with ``W[i, j] = W[j, i] = w_m`` (positive sign).

    Accepts a :class:`WeightVector` or any real vector of triangular length, so
    the operator can be applied to signed inputs as well.
    """
    w = _weights(wv)
    p = n_nodes(w.size)
    rows, cols = pair_nodes(p)
    W = np.zeros((p, p))
    W[rows, cols] = w
    W[cols, rows] = w
    return W


def laplacian_from_weights(wv) -> np.ndarray:
    W = adjacency_from_weights(wv)
    L = -W
    L[np.diag_indices_from(L)] = W.sum(axis=1)
    return L


def degrees(wv) -> np.ndarray:
    return adjacency_from_weights(wv).sum(axis=1)


def adj_adjoint(Q) -> np.ndarray:
    """``0.5 * (Q[i, j] + Q[j, i])`` for every pair, in weight-vector order."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Q.shape}")
    rows, cols = pair_nodes(Q.shape[0])
    return 0.5 * (Q[rows, cols] + Q[cols, rows])


def lap_adjoint(Q) -> np.ndarray:
    """``Q[i, i] - Q[i, j] - Q[j, i] + Q[j, j]`` for every pair."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Q.shape}")
    rows, cols = pair_nodes(Q.shape[0])
    d = np.diag(Q)
    return d[rows] - Q[rows, cols] - Q[cols, rows] + d[cols]


def block_indices_factor1(i: int, j: int, spec: ProductSpec):
    """Product index sets ``(I1, J1)`` for the factor-1 pair ``(i, j)`` (1-based).

    ``[Q]_{I1, J1}`` is the ``p2 x p2`` block of a product-sized matrix coupling
    every copy of node ``i`` with every copy of node ``j``.
    """
    for node in (i, j):
        if not 1 <= node <= spec.p1:
            raise ValueError(f"factor-1 node {node} out of range 1..{spec.p1}")
    base = np.arange(1, spec.p2 + 1)
    return (i - 1) * spec.p2 + base, (j - 1) * spec.p2 + base


def block_indices_factor2(i: int, j: int, spec: ProductSpec):
    """Product index sets ``(I2, J2)`` for the factor-2 pair ``(i, j)`` (1-based)."""
    for node in (i, j):
        if not 1 <= node <= spec.p2:
            raise ValueError(f"factor-2 node {node} out of range 1..{spec.p2}")
    stride = np.arange(spec.p1) * spec.p2
    return stride + i, stride + j


def product_adjacency(w1, w2, kind=ProductKind.KRONECKER) -> np.ndarray:
    W1 = adjacency_from_weights(w1)
    W2 = adjacency_from_weights(w2)
    kind = ProductKind.parse(kind)
    W = np.kron(W1, W2)
    if kind is ProductKind.STRONG:
        W += np.kron(W1, np.eye(W2.shape[0])) + np.kron(np.eye(W1.shape[0]), W2)
    return W


def compose_product(w1, w2, kind=ProductKind.KRONECKER) -> WeightVector:
    """Edge weights of the Kronecker or strong product of two factor graphs."""
    W = product_adjacency(w1, w2, kind)
    rows, cols = pair_nodes(W.shape[0])
    return WeightVector(W.shape[0], W[rows, cols])


def is_connected(wv) -> bool:
    from scipy.sparse.csgraph import connected_components

    W = adjacency_from_weights(wv)
    n_comp, _ = connected_components(W > 0, directed=False)
    return n_comp == 1


# --------------------------------------------------------------------------
# Graph file I/O: CSV with header ``i,j,weight`` plus a ``{"p": int}`` sidecar
# --------------------------------------------------------------------------


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json")


def write_graph_csv(wv: WeightVector, path) -> None:
    path = Path(path)
    rows, cols = pair_nodes(wv.p)
    lines = ["i,j,weight"]
    for m in np.flatnonzero(wv.w > 0):
        lines.append(f"{rows[m] + 1},{cols[m] + 1},{float(wv.w[m])!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sidecar_path(path).write_text(json.dumps({"p": wv.p}) + "\n", encoding="utf-8")


def read_graph_csv(path, p: int | None = None) -> WeightVector:
    path = Path(path)
    if p is None:
        p = int(json.loads(sidecar_path(path).read_text(encoding="utf-8"))["p"])
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip().replace(" ", "") != "i,j,weight":
        raise ValueError(f"{path}: expected header 'i,j,weight'")
    w = np.zeros(n_pairs(p))
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 fields")
        i, j, weight = int(fields[0]), int(fields[1]), float(fields[2])
        if i <= j:
            raise ValueError(f"{path}:{lineno}: pair ({i}, {j}) must have i > j")
        if (i, j) in seen:
            raise ValueError(f"{path}:{lineno}: duplicate pair ({i}, {j})")
        seen.add((i, j))
        w[pair_index(i, j, p) - 1] = weight
    return WeightVector(p, w)
