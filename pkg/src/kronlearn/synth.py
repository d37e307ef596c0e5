"""Seeded factor-graph generators and smooth (IGMRF) signal sampling.

Random streams
--------------
Every replicate seed fans out into independent named streams so that each
piece can be regenerated on its own:

``graph1`` / ``graph2``
    topology of factor 1 / factor 2 (including connectivity retries),
``weights1`` / ``weights2``
    edge weights of factor 1 / factor 2,
``signal``
    IGMRF samples; further keyed by the sample count ``n``.

A stream is ``numpy.random.default_rng(SeedSequence(seed, spawn_key=(id, ...)))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DisconnectedGraphError, GenerationError
from .graphrep import (
    ProductKind,
    ProductSpec,
    WeightVector,
    compose_product,
    is_connected,
    n_pairs,
    pair_index,
    pair_nodes,
)

MAX_RETRIES = 1000
WEIGHT_LOW, WEIGHT_HIGH = 0.1, 2.0
EIG_RTOL = 1e-10

STREAMS = {"graph1": 1, "graph2": 2, "weights1": 3, "weights2": 4, "signal": 5}


def make_rng(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """Generator for a named stream of ``seed``; extra integer ``keys`` subdivide it."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[stream], *map(int, keys)))
    return np.random.default_rng(ss)


# --------------------------------------------------------------------------
# Graph models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ErdosRenyi:
    prob: float = 0.3

    def validate(self, p: int) -> None:
        if not 0 < self.prob <= 1:
            raise ValueError(f"ErdosRenyi prob must lie in (0, 1], got {self.prob}")

    def topology(self, p: int, rng: np.random.Generator) -> np.ndarray:
        return rng.random(n_pairs(p)) < self.prob


@dataclass(frozen=True)
class BarabasiAlbert:
    m: int = 2
    m0: int = 2

    def validate(self, p: int) -> None:
        if not 1 <= self.m <= self.m0:
            raise ValueError(f"BarabasiAlbert needs 1 <= m <= m0, got m={self.m}, m0={self.m0}")
        if self.m0 > p:
            raise ValueError(f"BarabasiAlbert m0={self.m0} exceeds node count {p}")

    def topology(self, p: int, rng: np.random.Generator) -> np.ndarray:
        adj = np.zeros((p, p), dtype=bool)
        # seed graph: the m0 initial nodes fully connected (a single edge for m0 = 2)
        adj[: self.m0, : self.m0] = True
        np.fill_diagonal(adj, False)
        deg = adj.sum(axis=1).astype(float)
        for new in range(self.m0, p):
            attach = np.maximum(deg[:new], 1.0)
            targets = rng.choice(new, size=self.m, replace=False, p=attach / attach.sum())
            adj[new, targets] = adj[targets, new] = True
            deg[targets] += 1
            deg[new] = self.m
        rows, cols = pair_nodes(p)
        return adj[rows, cols]


@dataclass(frozen=True)
class WattsStrogatz:
    degree: int = 2
    rewire_prob: float = 0.1

    def validate(self, p: int) -> None:
        if self.degree < 2 or self.degree % 2:
            raise ValueError(f"WattsStrogatz degree must be even and >= 2, got {self.degree}")
        if self.degree >= p:
            raise ValueError(f"WattsStrogatz degree {self.degree} must be below node count {p}")
        if not 0 <= self.rewire_prob <= 1:
            raise ValueError(f"rewire_prob must lie in [0, 1], got {self.rewire_prob}")

    def topology(self, p: int, rng: np.random.Generator) -> np.ndarray:
        adj = np.zeros((p, p), dtype=bool)
        ring = [(u, (u + k) % p) for k in range(1, self.degree // 2 + 1) for u in range(p)]
        for u, v in ring:
            adj[u, v] = adj[v, u] = True
        for u, v in ring:
            if rng.random() >= self.rewire_prob:
                continue
            candidates = np.flatnonzero(~adj[u])
            candidates = candidates[candidates != u]
            if candidates.size == 0:
                continue
            target = rng.choice(candidates)
            adj[u, v] = adj[v, u] = False
            adj[u, target] = adj[target, u] = True
        rows, cols = pair_nodes(p)
        return adj[rows, cols]


@dataclass(frozen=True)
class Grid:
    rows: int
    cols: int

    def validate(self, p: int) -> None:
        if self.rows < 1 or self.cols < 1 or self.rows * self.cols != p:
            raise ValueError(f"Grid({self.rows}, {self.cols}) does not have {p} nodes")

    def topology(self, p: int, rng: np.random.Generator) -> np.ndarray:
        mask = np.zeros(n_pairs(p), dtype=bool)
        for r in range(self.rows):
            for c in range(self.cols):
                node = r * self.cols + c + 1
                if c + 1 < self.cols:
                    mask[pair_index(node + 1, node, p) - 1] = True
                if r + 1 < self.rows:
                    mask[pair_index(node + self.cols, node, p) - 1] = True
        return mask


GraphModel = ErdosRenyi | BarabasiAlbert | WattsStrogatz | Grid

_MODEL_NAMES = {
    "erdos_renyi": ErdosRenyi,
    "barabasi_albert": BarabasiAlbert,
    "watts_strogatz": WattsStrogatz,
    "grid": Grid,
}


def model_to_dict(model: GraphModel) -> dict:
    name = next(k for k, v in _MODEL_NAMES.items() if isinstance(model, v))
    return {"name": name, **model.__dict__}


def model_from_dict(d) -> GraphModel:
    """Build a model from ``{"name": ..., **params}`` or a bare name string."""
    if isinstance(d, str):
        d = {"name": d}
    d = dict(d)
    try:
        cls = _MODEL_NAMES[d.pop("name")]
    except KeyError as exc:
        raise ValueError(f"unknown graph model {exc}; expected one of {sorted(_MODEL_NAMES)}")
    return cls(**d)


def generate_factor(model: GraphModel, p: int, rng: np.random.Generator,
                    weight_rng: np.random.Generator | None = None) -> WeightVector:
    """Draw a connected weighted factor graph.

    Disconnected topologies are rejected and redrawn from ``rng``; after
    ``MAX_RETRIES`` failures :class:`GenerationError` is raised.  Each present
    edge receives an independent ``Uniform(0.1, 2)`` weight from
    ``weight_rng`` (defaults to ``rng``).
    """
    model.validate(p)
    weight_rng = rng if weight_rng is None else weight_rng
    for _ in range(MAX_RETRIES):
        mask = model.topology(p, rng)
        if is_connected(mask.astype(float)):
            break
    else:
        raise GenerationError(f"{model!r} gave no connected graph on {p} nodes "
                              f"in {MAX_RETRIES} attempts")
    w = np.zeros(mask.size)
    w[mask] = weight_rng.uniform(WEIGHT_LOW, WEIGHT_HIGH, size=int(mask.sum()))
    return WeightVector(p, w)


def generate_product(model1: GraphModel, model2: GraphModel, spec: ProductSpec,
                     seed: int) -> tuple[WeightVector, WeightVector]:
    """Draw both factors for ``seed`` so that their product graph is connected.

    A Kronecker product of two bipartite factors is disconnected even when
    the factors are not; such draws are rejected (strong products of
    connected factors are always connected).
    """
    g1, g2 = make_rng(seed, "graph1"), make_rng(seed, "graph2")
    r1, r2 = make_rng(seed, "weights1"), make_rng(seed, "weights2")
    for _ in range(MAX_RETRIES):
        w1 = generate_factor(model1, spec.p1, g1, r1)
        w2 = generate_factor(model2, spec.p2, g2, r2)
        if spec.kind is ProductKind.STRONG or is_connected(compose_product(w1, w2, spec.kind)):
            return w1, w2
    raise GenerationError(f"no connected {spec.kind.value} product in {MAX_RETRIES} attempts")


# --------------------------------------------------------------------------
# IGMRF sampling
# --------------------------------------------------------------------------


def pseudo_sqrt_cov(L) -> np.ndarray:
    """Factor ``B`` with ``B @ B.T`` equal to the pseudo-inverse of the Laplacian ``L``.

    Eigenvalues below ``1e-10 * max eigenvalue`` are treated as zero; more than
    one such eigenvalue means ``L`` is disconnected.
    """
    L = np.asarray(L, dtype=float)
    evals, evecs = np.linalg.eigh(L)
    cutoff = EIG_RTOL * max(evals[-1], 0.0)
    keep = evals > cutoff
    if np.count_nonzero(~keep) > 1:
        raise DisconnectedGraphError(
            f"Laplacian has {np.count_nonzero(~keep)} zero eigenvalues; graph is disconnected"
        )
    return evecs[:, keep] / np.sqrt(evals[keep])


@dataclass
class Dataset:
    """``n`` vectorized two-way signals, one per row of ``samples`` (shape ``(n, p1*p2)``)."""

    spec: ProductSpec | None
    samples: np.ndarray
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=float)
        if X.ndim != 2:
            raise ValueError(f"samples must be a 2-D array (n, p), got shape {X.shape}")
        if self.spec is not None and X.shape[1] != self.spec.p:
            raise ValueError(f"samples must have shape (n, {self.spec.p}), got {X.shape}")
        self.samples = X

    @property
    def p(self) -> int:
        return self.samples.shape[1]

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    def as_tensor(self) -> np.ndarray:
        """Samples reshaped to ``(n, p1, p2)``."""
        if self.spec is None:
            raise ValueError("dataset has no product shape")
        return self.samples.reshape(self.n, self.spec.p1, self.spec.p2)

    def sidecar(self) -> dict:
        if self.spec is None:
            raise ValueError("dataset has no product shape; cannot write a sidecar")
        return {
            "p1": self.spec.p1,
            "p2": self.spec.p2,
            "n": self.n,
            "seed": self.seed,
            "model1": self.meta.get("model1"),
            "model2": self.meta.get("model2"),
            "kind": self.spec.kind.value,
        }

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for row in self.samples:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        path.with_suffix(".json").write_text(json.dumps(self.sidecar(), indent=2) + "\n",
                                             encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        spec = ProductSpec(meta["p1"], meta["p2"], meta.get("kind", "kronecker"))
        rows = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
        X = np.array([[float(v) for v in line.split(",")] for line in rows]).reshape(-1, spec.p)
        if "n" in meta and meta["n"] != X.shape[0]:
            raise ValueError(f"{path}: sidecar says n={meta['n']} but file has {X.shape[0]} rows")
        return cls(spec, X, meta.get("seed"),
                   {k: meta.get(k) for k in ("model1", "model2") if meta.get(k) is not None})


def sample_igmrf(L, n: int, rng: np.random.Generator, spec: ProductSpec | None = None,
                 seed: int | None = None) -> Dataset:
    """Draw ``n`` i.i.d. samples ``x = B z`` from ``N(0, pinv(L))``."""
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    B = pseudo_sqrt_cov(L)
    p = B.shape[0]
    if spec is not None and spec.p != p:
        raise ValueError(f"Laplacian is {p}x{p} but spec describes {spec.p} nodes")
    z = rng.standard_normal((n, B.shape[1]))
    return Dataset(spec, z @ B.T, seed)
