import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kronlearn.graphrep import (
    ProductKind,
    ProductSpec,
    WeightVector,
    adj_adjoint,
    adjacency_from_weights,
    block_indices_factor1,
    block_indices_factor2,
    compose_product,
    degrees,
    lap_adjoint,
    laplacian_from_weights,
    n_pairs,
    pair_from_index,
    pair_index,
    read_graph_csv,
    write_graph_csv,
)


def brute_pair_table(p):
    """1-based pair -> index by walking columns j = 1..p-1, rows i = j+1..p."""
    table, m = {}, 0
    for j in range(1, p):
        for i in range(j + 1, p + 1):
            m += 1
            table[(i, j)] = m
    return table


def brute_product_weights(w1, w2, kind):
    """Product weights from the edge rule on node tuples, no matrix algebra."""
    p1, p2 = w1.p, w2.p
    t1, t2 = brute_pair_table(p1), brute_pair_table(p2)

    def fw(table, w, a, b):
        if a == b:
            return None
        return w.w[table[(max(a, b), min(a, b))] - 1]

    p = p1 * p2
    out = np.zeros(n_pairs(p))
    tp = brute_pair_table(p)
    nodes = [(a, b) for a in range(1, p1 + 1) for b in range(1, p2 + 1)]
    for (u, v) in itertools.combinations(range(p), 2):
        (i1, i2), (j1, j2) = nodes[u], nodes[v]
        a, b = fw(t1, w1, i1, j1), fw(t2, w2, i2, j2)
        weight = 0.0
        if a is not None and b is not None:
            weight += a * b
        if kind == "strong":
            if i2 == j2 and a is not None:
                weight += a
            if i1 == j1 and b is not None:
                weight += b
        out[tp[(v + 1, u + 1)] - 1] = weight
    return out


class TestPairIndex:
    @pytest.mark.parametrize("i,j,p,expected", [(2, 1, 3, 1), (3, 2, 4, 4), (7, 6, 7, 21)])
    def test_examples(self, i, j, p, expected):
        assert pair_index(i, j, p) == expected

    @pytest.mark.parametrize("p", range(2, 9))
    def test_last_pair_and_bijection(self, p):
        table = brute_pair_table(p)
        assert pair_index(p, p - 1, p) == n_pairs(p)
        for (i, j), m in table.items():
            assert pair_index(i, j, p) == m
            assert pair_from_index(m, p) == (i, j)

    @pytest.mark.parametrize("i,j,p", [(1, 1, 3), (1, 2, 3), (4, 1, 3), (2, 0, 3)])
    def test_rejects(self, i, j, p):
        with pytest.raises(ValueError):
            pair_index(i, j, p)


class TestWeightVector:
    def test_rejects_negative_and_wrong_length(self):
        with pytest.raises(ValueError):
            WeightVector(3, [1, -1, 0])
        with pytest.raises(ValueError):
            WeightVector(3, [1, 1])
        with pytest.raises(ValueError):
            WeightVector(1, [])

    def test_immutable(self):
        wv = WeightVector(3, [1, 0, 2])
        with pytest.raises(ValueError):
            wv.w[0] = 5


class TestOperators:
    def test_adjacency_examples(self):
        np.testing.assert_array_equal(
            adjacency_from_weights(WeightVector(3, [1, 0, 2])),
            [[0, 1, 0], [1, 0, 2], [0, 2, 0]])
        np.testing.assert_array_equal(adjacency_from_weights(WeightVector(2, [0])), np.zeros((2, 2)))
        np.testing.assert_array_equal(adjacency_from_weights(WeightVector(2, [5])), [[0, 5], [5, 0]])

    def test_laplacian_examples(self):
        np.testing.assert_array_equal(
            laplacian_from_weights(WeightVector(3, [1, 0, 2])),
            [[1, -1, 0], [-1, 3, -2], [0, -2, 2]])
        np.testing.assert_array_equal(laplacian_from_weights(WeightVector(2, [1])),
                                      [[1, -1], [-1, 1]])

    def test_adjoint_examples(self):
        np.testing.assert_array_equal(adj_adjoint([[0, 3], [3, 0]]), [3])
        np.testing.assert_array_equal(adj_adjoint(np.eye(3)), [0, 0, 0])
        np.testing.assert_array_equal(adj_adjoint([[0, 1], [5, 0]]), [3])
        np.testing.assert_array_equal(lap_adjoint(np.eye(3)), [2, 2, 2])
        np.testing.assert_array_equal(lap_adjoint([[2, 1], [1, 2]]), [2])

    def test_degrees_examples(self):
        np.testing.assert_array_equal(degrees(WeightVector(3, [1, 0, 2])), [1, 3, 2])
        np.testing.assert_array_equal(degrees(WeightVector(4, np.zeros(6))), np.zeros(4))
        np.testing.assert_array_equal(degrees(WeightVector(3, np.ones(3))), [2, 2, 2])

    def test_adjoint_identities_brute_force(self):
        rng = np.random.default_rng(0)
        for p in range(2, 7):
            table = brute_pair_table(p)
            for _ in range(5):
                w = rng.standard_normal(n_pairs(p))
                Q = rng.standard_normal((p, p))
                # <L w, Q> by summing each edge's four Laplacian entries against Q
                lhs = 0.0
                for (i, j), m in table.items():
                    a, b = i - 1, j - 1
                    lhs += w[m - 1] * (Q[a, a] + Q[b, b] - Q[a, b] - Q[b, a])
                assert np.isclose(lhs, np.sum(laplacian_from_weights(w) * Q), rtol=1e-12)
                assert np.isclose(lhs, w @ lap_adjoint(Q), rtol=1e-12)

    def test_lap_adjoint_of_laplacian_is_attractive(self):
        for p in range(2, 6):
            for m in range(n_pairs(p)):
                e = np.zeros(n_pairs(p))
                e[m] = 1
                out = lap_adjoint(laplacian_from_weights(e))
                assert np.all(out >= 0)
                assert out[m] == 4


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8).flatmap(
    lambda p: arrays(np.float64, n_pairs(p), elements=st.floats(0, 10, allow_nan=False))))
def test_roundtrips_and_laplacian_structure(w):
    wv = WeightVector.from_vector(w)
    W, L = adjacency_from_weights(wv), laplacian_from_weights(wv)
    np.testing.assert_array_equal(adj_adjoint(W), wv.w)
    np.testing.assert_array_equal(L, np.diag(degrees(wv)) - W)
    np.testing.assert_allclose(L @ np.ones(wv.p), 0, atol=1e-12)
    assert np.linalg.eigvalsh(L).min() > -1e-9
    assert np.isclose(degrees(wv).sum(), 2 * wv.w.sum())
    assert WeightVector.from_adjacency(W) == wv


class TestBlocks:
    def test_examples(self):
        spec = ProductSpec(2, 3)
        I1, J1 = block_indices_factor1(2, 1, spec)
        assert list(I1) == [4, 5, 6] and list(J1) == [1, 2, 3]
        I2, J2 = block_indices_factor2(2, 1, spec)
        assert list(I2) == [2, 5] and list(J2) == [1, 4]

    def test_rejects_out_of_range(self):
        spec = ProductSpec(2, 3)
        with pytest.raises(ValueError):
            block_indices_factor1(3, 1, spec)
        with pytest.raises(ValueError):
            block_indices_factor2(4, 1, spec)

    @pytest.mark.parametrize("p1,p2", [(a, b) for a in range(2, 5) for b in range(2, 5)])
    def test_tiling(self, p1, p2):
        """Every product pair with distinct factor-1 nodes sits in exactly one
        factor-1 block (and likewise for factor 2)."""
        spec = ProductSpec(p1, p2)
        nodes = [(a, b) for a in range(1, p1 + 1) for b in range(1, p2 + 1)]
        cover1, cover2 = {}, {}
        for i, j in itertools.combinations(range(1, p1 + 1), 2):
            I, J = block_indices_factor1(j, i, spec)
            for u in I:
                for v in J:
                    key = frozenset((u, v))
                    cover1[key] = cover1.get(key, 0) + 1
        for i, j in itertools.combinations(range(1, p2 + 1), 2):
            I, J = block_indices_factor2(j, i, spec)
            for u in I:
                for v in J:
                    key = frozenset((u, v))
                    cover2[key] = cover2.get(key, 0) + 1
        for u, v in itertools.combinations(range(1, spec.p + 1), 2):
            (a1, a2), (b1, b2) = nodes[u - 1], nodes[v - 1]
            key = frozenset((u, v))
            assert cover1.get(key, 0) == (1 if a1 != b1 else 0)
            assert cover2.get(key, 0) == (1 if a2 != b2 else 0)


class TestCompose:
    def test_k2_by_k2(self):
        kron = compose_product(WeightVector(2, [1]), WeightVector(2, [1]), "kronecker")
        W = kron.adjacency()
        edges = {(i + 1, j + 1) for i, j in zip(*np.nonzero(np.triu(W)))}
        assert edges == {(1, 4), (2, 3)}
        assert np.all(W[W > 0] == 1)
        strong = compose_product(WeightVector(2, [1]), WeightVector(2, [1]), "strong")
        np.testing.assert_array_equal(strong.w, np.ones(6))

    def test_scalar_product(self):
        w = compose_product(WeightVector(2, [2]), WeightVector(2, [3]), ProductKind.KRONECKER).w
        assert set(w[w > 0]) == {6.0}

    @pytest.mark.parametrize("kind", ["kronecker", "strong"])
    @pytest.mark.parametrize("p1,p2", [(a, b) for a in range(2, 5) for b in range(2, 5)])
    def test_matches_brute_force(self, kind, p1, p2):
        rng = np.random.default_rng(p1 * 10 + p2)
        w1 = WeightVector(p1, rng.uniform(0, 2, n_pairs(p1)) * (rng.random(n_pairs(p1)) < 0.7))
        w2 = WeightVector(p2, rng.uniform(0, 2, n_pairs(p2)) * (rng.random(n_pairs(p2)) < 0.7))
        got = compose_product(w1, w2, kind).w
        np.testing.assert_allclose(got, brute_product_weights(w1, w2, kind), rtol=0, atol=1e-15)

    def test_kronecker_laplacian_identity(self):
        rng = np.random.default_rng(3)
        for p1, p2 in itertools.product(range(2, 5), repeat=2):
            w1 = WeightVector(p1, rng.uniform(0, 1, n_pairs(p1)))
            w2 = WeightVector(p2, rng.uniform(0, 1, n_pairs(p2)))
            L = laplacian_from_weights(compose_product(w1, w2))
            expected = (np.diag(np.kron(degrees(w1), degrees(w2)))
                        - np.kron(adjacency_from_weights(w1), adjacency_from_weights(w2)))
            np.testing.assert_allclose(L, expected, atol=1e-14)


class TestProductSpec:
    def test_flat_index(self):
        spec = ProductSpec(3, 4)
        assert spec.flat_index(1, 1) == 1
        assert spec.flat_index(2, 3) == 7
        assert spec.flat_index(3, 4) == 12

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            ProductSpec(1, 3)


class TestGraphFiles:
    def test_roundtrip(self, tmp_path):
        wv = WeightVector(4, [0.5, 0, 1.25, 0, 2.0 / 3.0, 0.1])
        path = tmp_path / "g.csv"
        write_graph_csv(wv, path)
        assert path.read_text().splitlines()[0] == "i,j,weight"
        assert json.loads((tmp_path / "g.json").read_text()) == {"p": 4}
        assert read_graph_csv(path) == wv

    @pytest.mark.parametrize("body", ["2,1,1.0\n2,1,0.5\n", "1,2,1.0\n", "1,1,1.0\n"])
    def test_rejects_bad_pairs(self, tmp_path, body):
        path = tmp_path / "g.csv"
        path.write_text("i,j,weight\n" + body)
        (tmp_path / "g.json").write_text('{"p": 3}')
        with pytest.raises(ValueError):
            read_graph_csv(path)
