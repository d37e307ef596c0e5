import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kronlearn import KroneckerGraphLearner
from kronlearn.graphrep import ProductSpec
from kronlearn.solver import ksgl_solve, SolverConfig
from kronlearn.synth import ErdosRenyi, generate_product, make_rng, sample_igmrf
from kronlearn.solver import product_laplacian


@pytest.fixture(scope="module")
def data():
    spec = ProductSpec(4, 3)
    w1, w2 = generate_product(ErdosRenyi(0.5), ErdosRenyi(0.5), spec, 1)
    ds = sample_igmrf(product_laplacian(w1, w2), 300, make_rng(1, "signal", 300), spec)
    return ds.samples


def test_params_roundtrip():
    est = KroneckerGraphLearner(p1=4, p2=3, alpha1=0.1, kind="strong")
    params = est.get_params()
    assert params["alpha1"] == 0.1 and params["kind"] == "strong"
    other = clone(est)
    assert other.get_params() == params
    est.set_params(alpha2=0.5)
    assert est.solver_config().alpha2 == 0.5


def test_fit_matches_solver(data):
    est = KroneckerGraphLearner(p1=4, p2=3, alpha1=0.01, alpha2=0.01).fit(data)
    state = ksgl_solve(data, SolverConfig(alpha1=0.01, alpha2=0.01), p1=4, p2=3)
    np.testing.assert_array_equal(est.w1_, state.w1)
    assert est.laplacian_.shape == (12, 12)
    assert est.weights_.size == 66
    assert est.objective_trace_ == state.objective_trace


def test_tensor_input(data):
    a = KroneckerGraphLearner(p1=4, p2=3, alpha1=0.01, alpha2=0.01).fit(data)
    b = KroneckerGraphLearner(p1=4, p2=3, alpha1=0.01, alpha2=0.01).fit(data.reshape(-1, 4, 3))
    np.testing.assert_array_equal(a.w2_, b.w2_)


def test_default_alpha_reported(data):
    est = KroneckerGraphLearner(p1=4, p2=3).fit(data)
    assert est.alpha1_ > 0 and est.alpha1_ == est.alpha2_


def test_score_prefers_fitted_graph(data):
    est = KroneckerGraphLearner(p1=4, p2=3, alpha1=0.01, alpha2=0.01).fit(data)
    worse = clone(est).fit(data[:5])
    assert est.score(data) > worse.score(data)


def test_errors(data):
    with pytest.raises(NotFittedError):
        KroneckerGraphLearner(p1=4, p2=3).score(data)
    with pytest.raises(ValueError):
        KroneckerGraphLearner(p1=3, p2=3).fit(data)
