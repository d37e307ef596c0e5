"""Learning Kronecker- and strong-product graph Laplacians from smooth signals."""

from .estimator import KroneckerGraphLearner
from .exceptions import (
    DisconnectedGraphError,
    DisconnectedProduct,
    GenerationError,
    KronlearnError,
    LineSearchFailure,
)
from .graphrep import (
    ProductKind,
    ProductSpec,
    WeightVector,
    adj_adjoint,
    adjacency_from_weights,
    compose_product,
    degrees,
    lap_adjoint,
    laplacian_from_weights,
    pair_index,
)
from .metrics import EvalReport, evaluate, fit_rate, pr_auc, rel_err
from .solver import (
    Moments,
    SolverConfig,
    SolverState,
    distance_matrix,
    gradient_w1,
    gradient_w2,
    ksgl_solve,
    objective,
    pgd_inner,
    product_laplacian,
    sample_covariance,
)
from .synth import (
    BarabasiAlbert,
    Dataset,
    ErdosRenyi,
    Grid,
    WattsStrogatz,
    generate_factor,
    generate_product,
    make_rng,
    pseudo_sqrt_cov,
    sample_igmrf,
)

__version__ = "0.1.0"
