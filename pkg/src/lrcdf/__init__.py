"""Low-rank CP models of grid-sampled CDFs.

Fit a rank-constrained CP decomposition to the empirical CDF of a
multivariate sample on a per-dimension cut-off grid, then answer
probabilistic queries (densities, marginals, conditionals, box
probabilities, sampling, imputation, classification) in closed form from
the learned factors.
"""

from .admm import AdmmConfig, fit_admm
from .copula import MarginalTransform, fit_marginal
from .empirical import (
    Dataset,
    EmpiricalCdf,
    build_grid,
    ecdf_at_points,
    empirical_at,
    materialize_empirical,
    read_csv,
)
from .errors import (
    CapacityError,
    ConfigError,
    DegenerateColumnError,
    DivergenceError,
    InsufficientDataError,
    ZeroLikelihoodError,
)
from .inference import (
    BoxQuery,
    box_probability,
    classify,
    conditional_moments,
    density,
    impute,
    log_likelihood,
    marginalize,
    posterior,
    sample,
)
from .model import CpdModel, Grid, ModelMeta
from .projections import isotonic_project, simplex_project, valid_cdf_project
from .sgd import SgdConfig, batch_loss_and_grads, fit_sgd

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "BoxQuery",
    "CapacityError",
    "ConfigError",
    "CpdModel",
    "Dataset",
    "DegenerateColumnError",
    "DivergenceError",
    "EmpiricalCdf",
    "Grid",
    "InsufficientDataError",
    "MarginalTransform",
    "ModelMeta",
    "SgdConfig",
    "ZeroLikelihoodError",
    "batch_loss_and_grads",
    "box_probability",
    "build_grid",
    "classify",
    "conditional_moments",
    "density",
    "ecdf_at_points",
    "empirical_at",
    "fit_admm",
    "fit_marginal",
    "fit_sgd",
    "impute",
    "isotonic_project",
    "log_likelihood",
    "marginalize",
    "materialize_empirical",
    "posterior",
    "read_csv",
    "sample",
    "simplex_project",
    "valid_cdf_project",
]
