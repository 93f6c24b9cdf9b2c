"""Bayesian tensor additive regression with a functional fused elastic net prior.

Each entry of a matrix- or tensor-valued covariate contributes one smooth
component function to an additive model.  A joint prior over the component
coefficients combines a roughness penalty, a fused L2 distance between
lattice neighbors (piecewise structure with jumps), a squared-distance
Laplacian term (spatial smoothness), and a latent norm threshold that prunes
inactive entries.  Posterior inference runs a hybrid chain (Langevin moves
for the coefficients, exact conditional draws for the scales, a truncated
random walk for the threshold); selection and evaluation utilities summarize
the draws into sparse point estimates and standard error metrics.
"""

from .grid import (
    IndexGraph,
    Laplacian,
    TensorShape,
    build_grid_graph,
    devectorize_index,
    laplacian,
    smooth_eigvectors,
    vectorize_index,
)
from .model import (
    Dataset,
    HyperParams,
    ModelState,
    grad_mu_alpha,
    log_likelihood,
    log_posterior,
    log_prior_alpha,
    log_prior_rest,
    smooth_fusion,
    smooth_indicator,
)
from .sampler import (
    ChainConfig,
    LinearFenSamples,
    PosteriorSamples,
    default_init,
    fit_linear_fen,
    gibbs_delta,
    gibbs_sigma2,
    mala_step_alpha,
    mala_step_mu,
    mh_lambda,
    ridge_init,
    run_chain,
)
from .selection import (
    FitResult,
    inclusion_probability,
    metrics,
    point_estimates,
    select_cutoff,
    summarize,
)
from .simulate import (
    ShapeMask,
    SimSetting,
    calibrate_noise,
    generate,
    make_setting,
    rescale_to,
    smooth_field,
    toy_designs,
    toy_generate,
)
from .spline import SplineBasis, basis_from_samples, build_basis, eval_basis
from .tuning import (
    Eps0Calibration,
    Grids,
    TuneResult,
    calibrate_eps0,
    greedy_search,
    snake_order,
)

__all__ = [
    "ChainConfig",
    "Dataset",
    "Eps0Calibration",
    "FitResult",
    "Grids",
    "HyperParams",
    "IndexGraph",
    "Laplacian",
    "LinearFenSamples",
    "ModelState",
    "PosteriorSamples",
    "ShapeMask",
    "SimSetting",
    "SplineBasis",
    "TensorShape",
    "TuneResult",
    "basis_from_samples",
    "build_basis",
    "build_grid_graph",
    "calibrate_eps0",
    "calibrate_noise",
    "default_init",
    "devectorize_index",
    "eval_basis",
    "fit_linear_fen",
    "generate",
    "gibbs_delta",
    "gibbs_sigma2",
    "grad_mu_alpha",
    "greedy_search",
    "inclusion_probability",
    "laplacian",
    "log_likelihood",
    "log_posterior",
    "log_prior_alpha",
    "log_prior_rest",
    "make_setting",
    "mala_step_alpha",
    "mala_step_mu",
    "metrics",
    "mh_lambda",
    "point_estimates",
    "rescale_to",
    "ridge_init",
    "run_chain",
    "select_cutoff",
    "smooth_eigvectors",
    "smooth_field",
    "smooth_fusion",
    "smooth_indicator",
    "snake_order",
    "summarize",
    "toy_designs",
    "toy_generate",
    "vectorize_index",
]
