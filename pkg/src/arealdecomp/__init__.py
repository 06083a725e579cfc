"""Bayesian multiresolution decomposition of areal count data.

The package resamples a latent log-relative-risk field for region counts
under a hierarchical Poisson model, decomposes every posterior draw into
scale-dependent details with intrinsic-GMRF penalty smoothers, and
summarizes the details as posterior means and pointwise probability maps.
"""

from .credibility import ProbabilityMap, pointwise_probability_map, posterior_mean
from .decompose import (
    DetailEnsemble,
    DetailSet,
    ScaleSet,
    decompose_samples,
    details,
    smooth,
    smooth_infinity,
)
from .diagnostics import (
    TraceSummary,
    acceptance_rate,
    effective_sample_size,
    geweke_z,
    summarize_chain,
)
from .graph import (
    AdjacencyFormatError,
    AdjacencyGraph,
    build_igmrf1_precision,
    build_igmrf2_grid_precision,
    connected_components,
    read_adjacency,
)
from .sampler import (
    ChainState,
    CountData,
    Hyperparams,
    PosteriorSamples,
    log_likelihood,
    reconstruct_field,
    run_chain,
    step_eta,
    step_kappa_u,
    step_kappa_v,
    step_u,
)
from .sparsela import (
    CholeskyFactor,
    NotPositiveDefiniteError,
    ShiftedFactorizer,
    SparseSymmetric,
    cholesky,
    quad_form,
    sample_gaussian_precision,
    scale_and_shift,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AdjacencyFormatError",
    "AdjacencyGraph",
    "ChainState",
    "CholeskyFactor",
    "CountData",
    "DetailEnsemble",
    "DetailSet",
    "Hyperparams",
    "NotPositiveDefiniteError",
    "PosteriorSamples",
    "ProbabilityMap",
    "ScaleSet",
    "ShiftedFactorizer",
    "SparseSymmetric",
    "TraceSummary",
    "acceptance_rate",
    "build_igmrf1_precision",
    "build_igmrf2_grid_precision",
    "cholesky",
    "connected_components",
    "decompose_samples",
    "details",
    "effective_sample_size",
    "geweke_z",
    "log_likelihood",
    "pointwise_probability_map",
    "posterior_mean",
    "quad_form",
    "read_adjacency",
    "reconstruct_field",
    "run_chain",
    "sample_gaussian_precision",
    "scale_and_shift",
    "smooth",
    "smooth_infinity",
    "solve",
    "step_eta",
    "step_kappa_u",
    "step_kappa_v",
    "step_u",
    "summarize_chain",
]
