"""Exact offline Bayesian changepoint segmentation.

Block evidences for exponential-family observation models feed exact
dynamic programming over contiguous partitions, yielding evidences,
segment-count posteriors, boundary marginals, Bayes regression curves, and
joint MAP segmentations, with shared-boundary pooling, latent-group EM,
non-conjugate block approximations, and posterior-predictive scoring
layered on top.
"""

from ._kernels import ACTIVE_BACKEND, available_backends
from .data import Dataset, PredictionUnit, Sequence, align_grids, load_sequences, save_sequences
from .engine import (
    DPMessages,
    SegmentationPosterior,
    bayes_curve,
    boundary_event_prob,
    boundary_event_probs,
    boundary_marginal,
    coverage_weights,
    forward_backward,
    posterior_k,
    segment_moments_fixed,
)
from .errors import BayesBreakError, ConfigError, InputError, NumericalError, VerificationError
from .families import (
    BetaObsFamily,
    BinomialFamily,
    BlockEvidenceTable,
    BlockResult,
    BlockSummaries,
    GaussianFamily,
    PoissonFamily,
    betaobs_block,
    binomial_block,
    gaussian_block,
    poisson_block,
    precompute_blocks,
    resolve_family,
)
from .fit import FitResult, PriorSpec, fit_sequence
from .mapseg import MapResult, backtrack, map_segmentation, maxsum_forward, select_k_map
from .mixture import EmConfig, MixtureState, Template, em_fit, estep, mstep, template_loglik
from .oracle import brute_posterior, count_boundaries, enumerate_boundaries
from .pooling import PooledTable, fit_known_groups, fit_pooled, pool_evidences
from .predict import (
    ExportedModel,
    PredictionResult,
    predict_bayes_signal,
    predict_map_signal,
    rescore_by_resegmentation,
    score_pointwise,
    score_units,
    score_vector_response,
    segment_predictive,
)
from .priors import CountPrior, LengthFactor, PriorNormalizers, compute_normalizers, sample_renewal

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "available_backends",
    "Sequence",
    "Dataset",
    "PredictionUnit",
    "align_grids",
    "load_sequences",
    "save_sequences",
    "GaussianFamily",
    "PoissonFamily",
    "BinomialFamily",
    "BetaObsFamily",
    "BlockSummaries",
    "BlockResult",
    "BlockEvidenceTable",
    "gaussian_block",
    "poisson_block",
    "binomial_block",
    "betaobs_block",
    "precompute_blocks",
    "resolve_family",
    "LengthFactor",
    "CountPrior",
    "PriorNormalizers",
    "compute_normalizers",
    "sample_renewal",
    "DPMessages",
    "SegmentationPosterior",
    "forward_backward",
    "posterior_k",
    "boundary_marginal",
    "boundary_event_prob",
    "boundary_event_probs",
    "bayes_curve",
    "coverage_weights",
    "segment_moments_fixed",
    "MapResult",
    "maxsum_forward",
    "backtrack",
    "select_k_map",
    "map_segmentation",
    "PooledTable",
    "pool_evidences",
    "fit_pooled",
    "fit_known_groups",
    "Template",
    "MixtureState",
    "EmConfig",
    "em_fit",
    "estep",
    "mstep",
    "template_loglik",
    "ExportedModel",
    "PredictionResult",
    "segment_predictive",
    "score_pointwise",
    "score_units",
    "score_vector_response",
    "predict_map_signal",
    "predict_bayes_signal",
    "rescore_by_resegmentation",
    "enumerate_boundaries",
    "count_boundaries",
    "brute_posterior",
    "PriorSpec",
    "FitResult",
    "fit_sequence",
    "BayesBreakError",
    "InputError",
    "ConfigError",
    "NumericalError",
    "VerificationError",
]
