"""Bayesian estimation of contraceptive supply shares across sectors.

The package fits hierarchical penalized-spline models to sparse survey
observations of the share of modern contraceptive users supplied by the
public, private medical, and other private sectors, producing annual
country and method specific estimates with uncertainty.
"""

from ._version import __version__
from .basis import BasisSet, build_all_bases, build_basis_set, build_knots
from .correlation import TwoStageFit, estimate_correlations, two_stage_fit
from .data import (
    Dataset,
    METHOD_LABELS,
    Observation,
    SECTOR_LABELS,
    parse_observations,
    summarize_se,
)
from .diagnostics import diagnose, ess, rhat, summarize, worst_diagnostics
from .emu import ServiceStat, adjust_users, emu_adjust, parse_service_stats
from .errors import (
    InputOutputError,
    NumericalError,
    ParseError,
    SectorShareError,
    ValidationError,
)
from .kernels import NUMBA_ENABLED
from .model import (
    ParameterState,
    PriorConfig,
    compose_shares,
    latent_curve,
    log_prior,
    reconstruct_betas,
)
from .persist import build_manifest, load_draws, read_manifest, save_draws
from .sampler import PosteriorDraws, SamplerConfig, run_mcmc
from .simulate import SimConfig, simulate_dataset
from .validation import ValidationReport, make_holdout_split, validate_variant
from .variants import FitResult, VARIANTS, fit_variant

__all__ = [
    "BasisSet",
    "Dataset",
    "FitResult",
    "InputOutputError",
    "METHOD_LABELS",
    "NUMBA_ENABLED",
    "NumericalError",
    "Observation",
    "ParameterState",
    "ParseError",
    "PosteriorDraws",
    "PriorConfig",
    "SECTOR_LABELS",
    "SamplerConfig",
    "SectorShareError",
    "ServiceStat",
    "SimConfig",
    "TwoStageFit",
    "VARIANTS",
    "ValidationError",
    "ValidationReport",
    "adjust_users",
    "build_all_bases",
    "build_basis_set",
    "build_knots",
    "build_manifest",
    "compose_shares",
    "diagnose",
    "emu_adjust",
    "ess",
    "estimate_correlations",
    "fit_variant",
    "latent_curve",
    "load_draws",
    "log_prior",
    "make_holdout_split",
    "parse_observations",
    "parse_service_stats",
    "read_manifest",
    "rhat",
    "run_mcmc",
    "save_draws",
    "simulate_dataset",
    "summarize",
    "summarize_se",
    "two_stage_fit",
    "validate_variant",
    "worst_diagnostics",
    "__version__",
]
