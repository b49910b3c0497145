"""saddlefit: diffusion parameter estimation from discretely sampled data.

Pipeline: polynomial drift/diffusion specification -> closed cumulant ODE
system -> saddlepoint transition densities -> Metropolis MCMC posterior.
"""

from .cumulants import (
    CumulantSet,
    cumulants_from_moments,
    enumerate_cumulants,
    moment_indices,
    moments_from_cumulants,
)
from .engine import CumulantODESystem, derive_ode_system
from .likelihood import LikelihoodConfig, loglik, transition_logdensity
from .mcmc import (
    Chain,
    PosteriorSummary,
    ProposalConfig,
    accept_ratio,
    default_proposal,
    propose,
    run_chain,
    summarize,
)
from .models import (
    DiffusionModel,
    TimeSeries,
    build,
    get_model,
    simulate_path,
    true_transition_density,
)
from .odeint import IntegratorConfig, IntegrationError, integrate, point_mass_initial
from .polynomial import Polynomial, apply_generator, poly_add, poly_mul
from .saddlepoint import TruncatedCGF, SaddleSolution, cgf_eval, density, log_density, normalize, solve_saddle
from .evalstats import CoverageReport, coverage_study, error_ratio, integrated_error

__version__ = "0.1.0"

__all__ = [
    "CumulantSet",
    "CumulantODESystem",
    "Chain",
    "CoverageReport",
    "DiffusionModel",
    "IntegratorConfig",
    "IntegrationError",
    "LikelihoodConfig",
    "Polynomial",
    "PosteriorSummary",
    "ProposalConfig",
    "SaddleSolution",
    "TimeSeries",
    "TruncatedCGF",
    "accept_ratio",
    "apply_generator",
    "build",
    "cgf_eval",
    "coverage_study",
    "cumulants_from_moments",
    "default_proposal",
    "density",
    "derive_ode_system",
    "enumerate_cumulants",
    "error_ratio",
    "get_model",
    "integrate",
    "integrated_error",
    "log_density",
    "loglik",
    "moment_indices",
    "moments_from_cumulants",
    "normalize",
    "point_mass_initial",
    "poly_add",
    "poly_mul",
    "propose",
    "run_chain",
    "simulate_path",
    "solve_saddle",
    "summarize",
    "transition_logdensity",
    "true_transition_density",
]
