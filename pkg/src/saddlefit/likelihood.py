"""Approximate Markov log-likelihood assembled from saddlepoint transition terms.

Each transition re-conditions the cumulant system on the observed previous
value (point-mass initial condition), integrates to the next observation time,
and evaluates the saddlepoint there. All accumulation happens in log space;
the densities stay unnormalized. Integration blow-ups and ill-conditioned
cumulant predictions map to -inf, so the MCMC simply rejects the proposal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cumulants import CumulantSet
from .engine import derive_ode_system
from .odeint import IntegratorConfig, IntegrationError, integrate_values, point_mass_initial
from .saddlepoint import TruncatedCGF, solve_saddle


def default_order(dim):
    """Truncation order defaults: 4 univariate, 3 multivariate."""
    return 4 if dim == 1 else 3


@dataclass
class LikelihoodConfig:
    order: int | None = None  # None -> default_order(model.dim)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    saddle_tol: float = 1e-10
    on_failure: str = "neg-infinity"

    def __post_init__(self):
        if self.order is not None and self.order < 2:
            raise ValueError("truncation order must be >= 2")
        if self.on_failure != "neg-infinity":
            raise ValueError("only the 'neg-infinity' failure policy is supported")

    def resolve_order(self, dim):
        return self.order if self.order is not None else default_order(dim)


def make_system(model, cfg=None):
    cfg = cfg or LikelihoodConfig()
    return derive_ode_system(model, cfg.resolve_order(model.dim))


def _transition_logdensity_bound(bound, shape, x_prev, x_next, dt, cfg):
    dim, order = shape
    k0 = np.zeros(bound.n_cumulants)
    k0[:dim] = x_prev
    try:
        kt = integrate_values(bound.rhs, k0, dt, cfg.integrator)
    except IntegrationError:
        return -math.inf
    try:
        cgf = TruncatedCGF(CumulantSet(dim, order, kt))
    except ValueError:
        return -math.inf
    out = solve_saddle(cgf, x_next, cfg.saddle_tol).log_density
    return out if not math.isnan(out) else -math.inf


def transition_logdensity(model, system, x_prev, x_next, dt, theta, cfg=None):
    """Log saddlepoint density of x_next given x_prev over a gap dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = cfg or LikelihoodConfig()
    bound = system.bind(theta)
    x_prev = np.atleast_1d(np.asarray(x_prev, dtype=float))
    x_next = np.atleast_1d(np.asarray(x_next, dtype=float))
    return _transition_logdensity_bound(
        bound, system.cumulant_set_shape, x_prev, x_next, dt, cfg
    )


def loglik(model, series, theta, cfg=None, system=None):
    """Sum of transition log densities over consecutive observations.

    The initial-state term is dropped. Returns -inf for inadmissible theta
    or any failed transition; never NaN.
    """
    cfg = cfg or LikelihoodConfig()
    if len(series) < 2:
        raise ValueError("series must contain at least two observations")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if not model.admissible(theta):
        return -math.inf
    if system is None:
        system = make_system(model, cfg)
    bound = system.bind(theta)
    shape = system.cumulant_set_shape
    times = series.times
    values = series.values
    total = 0.0
    for i in range(1, len(series)):
        term = _transition_logdensity_bound(
            bound, shape, values[i - 1], values[i], times[i] - times[i - 1], cfg
        )
        if term == -math.inf:
            return -math.inf
        total += term
    return total


def transition_density_fn(model, theta, x_prev, dt, cfg=None, system=None):
    """Predicted transition density as a function of the next univariate state.

    Convenience for density grids and accuracy sweeps (dim-1 models).
    """
    cfg = cfg or LikelihoodConfig()
    if model.dim != 1:
        raise ValueError("transition_density_fn supports univariate models")
    if system is None:
        system = make_system(model, cfg)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    bound = system.bind(theta)
    k0 = point_mass_initial(np.atleast_1d(x_prev), system.cumulant_set_shape)
    kt = integrate_values(bound.rhs, k0.values, dt, cfg.integrator)
    cgf = TruncatedCGF(CumulantSet(1, system.order, kt))

    def f(x):
        return solve_saddle(cgf, np.atleast_1d(x), cfg.saddle_tol).density

    f.cgf = cgf
    return f
