"""Adaptive Runge-Kutta integration of cumulant systems between observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cumulants import CumulantSet, enumerate_cumulants


@dataclass
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    initial_step: float = 0.0  # 0 -> start with the full interval
    max_steps: int = 500

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


class IntegrationError(RuntimeError):
    """Step budget exhausted or step size underflow.

    Carries the partial state, which signals stiff or exploding cumulants for
    the parameter vector at hand (the likelihood maps this to -inf).
    """

    def __init__(self, message, t_reached, state):
        super().__init__(message)
        self.t_reached = t_reached
        self.state = state


def point_mass_initial(x, shape):
    """Cumulants of a point mass at x: first-order block equals x, all
    higher-order entries zero (the conditioning used between observations)."""
    dim, order = shape
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise ValueError(f"state has shape {x.shape}, expected ({dim},)")
    values = np.zeros(len(enumerate_cumulants(dim, order)))
    values[:dim] = x
    return CumulantSet(dim, order, values)


# Dormand-Prince 5(4) tableau (FSAL)
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array(
    [
        35 / 384 - 5179 / 57600,
        0.0,
        500 / 1113 - 7571 / 16695,
        125 / 192 - 393 / 640,
        -2187 / 6784 + 92097 / 339200,
        11 / 84 - 187 / 2100,
        -1 / 40,
    ]
)

_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def integrate_values(rhs, y0, dt, cfg):
    """Advance y' = rhs(y) from y0 over [0, dt] with the embedded 5(4) pair.

    Per-component error weighting abs_tol + rel_tol * |y|; raises
    IntegrationError with the partial state on failure.
    """
    y = np.array(y0, dtype=float)
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return y
    t = 0.0
    h = cfg.initial_step if cfg.initial_step > 0 else dt
    h = min(h, dt)
    h_floor = 1e-15 * max(dt, 1.0)
    k1 = rhs(y)
    steps = 0
    while t < dt:
        if steps >= cfg.max_steps:
            raise IntegrationError(
                f"no convergence within {cfg.max_steps} steps (t={t:.3g} of {dt:.3g})", t, y
            )
        steps += 1
        h = min(h, dt - t)

        k2 = rhs(y + h * (_A[0][0] * k1))
        k3 = rhs(y + h * (_A[1][0] * k1 + _A[1][1] * k2))
        k4 = rhs(y + h * (_A[2][0] * k1 + _A[2][1] * k2 + _A[2][2] * k3))
        k5 = rhs(y + h * (_A[3][0] * k1 + _A[3][1] * k2 + _A[3][2] * k3 + _A[3][3] * k4))
        k6 = rhs(
            y
            + h
            * (_A[4][0] * k1 + _A[4][1] * k2 + _A[4][2] * k3 + _A[4][3] * k4 + _A[4][4] * k5)
        )
        y5 = y + h * (_B5[0] * k1 + _B5[2] * k3 + _B5[3] * k4 + _B5[4] * k5 + _B5[5] * k6)
        k7 = rhs(y5)

        err_vec = h * (
            _E[0] * k1 + _E[2] * k3 + _E[3] * k4 + _E[4] * k5 + _E[5] * k6 + _E[6] * k7
        )
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y5))
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))

        if not np.isfinite(err):
            h *= _MIN_FACTOR
            if h < h_floor:
                raise IntegrationError("state blew up (non-finite error estimate)", t, y)
            continue

        if err <= 1.0:
            t += h
            y = y5
            k1 = k7  # first-same-as-last
            if t >= dt:
                break
        factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, max(_MIN_FACTOR, 0.9 * err**-0.2))
        h *= factor
        if h < h_floor:
            raise IntegrationError("step size underflow", t, y)
    return y


def integrate(system, kappa0, theta, dt, cfg=None):
    """Integrate the cumulant system over dt starting from kappa0."""
    cfg = cfg or IntegratorConfig()
    if (kappa0.dim, kappa0.order) != system.cumulant_set_shape:
        raise ValueError("cumulant set shape does not match system")
    bound = system.bind(theta)
    values = integrate_values(bound.rhs, kappa0.values, dt, cfg)
    return CumulantSet(kappa0.dim, kappa0.order, values)
