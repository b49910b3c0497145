"""Saddlepoint density approximation from a truncated cumulant generating function.

K(L) = sum_{1 <= |r| <= n} kappa_r L^r / r! is a polynomial; the (unnormalized)
density at x is

    (2 pi)^(-m/2) |K''(L*)|^(-1/2) exp(K(L*) - L*.x),   K'(L*) = x,

solved by damped Newton from the Gaussian initializer. When no usable root
exists the order-2 (Gaussian) evaluation from the same first- and second-order
cumulants is returned instead, flagged via ``fallback_used``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cumulants import CumulantSet, enumerate_cumulants

_LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_SADDLE_TOL = 1e-10
_MAX_NEWTON_ITER = 50


@lru_cache(maxsize=None)
def _cgf_structure(dim, order):
    indices = enumerate_cumulants(dim, order)
    expo = np.array(indices, dtype=np.int64)

    def fact(r):
        out = 1
        for e in r:
            out *= math.factorial(e)
        return out

    val_div = np.array([fact(r) for r in indices], dtype=float)

    grad = []
    for j in range(dim):
        rows = [i for i, r in enumerate(indices) if r[j] >= 1]
        shifted = expo[rows].copy()
        shifted[:, j] -= 1
        div = np.array([fact(tuple(r)) for r in shifted], dtype=float)
        grad.append((np.array(rows), shifted, div))

    hess = {}
    for j in range(dim):
        for k in range(j, dim):
            need = 2 if j == k else 1
            rows = [
                i
                for i, r in enumerate(indices)
                if r[j] >= (need if j == k else 1) and r[k] >= 1
            ]
            shifted = expo[rows].copy()
            shifted[:, j] -= 1
            shifted[:, k] -= 1
            div = np.array([fact(tuple(r)) for r in shifted], dtype=float)
            hess[(j, k)] = (np.array(rows), shifted, div)
    return expo, val_div, grad, hess


class TruncatedCGF:
    """Truncated-series CGF built from a CumulantSet.

    Construction fails unless the order-2 (covariance) block is symmetric
    positive definite.
    """

    def __init__(self, cumulants: CumulantSet):
        self.cumulants = cumulants
        self.dim = cumulants.dim
        self.order = cumulants.order
        self.mean = cumulants.first_moments()
        self.cov = cumulants.covariance()
        chol = _cholesky_or_none(self.cov)
        if chol is None:
            raise ValueError("order-2 cumulant block is not positive definite")
        self._cov_chol = chol
        expo, val_div, grad, hess = _cgf_structure(self.dim, self.order)
        vals = cumulants.values
        self._expo = expo
        self._val_coef = vals / val_div
        self._grad = [(rows, shifted, vals[rows] / div) for rows, shifted, div in grad]
        self._hess = {
            jk: (shifted, vals[rows] / div) for jk, (rows, shifted, div) in hess.items()
        }

    def value_grad_hess(self, lam):
        lam = np.asarray(lam, dtype=float)
        value = float(self._val_coef @ np.prod(lam ** self._expo, axis=1))
        m = self.dim
        grad = np.empty(m)
        for j, (rows, shifted, coef) in enumerate(self._grad):
            grad[j] = coef @ np.prod(lam**shifted, axis=1)
        hess = np.empty((m, m))
        for (j, k), (shifted, coef) in self._hess.items():
            hjk = coef @ np.prod(lam**shifted, axis=1)
            hess[j, k] = hjk
            hess[k, j] = hjk
        return value, grad, hess

    def gaussian_log_density(self, x):
        """Exact order-2 (normal) log density from the first two blocks."""
        x = np.asarray(x, dtype=float)
        z = _forward_solve(self._cov_chol, x - self.mean)
        logdet = 2.0 * float(np.sum(np.log(np.diag(self._cov_chol))))
        return -0.5 * (self.dim * _LOG_2PI + logdet + float(z @ z))


def cgf_eval(cgf: TruncatedCGF, lam):
    """Value, gradient and Hessian of the truncated series at lam."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (cgf.dim,):
        raise ValueError(f"lambda has shape {lam.shape}, expected ({cgf.dim},)")
    return cgf.value_grad_hess(lam)


@dataclass
class SaddleSolution:
    saddle: np.ndarray
    hessian: np.ndarray
    density: float
    log_density: float
    converged: bool
    fallback_used: bool
    residuals: list = field(default_factory=list)


def _cholesky_or_none(a):
    m = a.shape[0]
    if m == 1:
        return np.array([[math.sqrt(a[0, 0])]]) if a[0, 0] > 0 else None
    if m == 2:
        if not np.isfinite(a).all():
            return None
        d = a[0, 0]
        if d <= 0:
            return None
        l00 = math.sqrt(d)
        l10 = a[1, 0] / l00
        rem = a[1, 1] - l10 * l10
        if rem <= 0:
            return None
        return np.array([[l00, 0.0], [l10, math.sqrt(rem)]])
    if not np.isfinite(a).all():
        return None
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None


def _forward_solve(chol, b):
    m = chol.shape[0]
    if m == 1:
        return b / chol[0, 0]
    if m == 2:
        z0 = b[0] / chol[0, 0]
        z1 = (b[1] - chol[1, 0] * z0) / chol[1, 1]
        return np.array([z0, z1])
    from scipy.linalg import solve_triangular

    return solve_triangular(chol, b, lower=True)


def _chol_solve(chol, b):
    z = _forward_solve(chol, b)
    m = chol.shape[0]
    if m == 1:
        return z / chol[0, 0]
    if m == 2:
        y1 = z[1] / chol[1, 1]
        y0 = (z[0] - chol[1, 0] * y1) / chol[0, 0]
        return np.array([y0, y1])
    from scipy.linalg import solve_triangular

    return solve_triangular(chol.T, z, lower=False)


def solve_saddle(cgf: TruncatedCGF, x, tol=DEFAULT_SADDLE_TOL):
    """Solve K'(L) = x by damped Newton from the Gaussian initializer.

    Damping never accepts a step that increases ||K'(L) - x||. Divergence,
    the iteration cap, or a non-positive-definite Hessian at the root all
    fall back to the order-2 Gaussian evaluation (finite by construction);
    the tolerance is relative, ||K'(L) - x|| <= tol * (1 + ||x||).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (cgf.dim,):
        raise ValueError(f"state has shape {x.shape}, expected ({cgf.dim},)")

    lam = _chol_solve(cgf._cov_chol, x - cgf.mean)
    threshold = tol * (1.0 + float(np.linalg.norm(x)))
    residuals = []

    value = grad = hess = None
    for _ in range(_MAX_NEWTON_ITER):
        value, grad, hess = cgf.value_grad_hess(lam)
        resid = grad - x
        rnorm = float(np.linalg.norm(resid))
        residuals.append(rnorm)
        if not np.isfinite(rnorm):
            return _gaussian_fallback(cgf, x, residuals)
        if rnorm <= threshold:
            chol = _cholesky_or_none(hess)
            if chol is None:
                return _gaussian_fallback(cgf, x, residuals)
            logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
            log_density = -0.5 * (cgf.dim * _LOG_2PI + logdet) + value - float(lam @ x)
            return SaddleSolution(
                saddle=lam,
                hessian=hess,
                density=math.exp(log_density) if log_density < 700 else math.inf,
                log_density=log_density,
                converged=True,
                fallback_used=False,
                residuals=residuals,
            )
        try:
            with np.errstate(all="ignore"):
                step = np.linalg.solve(hess, -resid)
        except np.linalg.LinAlgError:
            return _gaussian_fallback(cgf, x, residuals)
        if not np.isfinite(step).all():
            return _gaussian_fallback(cgf, x, residuals)

        t = 1.0
        accepted = False
        while t >= 2.0**-30:
            trial = lam + t * step
            _, g_t, _ = cgf.value_grad_hess(trial)
            r_t = float(np.linalg.norm(g_t - x))
            if np.isfinite(r_t) and r_t < rnorm:
                lam = trial
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return _gaussian_fallback(cgf, x, residuals)
    return _gaussian_fallback(cgf, x, residuals)


def _gaussian_fallback(cgf, x, residuals):
    log_density = cgf.gaussian_log_density(x)
    lam = _chol_solve(cgf._cov_chol, x - cgf.mean)
    return SaddleSolution(
        saddle=lam,
        hessian=cgf.cov.copy(),
        density=math.exp(log_density) if log_density < 700 else math.inf,
        log_density=log_density,
        converged=False,
        fallback_used=True,
        residuals=residuals,
    )


def density(cgf: TruncatedCGF, x, tol=DEFAULT_SADDLE_TOL):
    """Unnormalized saddlepoint density at x (linear scale)."""
    return solve_saddle(cgf, x, tol).density


def log_density(cgf: TruncatedCGF, x, tol=DEFAULT_SADDLE_TOL):
    """Log-scale companion of :func:`density`."""
    return solve_saddle(cgf, x, tol).log_density


class QuadratureError(RuntimeError):
    pass


def normalize(cgf: TruncatedCGF, domain, tol=1e-9):
    """Integral of the density over a box (diagnostic; the likelihood keeps
    densities unnormalized). Supports dim <= 2 only."""
    from scipy import integrate as sci_integrate

    if cgf.dim == 1:
        a, b = domain
        val, abserr = sci_integrate.quad(
            lambda t: density(cgf, np.array([t])), a, b, epsabs=tol, epsrel=tol, limit=400
        )
    elif cgf.dim == 2:
        (a1, b1), (a2, b2) = domain
        val, abserr = sci_integrate.dblquad(
            lambda y, x: density(cgf, np.array([x, y])),
            a1,
            b1,
            a2,
            b2,
            epsabs=tol,
            epsrel=max(tol, 1e-8),
        )
    else:
        raise ValueError("normalize supports dim <= 2")
    if abserr > max(100 * tol, 1e-6) * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature did not converge (estimate {val}, error {abserr})")
    return val
