"""Cumulant bookkeeping: index enumeration and moment/cumulant conversion.

Both conversions walk the same triangular recursion obtained from
d/dv_i M = M * d/dv_i K, read off at the origin:

    m_a = sum_{b <= a - e_i} C(a - e_i, b) * kappa_{b + e_i} * m_{a - e_i - b},

with m_0 = 1 and e_i the unit index at the first nonzero coordinate of a.
Under truncation at order n, cumulants above n are treated as zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np


def _graded_indices(dim, lo, hi):
    out = []
    for k in range(lo, hi + 1):
        grade = [e for e in itertools.product(range(k + 1), repeat=dim) if sum(e) == k]
        grade.sort(reverse=True)
        out.extend(grade)
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_cumulants(dim, order):
    """All multi-indices with 1 <= |r| <= order in graded-lex order.

    Rejects order < 2: the saddlepoint needs at least a variance block.
    """
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if order < 2:
        raise ValueError(f"truncation order must be >= 2, got {order}")
    return _graded_indices(dim, 1, order)


@lru_cache(maxsize=None)
def moment_indices(dim, order):
    """All multi-indices with 1 <= |s| <= order in graded-lex order."""
    if dim < 1 or order < 1:
        raise ValueError("dimension and order must be >= 1")
    return _graded_indices(dim, 1, order)


def index_order(r):
    return sum(r)


def mi_binom(a, b):
    """Product of componentwise binomial coefficients C(a_i, b_i)."""
    out = 1
    for ai, bi in zip(a, b):
        out *= comb(ai, bi)
    return out


def sub_indices(g):
    """All multi-indices b with 0 <= b <= g componentwise."""
    return itertools.product(*(range(gi + 1) for gi in g))


def _split_leading(a):
    """Return (i, a - e_i) for the first nonzero coordinate i of a."""
    i = next(k for k, v in enumerate(a) if v > 0)
    g = list(a)
    g[i] -= 1
    return i, tuple(g)


@dataclass(frozen=True)
class CumulantSet:
    """Cumulants kappa_r for all 1 <= |r| <= order, aligned with
    enumerate_cumulants(dim, order)."""

    dim: int
    order: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        expected = len(enumerate_cumulants(self.dim, self.order))
        if vals.shape != (expected,):
            raise ValueError(
                f"expected {expected} cumulants for dim={self.dim}, order={self.order}, "
                f"got shape {vals.shape}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def indices(self):
        return enumerate_cumulants(self.dim, self.order)

    def get(self, r, default=0.0):
        r = tuple(r)
        if 1 <= sum(r) <= self.order:
            return float(self.values[self.indices.index(r)])
        return default

    def first_moments(self):
        """Order-1 block; entry i is kappa_{e_i}."""
        return self.values[: self.dim].copy()

    def covariance(self):
        """Order-2 block as a symmetric (dim, dim) matrix."""
        m = self.dim
        lookup = dict(zip(self.indices, self.values))
        cov = np.empty((m, m))
        for i in range(m):
            for j in range(m):
                r = [0] * m
                r[i] += 1
                r[j] += 1
                cov[i, j] = lookup[tuple(r)]
        return cov


def moments_from_cumulants(kappa: CumulantSet, target_order):
    """Raw moments m_s for all 1 <= |s| <= target_order under the truncation.

    Cumulants of order above ``kappa.order`` are treated as zero, so
    target orders beyond the truncation are well defined (that closure is
    exactly what makes the derived ODE systems finite).
    """
    if target_order < 1:
        raise ValueError("target_order must be >= 1")
    kval = dict(zip(kappa.indices, kappa.values))
    idx = moment_indices(kappa.dim, target_order)
    mom = {(0,) * kappa.dim: 1.0}
    for a in idx:
        i, g = _split_leading(a)
        total = 0.0
        for b in sub_indices(g):
            be = list(b)
            be[i] += 1
            kb = kval.get(tuple(be), 0.0)
            if kb == 0.0:
                continue
            rest = tuple(gi - bi for gi, bi in zip(g, b))
            total += mi_binom(g, b) * kb * mom[rest]
        mom[a] = total
    return np.array([mom[a] for a in idx])


def cumulants_from_moments(moments, dim, order):
    """Invert the moment recursion; exact inverse of moments_from_cumulants.

    ``moments`` must be aligned with moment_indices(dim, order).
    """
    idx = moment_indices(dim, order)
    moments = np.asarray(moments, dtype=float)
    if moments.shape != (len(idx),):
        raise ValueError(f"expected {len(idx)} moments, got shape {moments.shape}")
    mom = dict(zip(idx, moments))
    mom[(0,) * dim] = 1.0
    kap = {}
    for a in idx:
        i, g = _split_leading(a)
        acc = mom[a]
        for b in sub_indices(g):
            if b == g:
                continue
            be = list(b)
            be[i] += 1
            rest = tuple(gi - bi for gi, bi in zip(g, b))
            acc -= mi_binom(g, b) * kap[tuple(be)] * mom[rest]
        kap[a] = acc
    return CumulantSet(dim, order, np.array([kap[a] for a in enumerate_cumulants(dim, order)]))
