"""Derivation of the closed cumulant ODE system for a polynomial diffusion model.

Route: the generator yields exact raw-moment derivative identities
(``apply_generator``); expressing raw moments through cumulants with every
cumulant above the truncation order set to zero, and converting the moment
derivatives back through d/dt M = M * d/dt K, closes the system. The result
is a polynomial vector field in the tracked cumulants, compiled once per
parameter vector into flat exponent/coefficient arrays for fast evaluation.

The same assembly runs over float scalars (estimation path) or sympy scalars
(the human-readable equation rendering).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .cumulants import (
    CumulantSet,
    enumerate_cumulants,
    mi_binom,
    moment_indices,
    sub_indices,
    _split_leading,
)
from .polynomial import Polynomial, apply_generator

MAX_ORDER = 6  # combinatorial blow-up beyond this; not supported


@lru_cache(maxsize=None)
def _moment_polynomials(dim, order, max_order):
    """Raw moments m_s, |s| <= max_order, as integer-coefficient polynomials
    in the tracked cumulants (closure: kappa above ``order`` is zero)."""
    tracked = enumerate_cumulants(dim, order)
    pos = {r: i for i, r in enumerate(tracked)}
    nvar = len(tracked)
    zero = Polynomial.zero(nvar)
    mom = {(0,) * dim: Polynomial.constant(nvar, 1)}
    for a in moment_indices(dim, max_order):
        i, g = _split_leading(a)
        acc = zero
        for b in sub_indices(g):
            be = list(b)
            be[i] += 1
            be = tuple(be)
            if sum(be) > order:
                continue  # closed out
            rest = tuple(gi - bi for gi, bi in zip(g, b))
            acc = acc + mi_binom(g, b) * (Polynomial.variable(nvar, pos[be]) * mom[rest])
        mom[a] = acc
    return mom


def _unit_contribution(slot, beta):
    """Generator action of a single unit drift/diffusion monomial on x**beta:
    one raw-moment index with an integer weight, or None."""
    kind = slot[0]
    if kind == "mu":
        _, i, mono = slot
        if beta[i] < 1:
            return None
        s = list(beta)
        s[i] -= 1
        weight = beta[i]
    else:
        _, i, j, mono = slot
        if i == j:
            if beta[i] < 2:
                return None
            s = list(beta)
            s[i] -= 2
            weight = beta[i] * (beta[i] - 1) // 2
        else:
            if beta[i] < 1 or beta[j] < 1:
                return None
            s = list(beta)
            s[i] -= 1
            s[j] -= 1
            weight = beta[i] * beta[j]  # (i,j)+(j,i) combined via symmetry
    s = tuple(a + b for a, b in zip(s, mono))
    return weight, s


def _moment_to_cumulant_derivatives(mdot, tracked, mpolys, nvar):
    """Triangular inversion of d/dt M = M * d/dt K at the origin:
    kdot_a = mdot_a - sum_{0<b<a} C(a,b) m_{a-b} kdot_b."""
    kdot = {}
    for a in tracked:  # graded order: lower |a| first
        acc = mdot.get(a, Polynomial.zero(nvar))
        for b in sub_indices(a):
            if sum(b) == 0 or b == a:
                continue
            rest = tuple(ai - bi for ai, bi in zip(a, b))
            acc = acc - mi_binom(a, b) * (mpolys[rest] * kdot[b])
        kdot[a] = acc
    return kdot


@lru_cache(maxsize=None)
def _slot_structure(dim, order, drift_support, diff_support):
    """Integer-exact structural derivation, cached per model shape.

    The cumulant vector field is linear in the generator coefficients, so the
    per-unit-monomial contributions (integer-coefficient polynomials in the
    tracked cumulants) are derived once; binding a concrete theta is then a
    short linear combination and every identity-level cancellation has
    already happened exactly.
    """
    tracked = enumerate_cumulants(dim, order)
    nvar = len(tracked)
    slots = [("mu", i, mono) for i, sup in enumerate(drift_support) for mono in sup]
    slots += [
        ("sig", i, j, mono)
        for (i, j), sup in zip(
            [(i, j) for i in range(dim) for j in range(i, dim)], diff_support
        )
        for mono in sup
    ]

    max_order = order - 1
    contribs = {}
    for slot in slots:
        per_beta = {}
        for beta in tracked:
            hit = _unit_contribution(slot, beta)
            if hit is not None:
                per_beta[beta] = hit
                max_order = max(max_order, sum(hit[1]))
        contribs[slot] = per_beta

    mpolys = _moment_polynomials(dim, order, max(max_order, 1))
    structure = []
    for slot in slots:
        mdot = {
            beta: weight * mpolys[s] for beta, (weight, s) in contribs[slot].items()
        }
        structure.append(_moment_to_cumulant_derivatives(mdot, tracked, mpolys, nvar))
    return tuple(slots), tuple(structure)


def _kdot_polynomials(model, theta, order):
    """Per tracked index, d kappa / dt as a polynomial in the tracked
    cumulants, with coefficients bound from the model polynomials at theta."""
    dim = model.dim
    drift = model.drift(theta)
    diffusion = model.diffusion(theta)
    for i in range(dim):
        for j in range(i + 1, dim):
            if diffusion[i][j] != diffusion[j][i]:
                raise ValueError("diffusion matrix is not symmetric")

    drift_support = tuple(tuple(sorted(p.terms)) for p in drift)
    diff_support = tuple(
        tuple(sorted(diffusion[i][j].terms)) for i in range(dim) for j in range(i, dim)
    )
    slots, structure = _slot_structure(dim, order, drift_support, diff_support)

    tracked = enumerate_cumulants(dim, order)
    nvar = len(tracked)
    out = {a: Polynomial.zero(nvar) for a in tracked}
    for slot, kdot_t in zip(slots, structure):
        if slot[0] == "mu":
            coeff = drift[slot[1]].terms[slot[2]]
        else:
            coeff = diffusion[slot[1]][slot[2]].terms[slot[3]]
        for a, poly in kdot_t.items():
            if not poly.is_zero:
                out[a] = out[a] + coeff * poly
    return out


class BoundSystem:
    """Cumulant vector field with coefficients bound at a fixed theta,
    flattened for evaluation: rhs(kappa) = C @ prod(kappa**E, axis=1)."""

    __slots__ = ("exponents", "coeffs", "n_cumulants")

    def __init__(self, kdot, tracked, nvar):
        monos = sorted(set().union(*(p.terms.keys() for p in kdot.values())) or set())
        col = {e: t for t, e in enumerate(monos)}
        E = np.array(monos, dtype=np.int64).reshape(len(monos), nvar)
        C = np.zeros((nvar, len(monos)))
        for i, a in enumerate(tracked):
            for e, c in kdot[a].terms.items():
                C[i, col[e]] = c
        self.exponents = E
        self.coeffs = C
        self.n_cumulants = nvar

    def rhs(self, values):
        mono = np.prod(values ** self.exponents, axis=1)
        return self.coeffs @ mono


def cumulant_names(indices):
    """Short labels: k1..k4 univariate, k10/k01/... multivariate."""
    return ["k" + "".join(str(e) for e in r) for r in indices]


class CumulantODESystem:
    """Closed ODE system d kappa_r/dt = F_r(kappa; theta) for 1 <= |r| <= order.

    The structural derivation (which raw moments feed which cumulant, and the
    moment/cumulant recursion tables) is cached per model shape; numeric
    coefficients are re-bound per theta via :meth:`bind`, which is itself
    memoized for the propose/evaluate access pattern of the MCMC.
    """

    def __init__(self, model, order):
        if order > MAX_ORDER:
            raise ValueError(f"truncation order {order} exceeds supported maximum {MAX_ORDER}")
        self.model = model
        self.dim = model.dim
        self.order = order
        self.indices = enumerate_cumulants(self.dim, order)
        self.n_cumulants = len(self.indices)
        self._bound = {}
        self._structural_table = None

    @property
    def cumulant_set_shape(self):
        return (self.dim, self.order)

    def bind(self, theta):
        key = tuple(float(t) for t in np.atleast_1d(theta))
        hit = self._bound.get(key)
        if hit is not None:
            return hit
        kdot = _kdot_polynomials(self.model, np.asarray(key), self.order)
        bound = BoundSystem(kdot, self.indices, self.n_cumulants)
        if self._structural_table is None:
            self._structural_table = self._build_table(key)
        if len(self._bound) >= 16:
            self._bound.pop(next(iter(self._bound)))
        self._bound[key] = bound
        return bound

    def rhs(self, values, theta):
        """Time derivative of the cumulant vector; deterministic in inputs."""
        if isinstance(values, CumulantSet):
            values = values.values
        return self.bind(theta).rhs(np.asarray(values, dtype=float))

    def _build_table(self, theta):
        drift = self.model.drift(np.asarray(theta))
        diffusion = self.model.diffusion(np.asarray(theta))
        table = {}
        for r in self.indices:
            g = apply_generator(r, drift, diffusion)
            table[r] = sorted(g.terms.keys(), key=lambda e: (sum(e), tuple(-x for x in e)))
        return table

    @property
    def structural_table(self):
        """Per tracked cumulant, the raw-moment multi-indices feeding its
        derivative (the sparse generator footprint)."""
        if self._structural_table is None:
            raise RuntimeError("structural table is populated on first bind()")
        return self._structural_table

    def equations(self, theta=None):
        """Render the system, one ``dk../dt = ...`` string per cumulant.

        With theta=None the coefficients stay symbolic in the model's
        parameter names (sympy); with a numeric theta they are plain numbers.
        """
        names = cumulant_names(self.indices)
        if theta is not None:
            kdot = _kdot_polynomials(self.model, np.asarray(theta, dtype=float), self.order)
            return [
                f"d{name}/dt = {kdot[r].render(names)}"
                for r, name in zip(self.indices, names)
            ]

        import sympy

        # passing a sequence of names makes symbols() return a sequence
        syms = sympy.symbols(self.model.param_names, real=True)
        kdot = _kdot_polynomials(self.model, syms, self.order)
        ksyms = sympy.symbols(names)
        lines = []
        for r, name in zip(self.indices, names):
            expr = sympy.Integer(0)
            for expo, coeff in kdot[r].terms.items():
                term = sympy.expand(sympy.sympify(coeff))
                for k, e in zip(ksyms, expo):
                    if e:
                        term = term * k**e
                expr = expr + term
            lines.append(f"d{name}/dt = {sympy.expand(expr)}")
        return lines


def derive_ode_system(model, order):
    """Derive the closed cumulant system for ``model`` at truncation ``order``.

    Exact (no closure error) whenever every drift and diffusion entry has
    degree <= 1; otherwise moments above the truncation order are produced
    under the zero-cumulant closure.
    """
    enumerate_cumulants(model.dim, order)  # validates order >= 2
    return CumulantODESystem(model, order)
