"""Sparse multivariate polynomials over the diffusion state variables."""

from __future__ import annotations

import numbers

import numpy as np


def _is_zero(coeff):
    # Exact-zero test only; works for python/numpy numbers and sympy scalars.
    try:
        return bool(coeff == 0)
    except TypeError:
        return False


def _graded_key(expo):
    # graded order, then lexicographic descending within a grade:
    # (1,0) before (0,1), (2,0) before (1,1) before (0,2)
    return (sum(expo), tuple(-e for e in expo))


class Polynomial:
    """Polynomial in ``dim`` variables, stored as {exponent tuple: coefficient}.

    Canonical sparse form: coefficients that compare equal to zero are never
    stored, so two equal polynomials have equal term dicts. Coefficients are
    ordinarily floats, but any commutative scalar supporting +, * and unary
    minus works (ints, sympy expressions); the symbolic ODE rendering relies
    on this. Instances are never mutated after construction.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim, terms=None):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        clean = {}
        for expo, coeff in (terms or {}).items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != dim:
                raise ValueError(f"exponent {expo} does not match dim {dim}")
            if any(e < 0 for e in expo):
                raise ValueError(f"negative exponent in {expo}")
            if not _is_zero(coeff):
                clean[expo] = coeff
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @classmethod
    def zero(cls, dim):
        return cls(dim)

    @classmethod
    def constant(cls, dim, value):
        return cls(dim, {(0,) * dim: value})

    @classmethod
    def variable(cls, dim, index):
        expo = [0] * dim
        expo[index] = 1
        return cls(dim, {tuple(expo): 1})

    @classmethod
    def monomial(cls, dim, exponents, coeff=1):
        return cls(dim, {tuple(exponents): coeff})

    @property
    def is_zero(self):
        return not self.terms

    def degree(self):
        """Total degree; the zero polynomial reports 0."""
        if not self.terms:
            return 0
        return max(sum(e) for e in self.terms)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        merged = dict(self.terms)
        for expo, coeff in other.terms.items():
            if expo in merged:
                merged[expo] = merged[expo] + coeff
            else:
                merged[expo] = coeff
        return Polynomial(self.dim, merged)

    def __neg__(self):
        return Polynomial(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return self._scaled(other)
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        prod = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                expo = tuple(a + b for a, b in zip(e1, e2))
                c = c1 * c2
                if expo in prod:
                    prod[expo] = prod[expo] + c
                else:
                    prod[expo] = c
        return Polynomial(self.dim, prod)

    def __rmul__(self, other):
        return self._scaled(other)

    def _scaled(self, scalar):
        return Polynomial(self.dim, {e: scalar * c for e, c in self.terms.items()})

    def eval(self, point):
        """Numeric evaluation at a single point (length-dim sequence)."""
        total = 0.0
        for expo, coeff in self.terms.items():
            term = coeff
            for x, e in zip(point, expo):
                if e:
                    term = term * x**e
            total += term
        return total

    def eval_many(self, points):
        """Vectorized evaluation: points (N, dim) -> values (N,)."""
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[0])
        for expo, coeff in self.terms.items():
            term = np.full(points.shape[0], float(coeff))
            for i, e in enumerate(expo):
                if e:
                    term *= points[:, i] ** e
            out += term
        return out

    def render(self, var_names, coeff_fmt="%.12g"):
        """Human-readable form, e.g. ``87 - 1.5*x1`` or ``b*mu - b*x1``."""
        if not self.terms:
            return "0"
        pieces = []
        for expo in sorted(self.terms, key=_graded_key):
            coeff = self.terms[expo]
            mono = "*".join(
                f"{var_names[i]}**{e}" if e > 1 else var_names[i]
                for i, e in enumerate(expo)
                if e > 0
            )
            if isinstance(coeff, numbers.Real):
                neg = coeff < 0
                mag = coeff_fmt % abs(coeff)
                if mono and mag == "1":
                    body = mono
                elif mono:
                    body = f"{mag}*{mono}"
                else:
                    body = mag
                pieces.append(("-" if neg else "+", body))
            else:
                text = str(coeff)
                if mono:
                    if any(ch in text for ch in "+-") and not text.lstrip("-").isalnum():
                        text = f"({text})"
                    body = f"{text}*{mono}"
                else:
                    body = text
                pieces.append(("+", body))
        sign, body = pieces[0]
        out = body if sign == "+" else f"-{body}"
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self):
        names = [f"x{i + 1}" for i in range(self.dim)]
        return f"Polynomial({self.render(names)})"


def poly_add(p, q):
    """Coefficient-wise sum in canonical sparse form."""
    return p + q


def poly_mul(p, q):
    """Distributive product; exponents add per variable."""
    return p * q


def apply_generator(r, drift, diffusion):
    """Moment-form action of the diffusion generator on the monomial x**r.

    Returns the polynomial g with d/dt E[X^r] = E[g(X_t)]:

        sum_i r_i x^(r-e_i) mu_i(x)
        + (1/2) sum_{i,j} d^2(x^r)/dx_i dx_j * sig2_ij(x),

    where ``drift`` holds the mu_i and ``diffusion`` the sig2_ij entries.
    The result is exact; no truncation happens at this stage.
    """
    m = len(r)
    if len(drift) != m:
        raise ValueError(f"drift has {len(drift)} entries, expected {m}")
    if len(diffusion) != m or any(len(row) != m for row in diffusion):
        raise ValueError(f"diffusion must be {m}x{m}")
    for p in list(drift) + [q for row in diffusion for q in row]:
        if p.dim != m:
            raise ValueError(f"polynomial dim {p.dim} does not match index length {m}")

    out = Polynomial.zero(m)
    for i, ri in enumerate(r):
        if ri == 0:
            continue
        expo = list(r)
        expo[i] -= 1
        out = out + Polynomial.monomial(m, expo, ri) * drift[i]
    for i in range(m):
        ri = r[i]
        if ri >= 2:
            expo = list(r)
            expo[i] -= 2
            # diagonal second derivative carries r_i (r_i - 1) / 2, an integer
            out = out + Polynomial.monomial(m, expo, ri * (ri - 1) // 2) * diffusion[i][i]
        for j in range(i + 1, m):
            if ri >= 1 and r[j] >= 1:
                expo = list(r)
                expo[i] -= 1
                expo[j] -= 1
                # off-diagonal pair (i,j)+(j,i) combined using symmetry
                out = out + Polynomial.monomial(m, expo, ri * r[j]) * diffusion[i][j]
    return out
