import itertools

import numpy as np
import pytest

from saddlefit.cumulants import (
    CumulantSet,
    cumulants_from_moments,
    enumerate_cumulants,
    moment_indices,
    moments_from_cumulants,
)


def exp_series_moments(kappa_by_index, dim, target_order):
    """Independent oracle: raw moments from the series expansion of exp(K).

    Brute force via sympy so the recursion under test is not reused.
    """
    import sympy

    vs = sympy.symbols(f"v0:{dim}")
    K = sympy.Integer(0)
    for idx, val in kappa_by_index.items():
        term = sympy.Rational(1)
        for v, e in zip(vs, idx):
            term *= v**e / sympy.factorial(e)
        K += sympy.nsimplify(val, rational=True) * term
    # truncated Taylor of exp(K); terms above target_order cannot feed lower orders
    expr = sympy.expand(sum(K**k / sympy.factorial(k) for k in range(target_order + 1)))
    out = {}
    for s in moment_indices(dim, target_order):
        coeff = expr
        for v, e in zip(vs, s):
            coeff = coeff.coeff(v, e)
        for v in vs:
            coeff = coeff.subs(v, 0)
        fact = 1
        for e in s:
            fact *= int(sympy.factorial(e))
        out[s] = float(coeff) * fact
    return out


def test_enumerate_univariate():
    assert enumerate_cumulants(1, 4) == ((1,), (2,), (3,), (4,))


def test_enumerate_bivariate_order2():
    assert enumerate_cumulants(2, 2) == ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


def test_enumerate_bivariate_order3_count():
    # sum_k C(m+k-1, k) = 2 + 3 + 4
    assert len(enumerate_cumulants(2, 3)) == 9


def test_enumerate_counts_general():
    from math import comb

    for m, n in [(1, 4), (2, 4), (3, 3)]:
        assert len(enumerate_cumulants(m, n)) == sum(comb(m + k - 1, k) for k in range(1, n + 1))


def test_enumerate_rejects_low_order():
    with pytest.raises(ValueError):
        enumerate_cumulants(1, 1)


def test_enumerate_no_duplicates_and_graded():
    idx = enumerate_cumulants(3, 4)
    assert len(set(idx)) == len(idx)
    orders = [sum(r) for r in idx]
    assert orders == sorted(orders)


def test_moments_univariate_frozen():
    # kappa = (1, 2, 0, 0) -> m = (1, 3, 7, 25); cross-checked with exp-series oracle
    ks = CumulantSet(1, 4, np.array([1.0, 2.0, 0.0, 0.0]))
    mom = moments_from_cumulants(ks, 4)
    assert mom == pytest.approx([1.0, 3.0, 7.0, 25.0])
    oracle = exp_series_moments({(1,): 1.0, (2,): 2.0}, 1, 4)
    assert mom == pytest.approx([oracle[s] for s in moment_indices(1, 4)])


def test_moments_all_zero_cumulants():
    ks = CumulantSet(1, 4, np.zeros(4))
    assert moments_from_cumulants(ks, 6) == pytest.approx(np.zeros(6))


def test_moments_standard_normal():
    # Gaussian oracle: m3 = 0, m4 = 3, m6 = 15 under the closure
    ks = CumulantSet(1, 4, np.array([0.0, 1.0, 0.0, 0.0]))
    mom = moments_from_cumulants(ks, 6)
    lookup = dict(zip(moment_indices(1, 6), mom))
    assert lookup[(3,)] == pytest.approx(0.0)
    assert lookup[(4,)] == pytest.approx(3.0)
    assert lookup[(6,)] == pytest.approx(15.0)


def test_moments_bivariate_against_series_oracle():
    kappa = {(1, 0): 0.3, (0, 1): -0.2, (2, 0): 1.1, (1, 1): 0.4, (0, 2): 0.9}
    ks = CumulantSet(2, 2, np.array([kappa[s] for s in enumerate_cumulants(2, 2)]))
    mom = moments_from_cumulants(ks, 3)
    oracle = exp_series_moments(kappa, 2, 3)
    assert mom == pytest.approx([oracle[s] for s in moment_indices(2, 3)], rel=1e-10)


def test_cumulants_from_moments_frozen_inverse():
    out = cumulants_from_moments(np.array([1.0, 3.0, 7.0, 25.0]), 1, 4)
    assert out.values == pytest.approx([1.0, 2.0, 0.0, 0.0])


def test_point_mass_moments_invert_to_degenerate_cumulants():
    x = 1.7
    moments = np.array([x**k for k in range(1, 5)])
    out = cumulants_from_moments(moments, 1, 4)
    assert out.values == pytest.approx([x, 0.0, 0.0, 0.0], abs=1e-12)


def test_independent_components_have_zero_mixed_cumulants():
    # product-MGF factorization: moments of (X, Y) independent multiply
    rng = np.random.default_rng(5)
    kx = CumulantSet(1, 3, np.array([0.4, 1.2, 0.3]))
    ky = CumulantSet(1, 3, np.array([-0.6, 0.8, -0.1]))
    mx = dict(zip(moment_indices(1, 3), moments_from_cumulants(kx, 3)))
    my = dict(zip(moment_indices(1, 3), moments_from_cumulants(ky, 3)))
    mx[(0,)] = my[(0,)] = 1.0
    moments = np.array([mx[(i,)] * my[(j,)] for (i, j) in moment_indices(2, 3)])
    out = cumulants_from_moments(moments, 2, 3)
    lookup = dict(zip(enumerate_cumulants(2, 3), out.values))
    for mixed in [(1, 1), (2, 1), (1, 2)]:
        assert lookup[mixed] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("dim,order", [(1, 2), (1, 4), (2, 2), (2, 3), (3, 2)])
def test_round_trip_random(dim, order):
    rng = np.random.default_rng(42 + dim * 10 + order)
    for _ in range(10):
        values = []
        cov = rng.normal(size=(dim, dim))
        cov = cov @ cov.T + np.eye(dim)
        lookup = {}
        for i in range(dim):
            for j in range(i, dim):
                r = [0] * dim
                r[i] += 1
                r[j] += 1
                lookup[tuple(r)] = cov[i, j]
        for idx in enumerate_cumulants(dim, order):
            if sum(idx) == 1:
                values.append(rng.normal())
            elif sum(idx) == 2:
                values.append(lookup[idx])
            else:
                values.append(0.3 * rng.normal())
        ks = CumulantSet(dim, order, np.array(values))
        mom = moments_from_cumulants(ks, order)
        back = cumulants_from_moments(mom, dim, order)
        assert back.values == pytest.approx(ks.values, rel=1e-12, abs=1e-12)


def test_cumulant_set_accessors():
    ks = CumulantSet(2, 2, np.array([1.0, 2.0, 3.0, 0.5, 4.0]))
    assert ks.first_moments() == pytest.approx([1.0, 2.0])
    assert ks.covariance() == pytest.approx(np.array([[3.0, 0.5], [0.5, 4.0]]))
    assert ks.get((9, 9)) == 0.0


def test_cumulant_set_shape_validation():
    with pytest.raises(ValueError):
        CumulantSet(1, 4, np.zeros(3))
