import numpy as np
import pytest

from saddlefit.polynomial import Polynomial, apply_generator, poly_add, poly_mul


def P(dim, terms):
    return Polynomial(dim, terms)


def random_poly(rng, dim, max_order=3, n_terms=4):
    terms = {}
    for _ in range(n_terms):
        expo = tuple(int(e) for e in rng.integers(0, max_order + 1, size=dim))
        terms[expo] = rng.normal()
    return Polynomial(dim, terms)


def test_add_inverse_cancels_to_zero():
    x1 = Polynomial.variable(1, 0)
    assert (x1 + (-x1)).is_zero
    assert (x1 + (-x1)) == Polynomial.zero(1)


def test_add_distinct_variables():
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    assert (x1 + x2).terms == {(1, 0): 1, (0, 1): 1}


def test_add_merges_coefficients():
    # (2x1^2 + x2) + (3x1^2) = 5x1^2 + x2, by hand
    p = P(2, {(2, 0): 2.0, (0, 1): 1.0})
    q = P(2, {(2, 0): 3.0})
    assert poly_add(p, q).terms == {(2, 0): 5.0, (0, 1): 1.0}


def test_mul_difference_of_squares():
    x1 = Polynomial.variable(2, 0)
    x2 = Polynomial.variable(2, 1)
    assert (x1 + x2) * (x1 - x2) == P(2, {(2, 0): 1, (0, 2): 1.0 * -1})


def test_mul_identity():
    rng = np.random.default_rng(0)
    p = random_poly(rng, 2)
    one = Polynomial.constant(2, 1.0)
    assert poly_mul(one, p) == p


def test_mul_drift_example():
    # (a*x1 - b*x1^2 + c*x1*x2) * x1 with a=1, b=2, c=3
    p = P(2, {(1, 0): 1.0, (2, 0): -2.0, (1, 1): 3.0})
    x1 = Polynomial.variable(2, 0)
    assert (p * x1).terms == {(2, 0): 1.0, (3, 0): -2.0, (2, 1): 3.0}


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        poly_add(Polynomial.zero(1), Polynomial.zero(2))
    with pytest.raises(ValueError):
        poly_mul(Polynomial.zero(1), Polynomial.zero(2))


def test_ring_axioms_on_random_polynomials():
    rng = np.random.default_rng(7)
    for _ in range(20):
        p = random_poly(rng, 2)
        q = random_poly(rng, 2)
        r = random_poly(rng, 2)
        assert (p + q) == (q + p)
        assert (p * q) == (q * p)
        assert ((p + q) + r) == (p + (q + r))
        lhs = p * (q + r)
        rhs = p * q + p * r
        # distributivity up to float roundoff in coefficient arithmetic
        keys = set(lhs.terms) | set(rhs.terms)
        for k in keys:
            assert lhs.terms.get(k, 0.0) == pytest.approx(rhs.terms.get(k, 0.0), abs=1e-12)


def test_canonical_form_has_no_zero_coefficients():
    p = P(1, {(0,): 0.0, (1,): 1.0})
    assert (0,) not in p.terms
    q = p - p
    assert q.terms == {}


def test_eval_and_eval_many_agree():
    rng = np.random.default_rng(3)
    p = random_poly(rng, 2)
    pts = rng.normal(size=(5, 2))
    many = p.eval_many(pts)
    for i in range(5):
        assert many[i] == pytest.approx(p.eval(pts[i]), rel=1e-12)


def test_render_numeric():
    p = P(1, {(0,): 87.0, (1,): -1.5})
    assert p.render(["x1"]) == "87 - 1.5*x1"


# --- generator ---------------------------------------------------------------


def cir_polys(b, mu, sigma2):
    drift = [P(1, {(0,): b * mu, (1,): -b})]
    diffusion = [[P(1, {(1,): sigma2})]]
    return drift, diffusion


def test_generator_cir_first_moment():
    # d m1/dt = b(mu - m1)
    drift, diffusion = cir_polys(1.5, 58.0, 15.0)
    g = apply_generator((1,), drift, diffusion)
    assert g.terms == {(0,): pytest.approx(87.0), (1,): pytest.approx(-1.5)}


def test_generator_zero_model():
    drift = [Polynomial.zero(2), Polynomial.zero(2)]
    diffusion = [[Polynomial.zero(2)] * 2 for _ in range(2)]
    assert apply_generator((2, 1), drift, diffusion).is_zero


def test_generator_cir_second_moment():
    # hand Ito: d m2/dt = 2 b mu m1 - 2 b m2 + sigma^2 m1
    b, mu, s2 = 1.5, 58.0, 15.0
    drift, diffusion = cir_polys(b, mu, s2)
    g = apply_generator((2,), drift, diffusion)
    assert g.terms == {(1,): pytest.approx(2 * b * mu + s2), (2,): pytest.approx(-2 * b)}


def test_generator_linear_in_drift_and_diffusion():
    rng = np.random.default_rng(11)
    drift = [random_poly(rng, 2), random_poly(rng, 2)]
    diffusion = [[None, None], [None, None]]
    diffusion[0][0] = random_poly(rng, 2)
    diffusion[1][1] = random_poly(rng, 2)
    diffusion[0][1] = diffusion[1][0] = random_poly(rng, 2)
    for r in [(1, 0), (2, 1), (0, 3)]:
        base = apply_generator(r, drift, diffusion)
        alpha = rng.normal()
        scaled = apply_generator(
            r,
            [alpha * p for p in drift],
            [[alpha * q for q in row] for row in diffusion],
        )
        for k in set(base.terms) | set(scaled.terms):
            assert scaled.terms.get(k, 0.0) == pytest.approx(
                alpha * base.terms.get(k, 0.0), rel=1e-12, abs=1e-12
            )


def test_generator_degree_bound_affine_model():
    # degree <= |r| when drift and diffusion have degree <= 1 (CIR, |r| <= 4)
    drift, diffusion = cir_polys(0.12, 0.05, 0.02**2)
    for k in range(1, 5):
        g = apply_generator((k,), drift, diffusion)
        assert g.degree() <= k


def test_generator_dimension_mismatch():
    drift, diffusion = cir_polys(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        apply_generator((1, 1), drift, diffusion)
