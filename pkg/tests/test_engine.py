import numpy as np
import pytest

from saddlefit.engine import cumulant_names, derive_ode_system
from saddlefit.models import get_model


def cir_rhs_oracle(k, b, mu, sigma):
    """Hand-coded regression oracle for the printed 4-cumulant CIR system."""
    s2 = sigma**2
    return np.array(
        [
            b * (mu - k[0]),
            s2 * k[0] - 2 * b * k[1],
            -3 * b * k[2] + 3 * s2 * k[1],
            -4 * b * k[3] + 6 * s2 * k[2],
        ]
    )


def bivar_rhs_oracle_n2(k, theta):
    """Order-2 system for the coupled mean-reverting pair, derived by hand
    from the generator identities with third cumulants closed to zero."""
    a, b, c, g, ps, sg = theta
    k10, k01, k20, k11, k02 = k
    return np.array(
        [
            a * (k11 + k10 * k01) - b * (k20 + k10**2),
            g * (ps - k01),
            2 * a * k20 * k01 + 2 * a * k11 * k10 - 4 * b * k20 * k10 + c**2 * (k02 + k01**2),
            a * k10 * k02 + a * k01 * k11 - 2 * b * k10 * k11 - g * k11,
            -2 * g * k02 + sg**2,
        ]
    )


def test_cir_matches_printed_system_at_random_points():
    model = get_model("cir")
    system = derive_ode_system(model, 4)
    rng = np.random.default_rng(101)
    for _ in range(100):
        b = rng.uniform(0.05, 3.0)
        mu = rng.uniform(0.5, 80.0)
        sigma = rng.uniform(0.05, 5.0)
        k = rng.normal(size=4) * np.array([50.0, 30.0, 100.0, 500.0])
        got = system.rhs(k, np.array([b, mu, sigma]))
        want = cir_rhs_oracle(k, b, mu, sigma)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_ou_order2_matches_coefficient_matching():
    system = derive_ode_system(get_model("ou"), 2)
    theta = np.array([0.5, 5.0, 1.0])
    k = np.array([2.0, 0.7])
    got = system.rhs(k, theta)
    assert got == pytest.approx([0.5 * (5.0 - 2.0), -2 * 0.5 * 0.7 + 1.0])


def test_brownian_motion_rhs():
    system = derive_ode_system(get_model("bm"), 4)
    got = system.rhs(np.array([3.0, 2.0, 1.0, 0.5]), np.array([2.5]))
    assert got == pytest.approx([0.0, 2.5, 0.0, 0.0])


def test_bivariate_order2_matches_hand_derivation():
    system = derive_ode_system(get_model("bivar"), 2)
    theta = np.array([0.1, 0.02, 1.8, 0.5, 5.0, 1.0])
    rng = np.random.default_rng(77)
    for _ in range(25):
        k = rng.normal(size=5)
        k[2] += 2.0
        k[4] += 2.0
        got = system.rhs(k, theta)
        assert got == pytest.approx(bivar_rhs_oracle_n2(k, theta), rel=1e-12, abs=1e-12)


def test_heston_low_order_equations():
    system = derive_ode_system(get_model("heston"), 3)
    theta = np.array([0.118, 9.863, 0.034, -0.855, 0.250])
    rng = np.random.default_rng(5)
    k = rng.normal(size=9)
    k10, k01, k20, k11, k02, k30, k21, k12, k03 = k
    got = system.rhs(k, theta)
    r, delta, th = theta[0], theta[1], theta[2]
    assert got[0] == pytest.approx(r * k10, rel=1e-12)
    assert got[1] == pytest.approx(delta * (th - k01), rel=1e-12)
    # d k20/dt = 2 r k20 + m21-in-cumulants (S^2 V diffusion entry)
    want20 = 2 * r * k20 + (k21 + k20 * k01 + 2 * k10 * k11 + k10**2 * k01)
    assert got[2] == pytest.approx(want20, rel=1e-12)


def test_exactness_closure_consistency_affine_models():
    # affine drift/diffusion: order-n and order-(n+1) systems agree on the
    # shared cumulant block, and the extra entries do not leak in
    for name, theta in [("cir", np.array([1.2, 3.0, 0.8])), ("ou", np.array([0.5, 5.0, 1.0]))]:
        model = get_model(name)
        rng = np.random.default_rng(9)
        for n in (2, 3):
            lo = derive_ode_system(model, n)
            hi = derive_ode_system(model, n + 1)
            k = rng.normal(size=lo.n_cumulants)
            extras = rng.normal(size=hi.n_cumulants - lo.n_cumulants)
            full = np.concatenate([k, extras])
            assert hi.rhs(full, theta)[: lo.n_cumulants] == pytest.approx(
                lo.rhs(k, theta), rel=1e-12, abs=1e-14
            )


def test_rhs_deterministic_bitwise():
    system = derive_ode_system(get_model("cir"), 4)
    theta = np.array([0.12, 0.05, 0.02])
    k = np.array([0.049, 1e-5, 1e-7, 1e-9])
    a = system.rhs(k, theta)
    b = system.rhs(k, theta)
    assert np.array_equal(a, b)


def test_order_bounds():
    with pytest.raises(ValueError):
        derive_ode_system(get_model("cir"), 1)
    with pytest.raises(ValueError):
        derive_ode_system(get_model("cir"), 7)


def test_structural_table_populated_after_bind():
    system = derive_ode_system(get_model("cir"), 4)
    system.bind(np.array([1.5, 58.0, np.sqrt(15.0)]))
    table = system.structural_table
    # dk2/dt draws on raw moments m1 and m2
    assert table[(2,)] == [(1,), (2,)]


def test_symbolic_equations_cir():
    import sympy

    system = derive_ode_system(get_model("cir"), 4)
    lines = system.equations()
    assert len(lines) == 4
    b, mu, sigma = sympy.symbols("b mu sigma")
    k1, k2, k3, k4 = sympy.symbols("k1 k2 k3 k4")
    expected = [
        b * (mu - k1),
        sigma**2 * k1 - 2 * b * k2,
        -3 * b * k3 + 3 * sigma**2 * k2,
        -4 * b * k4 + 6 * sigma**2 * k3,
    ]
    for line, want in zip(lines, expected):
        lhs, rhs = line.split(" = ")
        got = sympy.sympify(rhs, locals={"b": b, "mu": mu, "sigma": sigma,
                                         "k1": k1, "k2": k2, "k3": k3, "k4": k4})
        assert sympy.expand(got - want) == 0


def test_numeric_equations_render():
    system = derive_ode_system(get_model("cir"), 4)
    lines = system.equations(np.array([1.5, 58.0, np.sqrt(15.0)]))
    assert lines[0] == "dk1/dt = 87 - 1.5*k1"


def test_cumulant_names():
    assert cumulant_names(((1,), (2,))) == ["k1", "k2"]
    assert cumulant_names(((1, 0), (0, 1))) == ["k10", "k01"]
