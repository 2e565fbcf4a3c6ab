import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcgeom import functionals as F
from lcgeom.funcrep import GaussianForm, affine_image, box_indicator, standard_gaussian
from lcgeom.grassmann import SeededStream, coordinate_frame
from lcgeom.quad import omega
from lcgeom.suite import builtin_functions


def within(est, ref, k=4.0, rel=0.0):
    return abs(est.value - ref) <= k * est.stderr + rel * abs(ref)


def test_square_quermassintegrals(square):
    assert F.quermassintegral(square, 0).value == pytest.approx(4.0)
    assert F.quermassintegral(square, 2).value == pytest.approx(math.pi)
    w1 = F.quermassintegral(square, 1, 20_000, SeededStream(0))
    # W_1 of a convex body in the plane is half its perimeter
    assert within(w1, 4.0)
    assert w1.stderr < 0.01


def test_gaussian_w1_and_variation(gauss2):
    w1 = F.quermassintegral(gauss2, 1, 10_000, SeededStream(0))
    assert w1.value == pytest.approx(math.pi * math.sqrt(2 * math.pi) / 2, rel=1e-9)
    assert F.variation(gauss2, 10_000, SeededStream(0)).value == pytest.approx(math.pi * math.sqrt(2 * math.pi))


def test_directional_variation(square):
    # |D_theta f|_TV of an indicator: twice the shadow length on the hyperplane
    assert F.variation(square, direction=np.array([1.0, 0.0])).value == pytest.approx(4.0)


def test_w_endpoints_through_generic_route():
    f = builtin_functions(3)["cross"]
    wn = F.quermassintegral(f, 3, 10_000, SeededStream(1), force_mc=True)
    assert wn.value == pytest.approx(omega(3), rel=1e-9)


def test_steiner_square(square):
    fit = F.steiner_fit(square, budget=100_000, stream=SeededStream(2))
    np.testing.assert_allclose(fit.coefficients, [4.0, 8.0, math.pi], rtol=0.02)
    np.testing.assert_allclose(fit.reference_values(), [4.0, 8.0, math.pi], rtol=0.02)


def test_steiner_rejects_bad_radii(square):
    with pytest.raises(ValueError):
        F.steiner_fit(square, deltas=[0.1, 0.2])
    with pytest.raises(ValueError):
        F.steiner_fit(square, deltas=np.linspace(0.1, 0.9, 6))


def test_john_of_square(square):
    john = F.john_function(square)
    assert john.a == pytest.approx(1.0)
    assert john.volume == pytest.approx(math.pi, rel=1e-6)
    assert F.irat(square).value == pytest.approx(math.sqrt(4 / math.pi), rel=1e-6)


def test_john_of_gaussian_height():
    # a * omega_n * (2 log(1/a))^{n/2} peaks at a = e^{-n/2}
    john = F.john_function(standard_gaussian(2))
    assert john.a == pytest.approx(math.exp(-1.0), rel=1e-4)
    assert john.volume == pytest.approx(2 * math.pi, rel=1e-4)


@pytest.mark.parametrize("name", ["gauss_aniso", "simplex", "exp_l1", "ramp", "orthant_exp", "hexagon"])
def test_john_interval_and_feasibility(name):
    f = builtin_functions(2)[name]
    john = F.john_function(f)
    assert math.exp(-2) <= john.a <= 1.0
    assert john.probe_feasibility(f) >= -1e-7


def test_john_position_sends_ellipsoid_to_ball():
    f = builtin_functions(2)["cube_mapped"]
    g, pos = F.to_john_position(f)
    jg = F.john_function(g)
    np.testing.assert_allclose(jg.B, np.eye(2), atol=1e-5)
    np.testing.assert_allclose(jg.center, 0.0, atol=1e-5)


def test_isotropic_constants(square, gauss2):
    assert F.isotropic_constant(square).value == pytest.approx(1 / math.sqrt(12))
    assert F.isotropic_constant(gauss2).value == pytest.approx(1 / math.sqrt(2 * math.pi))


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_isotropic_constant_is_affine_invariant(seed):
    rng = np.random.default_rng(seed)
    A = np.eye(2) + 0.5 * rng.normal(size=(2, 2))
    f = builtin_functions(2)["simplex"]
    g = affine_image(f, A, rng.normal(size=2))
    assert F.isotropic_constant(g).value == pytest.approx(F.isotropic_constant(f).value, rel=1e-8)


def test_isotropize_gives_identity_covariance():
    form = F.isotropize(builtin_functions(2)["box"])
    from lcgeom.quad import lp_norm, mean_cov

    mom = mean_cov(form.g)
    np.testing.assert_allclose(mom.cov, np.eye(2), atol=1e-9)
    np.testing.assert_allclose(mom.mean, 0.0, atol=1e-9)
    assert lp_norm(form.g, 1).value == pytest.approx(1.0)


def test_section_power_mean_gaussian():
    raw, phi = F.section_power_mean(standard_gaussian(3), 2, 5_000, SeededStream(0))
    assert raw.value == pytest.approx(2 * math.pi)
    assert phi.value == pytest.approx(2 * math.pi * omega(3) / omega(2))


def test_marginal_density_of_isotropic_gaussian():
    g = GaussianForm(1.0, np.zeros(3), np.eye(3))
    est = F.marginal_density_at_zero(g, coordinate_frame(3, [0, 1]))
    assert est.value == pytest.approx((2 * math.pi) ** -0.5)


@pytest.mark.parametrize("n", range(1, 13))
def test_b_constant_matches_binomial_ratio(n):
    for k in range(n):
        b = F.b_constant(n, k)
        assert b == Fraction(math.comb(2 * n, n), math.comb(n + k, k))
        assert b <= 4 ** (n - k)


def test_b_constant_rejects_bad_k():
    with pytest.raises(ValueError):
        F.b_constant(3, 3)


@pytest.mark.parametrize("n", range(2, 13))
def test_omega_ratio_against_mpmath(n):
    for k in range(1, n):
        q, e = F.omega_ratio(n, k)
        with mpmath.workdps(40):
            ref = mpmath.gamma(mpmath.mpf(n) / 2 + 1) ** k / mpmath.gamma(mpmath.mpf(k) / 2 + 1) ** n
            got = mpmath.mpf(q.numerator) / q.denominator * mpmath.sqrt(mpmath.pi) ** e
            assert abs(got / ref - 1) < mpmath.mpf(10) ** -30
        holds, margin = F.omega_ratio_bound_holds(n, k)
        assert holds and margin >= 0
        assert math.isclose(float(ref), omega(k) ** n / omega(n) ** k, rel_tol=1e-9)
