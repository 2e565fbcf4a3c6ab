import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad as scalar_quad
from scipy.spatial import ConvexHull

from conftest import random_pla
from lcgeom.funcrep import Ellipsoid, GaussianForm, Polytope, affine_image, polytope_indicator, standard_gaussian
from lcgeom.grassmann import SeededStream, coordinate_frame, frame_from_basis, hyperplane_frame
from lcgeom.quad import (
    Estimate,
    levelset_volume,
    line_section_mass,
    lp_norm,
    lp_norm_importance,
    mean_cov,
    omega,
    product,
    subspace_norm,
)
from lcgeom.suite import builtin_functions

# dense midpoint grid (4000^2 cells) and adaptive scipy quad; see tests/oracles in the README
RAMP_MASS = 2.446088316900846
RAMP_L2_SQ = 1.6883005166223841
RAMP_LINE_03 = 1.2329427524572607
EXP_L1_MAPPED_LINE_03 = 1.8685154138635156


def test_omega_values():
    assert omega(1) == pytest.approx(2.0)
    assert omega(2) == pytest.approx(math.pi)
    assert omega(3) == pytest.approx(4 * math.pi / 3)


def test_estimate_rejects_unknown_method():
    with pytest.raises(ValueError):
        Estimate(1.0, 0.0, 0, "guess")


def test_product_delta_method():
    est = product((Estimate(4.0, 0.4, 10, "mc_box"), 0.5), const=2.0)
    assert est.value == pytest.approx(4.0)
    assert est.stderr == pytest.approx(2.0 * 0.5 * 0.4 / 2.0)


def test_gaussian_closed_form():
    g = standard_gaussian(3, 2.0)
    assert lp_norm(g, 1).value == pytest.approx(2 * (2 * math.pi) ** 1.5)
    assert lp_norm(g, 2).value == pytest.approx(math.sqrt(4 * math.pi**1.5))
    assert lp_norm(g, math.inf).value == 2.0


@pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
def test_gaussian_box_mc_matches_closed_form(p):
    g = GaussianForm(1.5, np.array([0.3, -0.2]), np.array([[1.0, 0.3], [0.3, 0.5]]))
    mc = lp_norm(g, p, 40_000, SeededStream(3), exact=False)
    ref = lp_norm(g, p).value
    assert mc.method == "mc_box"
    assert abs(mc.value - ref) < 4 * mc.stderr + 1e-3 * ref


def test_ramp_against_grid_oracle():
    f = builtin_functions(2)["ramp"]
    one = lp_norm(f, 1, 20_000, SeededStream(1))
    two = lp_norm(f, 2, 20_000, SeededStream(2))
    assert one.method == "mc_ray"
    assert one.value == pytest.approx(RAMP_MASS, rel=1e-4)
    assert two.value**2 == pytest.approx(RAMP_L2_SQ, rel=1e-4)


@pytest.mark.parametrize(
    "name,mass",
    [("exp_l1", 4.0), ("exp_linf", 2 * 2**2 * 2), ("orthant_exp", 1.0), ("simplex", 1.0)],
)
def test_pla_known_masses(name, mass):
    f = builtin_functions(2)[name]
    assert lp_norm(f, 1, 20_000, SeededStream(0), exact=False).value == pytest.approx(mass, rel=1e-3)


def test_importance_sampler_agrees():
    f = builtin_functions(2)["exp_l1"]
    est = lp_norm_importance(f, 1, 40_000, SeededStream(5))
    assert abs(est.value - 4.0) < 4 * est.stderr


def test_ray_stderr_is_calibrated():
    # z-scores of independent replicates should have unit second moment
    f = builtin_functions(2)["ramp"]
    z = []
    for seed in range(40):
        est = lp_norm(f, 1, 400, SeededStream(seed))
        z.append((est.value - RAMP_MASS) / est.stderr)
    assert 0.3 < float(np.mean(np.square(z))) < 2.5


def test_line_section_mass_closed_form():
    fs = builtin_functions(2)
    u = np.array([math.cos(0.3), math.sin(0.3)])
    assert line_section_mass(fs["ramp"], u) == pytest.approx(RAMP_LINE_03, rel=1e-10)
    assert line_section_mass(fs["exp_l1_mapped"], u) == pytest.approx(EXP_L1_MAPPED_LINE_03, rel=1e-10)


@given(st.integers(0, 10_000))
def test_line_section_mass_vs_adaptive_quad(seed):
    rng = np.random.default_rng(seed)
    f = random_pla(rng, bounded=bool(seed % 2))
    u = rng.normal(size=2)
    u /= np.linalg.norm(u)
    # kinks of the potential along the line, passed to the adaptive rule as breakpoints
    a, b = f.slopes @ u, f.offsets
    i, j = np.triu_indices(len(a), 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kinks = (b[j] - b[i]) / (a[i] - a[j])
    with np.errstate(divide="ignore", invalid="ignore"):
        ends = f.d / (f.C @ u)
    kinks = np.concatenate([kinks, ends])
    kinks = np.sort(kinks[np.isfinite(kinks) & (np.abs(kinks) < 40)])
    ref = scalar_quad(lambda t: f(t * u), -40, 40, limit=500, points=kinks)[0]
    assert line_section_mass(f, u) == pytest.approx(ref, rel=1e-6, abs=1e-10)


@given(st.floats(0.0, math.pi))
def test_square_shadow_and_chord(theta):
    sq = polytope_indicator(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    H = frame_from_basis(np.array([[math.cos(theta)], [math.sin(theta)]]))
    assert subspace_norm(sq, H, "projection").value == pytest.approx(2 * (c + s))
    assert subspace_norm(sq, H, "section").value == pytest.approx(2 / max(c, s))


def test_gaussian_projection_and_section():
    g = GaussianForm(1.0, np.zeros(3), np.diag([1.0, 2.0, 4.0]))
    H = coordinate_frame(3, [0, 1])
    # projection marginalises by sup: Schur complement of a diagonal matrix is its block
    assert subspace_norm(g, H, "projection").value == pytest.approx(2 * math.pi / math.sqrt(2.0))
    assert subspace_norm(g, H, "section").value == pytest.approx(2 * math.pi / math.sqrt(2.0))
    mc = subspace_norm(g, H, "section", 20_000, SeededStream(0), exact=False)
    assert abs(mc.value - 2 * math.pi / math.sqrt(2.0)) < 4 * mc.stderr + 1e-6


def test_pla_projection_mc_vs_exact_on_polytope():
    f = builtin_functions(3)["cross"]
    H = hyperplane_frame(np.array([1.0, 2.0, 2.0]) / 3.0)
    exact = subspace_norm(f, H, "projection")
    mc = subspace_norm(f, H, "projection", 20_000, SeededStream(4), exact=False)
    assert exact.method == "exact_polytope"
    assert abs(mc.value - exact.value) < 4 * mc.stderr + 1e-3


@given(st.integers(0, 10_000))
def test_polygon_volume_vs_qhull(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(12, 2))
    hull = ConvexHull(pts)
    eq = hull.equations
    f = polytope_indicator(eq[:, :2], -eq[:, 2])
    assert lp_norm(f, 1).value == pytest.approx(hull.volume, rel=1e-9)


def test_levelset_volume():
    E = Ellipsoid(np.zeros(2), np.diag([1.0, 4.0]))
    assert levelset_volume(E).value == pytest.approx(math.pi / 2)
    P = Polytope(np.vstack([np.eye(3), -np.eye(3)]), np.ones(6))
    assert levelset_volume(P).value == pytest.approx(8.0)


def test_box_moments():
    f = builtin_functions(2)["box"]
    mom = mean_cov(f)
    np.testing.assert_allclose(mom.mean, [-0.5, 0.0], atol=1e-12)
    np.testing.assert_allclose(mom.cov, np.diag([9 / 12, 1 / 12]), atol=1e-12)


def test_ray_moments_of_exp_l1():
    f = builtin_functions(2)["exp_l1"]
    mom = mean_cov(f, 20_000, SeededStream(0))
    # density (1/4) e^{-|x|-|y|}: coordinates independent Laplace(1), variance 2
    np.testing.assert_allclose(mom.mean, 0.0, atol=1e-2)
    np.testing.assert_allclose(mom.cov, 2 * np.eye(2), atol=2e-2)


@given(st.integers(0, 10_000))
def test_mass_scales_with_determinant(seed):
    rng = np.random.default_rng(seed)
    f = random_pla(rng)
    A = np.eye(2) + 0.3 * rng.normal(size=(2, 2))
    g = affine_image(f, A, rng.normal(size=2))
    a = lp_norm(f, 1, 4_000, SeededStream(seed)).value
    b = lp_norm(g, 1, 4_000, SeededStream(seed)).value
    assert b == pytest.approx(abs(np.linalg.det(A)) * a, rel=2e-2)
