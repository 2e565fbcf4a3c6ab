import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import ConvexHull

from lcgeom.exceptions import DegenerateSetError, EmptySetError
from lcgeom.funcrep import Ellipsoid, Polytope
from lcgeom.mvie import mvie, mvie_polytope


def cvxpy_mvie(C, d):
    """Independent oracle: log det maximisation as a conic program."""
    n = C.shape[1]
    B = cp.Variable((n, n), PSD=True)
    c = cp.Variable(n)
    cons = [cp.norm(B @ C[i]) + C[i] @ c <= d[i] for i in range(len(d))]
    cp.Problem(cp.Maximize(cp.log_det(B)), cons).solve(solver=cp.CLARABEL)
    return B.value, c.value


def test_square_gives_unit_disk():
    B, c = mvie_polytope(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
    np.testing.assert_allclose(B, np.eye(2), atol=1e-7)
    np.testing.assert_allclose(c, 0, atol=1e-7)


def test_triangle_incircle_is_not_the_answer():
    # for a triangle the max-volume ellipse is the Steiner inellipse (area pi/(3 sqrt 3) of the triangle)
    V = np.array([[0.0, 0.0], [4.0, 0.0], [1.0, 3.0]])
    hull = ConvexHull(V)
    B, c = mvie_polytope(hull.equations[:, :2], -hull.equations[:, 2])
    area = np.pi * np.linalg.det(B)
    assert area == pytest.approx(hull.volume * np.pi / (3 * np.sqrt(3)), rel=1e-7)
    np.testing.assert_allclose(c, V.mean(axis=0), atol=1e-7)


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.sampled_from([2, 3]))
def test_against_conic_solver(seed, n):
    rng = np.random.default_rng(seed)
    hull = ConvexHull(rng.normal(size=(8 + 4 * n, n)))
    C, d = hull.equations[:, :n], -hull.equations[:, n]
    B, c = mvie_polytope(C, d)
    Bo, co = cvxpy_mvie(C, d)
    assert np.linalg.slogdet(B)[1] == pytest.approx(np.linalg.slogdet(Bo)[1], abs=1e-5)
    np.testing.assert_allclose(c, co, atol=1e-3)
    # inscribed: support function of the ellipse stays below the facets
    assert np.all(np.linalg.norm(C @ B, axis=1) + C @ c <= d + 1e-9)


def test_unbounded_and_empty():
    with pytest.raises(DegenerateSetError):
        mvie_polytope(np.array([[1.0, 0.0], [0.0, 1.0]]), np.ones(2))
    with pytest.raises(EmptySetError):
        mvie_polytope(np.array([[0.0, 0.0]]), np.array([-1.0]))


def test_mvie_dispatch():
    E = Ellipsoid(np.zeros(2), np.eye(2))
    assert mvie(E) is E
    P = Polytope(np.vstack([np.eye(2), -np.eye(2)]), np.array([2.0, 1.0, 2.0, 1.0]))
    out = mvie(P)
    np.testing.assert_allclose(np.linalg.inv(out.shape), np.diag([4.0, 1.0]), atol=1e-7)
