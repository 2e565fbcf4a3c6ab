import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcgeom.exceptions import DimensionError
from lcgeom.grassmann import (
    SeededStream,
    coordinate_frame,
    frame_from_basis,
    sample_haar,
    sample_haar_batch,
    stratified_haar_pairs,
    stratified_sphere_pairs,
)


@given(st.integers(1, 6), st.data())
def test_haar_frame_is_orthonormal(n, data):
    k = data.draw(st.integers(0, n))
    H = sample_haar(n, k, SeededStream(data.draw(st.integers(0, 2**32))))
    Q = np.hstack([H.basis, H.complement])
    np.testing.assert_allclose(Q.T @ Q, np.eye(n), atol=1e-10)
    P = H.projector()
    np.testing.assert_allclose(P @ P, P, atol=1e-10)
    assert np.trace(P) == pytest.approx(k)


def test_streams_are_reproducible():
    a = sample_haar(4, 2, SeededStream(9, 3)).basis
    b = sample_haar(4, 2, SeededStream(9, 3)).basis
    c = sample_haar(4, 2, SeededStream(9, 4)).basis
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert SeededStream(1).child("x") == SeededStream(1).child("x")


@pytest.mark.parametrize("n,k", [(2, 1), (3, 1), (3, 2), (4, 2)])
def test_haar_projector_mean(n, k):
    frames = sample_haar_batch(n, k, SeededStream(0), 4000)
    mean = np.mean([H.projector() for H in frames], axis=0)
    np.testing.assert_allclose(mean, k / n * np.eye(n), atol=0.03)


@pytest.mark.parametrize("n,k", [(2, 1), (3, 1), (3, 2), (4, 1), (4, 2)])
def test_stratified_pairs_unbiased_projector(n, k):
    pairs = stratified_haar_pairs(n, k, 500, SeededStream(1))
    mean = np.mean([H.projector() for pair in pairs for H in pair], axis=0)
    np.testing.assert_allclose(mean, k / n * np.eye(n), atol=0.03)


def test_stratified_sphere_cells():
    rng = np.random.default_rng(0)
    T1, T2 = stratified_sphere_pairs(2, 8, rng)
    ang1 = np.mod(np.arctan2(T1[:, 1], T1[:, 0]), 2 * np.pi)
    ang2 = np.mod(np.arctan2(T2[:, 1], T2[:, 0]), 2 * np.pi)
    np.testing.assert_array_equal(np.floor(ang1 / (np.pi / 4)), np.arange(8))
    np.testing.assert_array_equal(np.floor(ang2 / (np.pi / 4)), np.arange(8))
    T3, _ = stratified_sphere_pairs(3, 100, rng)
    np.testing.assert_allclose(np.linalg.norm(T3, axis=1), 1.0)


def test_stratified_pairs_reject_trivial_k():
    with pytest.raises(DimensionError):
        stratified_haar_pairs(3, 0, 4, SeededStream(0))


def test_frame_helpers():
    H = coordinate_frame(3, [2])
    np.testing.assert_array_equal(H.basis[:, 0], [0, 0, 1])
    assert H.orthocomplement().k == 2
    with pytest.raises(ValueError):
        frame_from_basis(np.array([[1.0, 2.0], [2.0, 4.0]]))
