"""Orthonormal frames, Haar sampling on Grassmannians, uniform sphere sampling.

Randomness is counter-based: a `SeededStream` is a (seed, index) pair and
every draw is a pure function of it, so splitting work across processes
never changes results.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, SolverError

_ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class SeededStream:
    """Reproducible source of randomness identified by ``(seed, index)``."""

    seed: int
    index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.index),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, label) -> "SeededStream":
        """Stream for a named or numbered sub-task.

        Child indices are a stable hash of the parent index and the label, so
        the same label always maps to the same stream.
        """
        h = hashlib.blake2b(f"{self.index}/{label}".encode(), digest_size=8)
        return SeededStream(self.seed, int.from_bytes(h.digest(), "little") >> 1)


def as_stream(stream) -> SeededStream:
    if isinstance(stream, SeededStream):
        return stream
    if stream is None:
        return SeededStream(0, 0)
    if isinstance(stream, (int, np.integer)):
        return SeededStream(int(stream), 0)
    raise TypeError(f"cannot build a SeededStream from {type(stream).__name__}")


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal basis of a k-dimensional subspace H of R^n and of H-perp.

    ``basis`` is n x k and ``complement`` is n x (n - k).
    """

    basis: np.ndarray
    complement: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        Cm = np.asarray(self.complement, dtype=float)
        if B.ndim != 2 or Cm.ndim != 2 or B.shape[0] != Cm.shape[0]:
            raise DimensionError("basis and complement must be n x k and n x (n-k)")
        if B.shape[1] + Cm.shape[1] != B.shape[0]:
            raise DimensionError("basis and complement must together span R^n")
        W = np.hstack([B, Cm])
        err = np.max(np.abs(W.T @ W - np.eye(W.shape[1]))) if W.size else 0.0
        if err > _ORTHO_TOL:
            raise ValueError(f"frame is not orthonormal (error {err:.2e})")
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "complement", Cm)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def orthocomplement(self) -> "Frame":
        return Frame(self.complement, self.basis)

    def embed(self, y):
        """Map frame coordinates in R^k (or an (N, k) batch) to points of R^n."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.k:
            raise DimensionError(f"expected {self.k} frame coordinates, got {y.shape[-1]}")
        return y @ self.basis.T

    def coords(self, x):
        """Frame coordinates of points of R^n (the orthogonal projection onto H)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionError(f"expected points in R^{self.n}, got {x.shape[-1]}")
        return x @ self.basis


def frame_from_basis(vectors) -> Frame:
    """Frame spanned by the columns of ``vectors`` (n x k, full column rank)."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] == 1 and V.shape[1] > 1:
        V = V.T
    n, k = V.shape
    Q, R = np.linalg.qr(V, mode="complete")
    if k and np.min(np.abs(np.diag(R[:k, :k]))) < 1e-12 * max(1.0, np.max(np.abs(R))):
        raise ValueError("vectors are linearly dependent")
    signs = np.sign(np.diag(R[:k, :k])) if k else np.ones(0)
    signs[signs == 0] = 1.0
    Q[:, :k] *= signs
    return Frame(Q[:, :k], Q[:, k:])


def hyperplane_frame(theta) -> Frame:
    """Frame of the hyperplane orthogonal to the unit vector ``theta``."""
    theta = np.asarray(theta, dtype=float)
    nrm = np.linalg.norm(theta)
    if abs(nrm - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    line = frame_from_basis(theta[:, None])
    return line.orthocomplement()


def coordinate_frame(n: int, axes) -> Frame:
    """Frame spanned by the listed coordinate axes."""
    axes = list(axes)
    rest = [i for i in range(n) if i not in axes]
    eye = np.eye(n)
    return Frame(eye[:, axes], eye[:, rest])


def sample_haar(n: int, k: int, stream) -> Frame:
    """Haar-distributed k-dimensional subspace of R^n.

    QR of a Gaussian matrix with the diagonal of R forced positive gives a
    Haar orthogonal matrix; its first k columns span the subspace.
    """
    if not 0 <= k <= n or n < 1:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    rng = as_stream(stream).generator()
    for _ in range(2):
        G = rng.standard_normal((n, n))
        Q, R = np.linalg.qr(G)
        diag = np.diag(R)
        if np.min(np.abs(diag)) > 1e-12:
            Q = Q * np.sign(diag)
            return Frame(Q[:, :k], Q[:, k:])
    raise SolverError("rank-deficient Gaussian draw twice in a row")


def sample_haar_batch(n: int, k: int, stream, count: int, start: int = 0) -> list[Frame]:
    """Frames for sample indices ``start .. start+count-1`` of ``stream``."""
    stream = as_stream(stream)
    return [sample_haar(n, k, stream.child(("haar", i))) for i in range(start, start + count)]


def sample_sphere(n: int, stream) -> np.ndarray:
    """Uniform unit vector on S^{n-1} (normalized Gaussian)."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = as_stream(stream).generator()
    while True:
        g = rng.standard_normal(n)
        nrm = np.linalg.norm(g)
        if nrm > 1e-300:
            return g / nrm


def sample_sphere_batch(n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    g = rng.standard_normal((size, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def stratified_sphere_pairs(n: int, n_pairs: int, rng: np.random.Generator):
    """Two uniform directions in each cell of an equal-area partition of S^{n-1}.

    n = 2 cuts the angle into ``n_pairs`` arcs; n = 3 uses a grid in
    (height, angle), which is equal-area by Archimedes.  Returns ``(T1, T2)``
    with one row per cell; each row is marginally uniform on the sphere.
    For n >= 4 the cells are trivial (independent pairs).  For n = 1 the
    two "directions" are +1 and -1 and ``T2`` is None.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), None
    n_pairs = max(1, int(n_pairs))
    if n == 2:
        base = np.arange(n_pairs)[:, None]

        def draw():
            ang = 2 * np.pi * (base + rng.random((n_pairs, 1))) / n_pairs
            return np.hstack([np.cos(ang), np.sin(ang)])

    elif n == 3:
        m = max(1, int(np.sqrt(n_pairs)))
        i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        i, j = i.ravel(), j.ravel()

        def draw():
            z = -1 + 2 * (i + rng.random(i.size)) / m
            phi = 2 * np.pi * (j + rng.random(j.size)) / m
            rho = np.sqrt(np.clip(1 - z * z, 0, None))
            return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)

    else:

        def draw():
            return sample_sphere_batch(n, rng, n_pairs)

    T1 = draw()
    return T1, draw()


def _householder(t):
    """Orthogonal matrix whose first column is the unit vector ``t`` (up to sign)."""
    v = t.copy()
    v[0] += 1.0 if t[0] >= 0 else -1.0
    return np.eye(t.size) - (2.0 / (v @ v)) * np.outer(v, v)


def stratified_haar_pairs(n: int, k: int, n_pairs: int, stream) -> list[tuple[Frame, Frame]]:
    """Pairs of Haar frames, stratified when G_{n,k} is a projective space.

    For k = 1 the frame is spanned by a direction and for k = n - 1 it is
    the orthogonal complement of one, so equal-area cells of the sphere
    stratify the Grassmannian.  Other k fall back to independent pairs.
    """
    if not 1 <= k <= n - 1:
        raise DimensionError(f"need 1 <= k <= {n - 1}")
    stream = as_stream(stream)
    if k in (1, n - 1):
        T1, T2 = stratified_sphere_pairs(n, n_pairs, stream.child("strata").generator())
        def make(t):
            Q = _householder(t)
            return Frame(Q[:, :1], Q[:, 1:]) if k == 1 else Frame(Q[:, 1:], Q[:, :1])

        return [(make(a), make(b)) for a, b in zip(T1, T2)]
    return [(sample_haar(n, k, stream.child(("haar", 2 * i))), sample_haar(n, k, stream.child(("haar", 2 * i + 1))))
            for i in range(n_pairs)]
