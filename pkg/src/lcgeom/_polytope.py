"""Small dense polytope routines: LPs, vertices, volumes, nearest points.

Polytopes are H-descriptions ``{x : C x <= d}`` in dimension n <= 4.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .exceptions import DegenerateSetError, EmptySetError, SolverError

# feasibility slack used when classifying candidate points
FEAS_TOL = 1e-9
# Chebyshev radius below which a polytope is treated as having empty interior
INTERIOR_TOL = 1e-11
_RADIUS_CAP = 1e7


def _lp(c, A_ub=None, b_ub=None, bounds=None, A_eq=None, b_eq=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    return res


def is_feasible(C, d):
    """True if ``{x : C x <= d}`` is nonempty."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float)
    if C.shape[0] == 0:
        return True
    n = C.shape[1]
    res = _lp(np.zeros(n), C, d, [(None, None)] * n)
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise SolverError(f"feasibility LP failed: {res.message}")


def recession_is_trivial(G):
    """True if the cone ``{u : G u <= 0}`` is ``{0}``.

    By Stiemke's alternative this holds iff G has rank n and
    ``G^T lam = 0`` for some ``lam >= 1``; that is one feasibility LP.
    The answer depends on G only, so it is memoized.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape[0] == 0:
        return False
    return _recession_cached(G.shape, G.tobytes())


@lru_cache(maxsize=4096)
def _recession_cached(shape, raw):
    G = np.frombuffer(raw).reshape(shape)
    m, n = shape
    if np.linalg.matrix_rank(G) < n:
        return False
    res = _lp(np.zeros(m), A_eq=G.T, b_eq=np.zeros(n), bounds=[(1.0, None)] * m)
    if res.status == 0:
        return True
    if res.status == 2:
        return False
    raise SolverError(f"recession LP failed: {res.message}")


def chebyshev_center(C, d):
    """Center and radius of the largest ball inside ``{C x <= d}``.

    Radius is capped at a large constant for unbounded sets.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float)
    n = C.shape[1]
    norms = np.linalg.norm(C, axis=1)
    A = np.hstack([C, norms[:, None]])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    bounds = [(None, None)] * n + [(0.0, _RADIUS_CAP)]
    res = _lp(c, A, d, bounds)
    if res.status == 2:
        raise EmptySetError("polytope is empty")
    if res.status != 0:
        raise SolverError(f"Chebyshev LP failed: {res.message}")
    return res.x[:n], float(res.x[n])


def min_max_affine(A, b, C, d):
    """Minimize ``max_i (A_i x + b_i)`` subject to ``C x <= d``.

    Epigraph LP in (x, tau). Returns ``(value, argmin)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    rows = [np.hstack([A, -np.ones((A.shape[0], 1))])]
    rhs = [-b]
    if C is not None and len(C):
        C = np.atleast_2d(C)
        rows.append(np.hstack([C, np.zeros((C.shape[0], 1))]))
        rhs.append(np.asarray(d, dtype=float))
    G = np.vstack(rows)
    h = np.concatenate(rhs)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = _lp(c, G, h, [(None, None)] * (n + 1))
    if res.status == 2:
        raise EmptySetError("domain polytope is empty")
    if res.status != 0:
        raise SolverError(f"epigraph LP failed: {res.message}")
    return float(res.x[-1]), res.x[:n]


def _vertices_bruteforce(C, d):
    n = C.shape[1]
    out = []
    for S in itertools.combinations(range(C.shape[0]), n):
        CS = C[list(S)]
        if abs(np.linalg.det(CS)) < 1e-12:
            continue
        v = np.linalg.solve(CS, d[list(S)])
        if np.all(C @ v <= d + FEAS_TOL * (1 + np.abs(d))):
            out.append(v)
    if not out:
        raise EmptySetError("polytope has no vertices")
    return _dedupe(np.array(out))


def _dedupe(V, tol=1e-9):
    keep = []
    for v in V:
        if not any(np.max(np.abs(v - w)) <= tol * (1 + np.max(np.abs(w))) for w in keep):
            keep.append(v)
    return np.array(keep)


def vertices(C, d):
    """Vertices of a bounded polytope ``{C x <= d}``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float)
    n = C.shape[1]
    if n == 1:
        lo, hi = interval_bounds(C[:, 0], d)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise DegenerateSetError("unbounded interval has no vertices")
        return np.array([[lo], [hi]]) if hi > lo else np.array([[lo]])
    center, radius = chebyshev_center(C, d)
    if radius >= _RADIUS_CAP * 0.999:
        raise DegenerateSetError("polytope is unbounded")
    if radius <= INTERIOR_TOL * (1 + np.max(np.abs(center))):
        return _vertices_bruteforce(C, d)
    hs = np.hstack([C, -d[:, None]])
    try:
        V = HalfspaceIntersection(hs, center).intersections
    except QhullError:
        return _vertices_bruteforce(C, d)
    return _dedupe(V)


def interval_bounds(c, d):
    """Feasible interval of ``{t : c_i t <= d_i}`` (may be infinite or empty)."""
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    lo, hi = -np.inf, np.inf
    pos, neg = c > 0, c < 0
    if np.any(pos):
        hi = float(np.min(d[pos] / c[pos]))
    if np.any(neg):
        lo = float(np.max(d[neg] / c[neg]))
    zero = ~(pos | neg)
    if np.any(d[zero] < 0):
        return np.inf, -np.inf
    return lo, hi


def polytope_volume(C, d):
    """Exact Lebesgue volume of a bounded polytope (vertex enumeration + qhull)."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = C.shape[1]
    if n == 1:
        lo, hi = interval_bounds(C[:, 0], d)
        return max(hi - lo, 0.0)
    try:
        center, radius = chebyshev_center(C, d)
    except EmptySetError:
        return 0.0
    if radius >= _RADIUS_CAP * 0.999:
        raise DegenerateSetError("polytope is unbounded")
    if radius <= INTERIOR_TOL * (1 + np.max(np.abs(center))):
        return 0.0
    V = vertices(C, d)
    try:
        return float(ConvexHull(V).volume)
    except QhullError:
        return 0.0


def independent_subsets(G, max_size, pool=None):
    """Row subsets of size 1..max_size with linearly independent rows."""
    rows = range(G.shape[0]) if pool is None else pool
    out = []
    for size in range(1, max_size + 1):
        for S in itertools.combinations(rows, size):
            if np.linalg.matrix_rank(G[list(S)], tol=1e-10) == size:
                out.append(S)
    return out


def face_subsets(C, d, V):
    """Independent row subsets that are tight at some vertex of the polytope.

    These index the affine hulls of all faces, which is all a nearest-point
    search needs.
    """
    n = C.shape[1]
    scale = 1 + np.abs(d)
    found = set()
    for v in V:
        tight = tuple(np.flatnonzero(np.abs(C @ v - d) <= 1e-8 * scale))
        for size in range(1, min(n, len(tight)) + 1):
            for S in itertools.combinations(tight, size):
                found.add(S)
    return [S for S in sorted(found) if np.linalg.matrix_rank(C[list(S)], tol=1e-10) == len(S)]


class NearestPoint:
    """Batched Euclidean projection onto ``{y : G y <= h}``.

    The projection lies in the relative interior of some face, hence equals
    the orthogonal projection onto that face's affine hull.  Every candidate
    hull from ``subsets`` is tried and the closest feasible candidate wins;
    the right-hand side ``h`` may vary per point.
    """

    def __init__(self, G, subsets):
        self.G = np.atleast_2d(np.asarray(G, dtype=float))
        self._items = []
        for S in subsets:
            idx = np.asarray(S, dtype=int)
            GS = self.G[idx]
            gram = GS @ GS.T
            self._items.append((idx, GS, GS.T @ np.linalg.inv(gram)))

    def project(self, X, h):
        """Return ``(distance, nearest point)`` for each row of ``X``.

        Points whose polytope is empty get distance ``inf``.
        """
        X = np.atleast_2d(X)
        N = X.shape[0]
        h = np.broadcast_to(np.asarray(h, dtype=float), (N, self.G.shape[0]))
        tol = FEAS_TOL * (1.0 + np.abs(h))
        best = np.full(N, np.inf)
        Y = np.array(X, dtype=float, copy=True)
        inside = np.all(X @ self.G.T <= h + tol, axis=1)
        best[inside] = 0.0
        todo = ~inside
        if not np.any(todo):
            return best, Y
        Xt, ht, tolt = X[todo], h[todo], tol[todo]
        bt = best[todo]
        Yt = Y[todo]
        for idx, GS, P in self._items:
            resid = Xt @ GS.T - ht[:, idx]
            cand = Xt - resid @ P.T
            feas = np.all(cand @ self.G.T <= ht + tolt, axis=1)
            d2 = np.sum((Xt - cand) ** 2, axis=1)
            upd = feas & (d2 < bt)
            bt[upd] = d2[upd]
            Yt[upd] = cand[upd]
        best[todo] = np.sqrt(bt)
        Y[todo] = Yt
        return best, Y


@lru_cache(maxsize=256)
def _cached_face_projector(key):
    C, d = _unkey(key)
    V = vertices(C, d)
    return NearestPoint(C, face_subsets(C, d, V))


def polytope_key(C, d):
    C = np.ascontiguousarray(C, dtype=float)
    d = np.ascontiguousarray(d, dtype=float)
    return (C.shape, C.tobytes(), d.tobytes())


def _unkey(key):
    shape, cb, db = key
    return np.frombuffer(cb).reshape(shape), np.frombuffer(db)


def face_projector(C, d):
    """Cached `NearestPoint` for a fixed bounded polytope."""
    return _cached_face_projector(polytope_key(C, d))
