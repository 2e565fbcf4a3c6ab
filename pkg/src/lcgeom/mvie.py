"""Maximum-volume ellipsoid inscribed in a bounded polytope.

The ellipsoid is ``{c + B u : |u| <= 1}`` with B symmetric positive
definite.  It lies in ``{x : g_i . x <= h_i}`` iff ``|B g_i| + g_i . c <= h_i``,
so the problem is ``max log det B`` under second-order cone constraints.
It is solved by a barrier method: for increasing ``t`` minimize

    -t log det B - sum_i log((h_i - g_i . c)^2 - |B g_i|^2)

with damped Newton steps.  Each cone barrier has parameter 2, so the
returned log-volume is within ``2 m / t`` of optimal.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _polytope as poly
from .exceptions import DegenerateSetError, EmptySetError, SolverError
from .funcrep import Ellipsoid, Polytope

GAP_TOL = 1e-9


def _sym_basis(n):
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            if i == j:
                E[i, i] = 1.0
            else:
                E[i, j] = E[j, i] = 1.0
            basis.append(E)
    return np.array(basis)


class _Barrier:
    def __init__(self, G, h):
        self.G, self.h = G, h
        self.m, self.n = G.shape
        self.E = _sym_basis(self.n)
        self.nb = len(self.E)
        # w_i = B g_i = Wt[i] @ zB
        self.Wt = np.einsum("jab,ib->iaj", self.E, G)

    def split(self, z):
        B = np.tensordot(z[: self.nb], self.E, axes=1)
        return B, z[self.nb:]

    def parts(self, z):
        B, c = self.split(z)
        s = self.h - self.G @ c
        w = self.G @ B  # rows are B g_i since B is symmetric
        D = s * s - np.sum(w * w, axis=1)
        return B, c, s, w, D

    def feasible(self, z):
        B, c, s, w, D = self.parts(z)
        if np.any(s <= 0) or np.any(D <= 0):
            return False
        return bool(np.linalg.eigvalsh(B)[0] > 0)

    def value(self, z, t):
        B, c, s, w, D = self.parts(z)
        sign, logdet = np.linalg.slogdet(B)
        return -t * logdet - float(np.sum(np.log(D)))

    def grad_hess(self, z, t):
        nb, n = self.nb, self.n
        B, c, s, w, D = self.parts(z)
        Binv = np.linalg.inv(B)
        N = nb + n
        g = np.zeros(N)
        H = np.zeros((N, N))
        # -t log det B
        BE = np.einsum("ab,jbc->jac", Binv, self.E)
        g[:nb] = -t * np.einsum("jaa->j", BE)
        H[:nb, :nb] = t * np.einsum("jab,lba->jl", BE, BE)
        # cone barriers; derivatives wrt (s, w) then chain rule
        gs = -2 * s / D
        gw = 2 * w / D[:, None]
        hss = 4 * s * s / D**2 - 2 / D
        hsw = -4 * s[:, None] * w / D[:, None] ** 2
        hww = 4 * w[:, :, None] * w[:, None, :] / D[:, None, None] ** 2 + 2 * np.eye(n) / D[:, None, None]
        Wt = self.Wt
        Gm = self.G
        # ds/dc = -g_i, dw/dzB = Wt[i]
        g[:nb] += np.einsum("ia,iaj->j", gw, Wt)
        g[nb:] += -(gs @ Gm)
        H[:nb, :nb] += np.einsum("iaj,iab,ibl->jl", Wt, hww, Wt)
        cross = -np.einsum("ia,iaj,ib->jb", hsw, Wt, Gm)
        H[:nb, nb:] += cross
        H[nb:, :nb] += cross.T
        H[nb:, nb:] += np.einsum("i,ia,ib->ab", hss, Gm, Gm)
        return g, H


def _solve(G, h, max_newton=200):
    n = G.shape[1]
    center, radius = poly.chebyshev_center(G, h)
    if radius <= poly.INTERIOR_TOL:
        raise DegenerateSetError("polytope has empty interior")
    bar = _Barrier(G, h)
    z = np.concatenate([[0.5 * radius if E.trace() == 1 and np.count_nonzero(E) == 1 else 0.0 for E in bar.E], center])
    t = 1.0
    m = G.shape[0]
    while True:
        for _ in range(max_newton):
            g, H = bar.grad_hess(z, t)
            try:
                step = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec2 = float(-g @ step)
            # dec2 / (2 t) bounds the remaining log-det suboptimality of the center
            if dec2 / 2 <= 1e-12 * max(1.0, t):
                break
            # inside the quadratic-convergence region a full step is safe; it also
            # sidesteps Armijo tests drowned by rounding when t is large
            if dec2 < 0.25 and bar.feasible(z + step):
                zn = z + step
            else:
                f0 = bar.value(z, t)
                alpha = 1.0
                while alpha > 1e-14:
                    zn = z + alpha * step
                    if bar.feasible(zn) and bar.value(zn, t) <= f0 - 0.25 * alpha * dec2:
                        break
                    alpha *= 0.5
                else:
                    break
            z = zn
        else:
            if dec2 / (2 * t) > 1e-10:
                raise SolverError("MVIE Newton iterations did not converge")
        if 2 * m / t < GAP_TOL:
            break
        t *= 20.0
    B, c = bar.split(z)
    return 0.5 * (B + B.T), c


@lru_cache(maxsize=512)
def _cached(key):
    C, d = poly._unkey(key)
    return _solve(C, d)


def mvie_polytope(C, d) -> tuple[np.ndarray, np.ndarray]:
    """``(B, c)`` of the max-volume ellipsoid ``c + B * ball`` inside ``{C x <= d}``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.asarray(d, dtype=float)
    norms = np.linalg.norm(C, axis=1)
    zero = norms <= 1e-14
    if np.any(d[zero] < 0):
        raise EmptySetError("polytope is empty")
    C, d, norms = C[~zero], d[~zero], norms[~zero]
    if not poly.recession_is_trivial(C):
        raise DegenerateSetError("polytope is unbounded")
    G = C / norms[:, None]
    h = d / norms
    B, c = _cached(poly.polytope_key(G, h))
    return B.copy(), c.copy()


def mvie(body) -> Ellipsoid:
    """Max-volume inscribed ellipsoid of a polytope or (trivially) of an ellipsoid."""
    if isinstance(body, Ellipsoid):
        return body
    if not isinstance(body, Polytope):
        raise TypeError("body must be a Polytope or an Ellipsoid")
    B, c = mvie_polytope(body.C, body.d)
    Binv = np.linalg.inv(B)
    return Ellipsoid(c, Binv @ Binv)
