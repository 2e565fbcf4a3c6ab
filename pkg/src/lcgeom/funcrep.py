"""Evaluable log-concave functions and their pointwise operations.

Two closed families are supported:

* `GaussianForm`: ``s * exp(-(x - m)^T Q (x - m) / 2)`` with Q positive definite.
* `PiecewiseLogAffine`: ``s * exp(-max_i (a_i . x + b_i))`` on the polytope
  ``P = {x : C x <= d}`` and zero outside.

Both are upper semicontinuous by construction (a Gaussian is continuous, and
the second family is the exponential of minus a convex piecewise-affine
function restricted to a closed polytope).  Both are closed under invertible
affine maps and positive powers.  Instances are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.special import gammainccinv, gammaln

from . import _polytope as poly
from .exceptions import (
    DegenerateSetError,
    DimensionError,
    EmptySetError,
    IllConditionedError,
    InvalidFunctionError,
    NotPositiveDefiniteError,
    SolverError,
)
from .grassmann import Frame

COND_CAP = 1e12
# relative gap certified by the dilation and projection subproblems (exponent units)
EXPONENT_TOL = 1e-8


def _as_matrix(a, name, shape=None):
    a = np.array(a, dtype=float)
    if shape is not None and a.shape != shape:
        raise DimensionError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidFunctionError(f"{name} has non-finite entries")
    a.setflags(write=False)
    return a


class LogConcaveFn:
    """Common interface of the two families.  Call on points to evaluate."""

    dim: int
    scale: float

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.dim:
            raise DimensionError(f"expected points in R^{self.dim}, got shape {X.shape}")
        single = X.ndim == 1
        vals = self._eval(np.atleast_2d(X))
        return float(vals[0]) if single else vals

    def log_value(self, X):
        with np.errstate(divide="ignore"):
            return np.log(self(X))

    def _eval(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def key(self):
        """Hashable identity of the function's parameters."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class GaussianForm(LogConcaveFn):
    """``scale * exp(-(x - center)^T precision (x - center) / 2)``."""

    scale: float
    center: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        s = float(self.scale)
        if not (s > 0 and math.isfinite(s)):
            raise InvalidFunctionError("scale must be positive and finite")
        m = _as_matrix(np.atleast_1d(self.center), "center")
        if m.ndim != 1:
            raise DimensionError("center must be a vector")
        n = m.shape[0]
        Q = np.array(self.precision, dtype=float).reshape(n, n) if np.size(self.precision) == n * n else None
        if Q is None:
            raise DimensionError(f"precision must be {n} x {n}")
        if np.max(np.abs(Q - Q.T)) > 1e-10 * max(1.0, np.max(np.abs(Q))):
            raise NotPositiveDefiniteError("precision matrix is not symmetric")
        Q = 0.5 * (Q + Q.T)
        eig = np.linalg.eigvalsh(Q)
        if eig[0] <= 0:
            raise NotPositiveDefiniteError(f"precision matrix is not positive definite (min eigenvalue {eig[0]:.3g})")
        object.__setattr__(self, "scale", s)
        object.__setattr__(self, "center", m)
        object.__setattr__(self, "precision", _as_matrix(Q, "precision"))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def _eval(self, X):
        D = X - self.center
        q = np.einsum("ij,jk,ik->i", D, self.precision, D)
        return self.scale * np.exp(-0.5 * q)

    def key(self):
        return ("gaussian", self.scale, self.center.tobytes(), self.precision.tobytes())

    @cached_property
    def covariance(self) -> np.ndarray:
        return np.linalg.inv(self.precision)

    def __repr__(self):
        return f"GaussianForm(dim={self.dim}, scale={self.scale:g})"


@dataclass(frozen=True, eq=False)
class PiecewiseLogAffine(LogConcaveFn):
    """``scale * exp(-max_i (slopes_i . x + offsets_i))`` on ``{C x <= d}``.

    An empty constraint matrix means the domain is all of R^n; then the
    potential itself must be coercive.
    """

    scale: float
    slopes: np.ndarray
    offsets: np.ndarray
    C: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        s = float(self.scale)
        if not (s > 0 and math.isfinite(s)):
            raise InvalidFunctionError("scale must be positive and finite")
        A = _as_matrix(np.atleast_2d(self.slopes), "slopes")
        n = A.shape[1]
        b = _as_matrix(np.atleast_1d(self.offsets), "offsets", (A.shape[0],))
        C = np.asarray(self.C, dtype=float)
        C = _as_matrix(C.reshape(-1, n) if C.size else np.zeros((0, n)), "C")
        d = _as_matrix(np.atleast_1d(self.d) if C.shape[0] else np.zeros(0), "d", (C.shape[0],))
        for name, val in (("scale", s), ("slopes", A), ("offsets", b), ("C", C), ("d", d)):
            object.__setattr__(self, name, val)
        if C.shape[0]:
            try:
                _, radius = poly.chebyshev_center(C, d)
            except EmptySetError:
                raise InvalidFunctionError("domain polytope is empty") from None
            if radius <= poly.INTERIOR_TOL:
                raise InvalidFunctionError("domain polytope has empty interior (zero mass)")
        if not self.bounded_domain and not poly.recession_is_trivial(np.vstack([C, A])):
            raise InvalidFunctionError("function is not integrable: potential is not coercive on the domain's recession cone")

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @cached_property
    def bounded_domain(self) -> bool:
        return self.C.shape[0] > 0 and poly.recession_is_trivial(self.C)

    @cached_property
    def is_flat(self) -> bool:
        """True when the potential is constant, i.e. f is a multiple of an indicator."""
        return bool(np.all(self.slopes == 0))

    def potential(self, X):
        return np.max(X @ self.slopes.T + self.offsets, axis=1)

    def inside(self, X, tol=1e-12):
        if self.C.shape[0] == 0:
            return np.ones(X.shape[0], dtype=bool)
        return np.all(X @ self.C.T <= self.d + tol * (1 + np.abs(self.d)), axis=1)

    def _eval(self, X):
        out = np.zeros(X.shape[0])
        ins = self.inside(X)
        if np.any(ins):
            out[ins] = self.scale * np.exp(-self.potential(X[ins]))
        return out

    def key(self):
        return ("pla", self.scale, self.slopes.tobytes(), self.offsets.tobytes(), self.C.tobytes(), self.d.tobytes(), self.dim)

    @cached_property
    def min_potential(self) -> tuple[float, np.ndarray]:
        if self.is_flat:
            x0 = poly.chebyshev_center(self.C, self.d)[0]
            return float(np.max(self.offsets)), x0
        return poly.min_max_affine(self.slopes, self.offsets, self.C if self.C.shape[0] else None, self.d)

    def __repr__(self):
        return f"PiecewiseLogAffine(dim={self.dim}, pieces={self.slopes.shape[0]}, facets={self.C.shape[0]})"


def polytope_indicator(C, d, scale=1.0) -> PiecewiseLogAffine:
    """``scale * I_P`` for ``P = {C x <= d}``."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return PiecewiseLogAffine(scale, np.zeros((1, C.shape[1])), np.zeros(1), C, d)


def box_indicator(lo, hi, scale=1.0) -> PiecewiseLogAffine:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    C = np.vstack([np.eye(n), -np.eye(n)])
    return polytope_indicator(C, np.concatenate([hi, -lo]), scale)


def regular_polygon_indicator(sides: int, radius: float = 1.0, scale=1.0) -> PiecewiseLogAffine:
    """Indicator of the regular polygon inscribed in the circle of ``radius``."""
    ang = 2 * np.pi * (np.arange(sides) + 0.5) / sides
    C = np.column_stack([np.cos(ang), np.sin(ang)])
    d = np.full(sides, radius * np.cos(np.pi / sides))
    return polytope_indicator(C, d, scale)


def standard_gaussian(n: int, scale=1.0) -> GaussianForm:
    return GaussianForm(scale, np.zeros(n), np.eye(n))


# ---------------------------------------------------------------- bodies


@dataclass(frozen=True, eq=False)
class Polytope:
    """Convex body ``{x : C x <= d}``."""

    C: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if C.shape[0] != d.shape[0]:
            raise DimensionError("C and d disagree in the number of constraints")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)
        if C.shape[0] and not poly.is_feasible(C, d):
            raise EmptySetError("polytope is empty")

    @property
    def dim(self) -> int:
        return self.C.shape[1]

    def contains(self, X, tol=1e-12):
        X = np.atleast_2d(X)
        return np.all(X @ self.C.T <= self.d + tol * (1 + np.abs(self.d)), axis=1)

    def support(self, U):
        """Support function ``max_{x in P} <u, x>`` for each row of ``U``."""
        V = poly.vertices(self.C, self.d)
        return np.max(np.atleast_2d(U) @ V.T, axis=1)


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Convex body ``{x : (x - center)^T shape (x - center) <= 1}``."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        M = np.asarray(self.shape, dtype=float).reshape(c.shape[0], c.shape[0])
        M = 0.5 * (M + M.T)
        if np.linalg.eigvalsh(M)[0] <= 0:
            raise NotPositiveDefiniteError("ellipsoid shape matrix must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", M)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def contains(self, X, tol=1e-12):
        D = np.atleast_2d(X) - self.center
        return np.einsum("ij,jk,ik->i", D, self.shape, D) <= 1 + tol

    def axes_matrix(self):
        """Symmetric ``B`` with ``E = center + B * (unit ball)``."""
        lam, V = np.linalg.eigh(self.shape)
        return (V / np.sqrt(lam)) @ V.T

    def support(self, U):
        U = np.atleast_2d(U)
        inv = np.linalg.inv(self.shape)
        return U @ self.center + np.sqrt(np.einsum("ij,jk,ik->i", U, inv, U))


ConvexBodyDesc = Polytope | Ellipsoid


# ---------------------------------------------------------------- operations


def evaluate(f: LogConcaveFn, x) -> float:
    """Value of ``f`` at a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != f.dim:
        raise DimensionError(f"point must lie in R^{f.dim}")
    return f(x)


def rescale(f: LogConcaveFn, factor: float) -> LogConcaveFn:
    """``factor * f`` for ``factor > 0``."""
    if not factor > 0:
        raise ValueError("factor must be positive")
    if isinstance(f, GaussianForm):
        return GaussianForm(f.scale * factor, f.center, f.precision)
    return PiecewiseLogAffine(f.scale * factor, f.slopes, f.offsets, f.C, f.d)


def affine_image(f: LogConcaveFn, A, shift=None, cond_cap: float = COND_CAP) -> LogConcaveFn:
    """The function ``x -> f(A^{-1}(x - shift))``."""
    n = f.dim
    A = np.asarray(A, dtype=float)
    if A.shape != (n, n):
        raise DimensionError(f"A must be {n} x {n}")
    shift = np.zeros(n) if shift is None else np.asarray(shift, dtype=float)
    if shift.shape != (n,):
        raise DimensionError(f"shift must lie in R^{n}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_cap:
        raise IllConditionedError(f"linear map is singular or ill-conditioned (cond={cond:.3g})")
    Ainv = np.linalg.inv(A)
    if isinstance(f, GaussianForm):
        Q = Ainv.T @ f.precision @ Ainv
        return GaussianForm(f.scale, A @ f.center + shift, 0.5 * (Q + Q.T))
    slopes = f.slopes @ Ainv
    offsets = f.offsets - slopes @ shift
    C = f.C @ Ainv
    d = f.d + C @ shift if f.C.shape[0] else f.d
    return PiecewiseLogAffine(f.scale, slopes, offsets, C, d)


def translate(f: LogConcaveFn, v) -> LogConcaveFn:
    return affine_image(f, np.eye(f.dim), v)


def pointwise_power(f: LogConcaveFn, p: float) -> LogConcaveFn:
    """``f ** p`` for ``p > 0``."""
    if not p > 0:
        raise ValueError("power must be positive")
    if isinstance(f, GaussianForm):
        return GaussianForm(f.scale**p, f.center, p * f.precision)
    return PiecewiseLogAffine(f.scale**p, p * f.slopes, p * f.offsets, f.C, f.d)


def sup_norm(f: LogConcaveFn) -> tuple[float, np.ndarray]:
    """``(max f, a maximizer)``; the maximum is always attained."""
    if isinstance(f, GaussianForm):
        return f.scale, f.center.copy()
    tau, x = f.min_potential
    return f.scale * math.exp(-tau), np.asarray(x, dtype=float)


def level_set(f: LogConcaveFn, t: float) -> ConvexBodyDesc:
    """``A_t(f) = {x : f(x) >= t}`` for ``0 < t <= max f``."""
    if not t > 0:
        raise ValueError("level must be positive")
    top, _ = sup_norm(f)
    if t > top * (1 + 1e-12):
        raise EmptySetError(f"level {t:g} exceeds the maximum {top:g}")
    u = math.log(f.scale / t)
    if isinstance(f, GaussianForm):
        if u <= 0:
            raise DegenerateSetError("level set at the maximum of a Gaussian is a single point")
        return Ellipsoid(f.center, f.precision / (2 * u))
    C = np.vstack([f.C, f.slopes])
    d = np.concatenate([f.d, u - f.offsets])
    keep = np.any(C != 0, axis=1)
    if np.any(d[~keep] < -1e-12):
        raise EmptySetError("level set is empty")
    return Polytope(C[keep], d[keep])


@dataclass(frozen=True)
class Envelope:
    """``f(x) <= A * exp(-B |x|)`` and the tail of that bound beyond ``R`` is small."""

    A: float
    B: float
    R: float


def _tail_radius(A, B, n, eps):
    # integral of A e^{-B|x|} over |x| > R is A n w_n Gamma(n, B R) / B^n
    log_total = math.log(A) + math.log(n) + log_unit_ball_volume(n) + gammaln(n) - n * math.log(B)
    q = eps / math.exp(log_total)
    if q >= 1:
        return 0.0
    return float(gammainccinv(n, q) / B)


def log_unit_ball_volume(n: int) -> float:
    return 0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1)


def truncation_envelope(f: LogConcaveFn, tail_eps: float = 1e-9, n_probe: int = 4096, seed: int = 0) -> Envelope:
    """Exponential envelope ``A e^{-B|x|}`` and a radius with small envelope tail.

    For a Gaussian ``B = sqrt(lambda_min)`` and ``A = s e^{1/2 + B|m|}`` follow
    from completing the square.  For piecewise log-affine functions ``B`` is
    half the minimal growth rate of the potential per unit of l1 norm and
    ``A`` is the exact maximum of ``f(x) e^{B |x|_1}`` (one LP per orthant).
    Bounded domains report the circumradius about the origin as ``R``.
    The bound is re-verified on random probe points.
    """
    if not tail_eps > 0:
        raise ValueError("tail_eps must be positive")
    n = f.dim
    if isinstance(f, GaussianForm):
        lam = float(np.linalg.eigvalsh(f.precision)[0])
        B = math.sqrt(lam)
        A = f.scale * math.exp(0.5 + B * float(np.linalg.norm(f.center)))
        R = _tail_radius(A, B, n, tail_eps)
    elif f.bounded_domain:
        V = poly.vertices(f.C, f.d)
        R = float(np.max(np.linalg.norm(V, axis=1)))
        top, _ = sup_norm(f)
        B = 1.0
        A = top * math.exp(B * R)
    else:
        A, B = _pla_envelope(f)
        R = _tail_radius(A, B, n, tail_eps)
    env = Envelope(A, B, R)
    _verify_envelope(f, env, n_probe, seed)
    return env


def _pla_envelope(f: PiecewiseLogAffine):
    n = f.dim
    G = np.vstack([f.C, f.slopes])
    # beta1 = min over the l1 unit sphere of the recession cone of max_i a_i . u
    beta = math.inf
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).reshape(n, -1).T
    p = f.slopes.shape[0]
    for sg in signs:
        # variables (u, t): minimize t, a_i u <= t, C u <= 0, sg . u = 1, sg_i u_i >= 0
        c = np.zeros(n + 1)
        c[-1] = 1.0
        A_ub = [np.hstack([f.slopes, -np.ones((p, 1))])]
        b_ub = [np.zeros(p)]
        if f.C.shape[0]:
            A_ub.append(np.hstack([f.C, np.zeros((f.C.shape[0], 1))]))
            b_ub.append(np.zeros(f.C.shape[0]))
        A_ub.append(np.hstack([-np.diag(sg), np.zeros((n, 1))]))
        b_ub.append(np.zeros(n))
        res = linprog(c, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub), A_eq=np.append(sg, 0.0)[None, :], b_eq=[1.0],
                      bounds=[(None, None)] * (n + 1), method="highs")
        if res.status == 2:
            continue
        if res.status != 0:
            raise SolverError(f"envelope LP failed: {res.message}")
        beta = min(beta, res.fun)
    if not beta > 0:
        raise SolverError("potential is not coercive")
    B = 0.5 * beta if math.isfinite(beta) else 1.0
    # A = s * exp(max over orthants of (B sg.x - phi(x)) over P)
    best = -math.inf
    for sg in signs:
        c = np.append(-B * sg, 1.0)
        A_ub = [np.hstack([f.slopes, -np.ones((p, 1))])]
        b_ub = [-f.offsets]
        if f.C.shape[0]:
            A_ub.append(np.hstack([f.C, np.zeros((f.C.shape[0], 1))]))
            b_ub.append(f.d)
        A_ub.append(np.hstack([-np.diag(sg), np.zeros((n, 1))]))
        b_ub.append(np.zeros(n))
        res = linprog(c, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub), bounds=[(None, None)] * (n + 1), method="highs")
        if res.status == 2:
            continue
        if res.status != 0:
            raise SolverError(f"envelope LP failed: {res.message}")
        best = max(best, -res.fun)
    return f.scale * math.exp(best), B


def _verify_envelope(f, env, n_probe, seed):
    rng = np.random.default_rng(seed)
    _, x0 = sup_norm(f)
    radius = max(env.R, 1.0) * 2
    X = x0 + radius * rng.uniform(-1, 1, size=(n_probe, f.dim))
    X = np.vstack([X, x0[None, :]])
    bound = env.A * np.exp(-env.B * np.linalg.norm(X, axis=1))
    if np.any(f(X) > bound * (1 + 1e-9) + 1e-300):
        raise SolverError("exponential envelope violated on probe grid (internal error)")


# ---------------------------------------------------------------- dilation


def dilate_value(f: LogConcaveFn, delta: float, x) -> float:
    """``f_delta(x) = sup { f(y) : |y - x| <= delta }``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise DimensionError(f"point must lie in R^{f.dim}")
    return float(dilate_values(f, delta, x[None, :])[0])


def dilate_values(f: LogConcaveFn, delta: float, X) -> np.ndarray:
    """Vectorized `dilate_value` over the rows of ``X``."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if delta == 0:
        return f(X)
    if isinstance(f, GaussianForm):
        return _gaussian_dilate(f, delta, X)
    if f.is_flat:
        top = f.scale * math.exp(-float(np.max(f.offsets)))
        return np.where(domain_distance(f, X) <= delta * (1 + 1e-12) + 1e-12, top, 0.0)
    return _pla_dilate(f, delta, X)


def domain_distance(f: PiecewiseLogAffine, X) -> np.ndarray:
    """Euclidean distance from each row of ``X`` to the domain polytope."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if f.C.shape[0] == 0:
        return np.zeros(X.shape[0])
    if f.bounded_domain:
        proj = poly.face_projector(f.C, f.d)
    else:
        proj = poly.NearestPoint(f.C, poly.independent_subsets(f.C, f.dim))
    return proj.project(X, f.d)[0]


def _gaussian_dilate(f: GaussianForm, delta, X):
    # min over |w| <= delta of (v + w)^T Q (v + w): trust-region subproblem,
    # solved by safeguarded Newton on 1/|w(mu)| - 1/delta (secular equation)
    lam, V = np.linalg.eigh(f.precision)
    v = (X - f.center) @ V
    nv = np.linalg.norm(v, axis=1)
    q = np.zeros(X.shape[0])
    out = nv > delta
    if np.any(out):
        vo = v[out]
        lo = np.zeros(vo.shape[0])
        hi = lam[-1] * nv[out] / delta
        mu = 0.5 * (lo + hi)
        for _ in range(200):
            w = lam * vo / (lam + mu[:, None])
            wn = np.linalg.norm(w, axis=1)
            phi = 1.0 / wn - 1.0 / delta
            lo = np.where(phi < 0, mu, lo)
            hi = np.where(phi >= 0, mu, hi)
            dphi = np.sum(w**2 / (lam + mu[:, None]), axis=1) / wn**3
            step = mu - phi / dphi
            bad = ~((step > lo) & (step < hi))
            step[bad] = 0.5 * (lo[bad] + hi[bad])
            done = np.abs(step - mu) <= 1e-15 * (1 + mu)
            mu = step
            if np.all(done) or np.all(hi - lo <= 1e-14 * (1 + hi)):
                break
        r = vo * (mu[:, None] / (lam + mu[:, None]))
        q[out] = np.sum(lam * r**2, axis=1)
    return f.scale * np.exp(-0.5 * q)


def _pla_dilate(f: PiecewiseLogAffine, delta, X):
    # f_delta(x) = s e^{-u*} with u* = min { u : dist(x, A(u)) <= delta }, where
    # A(u) = {y in P : a_i y + b_i <= u}.  dist(x, A(u)) is nonincreasing in u,
    # so bisection on u brackets u* and the bracket width certifies the gap.
    N, n = X.shape
    out = np.zeros(N)
    rows_a = np.any(f.slopes != 0, axis=1)
    A_nz, b_nz = f.slopes[rows_a], f.offsets[rows_a]
    if f.C.shape[0]:
        P_proj = poly.face_projector(f.C, f.d) if f.bounded_domain else poly.NearestPoint(f.C, poly.independent_subsets(f.C, n))
        dist, Y0 = P_proj.project(X, f.d)
    else:
        dist, Y0 = np.zeros(N), X.copy()
    ok = dist <= delta * (1 + 1e-12) + 1e-12
    if not np.any(ok):
        return out
    Xo = X[ok]
    u_lo = np.full(Xo.shape[0], f.min_potential[0])
    u_hi = f.potential(Y0[ok])
    G = np.vstack([f.C, A_nz])
    projector = _level_projector(f)
    r = f.C.shape[0]
    thresh = delta * (1 + 1e-12) + 1e-12
    for _ in range(200):
        if np.all(u_hi - u_lo <= 0.1 * EXPONENT_TOL * (1 + np.abs(u_hi))):
            break
        mid = 0.5 * (u_lo + u_hi)
        h = np.empty((Xo.shape[0], G.shape[0]))
        h[:, :r] = f.d
        h[:, r:] = mid[:, None] - b_nz
        dmid, _ = projector.project(Xo, h)
        feas = dmid <= thresh
        u_hi = np.where(feas, mid, u_hi)
        u_lo = np.where(feas, u_lo, mid)
    out[ok] = f.scale * np.exp(-u_hi)
    return out


_LEVEL_PROJECTORS: dict = {}


def _level_projector(f: PiecewiseLogAffine):
    key = f.key()
    proj = _LEVEL_PROJECTORS.get(key)
    if proj is None:
        rows_a = np.any(f.slopes != 0, axis=1)
        G = np.vstack([f.C, f.slopes[rows_a]])
        proj = poly.NearestPoint(G, poly.independent_subsets(G, f.dim))
        _LEVEL_PROJECTORS[key] = proj
    return proj


# ---------------------------------------------------------------- projections and sections


def _check_frame(f, H: Frame):
    if H.n != f.dim:
        raise DimensionError(f"frame lives in R^{H.n}, function in R^{f.dim}")
    W = np.hstack([H.basis, H.complement])
    if W.size and np.max(np.abs(W.T @ W - np.eye(f.dim))) > 1e-10:
        raise ValueError("frame is not orthonormal")


def restrict_gaussian(f: GaussianForm, H: Frame, mode: str) -> GaussianForm | float:
    """Projection or section of a Gaussian onto H, as a Gaussian in frame coordinates.

    Returns the scalar supremum when ``H = {0}`` and mode is projection.
    """
    _check_frame(f, H)
    U = H.basis
    if H.k == 0:
        return f.scale if mode == "projection" else float(f(np.zeros(f.dim)))
    if mode == "projection":
        prec = np.linalg.inv(U.T @ f.covariance @ U)
        return GaussianForm(f.scale, U.T @ f.center, 0.5 * (prec + prec.T))
    if mode == "section":
        Qh = U.T @ f.precision @ U
        lin = U.T @ f.precision @ f.center
        y0 = np.linalg.solve(Qh, lin)
        expo = f.center @ f.precision @ f.center - y0 @ Qh @ y0
        return GaussianForm(f.scale * math.exp(-0.5 * max(expo, 0.0)), y0, 0.5 * (Qh + Qh.T))
    raise ValueError(f"unknown mode {mode!r}")


def restrict_value(f: LogConcaveFn, H: Frame, y, mode: str = "projection") -> float:
    """``P_H f(y)`` (sup over the flat ``y + H-perp``) or ``S_H f(y) = f(y)``.

    ``y`` is given in the frame's coordinates.  Piecewise log-affine
    projections solve an epigraph LP in the n - k complement variables.
    """
    _check_frame(f, H)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != H.k:
        raise DimensionError(f"expected {H.k} frame coordinates")
    x = H.basis @ y if H.k else np.zeros(f.dim)
    if mode == "section":
        return float(f(x))
    if mode != "projection":
        raise ValueError(f"unknown mode {mode!r}")
    if H.k == f.dim:
        return float(f(x))
    if isinstance(f, GaussianForm):
        g = restrict_gaussian(f, H, "projection")
        return float(g) if H.k == 0 else float(g(y))
    return _pla_projection_lp(f, H, x)


def _pla_projection_lp(f: PiecewiseLogAffine, H: Frame, x):
    V = H.complement
    m = V.shape[1]
    p = f.slopes.shape[0]
    A_ub = [np.hstack([f.slopes @ V, -np.ones((p, 1))])]
    b_ub = [-f.offsets - f.slopes @ x]
    if f.C.shape[0]:
        A_ub.append(np.hstack([f.C @ V, np.zeros((f.C.shape[0], 1))]))
        b_ub.append(f.d - f.C @ x)
    c = np.zeros(m + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub), bounds=[(None, None)] * (m + 1), method="highs")
    if res.status == 2:
        return 0.0
    if res.status != 0:
        raise SolverError(f"projection LP failed: {res.message}")
    return f.scale * math.exp(-res.fun)


class PLAProjector:
    """Batched evaluation of ``P_H f`` for a piecewise log-affine function.

    The value at ``y`` is ``s e^{-tau*}`` where ``tau*`` is the optimum of a
    small LP in (z, tau), z in H-perp.  For a one-dimensional complement the
    LP is solved exactly by checking the interval endpoints and the
    breakpoints of the potential; otherwise every basic solution (vertex)
    of the LP is enumerated: its constraint matrix does not depend on ``y``,
    so each vertex is an affine function of ``y``.
    """

    _CHUNK = 4_000_000

    def __init__(self, f: PiecewiseLogAffine, H: Frame):
        _check_frame(f, H)
        self.f, self.H = f, H
        U, V = H.basis, H.complement
        self.m = V.shape[1]
        A, b, C, d = f.slopes, f.offsets, f.C, f.d
        self.alpha = A @ V          # (p, m)
        self.AU = A @ U             # (p, k)
        self.gamma = C @ V          # (r, m)
        self.CU = C @ U             # (r, k)
        self.b, self.d = b, d
        if self.m >= 2:
            self._build_vertices()

    def _build_vertices(self):
        import itertools

        p, r, m = self.alpha.shape[0], self.gamma.shape[0], self.m
        G = np.vstack([np.hstack([self.alpha, -np.ones((p, 1))]), np.hstack([self.gamma, np.zeros((r, 1))])])
        K = np.vstack([self.AU, self.CU])       # h(y) = h0 - K y
        h0 = np.concatenate([-self.b, self.d])
        W0, W1 = [], []
        for S in itertools.combinations(range(G.shape[0]), m + 1):
            GS = G[list(S)]
            if abs(np.linalg.det(GS)) < 1e-12:
                continue
            inv = np.linalg.inv(GS)
            W0.append(inv @ h0[list(S)])
            W1.append(inv @ K[list(S)])
        self.G, self.K, self.h0 = G, K, h0
        self.W0 = np.array(W0)                  # (nv, m+1)
        self.W1 = np.array(W1)                  # (nv, m+1, k)

    def __call__(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.m == 0:
            return self.f(self.H.embed(Y))
        if self.m == 1:
            return self._line(Y)
        return self._vertices(Y)

    def _line(self, Y):
        N = Y.shape[0]
        a = self.alpha[:, 0]
        beta = self.b + Y @ self.AU.T                      # (N, p)
        big = 1e8
        lo = np.full(N, -big)
        hi = np.full(N, big)
        feas = np.ones(N, dtype=bool)
        if self.gamma.shape[0]:
            g = self.gamma[:, 0]
            rhs = self.d - Y @ self.CU.T                   # (N, r)
            pos, neg, zero = g > 1e-15, g < -1e-15, np.abs(g) <= 1e-15
            if np.any(pos):
                hi = np.minimum(hi, np.min(rhs[:, pos] / g[pos], axis=1))
            if np.any(neg):
                lo = np.maximum(lo, np.max(rhs[:, neg] / g[neg], axis=1))
            if np.any(zero):
                feas &= np.all(rhs[:, zero] >= -1e-12 * (1 + np.abs(self.d[zero])), axis=1)
        feas &= lo <= hi + 1e-12 * (1 + np.abs(hi))
        hi = np.maximum(hi, lo)
        cands = [lo, hi]
        p = a.shape[0]
        for i in range(p):
            for j in range(i + 1, p):
                da = a[i] - a[j]
                if abs(da) > 1e-15:
                    cands.append(np.clip((beta[:, j] - beta[:, i]) / da, lo, hi))
        Z = np.stack(cands, axis=1)                        # (N, c)
        vals = np.max(Z[:, :, None] * a[None, None, :] + beta[:, None, :], axis=2)
        tau = np.min(vals, axis=1)
        out = np.where(feas, self.f.scale * np.exp(-tau), 0.0)
        return out

    def _vertices(self, Y):
        N = Y.shape[0]
        nv = self.W0.shape[0]
        q = self.G.shape[0]
        out = np.zeros(N)
        if nv == 0:
            return out
        step = max(1, self._CHUNK // (nv * q))
        for s in range(0, N, step):
            Yc = Y[s:s + step]
            Wc = self.W0[None] - np.einsum("vjk,nk->nvj", self.W1, Yc)     # (n, nv, m+1)
            h = self.h0[None] - Yc @ self.K.T                               # (n, q)
            lhs = np.einsum("qj,nvj->nvq", self.G, Wc)
            feas = np.all(lhs <= h[:, None, :] + 1e-9 * (1 + np.abs(h[:, None, :])), axis=2)
            tau = np.where(feas, Wc[:, :, -1], np.inf)
            best = np.min(tau, axis=1)
            out[s:s + step] = np.where(np.isfinite(best), self.f.scale * np.exp(-best), 0.0)
        return out


def projection_values(f: LogConcaveFn, H: Frame, Y) -> np.ndarray:
    """Vectorized ``P_H f`` at frame coordinates ``Y`` (N x k)."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if isinstance(f, GaussianForm):
        g = restrict_gaussian(f, H, "projection")
        if H.k == 0:
            return np.full(Y.shape[0], float(g))
        return g(Y)
    return PLAProjector(f, H)(Y)


def section_values(f: LogConcaveFn, H: Frame, Y) -> np.ndarray:
    """Vectorized ``S_H f`` at frame coordinates ``Y``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    _check_frame(f, H)
    return f(H.embed(Y))


# ---------------------------------------------------------------- JSON specs


def from_spec(spec: dict) -> LogConcaveFn:
    """Build a function from its JSON description.

    ``{"variant": "gaussian", "dim": n, "scale": s, "center": [...],
    "precision": [[...], ...]}`` or ``{"variant": "pla", "dim": n,
    "scale": s, "slopes": [[...]], "offsets": [...], "C": [[...]],
    "d": [...]}``.  Matrices are row-major nested lists; ``C``/``d`` may be
    omitted for an unconstrained domain.
    """
    if not isinstance(spec, dict):
        raise InvalidFunctionError("function spec must be a JSON object")
    variant = spec.get("variant")
    n = spec.get("dim")
    if not isinstance(n, int) or n < 1:
        raise InvalidFunctionError("'dim' must be a positive integer")
    scale = float(spec.get("scale", 1.0))
    if variant == "gaussian":
        center = spec.get("center", [0.0] * n)
        prec = spec.get("precision", np.eye(n).tolist())
        if np.shape(center) != (n,):
            raise DimensionError(f"'center' must have length {n}")
        if np.shape(prec) != (n, n):
            raise DimensionError(f"'precision' must be {n} x {n}")
        return GaussianForm(scale, center, prec)
    if variant == "pla":
        slopes = spec.get("slopes", [[0.0] * n])
        offsets = spec.get("offsets", [0.0] * len(slopes))
        C = spec.get("C", [])
        d = spec.get("d", [])
        if np.ndim(slopes) != 2 or np.shape(slopes)[1] != n:
            raise DimensionError(f"'slopes' must be p x {n}")
        if len(C) and (np.ndim(C) != 2 or np.shape(C)[1] != n):
            raise DimensionError(f"'C' must be r x {n}")
        return PiecewiseLogAffine(scale, slopes, offsets, np.asarray(C, dtype=float).reshape(-1, n), d)
    raise InvalidFunctionError(f"unknown variant {variant!r} (expected 'gaussian' or 'pla')")


def to_spec(f: LogConcaveFn) -> dict:
    if isinstance(f, GaussianForm):
        return {"variant": "gaussian", "dim": f.dim, "scale": f.scale, "center": f.center.tolist(),
                "precision": f.precision.tolist()}
    return {"variant": "pla", "dim": f.dim, "scale": f.scale, "slopes": f.slopes.tolist(),
            "offsets": f.offsets.tolist(), "C": f.C.tolist(), "d": f.d.tolist()}
