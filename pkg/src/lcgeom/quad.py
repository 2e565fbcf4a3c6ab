"""Integration engine: L^p norms, subspace norms, moments and body volumes.

Every result is an `Estimate` carrying a standard error.  Monte Carlo
integrals sample uniformly in the bounding box of a super-level set
``K_u = {f >= max f * e^{-u}}``.  For a log-concave function on R^n the mass
outside ``K_u`` is at most ``Q(n+1, u) / (1 - Q(n+1, u))`` of the total
(``Q`` the regularized upper incomplete gamma function), so choosing ``u``
from that bound makes the truncation bias a known fraction of the value.
That bias is folded into the reported standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, Delaunay, QhullError
from scipy.special import gammainc, gammaincc, gammainccinv, gammaln

from . import _polytope as poly
from .exceptions import DegenerateSetError, DimensionError, EmptySetError, SolverError
from .funcrep import (
    Ellipsoid,
    GaussianForm,
    LogConcaveFn,
    PiecewiseLogAffine,
    Polytope,
    projection_values,
    restrict_gaussian,
    section_values,
    sup_norm,
)
from .grassmann import Frame, SeededStream, as_stream, stratified_sphere_pairs

METHODS = ("closed_form", "mc_box", "mc_importance", "mc_ray", "exact_polytope")
TAIL_TOL = 1e-4
_CHUNK = 1 << 15


@dataclass(frozen=True)
class Estimate:
    """A value with its Monte Carlo standard error."""

    value: float
    stderr: float = 0.0
    n_samples: int = 0
    method: str = "closed_form"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.stderr >= 0:
            raise ValueError("stderr must be nonnegative")

    @property
    def exact(self) -> bool:
        return self.method in ("closed_form", "exact_polytope")

    def to_dict(self):
        return {"value": self.value, "stderr": self.stderr, "n_samples": self.n_samples, "method": self.method}

    def scaled(self, c: float) -> "Estimate":
        return Estimate(c * self.value, abs(c) * self.stderr, self.n_samples, self.method)

    def power(self, q: float) -> "Estimate":
        """``value ** q`` with the delta-method error."""
        v = self.value**q
        se = abs(q) * self.value ** (q - 1) * self.stderr if self.stderr else 0.0
        return Estimate(v, se, self.n_samples, self.method)


def exact(value: float, method: str = "closed_form") -> Estimate:
    return Estimate(float(value), 0.0, 0, method)


def combine_methods(*ests: Estimate) -> str:
    for e in ests:
        if not e.exact:
            return e.method
    return "exact_polytope" if any(e.method == "exact_polytope" for e in ests) else "closed_form"


def product(*terms: tuple[Estimate, float], const: float = 1.0) -> Estimate:
    """``const * prod value_i ** q_i`` with first-order error propagation."""
    val = const
    rel2 = 0.0
    n = 0
    for est, q in terms:
        val *= est.value**q
        if est.stderr and est.value:
            rel2 += (q * est.stderr / est.value) ** 2
        n += est.n_samples
    method = combine_methods(*(t[0] for t in terms))
    se = abs(val) * math.sqrt(rel2)
    if se == 0 and method not in ("closed_form", "exact_polytope"):
        method = "closed_form"
    return Estimate(val, se, n, method)


def omega(n: int) -> float:
    """Volume of the Euclidean unit ball in R^n."""
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1))


def _check_budget(budget):
    if not isinstance(budget, (int, np.integer)) or budget <= 0:
        raise ValueError("budget must be a positive integer")


def tail_level(dim: int, tol: float = TAIL_TOL) -> float:
    """Exponent ``u`` with relative mass outside ``K_u`` below ``tol``."""
    return float(gammainccinv(dim + 1, tol / (1 + tol)))


# ---------------------------------------------------------------- boxes


def _lp_box(G, h, M):
    """Bounding box of ``{M z : G z <= h}`` (rows of M are the output coordinates)."""
    k = M.shape[0]
    lo, hi = np.empty(k), np.empty(k)
    bounds = [(None, None)] * G.shape[1]
    for i in range(k):
        for sign in (1.0, -1.0):
            res = linprog(-sign * M[i], A_ub=G, b_ub=h, bounds=bounds, method="highs")
            if res.status == 2:
                raise EmptySetError("level set is empty")
            if res.status != 0:
                raise SolverError(f"bounding-box LP failed: {res.message}")
            if sign > 0:
                hi[i] = -res.fun
            else:
                lo[i] = res.fun
    return lo, hi


def _max_potential_on(A, b, C, d):
    try:
        V = poly.vertices(C, d)
    except (EmptySetError, DegenerateSetError):
        return math.inf
    return float(np.max(V @ A.T + b))


@dataclass(frozen=True)
class _Region:
    lo: np.ndarray
    hi: np.ndarray
    truncated: bool

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))


def _pla_region(f: PiecewiseLogAffine, p: float, U=None, mode="full", tol=TAIL_TOL):
    """Box for integrating ``f^p``, its projection or its section.

    ``U`` (n x k) gives the output coordinates for projection/section.
    Returns None when the integrand vanishes identically.
    """
    n = f.dim
    A, b, C, d = f.slopes, f.offsets, f.C, f.d
    if mode == "section":
        A, C = A @ U, C @ U
        k = U.shape[1]
        rows = [np.hstack([A, -np.ones((A.shape[0], 1))])]
        rhs = [-b]
        if C.shape[0]:
            rows.append(np.hstack([C, np.zeros((C.shape[0], 1))]))
            rhs.append(d)
        c = np.zeros(k + 1)
        c[-1] = 1.0
        res = linprog(c, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs), bounds=[(None, None)] * (k + 1), method="highs")
        if res.status == 2:
            return None
        if res.status != 0:
            raise SolverError(f"section maximum LP failed: {res.message}")
        tau, dim, M = float(res.fun), k, np.eye(k)
    else:
        tau = f.min_potential[0]
        dim = n if mode == "full" else U.shape[1]
        M = np.eye(n) if mode == "full" else U.T
    u = tail_level(dim, tol) / p
    G = np.vstack([C, A])
    h = np.concatenate([d, tau + u - b])
    truncated = True
    if C.shape[0] and poly.recession_is_trivial(C) and _max_potential_on(A, b, C, d) <= tau + u:
        G, h, truncated = C, d, False
    keep = np.any(G != 0, axis=1)
    lo, hi = _lp_box(G[keep], h[keep], M)
    if np.any(hi - lo <= 0):
        return None
    return _Region(lo, hi, truncated)


def _gaussian_region(g: GaussianForm, p: float, tol=TAIL_TOL):
    u = tail_level(g.dim, tol) / p
    half = np.sqrt(2 * u * np.diag(g.covariance))
    return _Region(g.center - half, g.center + half, True)


def _box_integral(values, region: _Region, budget: int, rng, dim: int, weights_out=None, tol=TAIL_TOL):
    """Stratified MC over ``region``: returns (integral, stderr, samples used).

    The box is cut into ``m^dim`` equal cells with two independent uniform
    points per cell; the within-cell pair differences give an unbiased
    variance estimate.  The tail bias bound is folded into the error.
    """
    m = max(1, int((budget / 2) ** (1.0 / dim)))
    cells = m**dim
    width = (region.hi - region.lo) / m
    cell_vol = float(np.prod(width))
    integral = 0.0
    var = 0.0
    step = max(1, _CHUNK // 2)
    for start in range(0, cells, step):
        idx = np.arange(start, min(cells, start + step))
        corner = region.lo + width * np.stack(np.unravel_index(idx, (m,) * dim), axis=1)
        X1 = corner + width * rng.random((idx.size, dim))
        X2 = corner + width * rng.random((idx.size, dim))
        v1 = values(X1)
        v2 = values(X2)
        integral += cell_vol * float(np.sum(v1 + v2)) / 2
        var += cell_vol**2 * float(np.sum((v1 - v2) ** 2)) / 4
        if weights_out is not None:
            weights_out(np.vstack([X1, X2]), np.concatenate([v1, v2]))
    # floor at rounding level so sampled estimates never claim zero error
    se = max(math.sqrt(var), 1e-13 * abs(integral), 1e-300)
    if region.truncated:
        se = math.hypot(se, tol * integral)
    return integral, se, 2 * cells


# ---------------------------------------------------------------- rays

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _radial_integrals(f: PiecewiseLogAffine, p: float, x0, T, orders=(0,)):
    """``int_0^R exp(-p phi(x0 + r t)) r^{n-1+j} dr`` for each row t of T, each j.

    Along a ray the potential is a maximum of affine functions of r, so
    the integral splits at the breakpoints of the upper envelope and each
    piece is an incomplete gamma function.
    """
    n = f.dim
    N = T.shape[0]
    alpha = T @ f.slopes.T
    beta = f.slopes @ x0 + f.offsets
    if f.C.shape[0]:
        ct = T @ f.C.T
        slack = np.clip(f.d - f.C @ x0, 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.where(ct > 0, slack / ct, np.inf)
        R = lim.min(axis=1)
    else:
        R = np.full(N, np.inf)
    m = alpha.shape[1]
    iu, ju = np.triu_indices(m, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        bp = (beta[ju] - beta[iu]) / (alpha[:, iu] - alpha[:, ju])
    bp = np.where(np.isfinite(bp) & (bp > 0), bp, 0.0)
    bp = np.minimum(bp, R[:, None])
    grid = np.sort(np.hstack([np.zeros((N, 1)), bp, np.where(np.isfinite(R), R, np.inf)[:, None]]), axis=1)
    r0, r1 = grid[:, :-1], grid[:, 1:]
    mid = np.where(np.isfinite(r1), 0.5 * (r0 + r1), r0 + 1.0)
    act = np.argmax(alpha[:, None, :] * mid[:, :, None] + beta[None, None, :], axis=2)
    lam = p * np.take_along_axis(alpha, act, axis=1)
    c = p * (beta[act] - math.log(f.scale))
    if np.any(~np.isfinite(r1) & (lam <= 0)):
        raise SolverError("potential is not coercive along a ray")
    out = []
    for j in orders:
        s = n + j
        val = np.zeros_like(r0)
        pos = (lam > 1e-12) & (r1 > r0)
        if np.any(pos):
            L, a, b = lam[pos], r0[pos], r1[pos]
            x0_, x1_ = L * a, L * b
            upper = x0_ > s
            diff = np.where(upper, gammaincc(s, x0_) - gammaincc(s, x1_), gammainc(s, x1_) - gammainc(s, x0_))
            val[pos] = np.exp(gammaln(s) - s * np.log(L) - c[pos]) * diff
        rising = (lam < 0) & (r1 > r0) & (-lam * (r1 - r0) > 1.0)
        if np.any(rising):
            # exact antiderivative of exp(mu r) r^{s-1}, mu > 0, integer s
            mu, a, b, cc = -lam[rising], r0[rising], r1[rising], c[rising]
            acc = np.zeros_like(mu)
            coef = 1.0
            for jj in range(s):
                term = coef * (np.exp(mu * b - cc) * b ** (s - 1 - jj) - np.exp(mu * a - cc) * a ** (s - 1 - jj))
                acc += (-1) ** jj * term / mu ** (jj + 1)
                coef *= s - 1 - jj
            val[rising] = acc
        flat = ~pos & ~rising & (r1 > r0)
        if np.any(flat):
            a, b, L = r0[flat], r1[flat], lam[flat]
            h = 0.5 * (b - a)
            rr = (a + h)[:, None] + h[:, None] * _GL_X[None, :]
            val[flat] = h * np.sum(_GL_W * np.exp(-L[:, None] * rr - c[flat][:, None]) * rr ** (s - 1), axis=1)
        out.append(val.sum(axis=1))
    return out


def _ray_origin(f: PiecewiseLogAffine) -> np.ndarray:
    """Start point for rays: the maximizer, pulled inside when it sits on the boundary.

    From an interior point the radial integral is continuous in the
    direction, which keeps the stratified variance estimate honest.
    """
    tau, x = f.min_potential
    if not f.C.shape[0]:
        return x
    # a super-level set is bounded even when the domain is not
    G = np.vstack([f.C, f.slopes])
    h = np.concatenate([f.d, tau + 1.0 - f.offsets])
    keep = np.linalg.norm(G, axis=1) > 0
    center, radius = poly.chebyshev_center(G[keep], h[keep])
    norms = np.linalg.norm(f.C, axis=1)
    if np.min((f.d - f.C @ x) / norms) >= 0.05 * radius:
        return x
    return x + 0.25 * (center - x)


def _ray_pairs(f: PiecewiseLogAffine, p: float, budget: int, rng, orders=(0,), x0=None):
    """Stratified ray integrals: ``(x0, [(T1, T2)], [(I1_j, I2_j) per order])``."""
    n = f.dim
    if x0 is None:
        x0 = _ray_origin(f)
    T1, T2 = stratified_sphere_pairs(n, budget // 2, rng)
    I1 = _radial_integrals(f, p, x0, T1, orders)
    I2 = _radial_integrals(f, p, x0, T2, orders) if T2 is not None else None
    return x0, T1, T2, I1, I2


def _ray_integral(f: PiecewiseLogAffine, p: float, budget: int, rng) -> tuple[float, float, int]:
    """``int f^p`` by exact radial integration along stratified rays."""
    n = f.dim
    area = n * omega(n)
    x0, T1, T2, I1, I2 = _ray_pairs(f, p, budget, rng)
    if T2 is None:
        return float(I1[0].sum()), 0.0, 2
    cells = T1.shape[0]
    w = area / cells
    integral = w * float(np.sum(I1[0] + I2[0])) / 2
    se = w * math.sqrt(float(np.sum((I1[0] - I2[0]) ** 2))) / 2
    return integral, max(se, 1e-13 * abs(integral)), 2 * cells


# ---------------------------------------------------------------- public API


def lp_norm(f: LogConcaveFn, p=1.0, budget: int = 100_000, stream=None, exact: bool = True) -> Estimate:
    """``||f||_p``.

    Gaussians and multiples of polytope indicators use closed forms unless
    ``exact=False``, which forces the Monte Carlo path.
    """
    if p == math.inf or p == "inf":
        return Estimate(sup_norm(f)[0], 0.0, 0, "closed_form")
    p = float(p)
    if not p >= 1:
        raise ValueError("p must be >= 1 or inf")
    _check_budget(budget)
    n = f.dim
    if exact and isinstance(f, GaussianForm):
        log_int = p * math.log(f.scale) + 0.5 * n * math.log(2 * math.pi) - 0.5 * np.linalg.slogdet(p * f.precision)[1]
        return Estimate(math.exp(log_int / p), 0.0, 0, "closed_form")
    if exact and isinstance(f, PiecewiseLogAffine) and f.is_flat and f.bounded_domain:
        top = sup_norm(f)[0]
        return Estimate(top * poly.polytope_volume(f.C, f.d) ** (1 / p), 0.0, 0, "exact_polytope")
    rng = as_stream(stream).generator()
    if isinstance(f, PiecewiseLogAffine):
        integral, se, used = _ray_integral(f, p, int(budget), rng)
        return Estimate(integral, se, used, "mc_ray").power(1 / p)
    region = _gaussian_region(f, p)
    integral, se, used = _box_integral(lambda X: f(X) ** p, region, int(budget), rng, n)
    return Estimate(integral, se, used, "mc_box").power(1 / p)


def lp_norm_importance(f: LogConcaveFn, p=1.0, budget: int = 100_000, stream=None) -> Estimate:
    """``||f||_p`` by importance sampling from the exponential envelope.

    The proposal has density proportional to ``exp(-p B |x|)``: the radius
    is Gamma(n, 1/(pB)) distributed and the direction uniform.
    """
    from .funcrep import log_unit_ball_volume, truncation_envelope

    p = float(p)
    if not p >= 1:
        raise ValueError("p must be >= 1")
    _check_budget(budget)
    n = f.dim
    env = truncation_envelope(f)
    rate = p * env.B
    rng = as_stream(stream).generator()
    log_norm = math.log(n) + log_unit_ball_volume(n) + gammaln(n) - n * math.log(rate)
    r = rng.gamma(n, 1 / rate, size=budget)
    g = rng.standard_normal((budget, n))
    X = g / np.linalg.norm(g, axis=1, keepdims=True) * r[:, None]
    w = f(X) ** p * np.exp(rate * r + log_norm)
    integral = float(np.mean(w))
    se = float(np.std(w, ddof=1) / math.sqrt(budget))
    return Estimate(integral, se, budget, "mc_importance").power(1 / p)


def _restricted_mass_gaussian(g):
    if not isinstance(g, GaussianForm):
        return float(g)
    return g.scale * (2 * math.pi) ** (g.dim / 2) / math.sqrt(np.linalg.det(g.precision))


def subspace_norm(f: LogConcaveFn, H: Frame, mode: str = "projection", budget: int = 100_000, stream=None,
                  exact: bool = True) -> Estimate:
    """``||P_H f||_{L^1(H)}`` or ``||S_H f||_{L^1(H)}``."""
    if mode not in ("projection", "section"):
        raise ValueError(f"unknown mode {mode!r}")
    if H.n != f.dim:
        raise DimensionError(f"frame lives in R^{H.n}, function in R^{f.dim}")
    _check_budget(budget)
    k = H.k
    if k == f.dim:
        return lp_norm(f, 1, budget, stream, exact)
    if k == 0:
        val = sup_norm(f)[0] if mode == "projection" else float(f(np.zeros(f.dim)))
        return Estimate(val, 0.0, 0, "closed_form")
    rng = as_stream(stream).generator()
    if isinstance(f, GaussianForm):
        g = restrict_gaussian(f, H, mode)
        if exact:
            return Estimate(_restricted_mass_gaussian(g), 0.0, 0, "closed_form")
        integral, se, used = _box_integral(g, _gaussian_region(g, 1.0), int(budget), rng, k)
        return Estimate(integral, se, used, "mc_box")
    if exact and f.is_flat and f.bounded_domain:
        return Estimate(_flat_restricted_mass(f, H, mode), 0.0, 0, "exact_polytope")
    if exact and mode == "section" and k == 1:
        return Estimate(line_section_mass(f, H.basis[:, 0]), 0.0, 0, "closed_form")
    if exact and mode == "section":
        g = section_function(f, H)
        if g is None:
            return Estimate(0.0, 0.0, 0, "closed_form")
        integral, se, used = _ray_integral(g, 1.0, int(budget), rng)
        return Estimate(integral, se, used, "mc_ray")
    region = _pla_region(f, 1.0, H.basis, mode)
    if region is None:
        return Estimate(0.0, 0.0, 0, "closed_form")
    if mode == "projection":
        from .funcrep import PLAProjector

        proj = PLAProjector(f, H)
        values = proj
    else:
        def values(Y):
            return section_values(f, H, Y)
    integral, se, used = _box_integral(values, region, int(budget), rng, k)
    return Estimate(integral, se, used, "mc_box")


@lru_cache(maxsize=256)
def _cached_vertices(key):
    C, d = poly._unkey(key)
    return poly.vertices(C, d)


def _interval_length(c, d) -> float:
    """Length of ``{t : c t <= d}`` (c, d vectors)."""
    with np.errstate(divide="ignore"):
        pos, neg = c > 0, c < 0
        if np.any(d[~pos & ~neg] < 0):
            return 0.0
        hi = float(np.min(d[pos] / c[pos])) if np.any(pos) else math.inf
        lo = float(np.max(d[neg] / c[neg])) if np.any(neg) else -math.inf
    return max(hi - lo, 0.0)


def _polygon_area(G, h) -> float:
    """Area of a bounded polygon ``{G y <= h}`` from its pairwise line intersections."""
    i, j = np.triu_indices(len(G), 1)
    det = G[i, 0] * G[j, 1] - G[i, 1] * G[j, 0]
    ok = np.abs(det) > 1e-14
    i, j, det = i[ok], j[ok], det[ok]
    x = (h[i] * G[j, 1] - h[j] * G[i, 1]) / det
    y = (G[i, 0] * h[j] - G[j, 0] * h[i]) / det
    P = np.stack([x, y], axis=1)
    scale = 1.0 + np.abs(h).max()
    P = P[np.all(P @ G.T <= h + 1e-10 * scale, axis=1)]
    if len(P) < 3:
        return 0.0
    c = P.mean(axis=0)
    P = P[np.argsort(np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0]))]
    x, y = P[:, 0], P[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def line_section_mass(f: PiecewiseLogAffine, u) -> float:
    """``int f(t u) dt`` in closed form: the potential is a maximum of lines in t."""
    return float(line_section_masses(f, np.asarray(u, dtype=float)[None, :])[0])


def line_section_masses(f: PiecewiseLogAffine, U) -> np.ndarray:
    """`line_section_mass` for every row of ``U`` at once."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    N = U.shape[0]
    lo = np.full(N, -np.inf)
    hi = np.full(N, np.inf)
    empty = np.zeros(N, dtype=bool)
    if f.C.shape[0]:
        c = U @ f.C.T                                         # (N, r)
        tol = 1e-14 * (1 + np.linalg.norm(f.C, axis=1))
        zero = np.abs(c) <= tol
        empty |= np.any(zero & (f.d < 0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = f.d / c
        hi = np.min(np.where(c > tol, ratio, np.inf), axis=1)
        lo = np.max(np.where(c < -tol, ratio, -np.inf), axis=1)
    empty |= ~(hi > lo)
    alpha = U @ f.slopes.T                                    # (N, p)
    beta = f.offsets
    i, j = np.triu_indices(alpha.shape[1], 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        bp = (beta[j] - beta[i]) / (alpha[:, i] - alpha[:, j])
    inside = np.isfinite(bp) & (bp > lo[:, None]) & (bp < hi[:, None])
    bp = np.where(inside, bp, hi[:, None])                    # unused breakpoints collapse onto hi
    grid = np.sort(np.hstack([lo[:, None], bp, hi[:, None]]), axis=1)
    t0, t1 = grid[:, :-1], grid[:, 1:]
    live = (t1 > t0) & ~empty[:, None]
    both = np.isinf(t0) & np.isinf(t1)
    mid = np.where(both, 0.0, np.where(np.isinf(t0), t1 - 1.0, np.where(np.isinf(t1), t0 + 1.0, 0.5 * (t0 + t1))))
    mid = np.where(live, mid, 0.0)
    act = np.argmax(alpha[:, None, :] * mid[:, :, None] + beta[None, None, :], axis=2)
    a = np.take_along_axis(alpha, act, axis=1)
    b = beta[act]
    bad = live & ((np.isinf(t1) & (a <= 0)) | (np.isinf(t0) & (a >= 0)))
    if np.any(bad):
        raise SolverError("potential is not coercive along the line")
    val = np.zeros_like(t0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        rise = live & (a > 0) & np.isfinite(t0)
        fall = live & (a < 0) & np.isfinite(t1)
        flat = live & ~rise & ~fall
        width = np.where(live & np.isfinite(t0) & np.isfinite(t1), t1 - t0, np.inf)
        # exp(-(a t0 + b)) (1 - exp(-a width)) / a, and its mirror image for a < 0
        val = np.where(rise, np.exp(-(a * t0 + b)) * -np.expm1(-a * width) / a, val)
        val = np.where(fall, np.exp(-(a * t1 + b)) * -np.expm1(a * width) / -a, val)
        val = np.where(flat, np.exp(-b) * width, val)
    return f.scale * val.sum(axis=1)


def section_function(f: PiecewiseLogAffine, H: Frame) -> PiecewiseLogAffine | None:
    """``S_H f`` in the coordinates of H, or None when it has zero mass."""
    from .exceptions import InvalidFunctionError

    U = H.basis
    G = f.C @ U
    zero = np.linalg.norm(G, axis=1) <= 1e-14 * (1 + np.linalg.norm(f.C, axis=1))
    if np.any(f.d[zero] < 0):
        return None
    try:
        return PiecewiseLogAffine(f.scale, f.slopes @ U, f.offsets, G[~zero], f.d[~zero])
    except InvalidFunctionError:
        return None


def _flat_restricted_mass(f: PiecewiseLogAffine, H: Frame, mode: str) -> float:
    top = sup_norm(f)[0]
    if mode == "section":
        G = f.C @ H.basis
        if H.k == 1:
            return top * _interval_length(G[:, 0], f.d)
        if np.any(f.d < -poly.FEAS_TOL):
            # the origin is outside; the section may still be nonempty
            if not poly.is_feasible(G, f.d):
                return 0.0
        if H.k == 2:
            return top * _polygon_area(G, f.d)
        return top * poly.polytope_volume(G, f.d)
    V = _cached_vertices(poly.polytope_key(f.C, f.d)) @ H.basis
    if H.k == 1:
        return top * float(np.ptp(V[:, 0]))
    try:
        return top * float(ConvexHull(V).volume)
    except QhullError:
        return 0.0


@dataclass(frozen=True)
class Moments:
    """Mass, mean and covariance of the probability density ``f / ||f||_1``."""

    mass: Estimate
    mean: np.ndarray
    cov: np.ndarray
    mean_stderr: np.ndarray
    cov_stderr: np.ndarray
    positive_definite: bool = field(default=True)


def _simplex_moments(V):
    """Exact mass, first and second moments of the uniform measure on conv(V)."""
    n = V.shape[1]
    if n == 1:
        a, b = float(V.min()), float(V.max())
        vol = b - a
        return vol, np.array([(a + b) / 2]) * vol, np.array([[(a * a + a * b + b * b) / 3]]) * vol
    tri = Delaunay(V)
    vol_tot = 0.0
    first = np.zeros(n)
    second = np.zeros((n, n))
    for s in tri.simplices:
        P = V[s]
        vol = abs(np.linalg.det(P[1:] - P[0])) / math.factorial(n)
        tot = P.sum(axis=0)
        vol_tot += vol
        first += vol * tot / (n + 1)
        second += vol * (P.T @ P + np.outer(tot, tot)) / ((n + 1) * (n + 2))
    return vol_tot, first, second


def _ray_moments(f: PiecewiseLogAffine, budget: int, rng, pd_tol: float) -> Moments:
    n = f.dim
    x0, T1, T2, I1, I2 = _ray_pairs(f, 1.0, budget, rng, orders=(0, 1, 2))

    def terms(T, I):
        a, b, c = I
        first = x0[None, :] * a[:, None] + T * b[:, None]
        cross = x0[None, :, None] * T[:, None, :] * b[:, None, None]
        second = (np.outer(x0, x0)[None] * a[:, None, None] + cross + cross.transpose(0, 2, 1)
                  + T[:, :, None] * T[:, None, :] * c[:, None, None])
        return a, first, second

    a1, f1, s1 = terms(T1, I1)
    if T2 is None:
        a2, f2, s2 = a1, f1, s1
        w = n * omega(n) / 2
    else:
        a2, f2, s2 = terms(T2, I2)
        w = n * omega(n) / T1.shape[0]
    m0 = w * float(np.sum(a1 + a2)) / 2
    if m0 <= 0:
        raise SolverError("f has no mass along the sampled rays")
    mean = w * np.sum(f1 + f2, axis=0) / 2 / m0
    second = w * np.sum(s1 + s2, axis=0) / 2 / m0
    cov = second - np.outer(mean, mean)
    cov = 0.5 * (cov + cov.T)

    def centered(a, fm, sm):
        c2 = sm - mean[None, :, None] * fm[:, None, :] - fm[:, :, None] * mean[None, None, :]
        c2 = c2 + np.outer(mean, mean)[None] * a[:, None, None]
        return fm - mean[None] * a[:, None], c2 - cov[None] * a[:, None, None]

    g1, h1 = centered(a1, f1, s1)
    g2, h2 = centered(a2, f2, s2)
    se0 = w * math.sqrt(float(np.sum((a1 - a2) ** 2))) / 2
    mean_se = w * np.sqrt(np.sum((g1 - g2) ** 2, axis=0)) / 2 / m0
    cov_se = w * np.sqrt(np.sum((h1 - h2) ** 2, axis=0)) / 2 / m0
    pd = bool(np.linalg.eigvalsh(cov)[0] > pd_tol)
    cells = T1.shape[0]
    mass = Estimate(m0, max(se0, 1e-13 * m0), 2 * cells, "mc_ray")
    return Moments(mass, mean, cov, mean_se, cov_se, pd)


def mean_cov(f: LogConcaveFn, budget: int = 100_000, stream=None, exact: bool = True, pd_tol: float = 1e-10) -> Moments:
    """Self-normalized moments of ``f``.

    Mass, mean and covariance come from a single sample stream so their
    errors are correlated.  Gaussians and polytope indicators are exact.
    """
    _check_budget(budget)
    n = f.dim
    if exact and isinstance(f, GaussianForm):
        mass = lp_norm(f, 1)
        z = np.zeros(n)
        return Moments(mass, f.center.copy(), f.covariance.copy(), z, np.zeros((n, n)))
    if exact and isinstance(f, PiecewiseLogAffine) and f.is_flat and f.bounded_domain:
        V = poly.vertices(f.C, f.d)
        vol, first, second = _simplex_moments(V)
        top = sup_norm(f)[0]
        mean = first / vol
        cov = second / vol - np.outer(mean, mean)
        cov = 0.5 * (cov + cov.T)
        pd = bool(np.linalg.eigvalsh(cov)[0] > pd_tol)
        return Moments(Estimate(top * vol, 0.0, 0, "exact_polytope"), mean, cov, np.zeros(n), np.zeros((n, n)), pd)
    rng = as_stream(stream).generator()
    if isinstance(f, PiecewiseLogAffine):
        return _ray_moments(f, int(budget), rng, pd_tol)
    region = _gaussian_region(f, 1.0)
    acc = {"X": [], "W": []}

    def collect(X, v):
        keep = v > 0
        acc["X"].append(X[keep])
        acc["W"].append(v[keep])

    integral, se, used = _box_integral(f, region, int(budget), rng, n, weights_out=collect)
    X = np.concatenate(acc["X"]) if acc["X"] else np.zeros((0, n))
    W = np.concatenate(acc["W"]) if acc["W"] else np.zeros(0)
    sw = float(W.sum())
    if sw <= 0:
        raise SolverError("no sample hit the support of f")
    mean = W @ X / sw
    D = X - mean
    cov = (D * W[:, None]).T @ D / sw
    cov = 0.5 * (cov + cov.T)
    mean_se = np.sqrt(np.sum((W[:, None] * D) ** 2, axis=0)) / sw
    outer = D[:, :, None] * D[:, None, :] - cov
    cov_se = np.sqrt(np.sum((W[:, None, None] * outer) ** 2, axis=0)) / sw
    pd = bool(np.linalg.eigvalsh(cov)[0] > pd_tol)
    return Moments(Estimate(integral, se, used, "mc_box"), mean, cov, mean_se, cov_se, pd)


def levelset_volume(body, budget: int = 100_000, stream=None) -> Estimate:
    """Lebesgue volume of an ellipsoid or a bounded polytope."""
    if isinstance(body, Ellipsoid):
        n = body.dim
        return Estimate(omega(n) / math.sqrt(np.linalg.det(body.shape)), 0.0, 0, "closed_form")
    if isinstance(body, Polytope):
        if body.dim <= 4:
            return Estimate(poly.polytope_volume(body.C, body.d), 0.0, 0, "exact_polytope")
        lo, hi = _lp_box(body.C, body.d, np.eye(body.dim))
        rng = as_stream(stream).generator()
        region = _Region(lo, hi, False)
        integral, se, used = _box_integral(lambda X: body.contains(X).astype(float), region, budget, rng, body.dim)
        return Estimate(integral, se, used, "mc_box")
    raise TypeError("body must be an Ellipsoid or a Polytope")


__all__ = [
    "Estimate",
    "Moments",
    "SeededStream",
    "levelset_volume",
    "lp_norm",
    "lp_norm_importance",
    "mean_cov",
    "omega",
    "subspace_norm",
]
