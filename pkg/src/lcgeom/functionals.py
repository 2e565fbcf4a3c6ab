"""Geometric functionals of log-concave functions.

Quermassintegrals are Grassmannian averages of projection masses,

    W_{n-k}(f) = (omega_n / omega_k) * E_{H ~ Haar(G_{n,k})} ||P_H f||_{L^1(H)},

estimated by two-stage Monte Carlo (Haar frames outside, subspace
integrals inside).  The John function ``a ||f||_inf I_E`` is found by
searching the height ``a``; at fixed height the best ellipsoid is the
maximum-volume ellipsoid inside the level set ``{f >= a ||f||_inf}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import _polytope as poly
from .exceptions import (
    DegenerateSetError,
    EmptySetError,
    IllConditionedError,
    NotPositiveDefiniteError,
    SolverError,
)
from .funcrep import (
    Ellipsoid,
    GaussianForm,
    LogConcaveFn,
    PiecewiseLogAffine,
    affine_image,
    dilate_values,
    domain_distance,
    level_set,
    rescale,
    sup_norm,
)
from .grassmann import as_stream, hyperplane_frame, sample_haar, stratified_haar_pairs, stratified_sphere_pairs
from .mvie import mvie
from .quad import (
    TAIL_TOL,
    Estimate,
    Moments,
    _gaussian_region,
    _pla_region,
    _Region,
    line_section_masses,
    lp_norm,
    mean_cov,
    omega,
    product,
    subspace_norm,
)

_FLOOR = 1e-13


EXACT_FRAME_CAP = 2000
# k = 1 sections of piecewise log-affine functions are batched and cheap
BATCH_FRAME_CAP = 50_000


def _inner_exact(f: LogConcaveFn, exact: bool, mode: str = "projection", k: int = 0) -> bool:
    if not exact:
        return False
    if isinstance(f, GaussianForm):
        return True
    flat = f.is_flat and f.bounded_domain
    return flat or (mode == "section" and k == 1)


def two_stage_sizes(budget: int) -> tuple[int, int]:
    """(outer frames, inner samples per frame) for a total budget."""
    n_outer = max(8, int(round(math.sqrt(budget))))
    n_inner = max(256, int(round(budget / math.sqrt(n_outer))))
    return n_outer, n_inner


def _frame_average(values, inner_mc: bool, n_inner_total: int, paired: bool = False) -> Estimate:
    """Mean of per-frame values; ``paired`` values come as (v1, v2) per stratum."""
    vals = np.asarray(values, dtype=float)
    mean = float(vals.mean())
    if paired:
        v1, v2 = vals[0::2], vals[1::2]
        se = float(np.sqrt(np.sum((v1 - v2) ** 2)) / (2 * len(v1)))
    else:
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    if inner_mc:
        # systematic truncation bias of every inner integral
        se = math.hypot(se, TAIL_TOL * abs(mean))
    se = max(se, _FLOOR * abs(mean), 1e-300)
    return Estimate(mean, se, n_inner_total, "mc_box")


def grassmann_mean(f: LogConcaveFn, k: int, mode: str, budget: int, stream, exact: bool = True, power: float = 1.0):
    """Haar average of ``||P_H f||^power`` (or sections) over ``G_{n,k}``.

    Frames come in stratified pairs (see `stratified_haar_pairs`).
    Returns the estimate and the per-frame values.
    """
    stream = as_stream(stream)
    n = f.dim
    if exact and k == 1 and mode == "section" and isinstance(f, PiecewiseLogAffine):
        return _line_section_mean(f, budget, stream, power)
    n_outer, n_inner = two_stage_sizes(budget)
    if _inner_exact(f, exact, mode, k):
        # per-frame values are exact and cheap: spend the budget on frames
        n_outer = max(n_outer, min(budget // 10, EXACT_FRAME_CAP))
    if 1 <= k <= n - 1:
        pairs = stratified_haar_pairs(n, k, max(4, n_outer // 2), stream.child("frames"))
        frames = [H for pair in pairs for H in pair]
        paired = True
    else:
        frames = [sample_haar(n, k, stream.child(("haar", i))) for i in range(n_outer)]
        paired = False
    vals = []
    inner_mc = False
    total = 0
    for i, H in enumerate(frames):
        est = subspace_norm(f, H, mode, n_inner, stream.child(("inner", i)), exact=exact)
        inner_mc |= not est.exact
        total += max(est.n_samples, 1)
        vals.append(est.value**power)
    return _frame_average(vals, inner_mc, total, paired), np.array(vals)


def _line_section_mean(f: PiecewiseLogAffine, budget: int, stream, power: float):
    """Haar mean over lines through 0, with one closed-form integral per line.

    The lines are the same stratified directions `stratified_haar_pairs`
    would use, but evaluated in one batch, so the frame count can grow to
    the whole budget.
    """
    n_pairs = max(4, min(budget, BATCH_FRAME_CAP) // 2)
    T1, T2 = stratified_sphere_pairs(f.dim, n_pairs, stream.child("frames").child("strata").generator())
    v1 = line_section_masses(f, T1) ** power
    v2 = line_section_masses(f, T2) ** power
    vals = np.empty(2 * len(v1))
    vals[0::2], vals[1::2] = v1, v2
    est = _frame_average(vals, False, 0, paired=True)
    return Estimate(est.value, est.stderr, 0, "closed_form" if est.stderr == 0 else "mc_box"), vals


def quermassintegral(f: LogConcaveFn, j: int, budget: int = 100_000, stream=None, exact: bool = True,
                     force_mc: bool = False) -> Estimate:
    """``W_j(f)`` for ``0 <= j <= n``.

    The endpoints are exact (``W_0 = ||f||_1``, ``W_n = omega_n ||f||_inf``)
    unless ``force_mc`` routes them through the generic Grassmannian average.
    """
    n = f.dim
    if not 0 <= j <= n:
        raise ValueError(f"need 0 <= j <= {n}")
    if not force_mc:
        if j == 0:
            return lp_norm(f, 1, budget, stream, exact)
        if j == n:
            return Estimate(omega(n) * sup_norm(f)[0], 0.0, 0, "closed_form")
    k = n - j
    est, _ = grassmann_mean(f, k, "projection", budget, stream, exact)
    c = omega(n) / omega(k)
    return Estimate(c * est.value, c * est.stderr, est.n_samples, est.method)


def variation(f: LogConcaveFn, budget: int = 100_000, stream=None, direction=None, exact: bool = True) -> Estimate:
    """Total variation ``V(f) = n W_1(f)``, or ``||D_theta f||_TV`` for a unit ``direction``."""
    if direction is None:
        return quermassintegral(f, 1, budget, stream, exact).scaled(f.dim)
    theta = np.asarray(direction, dtype=float)
    if theta.shape != (f.dim,):
        raise ValueError(f"direction must lie in R^{f.dim}")
    if abs(np.linalg.norm(theta) - 1) > 1e-9:
        raise ValueError("direction must be a unit vector")
    H = hyperplane_frame(theta)
    return subspace_norm(f, H, "projection", budget, stream, exact).scaled(2.0)


# ---------------------------------------------------------------- Steiner


def chebyshev_deltas(m: int, top: float = 0.5) -> np.ndarray:
    """``m`` Chebyshev-spaced radii in ``(0, top)``."""
    x = np.cos((2 * np.arange(m) + 1) * np.pi / (2 * m))
    return np.sort(0.5 * top * (1 + x))


@dataclass(frozen=True)
class SteinerFit:
    deltas: np.ndarray
    masses: np.ndarray
    mass_stderr: np.ndarray
    coefficients: np.ndarray
    coefficient_stderr: np.ndarray
    reference: list = field(default_factory=list)

    def reference_values(self):
        return np.array([r.value for r in self.reference])


def _dilations(f, deltas, X):
    if isinstance(f, PiecewiseLogAffine) and f.is_flat:
        # one distance computation serves every radius
        top = sup_norm(f)[0]
        dist = domain_distance(f, X)
        return np.where(dist[:, None] <= deltas[None, :] * (1 + 1e-12) + 1e-12, top, 0.0)
    return np.stack([dilate_values(f, dl, X) for dl in deltas], axis=1)


def dilation_masses(f: LogConcaveFn, deltas, budget: int, stream):
    """``||f_delta||_1`` for each delta from one common stratified sample.

    Returns the masses and their covariance matrix.
    """
    deltas = np.asarray(deltas, dtype=float)
    n = f.dim
    rng = as_stream(stream).generator()
    base = _gaussian_region(f, 1.0) if isinstance(f, GaussianForm) else _pla_region(f, 1.0)
    pad = float(np.max(deltas))
    region = _Region(base.lo - pad, base.hi + pad, base.truncated)
    m = max(1, int((budget / 2) ** (1.0 / n)))
    cells = m**n
    width = (region.hi - region.lo) / m
    cell_vol = float(np.prod(width))
    D = len(deltas)
    total = np.zeros(D)
    cov = np.zeros((D, D))
    step = 8192
    for start in range(0, cells, step):
        idx = np.arange(start, min(cells, start + step))
        corner = region.lo + width * np.stack(np.unravel_index(idx, (m,) * n), axis=1)
        X1 = corner + width * rng.random((idx.size, n))
        X2 = corner + width * rng.random((idx.size, n))
        V1 = _dilations(f, deltas, X1)
        V2 = _dilations(f, deltas, X2)
        total += cell_vol * np.sum(V1 + V2, axis=0) / 2
        diff = V1 - V2
        cov += cell_vol**2 * diff.T @ diff / 4
    if region.truncated:
        cov += np.outer(TAIL_TOL * total, TAIL_TOL * total)
    return total, cov, 2 * cells


def steiner_fit(f: LogConcaveFn, deltas=None, budget: int = 100_000, stream=None, reference: bool = True,
                exact: bool = True) -> SteinerFit:
    """Least-squares degree-n polynomial through ``delta -> ||f_delta||_1``.

    The fitted coefficients should match ``C(n, j) W_j(f)``; those are
    computed independently through `quermassintegral` when ``reference``.
    """
    n = f.dim
    deltas = chebyshev_deltas(n + 4) if deltas is None else np.asarray(deltas, dtype=float)
    if deltas.ndim != 1 or len(deltas) < n + 3:
        raise ValueError(f"need at least {n + 3} radii")
    if np.any(deltas <= 0) or np.any(deltas > 0.5):
        raise ValueError("radii must lie in (0, 0.5]")
    V = np.vander(deltas, n + 1, increasing=True)
    if np.linalg.cond(V) > 1e8:
        raise IllConditionedError("radii are too clustered for a stable polynomial fit")
    stream = as_stream(stream)
    masses, cov, _ = dilation_masses(f, deltas, budget, stream.child("dilation"))
    L = np.linalg.pinv(V)
    coeffs = L @ masses
    coeff_cov = L @ cov @ L.T
    refs = []
    if reference:
        for j in range(n + 1):
            w = quermassintegral(f, j, budget, stream.child(("W", j)), exact)
            refs.append(w.scaled(math.comb(n, j)))
    return SteinerFit(deltas, masses, np.sqrt(np.diag(cov)), coeffs, np.sqrt(np.clip(np.diag(coeff_cov), 0, None)), refs)


# ---------------------------------------------------------------- John function


@dataclass(frozen=True, eq=False)
class JohnFunction:
    """``a * sup_f * I_E`` with ``E = center + B * (unit ball)``."""

    a: float
    ellipsoid: Ellipsoid
    sup: float
    B: np.ndarray

    @property
    def center(self) -> np.ndarray:
        return self.ellipsoid.center

    @property
    def volume(self) -> float:
        return omega(self.ellipsoid.dim) * abs(float(np.linalg.det(self.B)))

    @property
    def value_mass(self) -> float:
        return self.a * self.sup * self.volume

    @property
    def position_map(self) -> tuple[np.ndarray, np.ndarray]:
        """``(A, t)`` with ``x -> A x + t`` sending E onto the unit ball."""
        A = np.linalg.inv(self.B)
        return A, -A @ self.center

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.where(self.ellipsoid.contains(X), self.a * self.sup, 0.0)

    def probe_feasibility(self, f: LogConcaveFn, n_probe: int = 500, seed: int = 0, rtol: float = 1e-7) -> float:
        """Worst ``f(x) / (a sup f) - 1`` over random points of E (nonnegative iff feasible)."""
        rng = np.random.default_rng(seed)
        n = f.dim
        g = rng.standard_normal((n_probe, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = rng.random(n_probe) ** (1.0 / n) * (1 - 1e-9)
        X = self.center + (g * r[:, None]) @ self.B.T
        return float(np.min(f(X) / (self.a * self.sup)) - 1.0)


def _john_objective(f, top, a):
    try:
        body = level_set(f, a * top)
        E = mvie(body)
    except (DegenerateSetError, EmptySetError, NotPositiveDefiniteError):
        return 0.0, None
    return a * omega(f.dim) / math.sqrt(np.linalg.det(E.shape)), E


_JOHN_CACHE: dict = {}


def john_function(f: LogConcaveFn, a_grid_size: int = 64, refine_iters: int = 40) -> JohnFunction:
    """John function of ``f``: the largest-mass ``a ||f||_inf I_E`` below ``f``.

    Log-spaced grid over ``a in [e^{-n}, 1]``, then golden-section
    refinement between the neighbours of the best grid point.  Ties go to
    the larger height.
    """
    key = (f.key(), a_grid_size, refine_iters)
    hit = _JOHN_CACHE.get(key)
    if hit is not None:
        return hit
    n = f.dim
    top, _ = sup_norm(f)
    grid = np.exp(np.linspace(-n, 0.0, a_grid_size))
    vals = np.array([_john_objective(f, top, a)[0] for a in grid])
    if not np.any(vals > 0):
        raise SolverError("no nondegenerate level set found on the height grid")
    best_val = vals.max()
    i = int(np.flatnonzero(vals >= best_val * (1 - 1e-12))[-1])
    best_a = grid[i]
    lo = math.log(grid[max(i - 1, 0)])
    hi = math.log(grid[min(i + 1, len(grid) - 1)])
    if hi > lo and refine_iters > 0:
        gr = (math.sqrt(5) - 1) / 2
        x1 = hi - gr * (hi - lo)
        x2 = lo + gr * (hi - lo)
        f1 = _john_objective(f, top, math.exp(x1))[0]
        f2 = _john_objective(f, top, math.exp(x2))[0]
        for _ in range(refine_iters):
            if f1 > f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - gr * (hi - lo)
                f1 = _john_objective(f, top, math.exp(x1))[0]
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + gr * (hi - lo)
                f2 = _john_objective(f, top, math.exp(x2))[0]
        cand_a, cand_val = (math.exp(x1), f1) if f1 > f2 else (math.exp(x2), f2)
        if cand_val > best_val * (1 + 1e-12):
            best_a, best_val = cand_a, cand_val
    _, E = _john_objective(f, top, best_a)
    lam, Vec = np.linalg.eigh(E.shape)
    B = (Vec / np.sqrt(lam)) @ Vec.T
    jf = JohnFunction(float(best_a), E, float(top), B)
    _JOHN_CACHE[key] = jf
    return jf


def irat(f: LogConcaveFn, budget: int = 100_000, stream=None, john: JohnFunction | None = None) -> Estimate:
    """``(||f||_1 / ||E(f)||_1)^{1/n}``."""
    john = john_function(f) if john is None else john
    mass = lp_norm(f, 1, budget, stream)
    return product((mass, 1.0 / f.dim), const=john.value_mass ** (-1.0 / f.dim))


@dataclass(frozen=True, eq=False)
class JohnPositionMap:
    A: np.ndarray
    shift: np.ndarray
    john: JohnFunction


def to_john_position(f: LogConcaveFn) -> tuple[LogConcaveFn, JohnPositionMap]:
    """Affine image of ``f`` whose John ellipsoid is the unit ball centred at 0."""
    john = john_function(f)
    A, t = john.position_map
    return affine_image(f, A, t), JohnPositionMap(A, t, john)


# ---------------------------------------------------------------- isotropic position


@dataclass(frozen=True, eq=False)
class IsotropicForm:
    """``g(x) = alpha f(S x + m)`` in isotropic position, ``S = Cov(f)^{1/2}``."""

    g: LogConcaveFn
    S: np.ndarray
    mean: np.ndarray
    alpha: float
    L: Estimate
    moments: Moments

    def forward(self, X):
        """Map points of f's space to g's space."""
        return np.linalg.solve(self.S, (np.atleast_2d(X) - self.mean).T).T

    def inverse(self, Y):
        return np.atleast_2d(Y) @ self.S.T + self.mean


def _sqrtm_sym(M):
    lam, V = np.linalg.eigh(M)
    return (V * np.sqrt(lam)) @ V.T


def isotropic_constant(f: LogConcaveFn, budget: int = 100_000, stream=None, exact: bool = True,
                       moments: Moments | None = None) -> Estimate:
    """``L_f = (||f||_inf / ||f||_1)^{1/n} det(Cov f)^{1/(2n)}``."""
    mom = mean_cov(f, budget, stream, exact) if moments is None else moments
    if not mom.positive_definite:
        raise NotPositiveDefiniteError("covariance is not positive definite")
    n = f.dim
    top = sup_norm(f)[0]
    det = float(np.linalg.det(mom.cov))
    inv = np.linalg.inv(mom.cov)
    # d log det = tr(Cov^{-1} dCov), entries treated as independent
    se_logdet = float(np.sqrt(np.sum((inv * mom.cov_stderr) ** 2)))
    val = (top / mom.mass.value) ** (1 / n) * det ** (1 / (2 * n))
    rel = math.hypot(mom.mass.stderr / mom.mass.value / n, se_logdet / (2 * n))
    if mom.mass.exact:
        return Estimate(val, 0.0, 0, mom.mass.method)
    return Estimate(val, max(val * rel, _FLOOR * val), mom.mass.n_samples, mom.mass.method)


def isotropize(f: LogConcaveFn, budget: int = 100_000, stream=None, exact: bool = True) -> IsotropicForm:
    """Isotropic position of ``f`` via its moments (symmetric square root)."""
    mom = mean_cov(f, budget, stream, exact)
    if not mom.positive_definite:
        raise NotPositiveDefiniteError("covariance is not positive definite")
    S = _sqrtm_sym(mom.cov)
    Sinv = np.linalg.inv(S)
    alpha = math.sqrt(float(np.linalg.det(mom.cov))) / mom.mass.value
    g = rescale(affine_image(f, Sinv, -Sinv @ mom.mean), alpha)
    L = isotropic_constant(f, moments=mom)
    return IsotropicForm(g, S, mom.mean, alpha, L, mom)


# ---------------------------------------------------------------- sections


def section_power_mean(f: LogConcaveFn, k: int, budget: int = 100_000, stream=None, exact: bool = True):
    """``((E_H ||S_H f||^n)^{1/n}, (omega_n/omega_k) (E_H ||S_H f||^n)^{1/n})``."""
    n = f.dim
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= {n - 1}")
    mean_pow, _ = grassmann_mean(f, k, "section", budget, stream, exact, power=n)
    raw = mean_pow.power(1.0 / n)
    return raw, raw.scaled(omega(n) / omega(k))


def marginal_density_at_zero(g: LogConcaveFn, H, budget: int = 100_000, stream=None, exact: bool = True) -> Estimate:
    """Density at 0 of the projection of ``g / ||g||_1`` onto ``H-perp``.

    Integrates over the fibre ``H`` in a randomly rotated basis of ``H``
    (Fubini), with its own sample stream.
    """
    from .grassmann import Frame

    stream = as_stream(stream)
    k = H.k
    R = sample_haar(k, k, stream.child("rotation")).basis if k else np.zeros((0, 0))
    rotated = Frame(H.basis @ R, H.complement)
    mass = lp_norm(g, 1, budget, stream.child("mass"), exact)
    fibre = subspace_norm(g, rotated, "section", budget, stream.child("fibre"), exact)
    return product((fibre, 1.0), (mass, -1.0))


# ---------------------------------------------------------------- exact constants


def b_constant(n: int, k: int) -> Fraction:
    """``b_{n,k} = (n+k+1)...(2n) / ((k+1)...n)`` as an exact fraction."""
    if not (isinstance(n, int) and isinstance(k, int)) or not 0 <= k <= n - 1:
        raise ValueError(f"need integers 0 <= k <= n-1, got n={n}, k={k}")
    num = math.prod(range(n + k + 1, 2 * n + 1))
    den = math.prod(range(k + 1, n + 1))
    return Fraction(num, den)


def _gamma_half_plus_one(m: int) -> tuple[Fraction, int]:
    """``Gamma(m/2 + 1) = q * sqrt(pi)^e`` with rational q and e in {0, 1}."""
    if m % 2 == 0:
        return Fraction(math.factorial(m // 2)), 0
    # Gamma(j + 1/2) = (2j)! / (4^j j!) sqrt(pi) with j = (m+1)/2
    j = (m + 1) // 2
    return Fraction(math.factorial(2 * j), 4**j * math.factorial(j)), 1


def omega_ratio(n: int, k: int) -> tuple[Fraction, int]:
    """``omega_k^n / omega_n^k = Gamma(n/2+1)^k / Gamma(k/2+1)^n`` as ``q * sqrt(pi)^e``."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    qn, en = _gamma_half_plus_one(n)
    qk, ek = _gamma_half_plus_one(k)
    return qn**k / qk**n, en * k - ek * n


def omega_ratio_bound_holds(n: int, k: int, c0=Fraction(17, 10), digits: int = 60) -> tuple[bool, float]:
    """Decide ``omega_k^n / omega_n^k <= c0^{n(n-k)}`` in high precision.

    The ratio is rational times a power of sqrt(pi); the comparison is
    carried out with ``digits`` significant digits and the log-margin is
    returned.
    """
    q, e = omega_ratio(n, k)
    c0 = Fraction(c0)
    with mpmath.workdps(digits):
        lhs = mpmath.log(mpmath.mpf(q.numerator)) - mpmath.log(mpmath.mpf(q.denominator)) + e * mpmath.log(mpmath.pi) / 2
        rhs = n * (n - k) * (mpmath.log(mpmath.mpf(c0.numerator)) - mpmath.log(mpmath.mpf(c0.denominator)))
        margin = rhs - lhs
        return bool(margin >= 0), float(margin)
