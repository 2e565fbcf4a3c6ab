"""Built-in test functions, hypothesis-satisfying pairs and check presets."""

from __future__ import annotations

import numpy as np

from .funcrep import (
    GaussianForm,
    LogConcaveFn,
    PiecewiseLogAffine,
    affine_image,
    box_indicator,
    polytope_indicator,
    regular_polygon_indicator,
    rescale,
    standard_gaussian,
)
from .harness import CHECKS


def _signs(n):
    return np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T


def _exp_norm(n, kind, scale=1.0):
    """``exp(-|x|_1)`` or ``exp(-|x|_inf)`` as a piecewise log-affine function."""
    if kind == "l1":
        A = _signs(n)
    else:
        A = np.vstack([np.eye(n), -np.eye(n)])
    return PiecewiseLogAffine(scale, A, np.zeros(len(A)), np.zeros((0, n)), np.zeros(0))


def _orthant_exp(n):
    return PiecewiseLogAffine(1.0, np.ones((1, n)), np.zeros(1), -np.eye(n), np.zeros(n))


def _ramp(n):
    A = np.zeros((2, n))
    A[0, 0], A[1, 0] = 1.0, -1.0
    A[0, 1], A[1, 1] = 0.5, 0.2
    b = np.array([0.0, 0.1])
    C = np.vstack([np.eye(n), -np.eye(n)])
    return PiecewiseLogAffine(1.0, A, b, C, np.ones(2 * n))


def _simplex(n, scale=2.0):
    C = np.vstack([-np.eye(n), np.ones((1, n))])
    return polytope_indicator(C, np.r_[np.zeros(n), 1.0], scale)


def _cross_polytope(n):
    S = _signs(n)
    return polytope_indicator(S, np.ones(len(S)))


def _hex_prism():
    f = regular_polygon_indicator(6)
    C = np.zeros((8, 3))
    C[:6, :2] = f.C
    C[6, 2], C[7, 2] = 1.0, -1.0
    return polytope_indicator(C, np.r_[f.d, 0.7, 0.7])


def _aniso_gaussian(n):
    rng = np.random.default_rng(7 + n)
    M = rng.standard_normal((n, n))
    Q = M @ M.T / n + 0.5 * np.eye(n)
    return GaussianForm(1.5, rng.uniform(-0.4, 0.4, n), Q)


def _mild_map(n, seed):
    rng = np.random.default_rng(seed)
    while True:
        A = np.eye(n) + 0.4 * rng.standard_normal((n, n))
        if np.linalg.cond(A) < 4:
            return A, rng.uniform(-0.3, 0.3, n)


def builtin_functions(n: int) -> dict[str, LogConcaveFn]:
    """Twelve or more log-concave test functions on R^n (n = 2 or 3)."""
    if n not in (2, 3):
        raise ValueError("built-in functions exist for n = 2 and n = 3")
    A1, t1 = _mild_map(n, 11)
    A2, t2 = _mild_map(n, 12)
    cube = box_indicator(-np.ones(n), np.ones(n))
    fns = {
        "gauss_iso": standard_gaussian(n),
        "gauss_aniso": _aniso_gaussian(n),
        "cube": cube,
        "box": box_indicator(-np.r_[2.0, 0.5, 1.0][:n], np.r_[1.0, 0.5, 1.5][:n]),
        "simplex": _simplex(n),
        "cross": _cross_polytope(n),
        "exp_l1": _exp_norm(n, "l1"),
        "exp_linf": _exp_norm(n, "linf", 2.0),
        "orthant_exp": _orthant_exp(n),
        "ramp": _ramp(n),
        "cube_mapped": affine_image(cube, A1, t1),
        "exp_l1_mapped": affine_image(_exp_norm(n, "l1"), A2, t2),
    }
    if n == 2:
        fns["disk64"] = regular_polygon_indicator(64)
        fns["hexagon"] = regular_polygon_indicator(6, 1.5)
    else:
        fns["hex_prism"] = _hex_prism()
    return fns


def dominated_pairs(n: int) -> dict[str, tuple[LogConcaveFn, LogConcaveFn]]:
    """Pairs with ``f1 <= f2`` pointwise; Shephard and Busemann-Petty hold for every k."""
    fns = builtin_functions(n)
    cube = fns["cube"]
    return {
        "gauss_half": (rescale(fns["gauss_iso"], 0.5), fns["gauss_iso"]),
        "gauss_narrow": (GaussianForm(1.0, np.zeros(n), 2.0 * np.eye(n)), fns["gauss_iso"]),
        "cube_in_double": (cube, box_indicator(-2 * np.ones(n), 2 * np.ones(n))),
        "cross_in_cube": (rescale(fns["cross"], 0.5), cube),
        "exp_l1_half": (rescale(fns["exp_l1"], 0.5), fns["exp_l1"]),
        "equal_ramp": (fns["ramp"], fns["ramp"]),
    }


def milman_pairs(n: int) -> dict[str, tuple[LogConcaveFn, LogConcaveFn]]:
    """Pairs with ``||P_H f1|| <= ||S_H f2||`` for every H."""
    g = standard_gaussian(n)
    half = box_indicator(-0.5 * np.ones(n), 0.5 * np.ones(n))
    return {
        "gauss_equal": (g, g),
        "gauss_narrow": (GaussianForm(1.0, np.zeros(n), 4.0 * np.eye(n)), g),
        # the widest shadow of the half cube is sqrt(n)/2 per axis direction,
        # the thinnest central section of the cube is 2
        "half_cube_in_cube": (half, box_indicator(-np.ones(n), np.ones(n))),
        "small_ball_in_gauss": (rescale(GaussianForm(1.0, np.zeros(n), 9.0 * np.eye(n)), 0.8), rescale(g, 1.0)),
    }


def invariance_pairs(n: int) -> dict[str, tuple[LogConcaveFn, LogConcaveFn]]:
    """Pairs where the Shephard margin changes sign between frames."""
    wide = box_indicator(-np.r_[2.0, 0.5, 0.8][:n], np.r_[2.0, 0.5, 0.8][:n])
    return {
        "wide_vs_cube": (wide, box_indicator(-np.ones(n), np.ones(n))),
        "gauss_aniso_vs_iso": (_aniso_gaussian(n), standard_gaussian(n)),
    }


SINGLE_ROWS = {
    "sobolev": lambda n: [{}],
    "alexandrov_general": lambda n: [{"j": j, "k": k} for k in range(1, n) for j in range(k)],
    "alexandrov_norm": lambda n: [{"k": k} for k in range(1, n)],
    "irat_bound": lambda n: [{}],
    "reverse_sobolev": lambda n: [{}],
    "w_monotone": lambda n: [{"k": k} for k in range(n)],
    "w_mass_bound": lambda n: [{"k": k} for k in range(n)],
    "lemma49": lambda n: [{"k": k} for k in range(1, n)],
    "grinberg_functional": lambda n: [{"k": k} for k in range(1, n)],
    "grinberg_classical": lambda n: [{"k": k} for k in range(1, n)],
    "marginal_section": lambda n: [{"k": k} for k in range(1, n)],
    "phi_invariance": lambda n: [{"k": k} for k in range(1, n)],
}

PAIR_ROWS = {
    "t1": ("dominated", lambda n: [{}]),
    "cor32_a": ("dominated", lambda n: [{}]),
    "cor32_b": ("dominated", lambda n: [{}]),
    "t2": ("dominated", lambda n: [{"k": k} for k in range(1, n)]),
    "cor48": ("dominated", lambda n: [{"k": k} for k in range(1, n)]),
    "t3": ("milman", lambda n: [{"k": k} for k in range(1, n)]),
    "shephard_invariance": ("invariance", lambda n: [{"k": k} for k in range(1, n)]),
}

RATIO_ROWS = {
    "t4": ("dominated", lambda n: [{"k": k} for k in range(1, n)]),
    "t5": ("dominated", lambda n: [{"k": k} for k in range(1, n)]),
    "t6": ("milman", lambda n: [{"k": k, "L_sup": 1.0} for k in range(1, n)]),
}


def _is_body(f):
    return isinstance(f, PiecewiseLogAffine) and f.is_flat and f.bounded_domain


def _pair_source(kind, n):
    return {"dominated": dominated_pairs, "milman": milman_pairs, "invariance": invariance_pairs}[kind](n)


def suite_tasks(preset: str = "paper-core", dims=(2, 3)) -> list[dict]:
    """Check tasks ``{"check", "inputs", "params", "n"}`` for a named preset.

    Inputs are function names; ``functions_for(dims)`` resolves them.
    """
    tasks = []
    if preset == "paper-core":
        for n in dims:
            fns = builtin_functions(n)
            for cid, ks in SINGLE_ROWS.items():
                for name, f in fns.items():
                    if cid == "grinberg_classical" and not _is_body(f):
                        continue
                    for params in ks(n):
                        tasks.append({"check": cid, "inputs": [f"n{n}/{name}"], "params": params})
            for cid, (kind, ks) in PAIR_ROWS.items():
                for name in _pair_source(kind, n):
                    for params in ks(n):
                        tasks.append({"check": cid, "inputs": [f"n{n}/{kind}/{name}/1", f"n{n}/{kind}/{name}/2"],
                                      "params": params})
        for n in range(2, 13):
            for k in range(n):
                tasks.append({"check": "b_bound", "inputs": [], "params": {"n": n, "k": k}})
            for k in range(1, n):
                tasks.append({"check": "omega_ratio", "inputs": [], "params": {"n": n, "k": k}})
    elif preset == "ratios":
        for n in dims:
            for cid, (kind, ks) in RATIO_ROWS.items():
                for name in _pair_source(kind, n):
                    for params in ks(n):
                        tasks.append({"check": cid, "inputs": [f"n{n}/{kind}/{name}/1", f"n{n}/{kind}/{name}/2"],
                                      "params": params})
    elif preset == "steiner":
        for n in dims:
            for name in builtin_functions(n):
                tasks.append({"compute": "steiner_fit", "f": f"n{n}/{name}"})
    elif preset == "positions":
        for n in dims:
            for name in builtin_functions(n):
                tasks.append({"compute": "john_function", "f": f"n{n}/{name}"})
                tasks.append({"compute": "isotropic_constant", "f": f"n{n}/{name}"})
    else:
        raise ValueError(f"unknown preset {preset!r}")
    for t in tasks:
        if "check" in t:
            assert t["check"] in CHECKS
    return tasks


PRESETS = ("paper-core", "ratios", "steiner", "positions")


def functions_for(dims=(2, 3)) -> dict[str, LogConcaveFn]:
    """Name -> function for everything the presets refer to."""
    out = {}
    for n in dims:
        for name, f in builtin_functions(n).items():
            out[f"n{n}/{name}"] = f
        for kind in ("dominated", "milman", "invariance"):
            for name, (f1, f2) in _pair_source(kind, n).items():
                out[f"n{n}/{kind}/{name}/1"] = f1
                out[f"n{n}/{kind}/{name}/2"] = f2
    return out
