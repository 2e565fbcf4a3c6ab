import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lcgeom.exceptions import HypothesisError
from lcgeom.funcrep import GaussianForm, box_indicator, standard_gaussian
from lcgeom.harness import (
    CHECKS,
    CSV_COLUMNS,
    N_INPUTS,
    QuantityCache,
    decide,
    decide_equality,
    run_check,
    verify_condition,
)
from lcgeom.quad import Estimate
from lcgeom.suite import PRESETS, builtin_functions, functions_for, suite_tasks


def mc(v, s):
    return Estimate(v, s, 100, "mc_box")


def exact(v):
    return Estimate(v, 0.0, 0, "closed_form")


class TestDecide:
    def test_clear_pass(self):
        assert decide(mc(1.0, 0.01), mc(2.0, 0.01)) == "pass"

    def test_clear_fail(self):
        assert decide(mc(2.0, 0.01), mc(1.0, 0.01)) == "fail"

    def test_inconclusive_when_noise_is_wide(self):
        assert decide(mc(1.0, 0.1), mc(1.05, 0.1)) == "inconclusive"

    def test_tight_but_resolved_counts_as_pass(self):
        # noise band narrower than 5% of rhs
        assert decide(mc(1.0, 0.001), mc(1.001, 0.001)) == "pass"

    def test_exact_comparison(self):
        assert decide(exact(1.0), exact(1.0 + 1e-12)) == "pass"
        assert decide(exact(1.0 + 1e-12), exact(1.0)) == "pass"
        assert decide(exact(1.0 + 1e-6), exact(1.0)) == "fail"

    def test_equality(self):
        assert decide_equality(mc(0.02, 0.01), 1.0) == "pass"
        assert decide_equality(mc(0.05, 0.01), 1.0) == "fail"


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0, 0.5), st.floats(0, 5))
def test_raising_rhs_never_turns_pass_into_fail(lhs, rhs, sigma, bump):
    before = decide(mc(lhs, sigma), mc(rhs, sigma))
    after = decide(mc(lhs, sigma), mc(rhs + bump, sigma))
    order = {"fail": 0, "inconclusive": 1, "pass": 2}
    if before != "inconclusive":
        assert order[after] >= order[before]
    assert not (before == "pass" and after == "fail")


def test_every_check_registered_once():
    assert len(CHECKS) == 24
    assert set(N_INPUTS) <= set(CHECKS)


def test_gaussian_milman_values():
    g = standard_gaussian(2)
    rep = run_check("t3", [g, g], {"k": 1})
    assert rep.lhs.value == pytest.approx(math.sqrt(math.pi))
    assert rep.rhs.value == pytest.approx(math.sqrt(2 * math.pi))
    assert rep.verdict == "pass"
    assert rep.metadata["condition"].holds


def test_sobolev_on_square():
    sq = box_indicator([-1, -1], [1, 1])
    rep = run_check("sobolev", [sq], seed=1)
    # |f|_2 * 2 sqrt(pi) against the perimeter 8
    assert rep.lhs.value == pytest.approx(2 * 2 * math.sqrt(math.pi))
    assert abs(rep.rhs.value - 8.0) < 4 * rep.rhs.stderr
    assert rep.verdict == "pass"


def test_exact_rows():
    assert run_check("b_bound", [], {"n": 5, "k": 2}).verdict == "pass"
    rep = run_check("omega_ratio", [], {"n": 12, "k": 1})
    assert rep.verdict == "pass"


def test_hypothesis_violation_is_reported():
    big, small = box_indicator([-2, -2], [2, 2]), box_indicator([-1, -1], [1, 1])
    with pytest.raises(HypothesisError, match="shephard"):
        run_check("t1", [big, small])


def test_bad_inputs():
    g = standard_gaussian(2)
    with pytest.raises(KeyError):
        run_check("t99", [g])
    with pytest.raises(ValueError):
        run_check("sobolev", [g, g])
    with pytest.raises(ValueError, match="L_sup"):
        run_check("t6", [g, g], {"k": 1})
    with pytest.raises(ValueError):
        run_check("t3", [g, g], {"k": 2})


def test_verify_condition_dominated_pair():
    f1 = GaussianForm(1.0, np.zeros(3), 2 * np.eye(3))
    cond = verify_condition(f1, standard_gaussian(3), "busemann_petty", 2, n_frames=8)
    assert cond.holds and cond.n_frames == 8
    assert cond.to_dict()["label"] == "sampled hypothesis"


def test_results_do_not_depend_on_order():
    f = builtin_functions(2)["ramp"]
    a = run_check("sobolev", [f], seed=5)
    cache = QuantityCache(5)
    run_check("alexandrov_norm", [f], {"k": 1}, cache=cache)
    run_check("irat_bound", [f], cache=cache)
    b = run_check("sobolev", [f], cache=cache)
    assert a.csv_row() == b.csv_row()


def test_report_serialisation():
    g = standard_gaussian(2)
    rep = run_check("t6", [g, g], {"k": 1, "L_sup": 1.0})
    assert rep.verdict == "ratio_only"
    row = rep.csv_row()
    assert len(row) == len(CSV_COLUMNS)
    d = rep.to_dict()
    assert d["check_id"] == "t6" and "sharpened_rhs" in d["metadata"]


def test_phi_invariance_and_grinberg_on_gaussian():
    g = GaussianForm(1.0, np.zeros(2), np.array([[2.0, 0.4], [0.4, 0.7]]))
    assert run_check("phi_invariance", [g], {"k": 1}).verdict == "pass"
    rep = run_check("grinberg_functional", [g], {"k": 1})
    assert rep.verdict == "pass"


def test_presets_resolve():
    fns = functions_for()
    for preset in PRESETS:
        for task in suite_tasks(preset):
            names = task.get("inputs", [task.get("f")] if "f" in task else [])
            assert all(nm in fns for nm in names)
    assert len(builtin_functions(2)) >= 12 and len(builtin_functions(3)) >= 12


@pytest.mark.parametrize("n", [2, 3])
def test_builtin_pairs_satisfy_domination(n):
    from lcgeom.suite import dominated_pairs

    X = np.random.default_rng(0).uniform(-3, 3, size=(2000, n))
    for f1, f2 in dominated_pairs(n).values():
        assert np.all(f1(X) <= f2(X) * (1 + 1e-12))
