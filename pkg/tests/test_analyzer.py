from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from _synthetic import (
    DOWN, H, IDLE, L, MEASURE, NONE, R, T, UP, hand_branches, lam, make_view, random_view,
)
from grwlocality.analyzer import (
    BeableAssignment, Classification, LambdaValue, analysis_matrix, analyze, analyze_view,
    build_view, check_factorizability, check_no_conspiracy, check_oi, check_pi, classify,
)
from grwlocality.dynamics import Formulation
from grwlocality.engine import FrameOrder, Scenario, enumerate_branches, joint_distribution
from grwlocality.errors import EmptyCommonSupport, Unclassifiable

NL, CK = Formulation.NONLINEAR, Formulation.LINEAR_COOKING
M0, M1, M2 = (BeableAssignment.STATE_ONLY, BeableAssignment.STATE_PLUS_LEFT_COIN,
              BeableAssignment.STATE_PLUS_ALL_COINS)
CELLS = list(product(Formulation, BeableAssignment))


# --- exact-rational oracle over the hand-written branch tables ---------------

def _oracle_groups(formulation, mode, setting):
    wings = {M0: (), M1: (L,), M2: (L, R)}[mode]
    groups = {}
    for coins, pair, p in hand_branches(formulation, setting):
        key = tuple((w, coins[w]) for w in wings if w in coins)
        groups.setdefault(key, []).append((pair, Fraction(p)))
    return {k: v for k, v in groups.items() if sum(p for _, p in v) > 0}


def _p_left(rows, ol, orr=None):
    sel = [(pair, p) for pair, p in rows if orr is None or pair[1] == orr]
    tot = sum(p for _, p in sel)
    return sum(p for pair, p in sel if pair[0] == ol) / tot


def oracle_pi(formulation, mode):
    a, s = _oracle_groups(formulation, mode, MEASURE), _oracle_groups(formulation, mode, IDLE)
    best = Fraction(0)
    for ka, ks in product(a, s):
        if all(dict(ka).get(w, c) == c for w, c in ks):
            for ol in (UP, DOWN):
                best = max(best, abs(_p_left(a[ka], ol) - _p_left(s[ks], ol)))
    return best


def oracle_oi(formulation, mode):
    best = Fraction(0)
    for setting in (MEASURE, IDLE):
        for rows in _oracle_groups(formulation, mode, setting).values():
            for orr in {pair[1] for pair, p in rows if p > 0}:
                for ol in (UP, DOWN):
                    best = max(best, abs(_p_left(rows, ol, orr) - _p_left(rows, ol)))
    return best


@pytest.mark.parametrize("f, b", CELLS)
def test_pi_and_oi_match_exact_oracle(f, b):
    view = build_view(f, b)
    assert check_pi(view).value == pytest.approx(float(oracle_pi(f, b)), abs=1e-12)
    assert check_oi(view).value == pytest.approx(float(oracle_oi(f, b)), abs=1e-12)


def test_oracle_reference_values():
    assert (oracle_pi(NL, M1), oracle_oi(NL, M1)) == (Fraction(1, 2), Fraction(1, 2))
    assert (oracle_pi(NL, M2), oracle_oi(NL, M2)) == (1, 0)
    assert (oracle_pi(CK, M0), oracle_oi(CK, M0)) == (0, Fraction(1, 2))
    assert (oracle_pi(CK, M2), oracle_oi(CK, M2)) == (0, 0)


# --- build_view ---------------------------------------------------------------

def test_ggbf_conditionals():
    view = build_view(NL, M1)
    hl = lam((L, H))
    assert view[MEASURE].left_prob(hl, UP) == pytest.approx(0.5, abs=1e-12)
    assert view[IDLE].left_prob(hl, UP) == pytest.approx(1.0, abs=1e-12)
    assert view[MEASURE].lambda_dist[hl] == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("setting", [MEASURE, IDLE])
def test_cooking_left_coin_fixes_left_outcome(setting):
    view = build_view(CK, M1)
    assert view[setting].left_prob(lam((L, H)), UP) == pytest.approx(1.0, abs=1e-12)


def test_zero_probability_lambdas_excluded():
    view = build_view(CK, M2)
    assert set(view[MEASURE].lambda_dist) == {lam((L, H), (R, T)), lam((L, T), (R, H))}
    # the right coin never exists when the right wing idles
    assert all(lv.wings == {L} for lv in view[IDLE].lambda_dist)


def test_state_only_lambda_has_no_coins():
    view = build_view(NL, M0)
    assert list(view[MEASURE].lambda_dist) == [LambdaValue()]


@pytest.mark.parametrize("f, b", CELLS)
@pytest.mark.parametrize("frame", list(FrameOrder))
def test_view_distributions_normalized(f, b, frame):
    view = build_view(f, b, frame)
    for sv in view.settings.values():
        assert sum(sv.lambda_dist.values()) == pytest.approx(1.0, abs=1e-12)
        for k in sv.kernels.values():
            assert sum(k.probs.values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("f, b", CELLS)
@pytest.mark.parametrize("frame", list(FrameOrder))
def test_total_probability(f, b, frame):
    view = build_view(f, b, frame)
    for setting, sv in view.settings.items():
        direct = joint_distribution(enumerate_branches(Scenario(setting, frame, f)))
        assert sv.mixture().max_abs_diff(direct) <= 1e-12


# --- checks -------------------------------------------------------------------

def test_pi_witnesses():
    w = check_pi(build_view(NL, M1)).witness
    assert w.lambdas[0] == lam((L, H))
    assert w.values == pytest.approx((0.5, 1.0))
    w = check_pi(build_view(NL, M2)).witness
    assert w.lambdas == (lam((L, H), (R, H)), lam((L, H)))
    assert w.values == pytest.approx((0.0, 1.0))


def test_oi_witness_cooking_state_only():
    d = check_oi(build_view(CK, M0))
    assert d.value == pytest.approx(0.5)
    # P(up_L | measure, down_R) = 1 against P(up_L | measure) = 1/2
    assert d.witness.outcomes == (("up", "down"),)
    assert d.witness.values == pytest.approx((1.0, 0.5))


def test_factorizability_examples():
    assert check_factorizability(build_view(NL, M0)).value > 0
    assert check_factorizability(build_view(CK, M2)).value == 0.0


def test_empty_common_support():
    view = make_view({
        MEASURE: {LambdaValue(state_label="a"): (1, {(UP, DOWN): 1})},
        IDLE: {LambdaValue(state_label="b"): (1, {(UP, NONE): 1})},
    })
    with pytest.raises(EmptyCommonSupport):
        check_pi(view)
    with pytest.raises(EmptyCommonSupport):
        check_factorizability(view)


def test_no_conspiracy_examples():
    assert check_no_conspiracy(build_view(NL, M0)).deviation == 0.0
    assert check_no_conspiracy(build_view(NL, M1)).deviation == 0.0
    assert not check_no_conspiracy(build_view(NL, M2)).flagged
    nc = check_no_conspiracy(build_view(CK, M2))
    assert nc.flagged and nc.support_restricted
    assert nc.deviation == pytest.approx(0.5)
    assert nc.common_tv == 0.0


def test_no_conspiracy_detects_setting_dependent_lambda():
    a, b = LambdaValue(state_label="a"), LambdaValue(state_label="b")
    view = make_view({
        MEASURE: {a: (0.9, {(UP, DOWN): 1}), b: (0.1, {(DOWN, UP): 1})},
        IDLE: {a: (0.5, {(UP, NONE): 1}), b: (0.5, {(DOWN, NONE): 1})},
    })
    assert check_no_conspiracy(view).common_tv == pytest.approx(0.4)


# --- classification -------------------------------------------------------------

@pytest.mark.parametrize("args, expected", [
    ((0, 0.5, 0.25, False), Classification.STOCHASTIC_NONLOCAL),
    ((1, 0, 1, True), Classification.DETERMINISTIC_NONLOCAL),
])
def test_classify(args, expected):
    assert classify(*args) is expected


def test_classify_conspiracy():
    assert classify(0, 0, 0, True, conspiracy=True) is Classification.LOCAL_CONSPIRACY


@pytest.mark.parametrize("args", [
    (0.5, 0.5, 0.5, False),   # violates both
    (0, 0, 0, True),          # local, no conspiracy
    (0.5, 0, 0.5, False),     # PI only but stochastic
    (0, 0, 0.3, False),       # factorizability inconsistent with PI/OI
])
def test_unclassifiable(args):
    with pytest.raises(Unclassifiable):
        classify(*args)


def test_classification_matrix():
    m = analysis_matrix()
    assert m[(NL, M0)].classification is Classification.STOCHASTIC_NONLOCAL
    assert m[(CK, M0)].classification is Classification.STOCHASTIC_NONLOCAL
    assert m[(NL, M2)].classification is Classification.DETERMINISTIC_NONLOCAL
    assert m[(CK, M2)].classification is Classification.LOCAL_CONSPIRACY
    assert m[(NL, M1)].pi_deviation == pytest.approx(0.5)
    assert m[(CK, M1)].pi_deviation == m[(CK, M1)].oi_deviation == 0.0
    # identical observable statistics, different verdicts
    assert m[(NL, M1)].verdict != m[(CK, M1)].verdict


def test_report_consistency():
    for r in analysis_matrix().values():
        assert min(r.pi_deviation, r.oi_deviation, r.factorizability_deviation,
                   r.no_conspiracy_deviation) >= 0
        if r.classification is None:
            assert r.note.startswith("unclassifiable")


@pytest.mark.parametrize("f, b", CELLS)
def test_jarrett_decomposition(f, b):
    r = analyze(f, b)
    assert (r.factorizability_deviation <= 1e-12) == (r.pi_deviation <= 1e-12 and r.oi_deviation <= 1e-12)


@pytest.mark.parametrize("seed", range(50))
def test_jarrett_on_random_views(seed):
    rng = np.random.default_rng(seed)
    view = random_view(rng, deterministic=bool(seed % 2))
    pi, oi, fact = check_pi(view).value, check_oi(view).value, check_factorizability(view).value
    assert (fact <= 1e-12) == (pi <= 1e-12 and oi <= 1e-12)


def test_jarrett_on_local_product_view():
    a = LambdaValue(state_label="a")
    view = make_view({
        MEASURE: {a: (1, {(UP, UP): 0.12, (UP, DOWN): 0.18, (DOWN, UP): 0.28, (DOWN, DOWN): 0.42})},
        IDLE: {a: (1, {(UP, NONE): 0.3, (DOWN, NONE): 0.7})},
    })
    assert check_pi(view).value == check_oi(view).value == 0.0
    assert check_factorizability(view).value == 0.0
    assert analyze_view(view).classification is None


@pytest.mark.parametrize("seed", range(20))
def test_deterministic_views_respect_oi(seed):
    view = random_view(np.random.default_rng(1000 + seed), deterministic=True)
    assert view.is_deterministic()
    assert check_oi(view).value == 0.0


def test_left_first_frame_changes_nonlinear_left_coin_view():
    # with the left wing first the left coin settles the singlet tie itself
    r = analyze(NL, M1, FrameOrder.LEFT_FIRST)
    assert r.pi_deviation == 0.0 and r.oi_deviation == 0.0
