from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipflop.analysis import birkhoff_prefix, verify_gap_control
from flipflop.construct import (
    RULES,
    ContainmentViolation,
    NotPositive,
    block_constant,
    build_all_scales,
    build_controlled_segment,
    choose_tau,
    concatenate,
    contraction_index,
    default_ladder,
    distortion_horizon,
    make_ladder,
    predicted_length,
    smallest_block_length,
    tau_block,
    tau_inequality,
)
from flipflop.core import (
    BudgetExceeded,
    ChampernownePattern,
    FixedPattern,
    InvalidConfiguration,
    Potential,
    extend,
    trivial_chain,
)
from flipflop.spawner.family import SpawnerFamily
from flipflop.spawner.params import default_params
from flipflop.symbolic import make_shift_model

LADDER = ([1, F(1, 4)], [F(1, 2), F(1, 8)])


def step_model():
    return make_shift_model()


def exact_average(labels, T):
    x = np.asarray(labels[:T])
    return F(int(np.count_nonzero(x == 0)) - int(np.count_nonzero(x == 1)), T)


# tau --------------------------------------------------------------------


@given(st.fractions(min_value=F(1, 1000), max_value=F(999, 1000)),
       st.fractions(min_value=F(1, 100), max_value=5))
def test_tau_is_minimal(a1_frac, extra):
    alpha = F(1)
    beta1 = alpha + extra
    a1 = a1_frac * alpha
    tau = choose_tau(beta1, alpha, a1)
    assert tau_inequality(beta1, alpha, a1, tau)
    assert all(not tau_inequality(beta1, alpha, a1, t) for t in range(2, tau))


def test_tau_rejects_bad_rates():
    with pytest.raises(InvalidConfiguration):
        choose_tau(1, 1, 1)
    with pytest.raises(InvalidConfiguration):
        choose_tau(1, 2, F(1, 2))


# distortion -------------------------------------------------------------


def test_distortion_horizon_example():
    mod = lambda r: 4 * r  # noqa: E731
    n0 = contraction_index(F(1, 10), 2, F(1, 2), mod)
    # direct scan: 4 * 2**-n / 2 < 0.05
    scan = next(n for n in range(100) if F(2, 2 ** n) < F(1, 20))
    assert n0 == scan == 6
    assert distortion_horizon(F(1, 10), 2, F(1, 2), 1, mod) == 241


@given(st.fractions(min_value=F(1, 100), max_value=10), st.fractions(min_value=F(1, 1000), max_value=F(1, 2)))
def test_doubling_eta_at_least_halves_horizon(L, eta):
    mod = lambda r: float(L) * r  # noqa: E731
    a = distortion_horizon(eta, 2, F(1, 2), 1, mod)
    b = distortion_horizon(2 * eta, 2, F(1, 2), 1, mod)
    assert 2 * b <= a + 2


def test_block_constant_examples():
    assert block_constant(10, 1, 1, 1, F(1, 20), F(1, 20), F(1, 20)) == F(3, 10)
    N = smallest_block_length(2, 3, 1, F(1, 10), F(1, 5), F(1, 5))
    assert block_constant(N, 2, 3, 1, F(1, 10), F(1, 5), F(1, 5)) > 0
    with pytest.raises(NotPositive):
        block_constant(N - 1, 2, 3, 1, F(1, 10), F(1, 5), F(1, 5))


# blocks -----------------------------------------------------------------


def test_tau_blocks_symbolic():
    m = step_model()
    pp = tau_block(m, 0, "+", "+", tau=5)
    assert pp.labels[:5].tolist() == [0] * 5 and pp.average().lo == 1
    mp = tau_block(m, 1, "-", "+", tau=5, alpha1=F(1, 2))
    assert mp.labels[:5].tolist() == [1, 0, 0, 0, 0]
    assert mp.average().lo == mp.average().hi == F(3, 5)


def test_tau_block_spawner_plus_then_minus():
    fam = SpawnerFamily(default_params())
    lad = default_ladder(fam.potential, 1, *fam.constants())
    ch = tau_block(fam, fam.canonical_member(1), "+", "-", ladder=lad)
    legs = ch.labels[: lad.tau]
    assert legs[0] in (1, 2) and all(x == 3 for x in legs[1:])
    assert ch.average().hi <= -lad.alpha(1)


# segments ---------------------------------------------------------------


def test_scale_two_plan_constants():
    m = step_model()
    lad = make_ladder(m.potential, *LADDER, *m.constants())
    plan = lad.plan(2)
    assert plan.eta == F(1, 32)
    assert lad.tau == 5
    # the count must clear all three lower bounds
    assert plan.m_count > max(plan.horizon, lad.t(1), F(3 * lad.t(1)) * 1 / (F(1, 4) - F(1, 8)))
    assert plan.m_count - 1 <= max(plan.horizon, lad.t(1), F(3 * lad.t(1)) * 1 / (F(1, 4) - F(1, 8)))


@pytest.mark.parametrize("rule", RULES)
@pytest.mark.parametrize("sign", [1, -1])
def test_scale_two_average_in_window(rule, sign):
    m = step_model()
    lad = make_ladder(m.potential, *LADDER, *m.constants(), rule=rule)
    pat = ChampernownePattern()
    c = build_controlled_segment(m, m.canonical_member(pat[0]), pat, lad, 2, sign)
    avg = exact_average(c.labels, c.T)
    lo, hi = (F(1, 8), F(1, 4)) if sign > 0 else (-F(1, 4), -F(1, 8))
    assert lo <= avg <= hi
    assert c.T <= lad.t(2)


def test_counting_rule_step_bound():
    m = step_model()
    lad = make_ladder(m.potential, *LADDER, *m.constants(), rule="count")
    logs = []
    pat = ChampernownePattern()
    build_controlled_segment(m, 0, pat, lad, 2, 1, logs=logs)
    for lg in logs:
        plan = lad.plan(lg.k)
        assert lg.ell <= plan.ell0
        avgs = [t.lo / S for t, S in zip(lg.totals, lg.lengths)]
        for a, b in zip(avgs, avgs[1:]):
            assert abs(b - a) < (plan.beta - plan.alpha) / 3


@pytest.mark.parametrize("sign", [1, -1])
def test_sharp_rule_sum_step_and_no_jump(sign):
    m = step_model()
    lad = make_ladder(m.potential, [1, F(1, 4), F(1, 16)], [F(1, 2), F(1, 8), F(1, 32)], *m.constants())
    logs = []
    build_controlled_segment(m, 0, ChampernownePattern(), lad, 3, sign, logs=logs)
    assert logs
    for lg in logs:
        plan = lad.plan(lg.k)
        for j in range(1, len(lg.totals)):
            step = abs(lg.totals[j].lo - lg.totals[j - 1].lo)
            assert step < lg.lengths[j - 1] * (plan.beta - plan.alpha) / 3
        avgs = [t.lo / S for t, S in zip(lg.totals, lg.lengths)]
        # every candidate before the last stays on the starting side of the window
        for a in avgs[:-1]:
            assert (a > plan.beta - plan.eta) if lg.sign > 0 else (a < -plan.beta + plan.eta)
        assert plan.alpha <= abs(avgs[-1]) <= plan.beta


def test_segment_schedules_control_lower_scales():
    m = step_model()
    lad = make_ladder(m.potential, [1, F(1, 4), F(1, 16)], [F(1, 2), F(1, 8), F(1, 32)], *m.constants())
    c = build_controlled_segment(m, 0, ChampernownePattern(), lad, 3, 1)
    point = m.entrance_point(c)
    sums = birkhoff_prefix(m, point, c.T)
    for i in (1, 2, 3):
        assert verify_gap_control(sums, c.schedules[i], lad.beta(i), lad.t(i), i).passed


def test_all_scales_prefix_average_between_alpha3_and_beta3():
    m = step_model()
    lad = default_ladder(m.potential, 3, *m.constants())
    rep = build_all_scales(m, None, None, lad, 3)
    assert rep.certified
    avg = exact_average(rep.chain.labels, rep.T)
    assert lad.alpha(3) <= avg <= lad.beta(3)
    # the itinerary follows the pattern block by block
    blocks = rep.chain.labels[: rep.T : lad.tau]
    assert np.array_equal(np.where(blocks == 0, 1, -1), ChampernownePattern().prefix(blocks.size))


@settings(max_examples=15, deadline=None)
@given(st.lists(st.sampled_from([1, -1]), min_size=1, max_size=12))
def test_segments_follow_any_pattern(word):
    m = step_model()
    lad = make_ladder(m.potential, *LADDER, *m.constants())
    pat = FixedPattern(word)
    c = build_controlled_segment(m, m.canonical_member(word[0]), pat, lad, 2, 1)
    sums = birkhoff_prefix(m, m.entrance_point(c), c.T)
    assert verify_gap_control(sums, c.schedules[1], lad.beta(1), lad.t(1)).passed
    assert F(1, 8) <= exact_average(c.labels, c.T) <= F(1, 4)


def test_budget_is_enforced_before_building():
    m = step_model()
    lad = default_ladder(m.potential, 4, *m.constants())
    with pytest.raises(BudgetExceeded) as e:
        build_controlled_segment(m, 0, ChampernownePattern(), lad, 4, 1, budget=1000)
    assert e.value.predicted == predicted_length(lad, 4) > 1000


def test_ladder_validation():
    m = step_model()
    with pytest.raises(InvalidConfiguration):
        make_ladder(m.potential, [1, F(1, 2)], [F(1, 2), F(1, 2)], *m.constants())
    with pytest.raises(InvalidConfiguration):
        make_ladder(m.potential, [1], [F(1, 2)], *m.constants(), rule="fastest")


def test_chain_extension_and_concatenation():
    m = step_model()
    c = trivial_chain(m, 0)
    c = extend(m, c, "-")
    c = extend(m, c, "+")
    assert c.labels.tolist() == [0, 1, 0] and c.total.lo == 0
    joined = concatenate(m, c, trivial_chain(m, 0))
    assert joined.T == 2
    with pytest.raises(ContainmentViolation):
        concatenate(m, c, trivial_chain(m, 1))


def test_shifted_potential_guards_chi():
    p = Potential(F(1), F(2), lambda r: 0.0)
    s = p.shifted(F(1, 2))
    assert (s.alpha, s.beta1, s.chi) == (F(1, 2), F(5, 2), F(1, 2))
    with pytest.raises(InvalidConfiguration):
        p.shifted(1)
