from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bellsim.analyzer import (SchemeSpec, build_plan, build_spdc_plan, evaluate, evaluate_spdc, exact_crossover,
                              ideal_metrics, max_success_rate, outcome_count, propagate, spdc_per_n_rates)
from bellsim.detection import MASKED
from bellsim.errors import ResourceLimitError
from bellsim.fock import BellState

TABLE = {
    ("standard", "PNRD"): Fraction(1, 2), ("standard", "BD"): Fraction(1, 2),
    ("standard", "SlowPNRD"): Fraction(1, 2), ("standard", "SlowBD"): Fraction(1, 4),
    ("enhanced", "PNRD"): Fraction(3, 4), ("enhanced", "BD"): Fraction(3, 16),
    ("enhanced", "SlowPNRD"): Fraction(39, 64), ("enhanced", "SlowBD"): Fraction(1, 16),
}
ROBUST = [(k, m, m == "SlowPNRD") for k in ("standard", "enhanced") for m in ("PNRD", "BD", "SlowPNRD", "SlowBD")]
# first-order false-positive prefactors re-derived from the exact solver
PREFACTORS = {
    ("standard", "PNRD"): 4, ("standard", "BD"): 4, ("standard", "SlowPNRD"): 2, ("standard", "SlowBD"): 2,
    ("enhanced", "PNRD"): 10, ("enhanced", "BD"): 2.5, ("enhanced", "SlowPNRD"): 27 / 8,
    ("enhanced", "SlowBD"): 0.75,
}


@pytest.mark.parametrize("key", sorted(TABLE))
def test_max_success_rate(key):
    assert max_success_rate(SchemeSpec(*key)) == TABLE[key]


def test_count_preserving_rates():
    assert max_success_rate(SchemeSpec("standard", "SlowPNRD", count_preserving=True)) == Fraction(1, 4)
    assert max_success_rate(SchemeSpec("enhanced", "SlowPNRD", count_preserving=True)) == Fraction(9, 32)


def test_vacuum_auxiliary():
    assert max_success_rate(SchemeSpec("enhanced", "PNRD", aux_pairs=0)) == Fraction(1, 2)


@pytest.mark.parametrize("key", sorted(TABLE))
def test_ideal_fidelity_is_one(key):
    s = SchemeSpec(*key)
    m = ideal_metrics(s, build_plan(s))
    assert m.p_f == 0.0
    assert m.p_t == pytest.approx(float(TABLE[key]))


def test_plan_contents_standard_pnrd():
    plan = build_plan(SchemeSpec("standard", "PNRD"))
    d = plan.as_dict()
    assert len(d) == 4
    assert set(d.values()) == {BellState.PSI_PLUS, BellState.PSI_MINUS}
    assert plan.label_of((2, 0, 0, 0)) is None


def test_count_preserving_plan_has_one_masked_detector():
    plan = build_plan(SchemeSpec("enhanced", "SlowPNRD", count_preserving=True))
    for pattern in plan.accepted():
        assert sum(v for v in pattern if v > 0) == 4
        assert pattern.count(MASKED) == 1


@settings(max_examples=15)
@given(st.sampled_from(ROBUST), st.floats(0.05, 1), st.floats(0.3, 1), st.floats(0.3, 1))
def test_zero_dark_count_fidelity(case, eta_i, eta_a, eta_d):
    kind, model, cp = case
    s = SchemeSpec(kind, model, count_preserving=cp)
    m = evaluate(s, build_plan(s), eta_i, eta_a, eta_d, 0.0)
    assert m.p_f <= 1e-15 * max(m.p_t, 1e-300)
    assert m.fidelity == pytest.approx(1.0)


@settings(max_examples=15)
@given(st.sampled_from(ROBUST), st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.3, 1), st.floats(0.3, 1))
def test_pt_over_eta_i_squared_invariant(case, e1, e2, eta_a, eta_d):
    kind, model, cp = case
    s = SchemeSpec(kind, model, count_preserving=cp)
    plan = build_plan(s)
    a = evaluate(s, plan, e1, eta_a, eta_d, 0.0).p_t / e1 ** 2
    b = evaluate(s, plan, e2, eta_a, eta_d, 0.0).p_t / e2 ** 2
    assert a == pytest.approx(b, rel=1e-9)


def test_slow_pnrd_without_filter_is_not_loss_robust():
    s = SchemeSpec("standard", "SlowPNRD")
    m = evaluate(s, build_plan(s), 0.5, 1.0, 0.9, 0.0)
    assert m.p_f > 0.01


@pytest.mark.parametrize("key", sorted(PREFACTORS))
def test_false_positive_prefactor(key):
    kind, model = key
    s = SchemeSpec(kind, model, count_preserving=model == "SlowPNRD")
    xi, eta_i = 1e-9, 1e-4
    m = evaluate(s, build_plan(s), eta_i, 1.0, 1.0, xi)
    assert m.p_f / (eta_i * (1 - eta_i) * xi) == pytest.approx(PREFACTORS[key], rel=2e-3)


def test_dark_count_truncation_reported():
    s = SchemeSpec("standard", "BD", 4)
    m = evaluate(s, build_plan(s), 0.5, 1.0, 1.0, 1e-3)
    assert 0 < m.truncated_mass < 1e-6


def test_plan_scheme_mismatch():
    with pytest.raises(ValueError):
        evaluate(SchemeSpec("standard", "BD"), build_plan(SchemeSpec("standard", "PNRD")), 0.5)


def test_parameter_validation():
    s = SchemeSpec("standard", "BD")
    with pytest.raises(ValueError):
        evaluate(s, build_plan(s), 1.2)
    with pytest.raises(ValueError):
        evaluate(s, build_plan(s), 0.5, xi=1.0)


def test_resource_limit():
    with pytest.raises(ResourceLimitError, match="814385"):
        propagate(SchemeSpec("enhanced", "BD", 8), BellState.PSI_PLUS)


def test_outcome_count():
    s = SchemeSpec("enhanced", "PNRD")
    assert outcome_count(s) == 23392
    assert outcome_count(s, reachable_only=True) == 19552
    assert outcome_count(SchemeSpec("standard", "PNRD"), max_dark=0) == 15


def test_bd_crossover_absent():
    assert exact_crossover("BD", grid=5) is None


def test_spdc_per_n_small():
    rates = [m.p_t for m in spdc_per_n_rates("PNRD", 3)]
    assert rates == pytest.approx([0.5, 0.75, 0.5, 625 / 1024])


def test_spdc_pnrd_plan_has_unit_fidelity():
    plan = build_spdc_plan("PNRD", 4, 0.5)
    for tau in (0.2, 0.5, 0.9):
        m, per_n = evaluate_spdc("PNRD", tau, 4, plan=plan)
        assert m.fidelity == 1.0
        assert m.remainder > 0
        assert m.p_t == pytest.approx(sum(w * x.p_t for w, x in zip(
            np.array([(n + 1) * (1 - np.tanh(tau) ** 2) ** 2 * np.tanh(tau) ** (2 * n) for n in range(5)]), per_n)))


def test_spdc_union_plan_tie_rejects():
    plan = build_spdc_plan("BD", 2, 0.6)
    m, _ = evaluate_spdc("BD", 0.6, 2, plan=plan)
    assert 0 < m.fidelity < 1


def test_spdc_remainder_bound():
    with pytest.raises(ValueError):
        evaluate_spdc("PNRD", 1.2, 2, max_remainder=1e-6)
