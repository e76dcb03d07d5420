import pytest
from hypothesis import given, settings, strategies as st

from bellsim.analyzer import SchemeSpec, build_plan, evaluate, max_success_rate
from bellsim.approx import approx_rates, approx_vs_exact_report, crossover, rate_formula

MODELS = ["PNRD", "BD", "SlowPNRD", "SlowBD"]


def test_worked_example():
    pt, pf, fid = approx_rates("standard", "PNRD", 0.01, 1.0, 0.9, 1e-5)
    assert pt == pytest.approx(0.5 * 0.81 * 1e-4 * (1 - 1e-5) ** 4)
    assert pf == pytest.approx(4 * 0.9 * 0.01 * 0.99 * 1e-5 * (1 - 1e-5) ** 3)
    assert fid == pytest.approx(pt / (pt + pf))


def test_zero_rates_give_no_fidelity():
    assert approx_rates("enhanced", "BD", 0.0, 1.0, 1.0, 0.0)[2] is None


def test_range_check():
    with pytest.raises(ValueError):
        approx_rates("standard", "BD", 1.5)


@pytest.mark.parametrize("model", MODELS)
def test_crossover_equates_rates(model):
    x = crossover(model)
    if x is None:
        assert rate_formula("enhanced", model).pt_max <= rate_formula("standard", model).pt_max
        return
    std = approx_rates("standard", model, 0.01, 1.0, x, 0.0)[0]
    enh = approx_rates("enhanced", model, 0.01, 1.0, x, 0.0)[0]
    assert abs(std - enh) <= 1e-12 * std


def test_crossover_values():
    assert crossover("PNRD") == pytest.approx((2 / 3) ** 0.5, abs=1e-12)
    assert crossover("SlowPNRD") == pytest.approx((8 / 9) ** 0.5, abs=1e-12)
    assert crossover("BD") is None and crossover("SlowBD") is None


@pytest.mark.parametrize("kind", ["standard", "enhanced"])
@pytest.mark.parametrize("model", MODELS)
def test_pt_max_agrees_with_exact_solver(kind, model):
    s = SchemeSpec(kind, model, count_preserving=model == "SlowPNRD")
    assert rate_formula(kind, model).pt_max == max_success_rate(s)


@settings(max_examples=20)
@given(st.sampled_from(["standard", "enhanced"]), st.sampled_from(MODELS),
       st.floats(0.01, 1), st.floats(0.3, 1), st.floats(0.3, 1))
def test_true_rate_exact_without_dark_counts(kind, model, eta_i, eta_a, eta_d):
    s = SchemeSpec(kind, model, count_preserving=model == "SlowPNRD")
    ex = evaluate(s, build_plan(s), eta_i, eta_a, eta_d, 0.0)
    assert approx_rates(kind, model, eta_i, eta_a, eta_d, 0.0)[0] == pytest.approx(ex.p_t, rel=1e-9)


@settings(max_examples=30)
@given(st.sampled_from(MODELS), st.floats(1e-4, 0.5), st.floats(0.05, 1), st.floats(0.05, 1),
       st.floats(0.05, 1), st.floats(1e-9, 1e-3))
def test_fidelity_independent_of_auxiliary_loss(model, eta_i, a1, a2, eta_d, xi):
    f1 = approx_rates("enhanced", model, eta_i, a1, eta_d, xi)[2]
    f2 = approx_rates("enhanced", model, eta_i, a2, eta_d, xi)[2]
    assert f1 == pytest.approx(f2, rel=1e-12)


def test_report_shape():
    rep = approx_vs_exact_report("enhanced", "BD", [0.8, 1.0], [0.9, 1.0])
    assert len(rep) == 4
    assert all(d.p_t_rel < 1e-3 for d in rep)
    assert len(approx_vs_exact_report("standard", "BD", [0.8, 1.0], [0.9, 1.0])) == 2
