import itertools
from collections import Counter
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from bellsim.arrays import (array_fidelity, array_rate, categorize, category_basis, exact_array_simulate,
                            first_advantage, flow_matrix, p111, split_category)
from bellsim.analyzer import SchemeSpec, build_plan, evaluate


def standard_matrix(n):
    return [[F(1), F(n - 1, n)], [F(0), F(1, n)]]


def enhanced_matrix(n):
    N = F(n)
    return [
        [F(1), (N - 1) / N, (N - 2) * (N - 1) / N ** 2, (N - 1) ** 2 / N ** 2, (N - 3) * (N - 2) * (N - 1) / N ** 3],
        [F(0), 1 / N, 3 * (N - 1) / N ** 2, 2 * (N - 1) / N ** 2, 6 * (N - 2) * (N - 1) / N ** 3],
        [F(0), F(0), 1 / N ** 2, F(0), 4 * (N - 1) / N ** 3],
        [F(0), F(0), F(0), 1 / N ** 2, 3 * (N - 1) / N ** 3],
        [F(0), F(0), F(0), F(0), 1 / N ** 3],
    ]


def brute_split(category, n):
    """Drop every photon of every part into one of n sub-modes, all assignments equally likely."""
    parts = [(i, k) for i, part in enumerate(category) for k in range(part)]
    out = Counter()
    for bins in itertools.product(range(n), repeat=len(parts)):
        occ = Counter((parts[j][0], b) for j, b in enumerate(bins))
        out[tuple(sorted(occ.values(), reverse=True))] += 1
    total = n ** len(parts)
    return {c: F(v, total) for c, v in out.items()}


def std_slowbd(n):
    return F(1, 2) - F(1, 4 * n)


def enh_bd(n):
    return F(3, 4) - F(1, n) + F(7, 16 * n * n)


def enh_slowbd(n):
    return F(3, 4) - F(13, 8 * n) + F(21, 16 * n * n) - F(3, 8 * n ** 3)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 7, 16])
def test_flow_matrices_match_closed_form(n):
    assert [list(r) for r in flow_matrix("standard", n).entries] == standard_matrix(n)
    assert [list(r) for r in flow_matrix("enhanced", n).entries] == enhanced_matrix(n)


def test_basis_order():
    assert category_basis("enhanced") == [(1, 1, 1, 1), (2, 1, 1), (3, 1), (2, 2), (4,)]
    assert category_basis("standard", with_loss=True) == [(1, 1), (2,), (1,), ()]


@pytest.mark.parametrize("cat", [(1,), (2,), (3,), (2, 1), (2, 2), (3, 1), (4,), (1, 1, 1)])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_split_against_brute_force(cat, n):
    assert split_category(cat, n) == brute_split(cat, n)


@settings(max_examples=20)
@given(st.sampled_from(["standard", "enhanced"]), st.booleans(), st.integers(1, 12))
def test_flow_is_stochastic_and_triangular(kind, lossy, n):
    a = flow_matrix(kind, n, lossy).entries
    d = len(a)
    for j in range(d):
        assert sum(a[i][j] for i in range(d)) == 1
    # probability only flows to categories with at least as many parts
    basis = category_basis(kind, lossy)
    for i in range(d):
        for j in range(d):
            if a[i][j]:
                assert sum(basis[i]) == sum(basis[j]) and len(basis[i]) >= len(basis[j])


@pytest.mark.parametrize("kind", ["standard", "enhanced"])
@pytest.mark.parametrize("m,k", [(2, 2), (2, 3), (3, 4)])
def test_flow_composes(kind, m, k):
    assert (flow_matrix(kind, m) @ flow_matrix(kind, k)).entries == flow_matrix(kind, m * k).entries


def test_category_vectors():
    v = categorize("standard", "BD")
    assert (v.p, v.p_t) == ([F(1, 2), F(1, 2)], [F(1, 2), F(0)])
    v = categorize("standard", "SlowBD")
    assert (v.p, v.p_t) == ([F(1, 4), F(3, 4)], [F(1, 4), F(1, 4)])
    v = categorize("enhanced", "BD")
    assert v.p_t == [F(3, 16), F(5, 16), F(3, 16), F(1, 16), F(0)]
    assert sum(v.p) == 1


def test_categorize_rejects_resolving_models():
    with pytest.raises(ValueError):
        categorize("enhanced", "PNRD")


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10, 16])
def test_array_rate_closed_forms(n):
    assert array_rate("standard", "BD", n) == F(1, 2)
    assert array_rate("standard", "SlowBD", n) == std_slowbd(n)
    assert array_rate("enhanced", "BD", n) == enh_bd(n)
    assert array_rate("enhanced", "SlowBD", n) == enh_slowbd(n)
    assert array_rate("enhanced", "PNRD", n) == F(3, 4)


@pytest.mark.parametrize("kind,model,n", [("standard", "BD", 2), ("standard", "SlowBD", 2), ("standard", "SlowBD", 4),
                                          ("enhanced", "BD", 2), ("enhanced", "SlowBD", 2)])
def test_closed_forms_match_exact_simulation(kind, model, n):
    m = exact_array_simulate(kind, model, n)
    assert m.p_t == pytest.approx(float(array_rate(kind, model, n)), rel=1e-12)
    assert m.p_f == 0.0


def test_exact_slow_pnrd_arrays():
    assert exact_array_simulate("enhanced", "SlowPNRD", 2).p_t == pytest.approx(169 / 256, rel=1e-12)
    with pytest.raises(ValueError):
        array_rate("enhanced", "SlowPNRD", 2)


@pytest.mark.parametrize("model", ["BD", "SlowBD"])
@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_p111_matches_lossy_flow(model, n):
    eta_i, eta_a = 1e-3, 0.9
    v = categorize("enhanced", model, with_loss=True, eta_i=eta_i, eta_a=eta_a)
    basis = v.basis
    flowed = flow_matrix("enhanced", n, with_loss=True) @ [F(x) for x in v.p]
    p = float(flowed[basis.index((1, 1, 1))])
    assert p == pytest.approx(p111(model, n, eta_i, eta_a), rel=2e-3)


def test_single_detector_reductions():
    # N = 1 recovers the single-detector false-positive prefactors
    for model, c in (("BD", 2.5), ("SlowBD", 0.75)):
        eta_i, xi = 1e-4, 1e-9
        fid = array_fidelity("enhanced", model, 1, eta_i, 1.0, 1.0, xi)
        pt = array_rate("enhanced", model, 1) * eta_i ** 2
        pf = float(pt) * (1 / fid - 1)
        assert pf / (eta_i * (1 - eta_i) * xi) == pytest.approx(c, rel=1e-3)


def test_array_false_positive_vs_exact():
    m = exact_array_simulate("enhanced", "BD", 1, 0.01, 1.0, 1.0, 1e-5)
    assert m.fidelity == pytest.approx(array_fidelity("enhanced", "BD", 1, 0.01, 1.0, 1.0, 1e-5), rel=1e-3)
    s = SchemeSpec("enhanced", "BD")
    assert evaluate(s, build_plan(s), 0.01, 1.0, 1.0, 1e-5).p_t == pytest.approx(m.p_t)


def test_first_advantage():
    assert first_advantage("BD") == 4
    assert first_advantage("SlowBD") == 5
    assert first_advantage("PNRD") == 1
