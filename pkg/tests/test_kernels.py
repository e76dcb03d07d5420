import os
import subprocess
import sys

import pytest

from bellsim import _kernels
from bellsim.analyzer import SchemeSpec, _lossy_rows, build_plan, evaluate
from bellsim.detection import conditional_table, marginalize_loss
from bellsim.analyzer import propagate, raw_unambiguous, _ideal_set
from bellsim.fock import BellState

needs_numba = pytest.mark.skipif(_kernels.accumulate_numba is None, reason="numba disabled or unavailable")


def _brute_force(scheme, plan, eta_i, eta_a, eta_d, xi):
    """Reference rates from per-term detector tables, no shared kernel code."""
    ok = raw_unambiguous(_ideal_set(scheme))
    ideal_rows = {b: {tuple(int(x) for x in r) for r in o.occ[ok[b]]} for b, o in _ideal_set(scheme).items()}
    accepted = plan.as_dict()
    tp = fp = 0.0
    for b in BellState:
        marg = marginalize_loss(propagate(scheme, b, eta_i, eta_a))
        for occ, sig, p in zip(marg.occ, marg.signature, marg.prob):
            phi = tuple(int(x) for x in occ)
            clean = sig[0] == 0 and sig[1] == 0 and phi in ideal_rows[b]
            for m, q in conditional_table(phi, eta_d, xi, scheme.model).items():
                lab = accepted.get(m)
                if lab is None:
                    continue
                if clean and lab == b:
                    tp += p * q / 4
                else:
                    fp += p * q / 4
    return tp, fp


@pytest.mark.parametrize("kind,model,cp", [
    ("standard", "PNRD", False), ("standard", "BD", False), ("standard", "SlowPNRD", True),
    ("standard", "SlowBD", False), ("enhanced", "SlowPNRD", True), ("enhanced", "BD", False),
])
def test_evaluate_matches_brute_force(kind, model, cp):
    scheme = SchemeSpec(kind, model, count_preserving=cp)
    plan = build_plan(scheme)
    params = (0.3, 0.8, 0.7, 0.02)
    m = evaluate(scheme, plan, *params)
    tp, fp = _brute_force(scheme, plan, *params)
    assert m.p_t == pytest.approx(tp, rel=1e-9)
    assert m.p_f == pytest.approx(fp, rel=1e-9)


@needs_numba
@pytest.mark.parametrize("kind,model,n,eta_d,xi", [
    ("enhanced", "PNRD", 1, 0.7, 1e-3), ("enhanced", "SlowPNRD", 1, 0.9, 1e-2),
    ("enhanced", "SlowBD", 2, 0.8, 1e-4), ("standard", "BD", 4, 0.6, 1e-3),
])
def test_numba_matches_numpy(kind, model, n, eta_d, xi):
    scheme = SchemeSpec(kind, model, n)
    plan = build_plan(scheme)
    kmax = scheme.detected_modes if scheme.detected_modes <= 12 else 2
    for b in BellState:
        occ, prob, is_true = _lossy_rows(scheme.kind, n, 1, b, 0.2, 0.9, 500_000)
        args = (occ, prob, is_true, int(b), eta_d, xi, int(scheme.model), kmax, plan.keys, plan.labels, plan.radix)
        a = _kernels.accumulate_numpy(*args)
        c = _kernels.accumulate_numba(*args)
        assert c[0] == pytest.approx(a[0], rel=1e-12, abs=1e-300)
        assert c[1] == pytest.approx(a[1], rel=1e-12, abs=1e-300)


def test_env_flag_selects_numpy():
    code = "from bellsim import _kernels; print(_kernels.HAVE_NUMBA, _kernels.accumulate is _kernels.accumulate_numpy)"
    env = dict(os.environ, BELLSIM_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "True"]


def test_dark_subset_tail():
    assert _kernels.dark_subset_tail(8, 0.1, 8) == 0.0
    assert _kernels.dark_subset_tail(20, 1e-3, 2) == pytest.approx(1140 * 1e-9, rel=0.05)
