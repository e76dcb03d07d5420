"""Compare the numba and numpy evaluation kernels on the same workloads.

Run with ``python benchmarks/bench_kernels.py``. Each workload is run once
to warm up (numba compilation, cached lossy states), then timed.
"""

import time

import numpy as np

from bellsim import _kernels
from bellsim.analyzer import SchemeSpec, _lossy_rows, build_plan
from bellsim.fock import BellState

WORKLOADS = [
    ("enhanced PNRD N=1", SchemeSpec("enhanced", "PNRD"), 0.7, 1e-5),
    ("enhanced SlowBD N=2", SchemeSpec("enhanced", "SlowBD", 2), 0.9, 1e-5),
    ("standard BD N=8", SchemeSpec("standard", "BD", 8), 0.9, 1e-5),
    ("enhanced BD N=4", SchemeSpec("enhanced", "BD", 4), 1.0, 1e-5),
]


def run(fn, scheme, plan, eta_d, xi, kmax):
    tp = fp = 0.0
    for b in BellState:
        occ, prob, is_true = _lossy_rows(scheme.kind, scheme.array_size, scheme.aux_pairs, b, 0.01, 1.0, 500_000)
        a, c = fn(occ, prob, is_true, int(b), eta_d, xi, int(scheme.model), kmax, plan.keys, plan.labels, plan.radix)
        tp += a
        fp += c
    return tp / 4, fp / 4


def best_of(fn, repeat=3):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    if _kernels.accumulate_numba is None:
        print("numba unavailable (or BELLSIM_DISABLE_NUMBA set); only the numpy kernel is timed")
    print(f"{'workload':24s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}  max rel diff")
    for name, scheme, eta_d, xi in WORKLOADS:
        plan = build_plan(scheme)
        kmax = scheme.detected_modes if scheme.detected_modes <= 12 else 2
        run(_kernels.accumulate_numpy, scheme, plan, eta_d, xi, kmax)
        t_np, r_np = best_of(lambda: run(_kernels.accumulate_numpy, scheme, plan, eta_d, xi, kmax), 1)
        if _kernels.accumulate_numba is None:
            print(f"{name:24s} {t_np:10.3f}")
            continue
        run(_kernels.accumulate_numba, scheme, plan, eta_d, xi, kmax)
        t_nb, r_nb = best_of(lambda: run(_kernels.accumulate_numba, scheme, plan, eta_d, xi, kmax))
        diff = max(abs(a - b) / abs(a) for a, b in zip(r_np, r_nb) if a)
        print(f"{name:24s} {t_np:10.3f} {t_nb:10.3f} {t_np / t_nb:8.1f}  {diff:.1e}")


if __name__ == "__main__":
    np.seterr(all="ignore")
    main()
