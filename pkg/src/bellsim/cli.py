"""Command-line scenario runner. Every scenario writes one deterministic CSV."""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from . import analyzer, approx, arrays
from .config import SCENARIOS, RunConfig, load_config
from .detection import DetectorModel
from .errors import ConfigError, ResourceLimitError
from .ideal import SchemeKind

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE = 0, 2, 3


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return format(v, ".12g")
    return str(v)


def _pmap(fn, tasks, workers: int):
    """Ordered map, over a process pool when ``workers > 1``."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _cp(model: DetectorModel) -> bool:
    return model is DetectorModel.SLOW_PNRD


# ------------------------------------------------------------------ table1

def run_table1(cfg: RunConfig, workers: int = 1):
    header = ["scheme", "model", "filter", "p_t_max_num", "p_t_max_den", "p_t_max"]
    rows = []
    for kind in cfg.schemes:
        for model in cfg.models:
            model = DetectorModel.parse(model)
            variants = [False, True] if model is DetectorModel.SLOW_PNRD else [False]
            for cp in variants:
                r = analyzer.max_success_rate(analyzer.SchemeSpec(kind, model, count_preserving=cp))
                rows.append([SchemeKind.parse(kind).label, model.label, "count-preserving" if cp else "none",
                             r.numerator, r.denominator, float(r)])
    return header, rows


# ------------------------------------------------------------------- sweep

def _sweep_point(task):
    kind, model, values, mode = task
    model = DetectorModel.parse(model)
    eta_i, eta_a, eta_d, xi = values["eta_i"], values["eta_a"], values["eta_d"], values["xi"]
    out = [None] * 4
    if mode in ("exact", "both"):
        scheme = analyzer.SchemeSpec(kind, model, count_preserving=_cp(model))
        m = analyzer.evaluate(scheme, analyzer.build_plan(scheme), eta_i, eta_a, eta_d, xi)
        out[0], out[1] = m.p_t / eta_i ** 2, m.fidelity
    if mode in ("approx", "both"):
        pt, _, fid = approx.approx_rates(kind, model, eta_i, eta_a, eta_d, xi)
        out[2], out[3] = pt / eta_i ** 2, fid
    return out


def run_sweep(cfg: RunConfig, workers: int = 1):
    var = cfg.sweep
    fixed = [k for k in ("eta_i", "eta_a", "eta_d", "xi") if k != var]
    for k in fixed:
        if len(getattr(cfg, k)) > 1 and k != "eta_a":
            raise ConfigError(f"sweep over {var}: {k} must be a single value")
    header = ["model", "scheme", "eta_a", var, "pt_over_etai2_exact", "fidelity_exact",
              "pt_over_etai2_approx", "fidelity_approx"]
    if var == "eta_a":
        header.pop(2)
    tasks, keys = [], []
    sub = cfg.eta_a if var != "eta_a" else (None,)
    for model in cfg.models:
        for kind in cfg.schemes:
            for a in sub:
                if a is not None and kind == "standard" and a != sub[-1]:
                    continue   # the standard scheme has no auxiliary source
                for x in getattr(cfg, var):
                    values = {k: getattr(cfg, k)[0] for k in ("eta_i", "eta_d", "xi")}
                    values["eta_a"] = a if a is not None else 1.0
                    values[var] = x
                    tasks.append((kind, model, values, cfg.mode))
                    keys.append([model, SchemeKind.parse(kind).label] + ([] if a is None else [a]) + [x])
    results = _pmap(_sweep_point, tasks, workers)
    return header, [k + r for k, r in zip(keys, results)]


# ------------------------------------------------------------------ arrays

def _array_exact(task):
    kind, model, n, eta_i, eta_a, eta_d, xi = task
    m = arrays.exact_array_simulate(kind, model, n, eta_i, eta_a, eta_d, xi)
    return m.p_t, m.fidelity


def run_arrays(cfg: RunConfig, workers: int = 1):
    header = ["scheme", "model", "N", "eta_i", "eta_d", "xi", "source", "p_t_ideal", "p_t", "fidelity"]
    eta_i, eta_a, eta_d = cfg.eta_i[0], cfg.eta_a[0], cfg.eta_d[0]
    rows, tasks, slots = [], [], []
    for kind in cfg.schemes:
        limit = cfg.exact_n_max if kind == "enhanced" else cfg.exact_n_max_standard
        for model in cfg.models:
            for xi in cfg.xi:
                for n in cfg.N:
                    ideal = arrays.array_rate(kind, model, n)
                    ideal_out = ideal if cfg.numeric == "exact-rational" else float(ideal)
                    label = SchemeKind.parse(kind).label
                    if cfg.mode in ("approx", "both"):
                        rows.append([label, model, n, eta_i, eta_d, xi, "closed-form", ideal_out,
                                     arrays.array_rate_lossy(kind, model, n, eta_i, eta_a, eta_d, xi),
                                     arrays.array_fidelity(kind, model, n, eta_i, eta_a, eta_d, xi)])
                    if cfg.mode in ("exact", "both") and n <= limit:
                        rows.append([label, model, n, eta_i, eta_d, xi, "exact", ideal_out, None, None])
                        tasks.append((kind, model, n, eta_i, eta_a, eta_d, xi))
                        slots.append(len(rows) - 1)
    for slot, (pt, fid) in zip(slots, _pmap(_array_exact, tasks, workers)):
        rows[slot][8], rows[slot][9] = pt, fid
    return header, rows


# -------------------------------------------------------------------- spdc

def _spdc_task(task):
    model, tau, n_max, eta_i, eta_d, xi = task
    m, per_n = analyzer.evaluate_spdc(model, tau, n_max, eta_i, eta_d, xi)
    return m, per_n


def run_spdc(cfg: RunConfig, workers: int = 1):
    header = ["section", "model", "n", "tau", "p_t", "p_f", "fidelity", "remainder"]
    eta_i, eta_d, xi = cfg.eta_i[0], cfg.eta_d[0], cfg.xi[0]
    tasks = [(model, tau, cfg.n_max, eta_i, eta_d, xi) for model in cfg.models for tau in cfg.tau]
    results = _pmap(_spdc_task, tasks, workers)
    rows = []
    bar_tau = cfg.bar_tau
    for model in cfg.models:
        _, per_n = analyzer.evaluate_spdc(model, bar_tau, cfg.n_max, eta_i, eta_d, xi)
        for n, m in enumerate(per_n):
            rows.append(["per_n", model, n, bar_tau, m.p_t, m.p_f, m.fidelity, None])
    for (model, tau, *_), (m, _) in zip(tasks, results):
        rows.append(["weighted", model, None, tau, m.p_t, m.p_f, m.fidelity, m.remainder])
    return header, rows


# ---------------------------------------------------------------- validate

def _validate_task(task):
    kind, model, eta_d_grid, eta_a_grid, eta_i, xi = task
    return approx.approx_vs_exact_report(kind, model, eta_d_grid, eta_a_grid, eta_i, xi)


def run_validate(cfg: RunConfig, workers: int = 1):
    header = ["scheme", "model", "eta_a", "eta_d", "pt_exact", "pt_approx", "pt_rel",
              "fidelity_exact", "fidelity_approx", "fidelity_rel"]
    tasks = [(kind, model, cfg.eta_d, cfg.eta_a, cfg.eta_i[0], cfg.xi[0])
             for kind in cfg.schemes for model in cfg.models]
    rows = []
    for report in _pmap(_validate_task, tasks, workers):
        for d in report:
            rows.append([d.kind.label, d.model.label, d.eta_a, d.eta_d, d.p_t_exact, d.p_t_approx,
                         d.p_t_rel, d.fid_exact, d.fid_approx, d.fid_rel])
    return header, rows


RUNNERS = {"table1": run_table1, "sweep": run_sweep, "arrays": run_arrays,
           "spdc": run_spdc, "validate": run_validate}


def render_csv(cfg: RunConfig, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# config: {cfg.echo()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def run(cfg: RunConfig, workers: int = 1) -> str:
    header, rows = RUNNERS[cfg.scenario](cfg, workers)
    return render_csv(cfg, header, rows)


def _workers(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("BELLSIM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"BELLSIM_WORKERS must be an integer, got {env!r}") from exc
    return 1


def _out_path(arg: str | None, scenario: str) -> str | None:
    if arg is not None:
        return arg
    out_dir = os.environ.get("BELLSIM_OUT_DIR")
    return os.path.join(out_dir, f"{scenario}.csv") if out_dir else None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bellsim", description="Linear-optics Bell-state analyzer simulations.")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", help="INI file; the section named after the scenario is used")
    p.add_argument("--out", help="output CSV path (default: $BELLSIM_OUT_DIR/<scenario>.csv or stdout)")
    p.add_argument("--mode", choices=("exact", "approx", "both"))
    p.add_argument("--workers", type=int, help="worker processes (default: $BELLSIM_WORKERS or 1)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = {"mode": args.mode} if args.mode else None
        cfg = load_config(args.config, args.scenario, overrides)
        workers = _workers(args.workers)
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        text = run(cfg, workers)
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as exc:   # ConfigError and invalid scenario parameters
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = _out_path(args.out, args.scenario)
    if path is None:
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
