"""Scheme pipelines, post-selection plans and exact true/false positive rates."""

from __future__ import annotations

from itertools import combinations
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import _kernels, optics
from .detection import (MASKED, DetectorModel, LossMarginal, decode_pattern, encode_patterns, lookup_keys,
                        marginalize_loss, model_map_array, sort_keys)
from .errors import ResourceLimitError
from .fock import (BellState, LossOrigin, ModeRegistry, PureState, SourceSpec, hilbert_dim_upto,
                   make_source_state, spdc_weights, tensor)
from .ideal import IdealOutput, SchemeKind, ideal_output

DEFAULT_MAX_STATES = 500_000
FULL_DARK_ENUMERATION = 12   # modes up to which every dark-count subset is enumerated
DEFAULT_KMAX = 2


@dataclass(frozen=True)
class SchemeSpec:
    kind: SchemeKind
    model: DetectorModel
    array_size: int = 1
    count_preserving: bool = False
    aux_pairs: int = 1   # enhanced only; 0 means vacuum in the auxiliary modes

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SchemeKind.parse(self.kind))
        object.__setattr__(self, "model", DetectorModel.parse(self.model))
        if self.array_size < 1:
            raise ValueError("array size must be >= 1")
        if self.aux_pairs < 0:
            raise ValueError("auxiliary pair number must be >= 0")
        if self.kind is SchemeKind.STANDARD and self.aux_pairs != 1:
            object.__setattr__(self, "aux_pairs", 1)

    @property
    def enhanced(self) -> bool:
        return self.kind is SchemeKind.ENHANCED

    @property
    def photons(self) -> int:
        return 2 + 2 * self.aux_pairs if self.enhanced else 2

    @property
    def detectors(self) -> int:
        return (4 if self.enhanced else 2) * self.array_size

    @property
    def detected_modes(self) -> int:
        return 2 * self.detectors


@dataclass(frozen=True, eq=False)
class PostSelectionPlan:
    """Accepted reported patterns with their Bell labels; everything else is rejected."""

    scheme: SchemeSpec
    radix: int
    n_modes: int
    keys: np.ndarray      # (P, W) sorted lexicographically
    labels: np.ndarray    # (P,) BellState values

    def __len__(self) -> int:
        return len(self.keys)

    def label_of(self, pattern) -> BellState | None:
        key = encode_patterns(np.asarray([pattern]), self.radix)
        lab = int(lookup_keys(self.keys, self.labels, key)[0])
        return None if lab < 0 else BellState(lab)

    def accepted(self, bell: BellState | None = None) -> list[tuple[int, ...]]:
        rows = range(len(self.keys)) if bell is None else np.flatnonzero(self.labels == int(bell))
        return sorted(decode_pattern(self.keys[i], self.radix, self.n_modes) for i in rows)

    def as_dict(self) -> dict[tuple[int, ...], BellState]:
        return {decode_pattern(k, self.radix, self.n_modes): BellState(int(l))
                for k, l in zip(self.keys, self.labels)}


@dataclass(frozen=True)
class Metrics:
    p_t: float
    p_f: float
    per_bell: dict = field(default_factory=dict)   # symbol -> (p_t, p_f)
    params: dict = field(default_factory=dict)
    truncated_mass: float = 0.0   # dark-count subsets beyond the enumeration order
    remainder: float = 0.0        # SPDC weight beyond n_max

    @property
    def fidelity(self) -> float | None:
        tot = self.p_t + self.p_f
        return None if tot <= 0 else self.p_t / tot


# ------------------------------------------------------------------ plans

def _key_groups(key_blocks: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Unique key rows over all blocks and, per block, the index of each row's key."""
    allk = np.concatenate(key_blocks)
    uniq, inv = np.unique(allk, axis=0, return_inverse=True)
    inv = inv.ravel()
    out, pos = [], 0
    for b in key_blocks:
        out.append(inv[pos:pos + len(b)])
        pos += len(b)
    return uniq, out


def _bell_masks(n_keys: int, groups: list[np.ndarray], bells: list[int]) -> np.ndarray:
    mask = np.zeros(n_keys, dtype=np.int64)
    for g, b in zip(groups, bells):
        np.bitwise_or.at(mask, g, 1 << b)
    return mask


def raw_unambiguous(outputs: dict[BellState, IdealOutput]) -> dict[BellState, np.ndarray]:
    """Per Bell input, which ideal output rows occur for no other input."""
    radix = max(int(o.occ.max()) for o in outputs.values()) + 2
    bells = list(outputs)
    uniq, groups = _key_groups([encode_patterns(outputs[b].occ, radix) for b in bells])
    mask = _bell_masks(len(uniq), groups, [int(b) for b in bells])
    return {b: mask[g] == (1 << int(b)) for b, g in zip(bells, groups)}


def _count_preserved(rep: np.ndarray, expected: int, model: DetectorModel) -> np.ndarray:
    """Rows whose reported counts account for every expected photon.

    Slow detectors additionally require that exactly one detector fired
    early, so at most one late bin is hidden from the record.
    """
    total = np.where(rep > 0, rep, 0).sum(axis=1)
    if not model.slow:
        return total >= expected
    masked = (rep == MASKED).sum(axis=1)
    return (total >= expected) & (masked == 1)


def _combine_plan(scheme: SchemeSpec, entries, radix: int, rule: str, weights=None) -> PostSelectionPlan:
    """Accept sets from ideal outputs ``entries[(n, bell)]`` at one or several pair numbers.

    ``strict``: a pattern is accepted for B iff it never occurs for another
    input at any n. ``union``: it is accepted for B if it is unambiguous for B
    at some n; a pattern unambiguous for different labels at different n goes
    to the label with the larger weighted true contribution, ties reject.
    """
    model = scheme.model
    names = list(entries)
    reps = {k: model_map_array(entries[k].occ, model) for k in names}
    uniq, groups = _key_groups([encode_patterns(reps[k], radix) for k in names])
    g = dict(zip(names, groups))
    ns = sorted({n for n, _ in names})
    weights = {n: 1.0 for n in ns} if weights is None else weights

    if scheme.count_preserving:
        full = {k: _count_preserved(reps[k], 2 + 2 * k[0] if scheme.enhanced else 2, model) for k in names}
    per_n_mask = {}
    for n in ns:
        ks = [k for k in names if k[0] == n]
        per_n_mask[n] = _bell_masks(len(uniq), [g[k] for k in ks], [int(k[1]) for k in ks])

    label = np.full(len(uniq), -1, dtype=np.int64)
    if rule == "strict":
        overall = np.bitwise_or.reduce(np.stack(list(per_n_mask.values())), axis=0)
        for b in BellState:
            label[overall == (1 << int(b))] = int(b)
        if scheme.count_preserving:
            for k in names:
                label[g[k][~full[k]]] = -1
    elif rule == "union":
        score = np.zeros((len(uniq), 4))
        cand = np.zeros((len(uniq), 4), dtype=bool)
        raw_ok = {}
        for n in ns:
            raw_ok.update({(n, b): v for b, v in raw_unambiguous(
                {b: entries[(n, b)] for b in BellState if (n, b) in entries}).items()})
        for k in names:
            n, b = k
            unamb_rows = per_n_mask[n][g[k]] == (1 << int(b))
            if scheme.count_preserving:
                unamb_rows &= full[k]
            cand[g[k][unamb_rows], int(b)] = True
            contrib = np.bincount(g[k], weights=entries[k].prob * raw_ok[k], minlength=len(uniq))
            score[:, int(b)] += weights[n] * contrib
        score = np.where(cand, score, -np.inf)
        best = score.argmax(axis=1)
        top = score[np.arange(len(uniq)), best]
        ties = (score == top[:, None]).sum(axis=1) > 1
        ok = cand.any(axis=1) & ~(ties & (cand.sum(axis=1) > 1))
        label[ok] = best[ok]
    else:
        raise ValueError(f"unknown combine rule {rule!r}")
    keep = label >= 0
    keys, labels = sort_keys(uniq[keep], label[keep])
    return PostSelectionPlan(scheme, radix, scheme.detected_modes, keys, labels)


def _plan_radix(photons: int) -> int:
    # reported values reach photons + 1 with one dark count; key digits store value + 1
    return photons + 3


@lru_cache(maxsize=64)
def _ideal(kind: SchemeKind, bell: BellState, aux_pairs: int, array_size: int) -> IdealOutput:
    return ideal_output(kind, bell, aux_pairs, array_size)


def _ideal_set(scheme: SchemeSpec, aux_pairs: int | None = None) -> dict[BellState, IdealOutput]:
    n = scheme.aux_pairs if aux_pairs is None else aux_pairs
    return {b: _ideal(scheme.kind, b, n, scheme.array_size) for b in BellState}


def build_plan(scheme: SchemeSpec) -> PostSelectionPlan:
    """Accept a reported pattern for B iff it occurs, at ideal parameters, only for input B."""
    outs = _ideal_set(scheme)
    entries = {(scheme.aux_pairs, b): o for b, o in outs.items()}
    return _combine_plan(scheme, entries, _plan_radix(scheme.photons), "strict")


def max_success_rate(scheme: SchemeSpec, plan: PostSelectionPlan | None = None) -> Fraction:
    """Unweighted Bell-input average of the accepted probability at ideal parameters (exact)."""
    plan = build_plan(scheme) if plan is None else plan
    total = Fraction(0)
    for b, out in _ideal_set(scheme).items():
        lab = lookup_keys(plan.keys, plan.labels, encode_patterns(model_map_array(out.occ, scheme.model), plan.radix))
        total += out.exact_total(lab == int(b))
    return total / 4


def output_term_counts(scheme: SchemeSpec) -> dict[BellState, int]:
    return {b: len(o) for b, o in _ideal_set(scheme).items()}


# ------------------------------------------------------------ lossy states

def propagate(scheme: SchemeSpec, bell: BellState, eta_i: float = 1.0, eta_a: float = 1.0,
              max_states: int = DEFAULT_MAX_STATES) -> PureState:
    """Input and auxiliary loss, interferometer and detector arrays on the generic Fock engine."""
    dim = hilbert_dim_upto(scheme.detected_modes, scheme.photons)
    if max_states is not None and dim > max_states:
        raise ResourceLimitError(
            f"{scheme.kind.label} scheme with N={scheme.array_size}: detected-mode Hilbert dimension "
            f"{dim} exceeds the state ceiling {max_states}")
    spatial = 4 if scheme.enhanced else 2
    reg = ModeRegistry(2)
    state = make_source_state(SourceSpec.bell_state(BellState(bell), (0, 1)), reg)
    if scheme.enhanced:
        aux = make_source_state(SourceSpec.spdc_pair(scheme.aux_pairs, (0, 1)), ModeRegistry(2))
        state = tensor(state, aux)
    for mode in range(4):
        if eta_i < 1.0:
            state = optics.apply(optics.loss_channel(eta_i, mode, LossOrigin.INPUT), state)
        if scheme.enhanced and eta_a < 1.0:
            state = optics.apply(optics.loss_channel(eta_a, mode + 4, LossOrigin.AUXILIARY), state)
    for bin_ in (0, 1):
        modes = tuple(2 * s + bin_ for s in range(spatial))
        t = optics.grice_transform(modes) if scheme.enhanced else optics.beam_splitter_50_50(modes)
        state = optics.apply(t, state)
    return optics.split_detectors(state, scheme.array_size)


@lru_cache(maxsize=128)
def _lossy_rows(kind, array_size, aux_pairs, bell, eta_i, eta_a, max_states):
    scheme = SchemeSpec(kind, DetectorModel.PNRD, array_size, False, aux_pairs)
    marg: LossMarginal = marginalize_loss(propagate(scheme, bell, eta_i, eta_a, max_states))
    radix = scheme.photons + 2
    ref_keys, ref_mask = _raw_reference(kind, array_size, aux_pairs)
    mask = lookup_keys(ref_keys, ref_mask, encode_patterns(marg.occ, radix), missing=0)
    intact = (marg.signature[:, 0] == 0) & (marg.signature[:, 1] == 0)
    is_true = intact & (mask == (1 << int(bell)))
    return marg.occ, marg.prob, is_true


@lru_cache(maxsize=64)
def _raw_reference(kind, array_size, aux_pairs):
    scheme = SchemeSpec(kind, DetectorModel.PNRD, array_size, False, aux_pairs)
    outs = _ideal_set(scheme)
    radix = scheme.photons + 2
    bells = list(outs)
    uniq, groups = _key_groups([encode_patterns(outs[b].occ, radix) for b in bells])
    mask = _bell_masks(len(uniq), groups, [int(b) for b in bells])
    return uniq, mask


def _check_params(eta_i, eta_a, eta_d, xi):
    for name, v in (("eta_i", eta_i), ("eta_a", eta_a), ("eta_d", eta_d)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    if not 0.0 <= xi < 1.0:
        raise ValueError(f"xi={xi} outside [0, 1)")


def _default_kmax(modes: int, kmax: int | None) -> int:
    if kmax is not None:
        return kmax
    return modes if modes <= FULL_DARK_ENUMERATION else DEFAULT_KMAX


def evaluate(scheme: SchemeSpec, plan: PostSelectionPlan, eta_i: float, eta_a: float = 1.0,
             eta_d: float = 1.0, xi: float = 0.0, kmax: int | None = None,
             max_states: int = DEFAULT_MAX_STATES) -> Metrics:
    """Exact true and false positive rates averaged over the four Bell inputs.

    A contribution is true when no input or auxiliary photon was lost, the
    underlying output is one that only this Bell input produces at ideal
    parameters, and the accepted label matches the input.
    """
    if plan.scheme.kind != scheme.kind or plan.scheme.model != scheme.model \
            or plan.scheme.array_size != scheme.array_size or plan.scheme.aux_pairs != scheme.aux_pairs:
        raise ValueError("plan was built for a different scheme")
    _check_params(eta_i, eta_a, eta_d, xi)
    eta_a = eta_a if scheme.enhanced else 1.0
    kmax = _default_kmax(scheme.detected_modes, kmax)
    per_bell = {}
    for b in BellState:
        occ, prob, is_true = _lossy_rows(scheme.kind, scheme.array_size, scheme.aux_pairs, b,
                                         float(eta_i), float(eta_a), max_states)
        per_bell[b.symbol] = _kernels.accumulate(occ, prob, is_true, int(b), eta_d, xi, int(scheme.model),
                                                 kmax, plan.keys, plan.labels, plan.radix)
    p_t = sum(v[0] for v in per_bell.values()) / 4
    p_f = sum(v[1] for v in per_bell.values()) / 4
    params = dict(eta_i=eta_i, eta_a=eta_a, eta_d=eta_d, xi=xi, N=scheme.array_size)
    tail = _kernels.dark_subset_tail(scheme.detected_modes, xi, kmax)
    return Metrics(p_t, p_f, per_bell, params, truncated_mass=tail)


def ideal_metrics(scheme: SchemeSpec, plan: PostSelectionPlan, aux_pairs: int | None = None) -> Metrics:
    """Rates at ideal parameters straight from the exact outputs."""
    n = scheme.aux_pairs if aux_pairs is None else aux_pairs
    outs = _ideal_set(scheme, n)
    raw_ok = raw_unambiguous(outs)
    per_bell = {}
    for b, out in outs.items():
        lab = lookup_keys(plan.keys, plan.labels,
                          encode_patterns(model_map_array(out.occ, scheme.model), plan.radix))
        true = (lab == int(b)) & raw_ok[b]
        per_bell[b.symbol] = (float(out.prob[true].sum()), float(out.prob[(lab >= 0) & ~true].sum()))
    p_t = sum(v[0] for v in per_bell.values()) / 4
    p_f = sum(v[1] for v in per_bell.values()) / 4
    params = dict(eta_i=1.0, eta_a=1.0, eta_d=1.0, xi=0.0, N=scheme.array_size)
    return Metrics(p_t, p_f, per_bell, params)


# ------------------------------------------------------------------- SPDC

def default_combine_rule(model: DetectorModel) -> str:
    return "union" if DetectorModel.parse(model).binary else "strict"


def build_spdc_plan(model: DetectorModel, n_max: int, tau: float, rule: str | None = None,
                    count_preserving: bool = False) -> PostSelectionPlan:
    """One accept set valid for every auxiliary pair number 0..n_max."""
    model = DetectorModel.parse(model)
    rule = default_combine_rule(model) if rule is None else rule
    scheme = SchemeSpec(SchemeKind.ENHANCED, model, 1, count_preserving, n_max)
    w2 = spdc_weights(n_max, tau)
    entries = {}
    for n in range(n_max + 1):
        for b, o in _ideal_set(scheme, n).items():
            entries[(n, b)] = o
    return _combine_plan(scheme, entries, _plan_radix(2 + 2 * n_max), rule, dict(enumerate(w2)))


def evaluate_spdc(model: DetectorModel, tau: float, n_max: int, eta_i: float = 1.0, eta_d: float = 1.0,
                  xi: float = 0.0, rule: str | None = None, plan: PostSelectionPlan | None = None,
                  max_remainder: float | None = None, count_preserving: bool = False,
                  max_states: int = DEFAULT_MAX_STATES) -> tuple[Metrics, list[Metrics]]:
    """Enhanced scheme fed by an SPDC source: per-n rates averaged with ``w^2(n, tau)``.

    Returns the weighted metrics and the per-n metrics (all evaluated with
    the combined plan). The SPDC weight beyond ``n_max`` is reported as
    ``remainder`` and must stay below ``max_remainder`` unless that is None.
    """
    model = DetectorModel.parse(model)
    _check_params(eta_i, 1.0, eta_d, xi)
    w2 = spdc_weights(n_max, tau)
    remainder = max(0.0, 1.0 - float(w2.sum()))
    if max_remainder is not None and remainder > max_remainder:
        raise ValueError(f"n_max={n_max} leaves SPDC weight {remainder:.3g} > {max_remainder:g} at tau={tau}")
    plan = build_spdc_plan(model, n_max, tau, rule, count_preserving) if plan is None else plan
    ideal = eta_i == 1.0 and eta_d == 1.0 and xi == 0.0
    per_n = []
    for n in range(n_max + 1):
        if w2[n] == 0.0 and n > 0:
            per_n.append(Metrics(0.0, 0.0, params=dict(n=n)))
            continue
        scheme = SchemeSpec(SchemeKind.ENHANCED, model, 1, count_preserving, n)
        if ideal:
            m = ideal_metrics(scheme, plan, n)
        else:
            m = evaluate(scheme, replace(plan, scheme=scheme), eta_i, 1.0, eta_d, xi, max_states=max_states)
        per_n.append(Metrics(m.p_t, m.p_f, m.per_bell, dict(m.params, n=n), m.truncated_mass))
    p_t = float(sum(w * m.p_t for w, m in zip(w2, per_n)))
    p_f = float(sum(w * m.p_f for w, m in zip(w2, per_n)))
    params = dict(eta_i=eta_i, eta_d=eta_d, xi=xi, tau=tau, n_max=n_max)
    return Metrics(p_t, p_f, {}, params, remainder=remainder), per_n


def spdc_per_n_rates(model: DetectorModel, n_max: int, count_preserving: bool = False) -> list[Metrics]:
    """Ideal rates with a single auxiliary pair number n, each with its own plan."""
    out = []
    for n in range(n_max + 1):
        scheme = SchemeSpec(SchemeKind.ENHANCED, model, 1, count_preserving, n)
        out.append(ideal_metrics(scheme, build_plan(scheme)))
    return out


# -------------------------------------------------------------- crossover

def exact_crossover(model: DetectorModel, eta_i: float = 0.01, xi: float = 1e-5, eta_a: float = 1.0,
                    count_preserving: bool | None = None, lo: float = 0.05, hi: float = 1.0,
                    grid: int = 20) -> float | None:
    """Detector efficiency at which the exact standard and enhanced p_t are equal, if any."""
    model = DetectorModel.parse(model)
    cp = (model is DetectorModel.SLOW_PNRD) if count_preserving is None else count_preserving
    std = SchemeSpec(SchemeKind.STANDARD, model, count_preserving=cp)
    enh = SchemeSpec(SchemeKind.ENHANCED, model, count_preserving=cp)
    ps, pe = build_plan(std), build_plan(enh)

    def gap(eta_d: float) -> float:
        return (evaluate(enh, pe, eta_i, eta_a, eta_d, xi).p_t
                - evaluate(std, ps, eta_i, 1.0, eta_d, xi).p_t)

    xs = np.linspace(lo, hi, grid + 1)
    gs = [gap(x) for x in xs]
    for x0, x1, g0, g1 in zip(xs[:-1], xs[1:], gs[:-1], gs[1:]):
        if g0 == 0.0:
            return float(x0)
        if g0 * g1 < 0:
            return float(brentq(gap, x0, x1, xtol=1e-10))
    return None


# ------------------------------------------------------------ outcome space

def outcome_count(scheme: SchemeSpec, reachable_only: bool = False, max_dark: int | None = None) -> int:
    """Number of distinct raw count patterns once loss and dark counts are allowed.

    By default every occupation of the detected modes with at most
    ``scheme.photons`` photons is a candidate (the full lossy Fock space);
    ``reachable_only`` restricts to occupations that some Bell input
    actually produces under loss. Each mode may add one dark count, with at
    most ``max_dark`` dark counts in total (all modes when None).
    """
    m = scheme.detected_modes
    if reachable_only:
        base = set()
        for b in BellState:
            marg = marginalize_loss(propagate(scheme, b, 0.5, 0.5))
            base |= {tuple(int(x) for x in o) for o in marg.occ}
        rows = np.array(sorted(base), dtype=np.int64)
    else:
        dim = hilbert_dim_upto(m, scheme.photons)
        if dim > DEFAULT_MAX_STATES:
            raise ResourceLimitError(f"lossy Fock space of dimension {dim} is too large to enumerate")
        grids = np.indices((scheme.photons + 1,) * m).reshape(m, -1).T
        rows = grids[grids.sum(axis=1) <= scheme.photons]
    kmax = m if max_dark is None else min(max_dark, m)
    dark = np.array([[1 if i in c else 0 for i in range(m)]
                     for s in range(kmax + 1) for c in combinations(range(m), s)], dtype=np.int64)
    radix = scheme.photons + 3
    keys = encode_patterns((rows[:, None, :] + dark[None, :, :]).reshape(-1, m), radix)
    return len(np.unique(keys, axis=0))
