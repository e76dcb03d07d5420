"""Detector models, loss marginalization, dark counts and conditional outcome tables.

All of this works on probabilities, never on amplitudes: once loss modes are
traced out the detected-mode distribution is classical, and collapsing
photon-number information before that point would let unrelated terms
interfere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import optics
from .fock import LossOrigin, ModeRegistry, PureState

MASKED = -1


class DetectorModel(enum.IntEnum):
    PNRD = 0
    BD = 1
    SLOW_PNRD = 2
    SLOW_BD = 3

    @property
    def slow(self) -> bool:
        return self in (DetectorModel.SLOW_PNRD, DetectorModel.SLOW_BD)

    @property
    def binary(self) -> bool:
        return self in (DetectorModel.BD, DetectorModel.SLOW_BD)

    @property
    def label(self) -> str:
        return ("PNRD", "BD", "SlowPNRD", "SlowBD")[self.value]

    @classmethod
    def parse(cls, text: str | "DetectorModel") -> "DetectorModel":
        if isinstance(text, (DetectorModel, int)):
            return cls(text)
        key = str(text).replace("_", "").replace("-", "").replace(" ", "").lower()
        for m in cls:
            if key in (m.label.lower(), m.name.replace("_", "").lower()):
                return m
        raise ValueError(f"unknown detector model {text!r}")


def model_map(raw, model: DetectorModel) -> tuple[int, ...]:
    """Reported pattern for raw detected-mode counts (a/b bins adjacent per detector).

    Slow detectors hide the late bin whenever the early bin of the same
    detector fired; the hidden entry is reported as ``MASKED``.
    """
    model = DetectorModel.parse(model)
    raw = tuple(int(x) for x in raw)
    if len(raw) % 2:
        raise ValueError("pattern must hold an (a, b) pair per detector")
    out = []
    for a, b in zip(raw[::2], raw[1::2]):
        if model.slow and a >= 1:
            out += [a, MASKED]
        else:
            out += [a, b]
    if model.binary:
        out = [v if v == MASKED else min(v, 1) for v in out]
    return tuple(out)


def model_map_array(raw: np.ndarray, model: DetectorModel) -> np.ndarray:
    """Vectorized ``model_map`` over the last axis."""
    model = DetectorModel.parse(model)
    out = np.array(raw, dtype=np.int16, copy=True)
    a = out[..., 0::2]
    b = out[..., 1::2]
    if model.binary:
        np.minimum(out, 1, out=out)
    if model.slow:
        b[a >= 1] = MASKED
    return out


def reported_total(pattern) -> int:
    return int(sum(v for v in pattern if v > 0))


def pattern_radix(max_value: int) -> int:
    return int(max_value) + 2


def modes_per_word(radix: int) -> int:
    """How many pattern entries fit in one int64 key word (kept below 2**62)."""
    if radix < 2:
        raise ValueError("radix must be >= 2")
    k = 1
    while radix ** (k + 1) < 2 ** 62:
        k += 1
    return k


def encode_patterns(patterns: np.ndarray, radix: int) -> np.ndarray:
    """Mixed-radix int64 keys for reported patterns (entries >= MASKED).

    Returns shape ``(..., W)``: entry ``j`` of a pattern goes to word
    ``j // modes_per_word(radix)``, so keys compare lexicographically.
    """
    patterns = np.asarray(patterns)
    m = patterns.shape[-1]
    if patterns.size and (patterns.max() + 1 >= radix or patterns.min() < MASKED):
        raise ValueError("pattern entry outside the radix range")
    k = modes_per_word(radix)
    w = -(-m // k)
    vals = patterns.astype(np.int64) + 1
    out = np.zeros(patterns.shape[:-1] + (w,), dtype=np.int64)
    for i in range(w):
        chunk = vals[..., i * k:(i + 1) * k]
        out[..., i] = chunk @ (radix ** np.arange(chunk.shape[-1], dtype=np.int64))
    return out


def sort_keys(keys: np.ndarray, *others: np.ndarray):
    """Lexicographic sort of key rows, applying the same order to ``others``."""
    order = np.lexsort(keys.T[::-1]) if len(keys) else np.arange(0)
    return (keys[order],) + tuple(o[order] for o in others)


def lookup_keys(sorted_keys: np.ndarray, values: np.ndarray, query: np.ndarray, missing: int = -1) -> np.ndarray:
    """``values`` of rows of ``sorted_keys`` equal to each query row, else ``missing``."""
    out = np.full(len(query), missing, dtype=np.int64)
    if not len(sorted_keys) or not len(query):
        return out
    if sorted_keys.shape[1] == 1:
        pos = np.minimum(np.searchsorted(sorted_keys[:, 0], query[:, 0]), len(sorted_keys) - 1)
        hit = sorted_keys[pos, 0] == query[:, 0]
        out[hit] = values[pos[hit]]
        return out
    both = np.concatenate([sorted_keys, query])
    _, inv = np.unique(both, axis=0, return_inverse=True)
    inv = inv.ravel()
    table = np.full(inv.max() + 1, missing, dtype=np.int64)
    table[inv[:len(sorted_keys)]] = values
    return table[inv[len(sorted_keys):]]


def decode_pattern(key, radix: int, m: int) -> tuple[int, ...]:
    """Inverse of ``encode_patterns`` for one key row."""
    k = modes_per_word(radix)
    out = []
    for i, word in enumerate(np.atleast_1d(key)):
        word = int(word)
        for _ in range(min(k, m - i * k)):
            word, r = divmod(word, radix)
            out.append(r - 1)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class LossMarginal:
    """Detected-mode distribution with per-origin lost-photon counts riding along."""

    occ: np.ndarray         # (K, detected modes)
    signature: np.ndarray   # (K, 3) lost photons: input, auxiliary, detector
    prob: np.ndarray        # (K,)

    def as_dict(self) -> dict[tuple[tuple[int, ...], tuple[int, int, int]], float]:
        return {(tuple(int(x) for x in o), tuple(int(x) for x in s)): float(p)
                for o, s, p in zip(self.occ, self.signature, self.prob)}

    def zero_loss(self) -> np.ndarray:
        return ~self.signature.any(axis=1)


_ORIGINS = (LossOrigin.INPUT, LossOrigin.AUXILIARY, LossOrigin.DETECTOR)


def marginalize_loss(s: PureState) -> LossMarginal:
    """Trace out loss modes, grouping probability by detected counts and loss signature."""
    reg = s.registry
    d = reg.detected_count
    cols = reg.loss_origin_columns()
    sig = np.zeros((len(s), 3), dtype=np.int16)
    for i, origin in enumerate(_ORIGINS):
        if cols[origin]:
            sig[:, i] = s.occ[:, cols[origin]].sum(axis=1)
    prob = np.abs(s.amp) ** 2
    key = np.hstack([s.occ[:, :d].astype(np.int16), sig])
    key = np.ascontiguousarray(key)
    view = key.view(np.dtype((np.void, key.dtype.itemsize * key.shape[1]))).ravel()
    uniq, inv = np.unique(view, return_inverse=True)
    p = np.bincount(inv.ravel(), weights=prob, minlength=len(uniq))
    rows = uniq.view(np.int16).reshape(len(uniq), key.shape[1])
    return LossMarginal(rows[:, :d].astype(np.uint8), rows[:, d:].copy(), p)


def dark_count_convolve(dist: dict[tuple[int, ...], float], xi: float) -> dict[tuple[int, ...], float]:
    """Each mode independently gains one photon with probability ``xi``."""
    if not 0.0 <= xi < 1.0:
        raise ValueError("dark-count probability must lie in [0, 1)")
    if xi == 0.0:
        return dict(dist)
    out = dict(dist)
    m = len(next(iter(dist)))
    for mode in range(m):
        nxt: dict[tuple[int, ...], float] = {}
        for pat, p in out.items():
            nxt[pat] = nxt.get(pat, 0.0) + p * (1.0 - xi)
            bumped = pat[:mode] + (pat[mode] + 1,) + pat[mode + 1:]
            nxt[bumped] = nxt.get(bumped, 0.0) + p * xi
        out = nxt
    return out


def conditional_table(phi, eta_d: float, xi: float, model: DetectorModel) -> dict[tuple[int, ...], float]:
    """``P(m | phi)`` for one detected-mode Fock state ``phi``.

    Detector inefficiency is a loss channel on every detected mode, after
    which loss modes are traced out, dark counts are added and the detector
    model is applied to the resulting counts.
    """
    phi = tuple(int(x) for x in phi)
    reg = ModeRegistry(len(phi) // 2)
    state = PureState.from_terms(reg, {phi: 1.0})
    if eta_d < 1.0:
        for mode in range(reg.detected_count):
            if phi[mode]:
                state = optics.apply(optics.loss_channel(eta_d, mode, LossOrigin.DETECTOR), state)
    marg = marginalize_loss(state)
    counts: dict[tuple[int, ...], float] = {}
    for occ, p in zip(marg.occ, marg.prob):
        key = tuple(int(x) for x in occ)
        counts[key] = counts.get(key, 0.0) + float(p)
    table: dict[tuple[int, ...], float] = {}
    for raw, p in dark_count_convolve(counts, xi).items():
        rep = model_map(raw, model)
        table[rep] = table.get(rep, 0.0) + p
    return table
