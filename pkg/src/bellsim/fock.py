"""Occupation-number basis, sparse pure states and source-state constructors.

Modes are indexed so that spatial mode ``s`` owns the two qubit bins
``2*s`` (bin a, the early bin for time-bin qubits) and ``2*s + 1`` (bin b,
late). Loss modes are appended after all detected modes in creation order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

PRUNE_THRESHOLD = 1e-24
MAX_OCCUPATION = 255


class LossOrigin(str, enum.Enum):
    INPUT = "input"
    AUXILIARY = "auxiliary"
    DETECTOR = "detector"


class BellState(enum.IntEnum):
    PSI_PLUS = 0
    PSI_MINUS = 1
    PHI_PLUS = 2
    PHI_MINUS = 3

    @property
    def symbol(self) -> str:
        return ("psi+", "psi-", "phi+", "phi-")[self.value]

    @classmethod
    def parse(cls, text: str) -> "BellState":
        for b in cls:
            if text.lower() in (b.symbol, b.name.lower()):
                return b
        raise ValueError(f"unknown Bell state {text!r}")


@dataclass(frozen=True)
class LossMode:
    label: str
    origin: LossOrigin
    shadows: int  # detected mode index the loss mode is attached to


@dataclass(frozen=True)
class ModeRegistry:
    spatial_count: int
    loss_modes: tuple[LossMode, ...] = ()

    def __post_init__(self) -> None:
        if self.spatial_count < 0:
            raise ValueError("spatial_count must be non-negative")
        labels = [m.label for m in self.loss_modes]
        if len(set(labels)) != len(labels):
            raise ValueError("loss-mode labels must be unique")
        for m in self.loss_modes:
            if not 0 <= m.shadows < self.detected_count:
                raise ValueError(f"loss mode {m.label} shadows unknown mode {m.shadows}")

    @property
    def bins_per_spatial(self) -> int:
        return 2

    @property
    def detected_count(self) -> int:
        return 2 * self.spatial_count

    @property
    def mode_count(self) -> int:
        return self.detected_count + len(self.loss_modes)

    def mode_index(self, spatial: int, bin_: int) -> int:
        if not 0 <= spatial < self.spatial_count or bin_ not in (0, 1):
            raise IndexError(f"no detected mode ({spatial}, {bin_})")
        return 2 * spatial + bin_

    def with_loss_mode(self, origin: LossOrigin, shadows: int) -> tuple["ModeRegistry", int]:
        """Return a registry with one extra loss mode, and that mode's index."""
        label = f"l{len(self.loss_modes)}:{LossOrigin(origin).value}:{shadows}"
        mode = LossMode(label, LossOrigin(origin), shadows)
        reg = ModeRegistry(self.spatial_count, self.loss_modes + (mode,))
        return reg, reg.mode_count - 1

    def loss_origin_columns(self) -> dict[LossOrigin, list[int]]:
        cols: dict[LossOrigin, list[int]] = {o: [] for o in LossOrigin}
        for i, m in enumerate(self.loss_modes):
            cols[m.origin].append(self.detected_count + i)
        return cols


def hilbert_dim(k: int, n: int) -> int:
    """Number of n-photon Fock states over k modes, ``C(k+n-1, n)``."""
    if k < 1 or n < 0:
        raise ValueError("need k >= 1 and n >= 0")
    return math.comb(k + n - 1, n)


def hilbert_dim_upto(k: int, n: int) -> int:
    """Number of Fock states over k modes holding at most n photons."""
    return hilbert_dim(k + 1, n)


def checked_int64(value: int) -> int:
    """Reject integers that would wrap when stored in a signed 64-bit slot."""
    if not -(2**63) <= value < 2**63:
        raise OverflowError(f"{value} does not fit in int64")
    return value


def merge_terms(occ: np.ndarray, amp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum amplitudes of duplicate occupation rows."""
    if len(occ) == 0:
        return occ, amp
    occ = np.ascontiguousarray(occ)
    view = occ.view(np.dtype((np.void, occ.dtype.itemsize * occ.shape[1])))
    uniq, inv = np.unique(view.ravel(), return_inverse=True)
    inv = inv.ravel()
    re = np.bincount(inv, weights=amp.real, minlength=len(uniq))
    im = np.bincount(inv, weights=amp.imag, minlength=len(uniq))
    out = uniq.view(occ.dtype).reshape(len(uniq), occ.shape[1])
    return out, re + 1j * im


@dataclass(frozen=True, eq=False)
class PureState:
    """Sparse pure state: rows of ``occ`` are Fock states, ``amp`` their amplitudes."""

    registry: ModeRegistry
    occ: np.ndarray
    amp: np.ndarray
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        occ = np.asarray(self.occ, dtype=np.uint8).reshape(-1, self.registry.mode_count)
        amp = np.asarray(self.amp, dtype=np.complex128).reshape(-1)
        if len(occ) != len(amp):
            raise ValueError("occupation rows and amplitudes differ in length")
        occ.setflags(write=False)
        amp.setflags(write=False)
        object.__setattr__(self, "occ", occ)
        object.__setattr__(self, "amp", amp)

    @classmethod
    def from_terms(cls, registry: ModeRegistry,
                   terms: Mapping[tuple[int, ...], complex],
                   prune: bool = True) -> "PureState":
        m = registry.mode_count
        if any(len(k) != m for k in terms):
            raise ValueError(f"every Fock state must have {m} entries")
        if any(min(k, default=0) < 0 or max(k, default=0) > MAX_OCCUPATION for k in terms):
            raise ValueError("occupations must lie in [0, 255]")
        occ = np.array(list(terms.keys()), dtype=np.uint8).reshape(-1, m)
        amp = np.array(list(terms.values()), dtype=np.complex128)
        occ, amp = merge_terms(occ, amp)
        state = cls(registry, occ, amp)
        return state.pruned() if prune else state

    @classmethod
    def vacuum(cls, registry: ModeRegistry) -> "PureState":
        return cls(registry, np.zeros((1, registry.mode_count), np.uint8), np.ones(1))

    def pruned(self, threshold: float = PRUNE_THRESHOLD) -> "PureState":
        keep = np.abs(self.amp) ** 2 >= threshold
        if keep.all():
            return self
        return PureState(self.registry, self.occ[keep], self.amp[keep])

    @property
    def terms(self) -> dict[tuple[int, ...], complex]:
        return {tuple(int(x) for x in row): complex(a) for row, a in zip(self.occ, self.amp)}

    def __len__(self) -> int:
        return len(self.amp)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amp) ** 2))

    def photon_numbers(self) -> np.ndarray:
        return self.occ.sum(axis=1, dtype=np.int64)

    def amplitude(self, fock: Iterable[int]) -> complex:
        if self._index is None:
            object.__setattr__(self, "_index", {row.tobytes(): i for i, row in enumerate(self.occ)})
        i = self._index.get(np.asarray(tuple(fock), dtype=np.uint8).tobytes())
        return 0j if i is None else complex(self.amp[i])


def normalize(s: PureState) -> PureState:
    n2 = s.norm_squared()
    if n2 == 0:
        raise ValueError("cannot normalize the zero vector")
    return PureState(s.registry, s.occ, s.amp / math.sqrt(n2))


def tensor(sa: PureState, sb: PureState) -> PureState:
    """Product state over the concatenation of two registries.

    Spatial modes of ``sb`` follow those of ``sa``; loss modes keep their
    relative order, those of ``sa`` first.
    """
    ra, rb = sa.registry, sb.registry
    shift = ra.detected_count
    loss = ra.loss_modes + tuple(
        LossMode(f"{m.label}@{ra.spatial_count}", m.origin, m.shadows + shift) for m in rb.loss_modes
    )
    reg = ModeRegistry(ra.spatial_count + rb.spatial_count, loss)
    da, db = ra.detected_count, rb.detected_count
    ka, kb = len(sa), len(sb)
    occ = np.zeros((ka * kb, reg.mode_count), np.uint8)
    ia = np.repeat(np.arange(ka), kb)
    ib = np.tile(np.arange(kb), ka)
    occ[:, :da] = sa.occ[ia, :da]
    occ[:, da:da + db] = sb.occ[ib, :db]
    occ[:, da + db:da + db + len(ra.loss_modes)] = sa.occ[ia, da:]
    occ[:, da + db + len(ra.loss_modes):] = sb.occ[ib, db:]
    return PureState(reg, occ, sa.amp[ia] * sb.amp[ib])


def inner(sa: PureState, sb: PureState) -> complex:
    """<sa|sb>."""
    if sa.registry != sb.registry:
        raise ValueError("inner product needs identical registries")
    idx = {row.tobytes(): a for row, a in zip(sa.occ, sa.amp)}
    total = 0j
    for row, b in zip(sb.occ, sb.amp):
        a = idx.get(row.tobytes())
        if a is not None:
            total += np.conj(a) * b
    return complex(total)


# ---------------------------------------------------------------- sources

class SourceKind(str, enum.Enum):
    BELL = "bell"
    SPDC_PAIR = "spdc_pair"
    VACUUM = "vacuum"


@dataclass(frozen=True)
class SourceSpec:
    kind: SourceKind
    modes: tuple[int, int] = (0, 1)
    bell: BellState | None = None
    pairs: int = 0

    def __post_init__(self) -> None:
        if self.kind is SourceKind.BELL and self.bell is None:
            raise ValueError("Bell source needs a Bell label")
        if self.pairs < 0:
            raise ValueError("pair number must be non-negative")
        if self.modes[0] == self.modes[1]:
            raise ValueError("source needs two distinct spatial modes")

    @classmethod
    def bell_state(cls, which: BellState, modes: tuple[int, int] = (0, 1)) -> "SourceSpec":
        return cls(SourceKind.BELL, modes, bell=which)

    @classmethod
    def spdc_pair(cls, n: int, modes: tuple[int, int] = (0, 1)) -> "SourceSpec":
        return cls(SourceKind.SPDC_PAIR, modes, pairs=n)


# Monomials (a_s1, b_s1, a_s2, b_s2) with integer coefficients; normalization 1/sqrt(2).
_BELL_MONOMIALS = {
    BellState.PSI_PLUS: (((1, 0, 0, 1), 1), ((0, 1, 1, 0), 1)),
    BellState.PSI_MINUS: (((1, 0, 0, 1), 1), ((0, 1, 1, 0), -1)),
    BellState.PHI_PLUS: (((1, 0, 1, 0), 1), ((0, 1, 0, 1), 1)),
    BellState.PHI_MINUS: (((1, 0, 1, 0), 1), ((0, 1, 0, 1), -1)),
}


def bell_monomials(which: BellState) -> tuple[tuple[tuple[int, int, int, int], int], ...]:
    """Creation-operator monomials of a Bell state; every monomial is squarefree."""
    return _BELL_MONOMIALS[BellState(which)]


def make_source_state(spec: SourceSpec, registry: ModeRegistry) -> PureState:
    """Normalized state of ``spec`` placed on ``registry`` (everything else vacuum)."""
    s1, s2 = spec.modes
    for s in (s1, s2):
        if not 0 <= s < registry.spatial_count:
            raise IndexError(f"spatial mode {s} not in registry")
    cols = [registry.mode_index(s1, 0), registry.mode_index(s1, 1),
            registry.mode_index(s2, 0), registry.mode_index(s2, 1)]
    terms: dict[tuple[int, ...], complex] = {}

    def put(occ4: tuple[int, int, int, int], amp: complex) -> None:
        occ = [0] * registry.mode_count
        for c, v in zip(cols, occ4):
            occ[c] = v
        terms[tuple(occ)] = terms.get(tuple(occ), 0) + amp

    if spec.kind is SourceKind.VACUUM:
        put((0, 0, 0, 0), 1.0)
    elif spec.kind is SourceKind.BELL:
        for occ4, sign in bell_monomials(spec.bell):
            put(occ4, sign / math.sqrt(2))
    else:
        # (a a + b b)^n / (n! sqrt(n+1)) = sum_k |k, n-k, k, n-k> / sqrt(n+1)
        n = spec.pairs
        for k in range(n + 1):
            put((k, n - k, k, n - k), 1 / math.sqrt(n + 1))
    return PureState.from_terms(registry, terms)


def spdc_weight(n: int, tau: float) -> float:
    """Pair-number amplitude ``sqrt(n+1) sech^2(tau) tanh^n(tau)``."""
    if n < 0 or tau < 0:
        raise ValueError("need n >= 0 and tau >= 0")
    return math.sqrt(n + 1) / math.cosh(tau) ** 2 * math.tanh(tau) ** n


def spdc_weights(n_max: int, tau: float) -> np.ndarray:
    """Squared weights ``w^2(n, tau)`` for ``n = 0..n_max``."""
    return np.array([spdc_weight(n, tau) ** 2 for n in range(n_max + 1)])


def mean_pair_number(tau: float) -> float:
    if tau < 0:
        raise ValueError("tau must be non-negative")
    return 2.0 * math.sinh(tau) ** 2
