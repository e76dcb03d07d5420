"""Linear mode transforms acting on creation operators of a PureState."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock import LossMode, LossOrigin, ModeRegistry, PureState, merge_terms

_SQRT_FACT = np.array([math.sqrt(math.factorial(n)) for n in range(171)])


@dataclass(frozen=True, eq=False)
class LinearTransform:
    """Substitution ``c_in[i]^dag -> sum_o matrix[o, i] c_out[o]^dag``.

    Negative entries ``-1-j`` in ``in_modes``/``out_modes`` refer to the j-th
    loss mode listed in ``new_loss``; those modes are appended to the
    registry (in vacuum) when the transform is applied.
    """

    matrix: np.ndarray
    in_modes: tuple[int, ...]
    out_modes: tuple[int, ...]
    new_loss: tuple[tuple[LossOrigin, int], ...] = ()

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (len(self.out_modes), len(self.in_modes)):
            raise ValueError("matrix shape must be (len(out_modes), len(in_modes))")
        if len(set(self.in_modes)) != len(self.in_modes) or len(set(self.out_modes)) != len(self.out_modes):
            raise ValueError("repeated mode in transform")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def is_isometry(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return bool(np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=tol))

    def is_unitary(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        return m.shape[0] == m.shape[1] and self.is_isometry(tol) and bool(
            np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=tol))


def _on_pairs(block: np.ndarray, modes: tuple[int, ...]) -> LinearTransform:
    return LinearTransform(block.T, tuple(modes), tuple(modes))


def beam_splitter_50_50(modes: tuple[int, int] = (0, 1)) -> LinearTransform:
    """Symmetric 50/50 splitter ``(1, i; i, 1)/sqrt(2)``."""
    return _on_pairs(np.array([[1, 1j], [1j, 1]]) / math.sqrt(2), modes)


GRICE_MATRIX = 0.5 * np.array([
    [1, 1j, 1j, -1],
    [1j, 1, -1, 1j],
    [1j, -1, 1, 1j],
    [-1, 1j, 1j, 1],
])


def grice_transform(modes: tuple[int, int, int, int] = (0, 1, 2, 3)) -> LinearTransform:
    """Four-port network of the enhanced analyzer (modes 3 and 4 carry the auxiliary pair)."""
    return _on_pairs(GRICE_MATRIX, modes)


def grice_from_splitters() -> np.ndarray:
    """The same network built from splitters on (1,3),(2,4) followed by splitters on (1,2),(3,4)."""
    b = np.array([[1, 1j], [1j, 1]]) / math.sqrt(2)
    first = np.kron(b, np.eye(2))   # mixes 1<->3 and 2<->4
    second = np.kron(np.eye(2), b)  # mixes 1<->2 and 3<->4
    return second @ first


def loss_channel(eta: float, mode: int, origin: LossOrigin | str = LossOrigin.INPUT) -> LinearTransform:
    """Couple ``mode`` to a fresh vacuum loss mode with transmission ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmission {eta} outside [0, 1]")
    t, r = math.sqrt(eta), math.sqrt(1.0 - eta)
    u = np.array([[t, -r], [r, t]])  # columns: images of (mode, loss)
    return LinearTransform(u, (mode, -1), (mode, -1), ((LossOrigin(origin), mode),))


def splitter_tree(n: int, mode: int = 0, sub_modes: tuple[int, ...] | None = None) -> LinearTransform:
    """Uniform 1 -> n isometry: every sub-mode receives amplitude 1/sqrt(n)."""
    if n < 1:
        raise ValueError("array size must be >= 1")
    if sub_modes is None:
        sub_modes = tuple(range(mode, mode + n))
    if len(sub_modes) != n:
        raise ValueError("need exactly n sub-modes")
    return LinearTransform(np.full((n, 1), 1 / math.sqrt(n)), (mode,), tuple(sub_modes))


def compose(second: LinearTransform, first: LinearTransform) -> LinearTransform:
    """``second`` after ``first``, for transforms over one common mode set."""
    if first.new_loss or second.new_loss:
        raise ValueError("compose does not handle transforms that create loss modes")
    modes = sorted(set(first.in_modes) | set(first.out_modes) | set(second.in_modes) | set(second.out_modes))
    pos = {m: i for i, m in enumerate(modes)}

    def full(t: LinearTransform) -> np.ndarray:
        u = np.eye(len(modes), dtype=np.complex128)
        for i in t.in_modes:
            u[:, pos[i]] = 0
        for c, i in enumerate(t.in_modes):
            for r, o in enumerate(t.out_modes):
                u[pos[o], pos[i]] = t.matrix[r, c]
        return u

    return LinearTransform(full(second) @ full(first), tuple(modes), tuple(modes))


@lru_cache(maxsize=None)
def _compositions(v: int, parts: int) -> np.ndarray:
    rows = [c for c in itertools.product(range(v + 1), repeat=parts) if sum(c) == v]
    return np.array(rows, dtype=np.int32).reshape(-1, parts)


def _expansion(v: int, column: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Terms of ``(sum_o column[o] x_o)^v``: (support, exponents, coefficients)."""
    support = np.flatnonzero(column)
    comps = _compositions(v, len(support))
    multinom = np.array([math.factorial(v) // math.prod(math.factorial(int(c)) for c in row)
                         for row in comps], dtype=np.float64)
    coeff = multinom * np.prod(column[support][None, :] ** comps, axis=1)
    return support, comps, coeff


def _materialize(t: LinearTransform, reg: ModeRegistry) -> tuple[ModeRegistry, list[int], list[int]]:
    new_index = []
    for origin, shadow in t.new_loss:
        reg, idx = reg.with_loss_mode(origin, shadow)
        new_index.append(idx)

    def resolve(m: int) -> int:
        idx = new_index[-1 - m] if m < 0 else m
        if not 0 <= idx < reg.mode_count:
            raise IndexError(f"mode {m} not in registry")
        return idx

    return reg, [resolve(m) for m in t.in_modes], [resolve(m) for m in t.out_modes]


def apply(t: LinearTransform, s: PureState) -> PureState:
    """Substitute creation operators of ``s`` according to ``t`` and re-expand."""
    reg, ins, outs = _materialize(t, s.registry)
    k = len(s)
    occ = np.zeros((k, reg.mode_count), dtype=np.int32)
    occ[:, :s.registry.mode_count] = s.occ
    n_in = occ[:, ins].copy()
    occ[:, ins] = 0
    amp = s.amp / (np.prod(_SQRT_FACT[n_in], axis=1) * np.prod(_SQRT_FACT[occ[:, outs]], axis=1))
    acc = np.zeros((k, len(outs)), dtype=np.int32)
    for j in range(len(ins)):
        col = n_in[:, j]
        if not col.any():
            continue
        parts = []
        for v in np.unique(col):
            rows = np.flatnonzero(col == v)
            if v == 0:
                parts.append((occ[rows], acc[rows], n_in[rows], amp[rows]))
                continue
            support, comps, coeff = _expansion(int(v), t.matrix[:, j])
            c = len(coeff)
            r_occ = np.repeat(occ[rows], c, axis=0)
            r_nin = np.repeat(n_in[rows], c, axis=0)
            r_acc = np.repeat(acc[rows], c, axis=0)
            r_acc[:, support] += np.tile(comps, (len(rows), 1))
            r_amp = np.repeat(amp[rows], c) * np.tile(coeff, len(rows))
            parts.append((r_occ, r_acc, r_nin, r_amp))
        occ = np.concatenate([p[0] for p in parts])
        acc = np.concatenate([p[1] for p in parts])
        n_in = np.concatenate([p[2] for p in parts])
        n_in[:, j] = 0
        amp = np.concatenate([p[3] for p in parts])
        width = occ.shape[1]
        merged, amp = merge_terms(np.hstack([occ, acc, n_in[:, j + 1:]]), amp)
        occ = merged[:, :width]
        acc = merged[:, width:width + len(outs)]
        n_in = np.hstack([np.zeros((len(merged), j + 1), np.int32), merged[:, width + len(outs):]])
    occ[:, outs] += acc
    if occ.max(initial=0) > 170:
        raise OverflowError("occupation too large for the factorial table")
    amp = amp * np.prod(_SQRT_FACT[occ[:, outs]], axis=1)
    merged, amp = merge_terms(occ, amp)
    return PureState(reg, merged.astype(np.uint8), amp).pruned()


def apply_all(transforms, s: PureState) -> PureState:
    for t in transforms:
        s = apply(t, s)
    return s


def split_detectors(s: PureState, n: int) -> PureState:
    """Replace every detected mode by a uniform array of ``n`` sub-detectors.

    Spatial mode ``sp`` becomes detectors ``sp*n .. sp*n + n - 1``; the a/b
    bins of one sub-detector stay adjacent. Loss modes are carried along.
    """
    if n < 1:
        raise ValueError("array size must be >= 1")
    if n == 1:
        return s
    old = s.registry
    loss = tuple(LossMode(m.label, m.origin, 2 * ((m.shadows // 2) * n) + m.shadows % 2) for m in old.loss_modes)
    reg = ModeRegistry(old.spatial_count * n, loss)
    occ = np.zeros((len(s), reg.mode_count), dtype=np.uint8)
    ins = []
    for sp in range(old.spatial_count):
        for b in (0, 1):
            dst = 2 * (sp * n) + b
            occ[:, dst] = s.occ[:, 2 * sp + b]
            ins.append(dst)
    occ[:, reg.detected_count:] = s.occ[:, old.detected_count:]
    outs = list(range(reg.detected_count))
    u = np.zeros((len(outs), len(ins)))
    for c, dst in enumerate(ins):
        sp, b = divmod(dst, 2)
        for j in range(n):
            u[2 * (sp + j) + b, c] = 1 / math.sqrt(n)
    return apply(LinearTransform(u, tuple(ins), tuple(outs)), PureState(reg, occ, s.amp))
