"""Exact outputs of the analyzers at ideal parameters (no loss, no dark counts).

Every transform used here has matrix entries ``r * (unit Gaussian integer)``
with one common real scale ``r`` per photon, and the a and b bins never mix.
A source monomial therefore maps to a product of an a-sector and a b-sector
polynomial with Gaussian-integer coefficients. Amplitudes in the occupation
basis are ``s * c * sqrt(prod m!)`` with integer ``c``, so probabilities are
exact rationals and the zero test deciding ambiguity is exact as well.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .fock import BellState, bell_monomials

_FACT = np.array([float(math.factorial(n)) for n in range(64)])


class SchemeKind(str, enum.Enum):
    STANDARD = "standard"
    ENHANCED = "enhanced"

    @classmethod
    def parse(cls, text: "str | SchemeKind") -> "SchemeKind":
        if isinstance(text, SchemeKind):
            return text
        return cls(str(text).strip().lower())

    @property
    def label(self) -> str:
        return self.value.capitalize()


# Integer parts of the two interferometers (rows: input spatial mode, columns: output).
_BS_INT = ((1, 1j), (1j, 1))
_GRICE_INT = ((1, 1j, 1j, -1), (1j, 1, -1, 1j), (1j, -1, 1, 1j), (-1, 1j, 1j, 1))


@dataclass(frozen=True)
class Network:
    """Per-photon map ``x_in[i] -> scale**0.5 * sum_d images[i][d] x_out[d]``."""

    images: tuple[tuple[tuple[int, int], ...], ...]   # Gaussian ints as (re, im)
    scale: Fraction                                    # squared per-photon factor
    detectors: int


def network(kind: SchemeKind, array_size: int = 1) -> Network:
    """Interferometer of ``kind`` followed by a uniform 1 -> N split of each output."""
    kind = SchemeKind.parse(kind)
    if array_size < 1:
        raise ValueError("array size must be >= 1")
    base, s = (_BS_INT, Fraction(1, 2)) if kind is SchemeKind.STANDARD else (_GRICE_INT, Fraction(1, 4))
    n = array_size
    images = []
    for row in base:
        img = []
        for u in row:
            g = (int(complex(u).real), int(complex(u).imag))
            img += [g] * n
        images.append(tuple(img))
    return Network(tuple(images), s / n, len(base) * n)


def source_monomials(kind: SchemeKind, bell: BellState, aux_pairs: int = 1):
    """Input polynomial as ``[(exponents over (a_s, b_s) per spatial mode), (re, im)]`` plus its squared norm factor.

    The auxiliary pair ``(a3 a4 + b3 b4)^n`` is written with binomial weights
    ``C(n, k)`` so all coefficients are integers; the factor ``1/(n!^2 (n+1))``
    goes into the returned scale.
    """
    kind = SchemeKind.parse(kind)
    bell_terms = bell_monomials(bell)
    if kind is SchemeKind.STANDARD:
        return [(occ, (sign, 0)) for occ, sign in bell_terms], Fraction(1, 2)
    n = aux_pairs
    out = []
    for occ, sign in bell_terms:
        for k in range(n + 1):
            out.append((tuple(occ) + (k, n - k, k, n - k), (sign * math.comb(n, k), 0)))
    scale = Fraction(1, 2) * Fraction(1, (math.factorial(n) ** 2) * (n + 1))
    return out, scale


def _gmul(x: tuple[int, int], y: tuple[int, int]) -> tuple[int, int]:
    return (x[0] * y[0] - x[1] * y[1], x[0] * y[1] + x[1] * y[0])


@lru_cache(maxsize=4096)
def _sector_poly(images: tuple, exps: tuple[int, ...]) -> dict[tuple[int, ...], tuple[int, int]]:
    """``prod_i (sum_d images[i][d] x_d)^exps[i]`` as a sparse map of exponent tuples."""
    d = len(images[0])
    poly = {(0,) * d: (1, 0)}
    for i, e in enumerate(exps):
        img = [(j, g) for j, g in enumerate(images[i]) if g != (0, 0)]
        for _ in range(e):
            nxt: dict[tuple[int, ...], tuple[int, int]] = {}
            for key, c in poly.items():
                for j, g in img:
                    k2 = key[:j] + (key[j] + 1,) + key[j + 1:]
                    v = _gmul(c, g)
                    o = nxt.get(k2, (0, 0))
                    nxt[k2] = (o[0] + v[0], o[1] + v[1])
            poly = {k: v for k, v in nxt.items() if v != (0, 0)}
    return poly


@dataclass(frozen=True, eq=False)
class IdealOutput:
    """Output state of one Bell input: occupations and exact amplitude data."""

    occ: np.ndarray        # (K, 2*detectors), a/b bins adjacent per detector
    coeff: np.ndarray      # (K, 2) int64 Gaussian-integer amplitude coefficient
    scale: Fraction        # probability = scale * |coeff|^2 * prod(m!)
    prob: np.ndarray       # (K,) float

    def __len__(self) -> int:
        return len(self.occ)

    def exact_prob(self, rows=None) -> list[Fraction]:
        idx = range(len(self.occ)) if rows is None else rows
        out = []
        for i in idx:
            c2 = int(self.coeff[i, 0]) ** 2 + int(self.coeff[i, 1]) ** 2
            mf = math.prod(math.factorial(int(m)) for m in self.occ[i])
            out.append(self.scale * c2 * mf)
        return out

    def exact_total(self, mask: np.ndarray) -> Fraction:
        return sum(self.exact_prob(np.flatnonzero(mask)), Fraction(0))


def _block_matrix(polys, patterns_index):
    mat = np.zeros((len(polys), len(patterns_index), 2), dtype=np.int64)
    for t, poly in enumerate(polys):
        for key, (re, im) in poly.items():
            j = patterns_index[key]
            mat[t, j, 0] = re
            mat[t, j, 1] = im
    return mat


def ideal_output(kind: SchemeKind, bell: BellState, aux_pairs: int = 1, array_size: int = 1) -> IdealOutput:
    """Exact output of the (possibly arrayed) analyzer for one Bell input."""
    kind = SchemeKind.parse(kind)
    net = network(kind, array_size)
    monos, src_scale = source_monomials(kind, BellState(bell), aux_pairs)
    n_photons = sum(monos[0][0])
    scale = src_scale * net.scale ** n_photons
    blocks: dict[int, list] = {}
    for occ, w in monos:
        ea, eb = tuple(occ[0::2]), tuple(occ[1::2])
        blocks.setdefault(sum(ea), []).append((w, ea, eb))
    occ_parts, coeff_parts = [], []
    d = net.detectors
    for _, terms in sorted(blocks.items()):
        apolys = [_sector_poly(net.images, ea) for _, ea, _ in terms]
        bpolys = [_sector_poly(net.images, eb) for _, _, eb in terms]
        pa = sorted({k for p in apolys for k in p})
        pb = sorted({k for p in bpolys for k in p})
        ia = {k: j for j, k in enumerate(pa)}
        ib = {k: j for j, k in enumerate(pb)}
        a = _block_matrix(apolys, ia)
        b = _block_matrix(bpolys, ib)
        w = np.array([t[0] for t in terms], dtype=np.int64)
        # weight the a-side by the source coefficient
        aw = np.empty_like(a)
        aw[..., 0] = a[..., 0] * w[:, None, 0] - a[..., 1] * w[:, None, 1]
        aw[..., 1] = a[..., 0] * w[:, None, 1] + a[..., 1] * w[:, None, 0]
        bound = np.abs(aw).sum(axis=2).astype(float).T @ np.abs(b).sum(axis=2).astype(float)
        if bound.size and bound.max() >= 2.0 ** 62:
            raise OverflowError("Gaussian-integer coefficients exceed int64")
        cr = aw[..., 0].T @ b[..., 0] - aw[..., 1].T @ b[..., 1]
        ci = aw[..., 0].T @ b[..., 1] + aw[..., 1].T @ b[..., 0]
        ja, jb = np.nonzero((cr != 0) | (ci != 0))
        occ = np.zeros((len(ja), 2 * d), dtype=np.uint8)
        occ[:, 0::2] = np.array(pa, dtype=np.uint8).reshape(-1, d)[ja]
        occ[:, 1::2] = np.array(pb, dtype=np.uint8).reshape(-1, d)[jb]
        occ_parts.append(occ)
        coeff_parts.append(np.stack([cr[ja, jb], ci[ja, jb]], axis=1))
    occ = np.concatenate(occ_parts)
    coeff = np.concatenate(coeff_parts)
    order = np.lexsort(occ.T[::-1])
    occ, coeff = occ[order], coeff[order]
    c2 = coeff[:, 0].astype(float) ** 2 + coeff[:, 1].astype(float) ** 2
    prob = float(scale) * c2 * np.prod(_FACT[occ], axis=1)
    return IdealOutput(occ, coeff, scale, prob)


def ideal_outputs(kind: SchemeKind, aux_pairs: int = 1, array_size: int = 1) -> dict[BellState, IdealOutput]:
    return {b: ideal_output(kind, b, aux_pairs, array_size) for b in BellState}


def output_term_counts(kind: SchemeKind, aux_pairs: int = 1) -> dict[BellState, int]:
    return {b: len(o) for b, o in ideal_outputs(kind, aux_pairs).items()}
