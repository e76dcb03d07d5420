"""Category-based probability flow for multiplexed detector arrays.

An output term is summarized by the multiset of its nonzero per-mode photon
counts. Splitting every detected mode uniformly into N sub-modes is a
classical process (one input of each splitter is vacuum), so a category
with a part of size k flows into the partitions of k according to the
multinomial occupancy of N bins. Binary detectors identify a term only once
every part is 1, which gives closed-form array success rates.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .analyzer import DEFAULT_MAX_STATES, Metrics, SchemeSpec, build_plan, evaluate, propagate, raw_unambiguous
from .detection import DetectorModel, marginalize_loss
from .fock import BellState
from .ideal import SchemeKind, ideal_outputs

Category = tuple[int, ...]   # parts in descending order; () is the vacuum


def _partitions(n: int, largest: int | None = None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


def category_basis(kind: SchemeKind, with_loss: bool = False) -> list[Category]:
    """Categories ordered finest first within each photon number, full photon number first."""
    kind = SchemeKind.parse(kind)
    top = 4 if kind is SchemeKind.ENHANCED else 2
    numbers = range(top, -1, -1) if with_loss else (top,)
    basis = []
    for n in numbers:
        basis += sorted(_partitions(n), key=lambda p: (-len(p), p[::-1]))
    return basis


def category_name(c: Category) -> str:
    return "{" + ",".join(str(x) for x in sorted(c)) + "}" if c else "{0}"


@lru_cache(maxsize=None)
def _split_one(k: int, n: int) -> dict[Category, Fraction]:
    """Partition of k photons dropped uniformly into n bins."""
    out = {}
    for lam in _partitions(k):
        ways = math.perm(n, len(lam))
        for mult in Counter(lam).values():
            ways //= math.factorial(mult)
        if ways == 0:
            continue
        arrangements = math.factorial(k) // math.prod(math.factorial(x) for x in lam)
        out[lam] = Fraction(ways * arrangements, n ** k)
    return out


def split_category(c: Category, n: int) -> dict[Category, Fraction]:
    """Distribution of categories after every part of ``c`` is split over ``n`` sub-modes."""
    dist = {(): Fraction(1)}
    for part in c:
        nxt: dict[Category, Fraction] = {}
        for base, p in dist.items():
            for lam, q in _split_one(part, n).items():
                key = tuple(sorted(base + lam, reverse=True))
                nxt[key] = nxt.get(key, Fraction(0)) + p * q
        dist = nxt
    return dist


@dataclass(frozen=True)
class FlowMatrix:
    basis: list[Category]
    n: int
    entries: tuple[tuple[Fraction, ...], ...]   # entries[row][col]: col flows to row

    def __matmul__(self, other):
        if isinstance(other, FlowMatrix):
            if other.basis != self.basis:
                raise ValueError("basis mismatch")
            d = len(self.basis)
            prod = tuple(tuple(sum((self.entries[i][k] * other.entries[k][j] for k in range(d)), Fraction(0))
                               for j in range(d)) for i in range(d))
            return FlowMatrix(self.basis, self.n * other.n, prod)
        vec = list(other)
        return [sum((row[j] * vec[j] for j in range(len(vec))), Fraction(0)) for row in self.entries]

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])


def flow_matrix(kind: SchemeKind, n: int, with_loss: bool = False) -> FlowMatrix:
    """Exact stochastic matrix A(N) over ``category_basis(kind, with_loss)``."""
    if n < 1:
        raise ValueError("array size must be >= 1")
    basis = category_basis(kind, with_loss)
    index = {c: i for i, c in enumerate(basis)}
    rows = [[Fraction(0)] * len(basis) for _ in basis]
    for j, c in enumerate(basis):
        for target, p in split_category(c, n).items():
            rows[index[target]][j] += p
    return FlowMatrix(basis, n, tuple(tuple(r) for r in rows))


# ------------------------------------------------------------ categories

def _merge_slow(occ: np.ndarray) -> np.ndarray:
    """Per detector: early and late counts merged when the early bin is occupied."""
    a = occ[:, 0::2].astype(np.int64)
    b = occ[:, 1::2].astype(np.int64)
    hit = a >= 1
    return np.concatenate([np.where(hit, a + b, a), np.where(hit, 0, b)], axis=1)


def _category_of(row) -> Category:
    return tuple(sorted((int(x) for x in row if x > 0), reverse=True))


@dataclass(frozen=True)
class CategoryVectors:
    basis: list[Category]
    p: list[Fraction]
    p_t: list[Fraction]

    def as_dict(self) -> dict[str, tuple[Fraction, Fraction]]:
        return {category_name(c): (a, b) for c, a, b in zip(self.basis, self.p, self.p_t)}


def _check_binary(model: DetectorModel) -> DetectorModel:
    model = DetectorModel.parse(model)
    if not model.binary:
        raise ValueError("category flow describes binary detectors (BD, SlowBD)")
    return model


def categorize(kind: SchemeKind, model: DetectorModel, with_loss: bool = False,
               eta_i: float = 1.0, eta_a: float = 1.0) -> CategoryVectors:
    """Average category probabilities over the four Bell inputs.

    ``P_t`` holds the probability of terms that only one Bell input produces.
    Slow models merge early and late counts of a detector whose early bin is
    occupied. With ``with_loss`` the basis includes photon-deficient
    categories and ``eta_i``, ``eta_a`` set the loss before the analyzer;
    lossy terms never count as true.
    """
    kind, model = SchemeKind.parse(kind), _check_binary(model)
    basis = category_basis(kind, with_loss)
    index = {c: i for i, c in enumerate(basis)}
    p = [Fraction(0)] * len(basis)
    pt = [Fraction(0)] * len(basis)
    outs = ideal_outputs(kind)
    lossy = with_loss and (eta_i < 1.0 or eta_a < 1.0)
    if not lossy:
        ok = raw_unambiguous(outs)
        for b, out in outs.items():
            occ = _merge_slow(out.occ) if model.slow else out.occ
            probs = out.exact_prob()
            for row, pr, good in zip(occ, probs, ok[b]):
                i = index[_category_of(row)]
                p[i] += pr / 4
                if good:
                    pt[i] += pr / 4
        return CategoryVectors(basis, p, pt)
    # lossy vectors are floating point
    scheme = SchemeSpec(kind, DetectorModel.PNRD)
    ok_keys = {b: {tuple(int(x) for x in r) for r in outs[b].occ[m]} for b, m in raw_unambiguous(outs).items()}
    p = [0.0] * len(basis)
    pt = [0.0] * len(basis)
    for b in BellState:
        marg = marginalize_loss(propagate(scheme, b, eta_i, eta_a))
        occ = _merge_slow(marg.occ) if model.slow else marg.occ
        intact = ~marg.signature[:, :2].any(axis=1)
        for raw, row, pr, whole in zip(marg.occ, occ, marg.prob, intact):
            i = index[_category_of(row)]
            p[i] += pr / 4
            if whole and tuple(int(x) for x in raw) in ok_keys[b]:
                pt[i] += pr / 4
    return CategoryVectors(basis, p, pt)


# ------------------------------------------------------------ closed forms

def array_rate(kind: SchemeKind, model: DetectorModel, n: int) -> Fraction:
    """``(A(N) P_t)`` at the all-singletons category, exact.

    Photon-number-resolving detectors identify every unambiguous term at any
    N, so PNRD returns the N=1 maximum. SlowPNRD has no closed form here.
    """
    kind, model = SchemeKind.parse(kind), DetectorModel.parse(model)
    if model is DetectorModel.PNRD:
        return Fraction(3, 4) if kind is SchemeKind.ENHANCED else Fraction(1, 2)
    vec = categorize(kind, model)
    return (flow_matrix(kind, n) @ vec.p_t)[0]


def array_rate_lossy(kind: SchemeKind, model: DetectorModel, n: int, eta_i: float, eta_a: float = 1.0,
                     eta_d: float = 1.0, xi: float = 0.0) -> float:
    kind = SchemeKind.parse(kind)
    pt = float(array_rate(kind, model, n))
    if kind is SchemeKind.STANDARD:
        return eta_d ** 2 * eta_i ** 2 * (1 - xi) ** (4 * n) * pt
    return eta_d ** 4 * eta_a ** 2 * eta_i ** 2 * (1 - xi) ** (8 * n) * pt


def p111(model: DetectorModel, n: int, eta_i: float, eta_a: float = 1.0) -> float:
    """First-order probability of the three-photon all-singletons category (enhanced scheme)."""
    model = _check_binary(model)
    if model.slow:
        poly = 2 - 5 / (2 * n) + 1 / n ** 2
    else:
        poly = 2 - 2 / n + 3 / (4 * n ** 2)
    return eta_a ** 2 * eta_i * (1 - eta_i) * poly


def array_false_positive(kind: SchemeKind, model: DetectorModel, n: int, eta_i: float, eta_a: float = 1.0,
                         eta_d: float = 1.0, xi: float = 0.0) -> float:
    """Upper-bound style false-positive rate for arrays of binary detectors.

    Standard scheme: one lost photon plus one dark count among the modes
    that complete an accepted pattern. Enhanced scheme: a three-photon
    singleton term plus a dark count in a free mode, times the fraction of
    such completions that post-selection accepts.
    """
    kind, model = SchemeKind.parse(kind), _check_binary(model)
    if kind is SchemeKind.STANDARD:
        if not model.slow:
            return 4 * eta_d * eta_i * (1 - eta_i) * xi * (1 - xi) ** 3
        return 2 * (2 * n - 1) * eta_d * eta_i * (1 - eta_i) * xi * (1 - xi) ** (4 * n - 1)
    frac, free = (Fraction(3, 4), 8 * n - 6) if model.slow else (Fraction(2, 3), 8 * n - 3)
    return float(frac) * free * eta_d ** 3 * xi * (1 - xi) ** (8 * n - 1) * p111(model, n, eta_i, eta_a)


def array_fidelity(kind: SchemeKind, model: DetectorModel, n: int, eta_i: float, eta_a: float = 1.0,
                   eta_d: float = 1.0, xi: float = 0.0) -> float:
    pt = array_rate_lossy(kind, model, n, eta_i, eta_a, eta_d, xi)
    pf = array_false_positive(kind, model, n, eta_i, eta_a, eta_d, xi)
    return pt / (pt + pf) if pt + pf > 0 else 1.0


def exact_array_simulate(kind: SchemeKind, model: DetectorModel, n: int, eta_i: float = 1.0,
                         eta_a: float = 1.0, eta_d: float = 1.0, xi: float = 0.0,
                         count_preserving: bool = False, kmax: int | None = None,
                         max_states: int = DEFAULT_MAX_STATES) -> Metrics:
    """Full pipeline with every detected mode split over ``n`` sub-modes and a plan for that outcome space."""
    scheme = SchemeSpec(kind, model, n, count_preserving)
    plan = build_plan(scheme)
    return evaluate(scheme, plan, eta_i, eta_a, eta_d, xi, kmax=kmax, max_states=max_states)


def first_advantage(model: DetectorModel, n_max: int = 64) -> int | None:
    """Smallest N where the enhanced array rate beats the standard array rate at the same N."""
    for n in range(1, n_max + 1):
        if array_rate(SchemeKind.ENHANCED, model, n) > array_rate(SchemeKind.STANDARD, model, n):
            return n
    return None
