"""Zero-order closed forms for p_t, p_f and fidelity, and the scheme crossover.

Valid in the regime xi << eta_i << eta_d, eta_a. True positives keep every
photon and see no dark count; false positives come from one lost input
photon replaced by one dark count. The probability of a dark count
completing an otherwise true event is neglected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .detection import DetectorModel
from .ideal import SchemeKind

# maximum unit-fidelity success rates (count-preserving filter for slow PNRDs)
_PT_MAX = {
    SchemeKind.STANDARD: {DetectorModel.PNRD: Fraction(1, 2), DetectorModel.BD: Fraction(1, 2),
                          DetectorModel.SLOW_PNRD: Fraction(1, 4), DetectorModel.SLOW_BD: Fraction(1, 4)},
    SchemeKind.ENHANCED: {DetectorModel.PNRD: Fraction(3, 4), DetectorModel.BD: Fraction(3, 16),
                          DetectorModel.SLOW_PNRD: Fraction(9, 32), DetectorModel.SLOW_BD: Fraction(1, 16)},
}

# false-positive prefactors
_C = {
    SchemeKind.STANDARD: {DetectorModel.PNRD: Fraction(4), DetectorModel.BD: Fraction(4),
                          DetectorModel.SLOW_PNRD: Fraction(2), DetectorModel.SLOW_BD: Fraction(2)},
    SchemeKind.ENHANCED: {DetectorModel.PNRD: Fraction(10), DetectorModel.BD: Fraction(5, 2),
                          DetectorModel.SLOW_PNRD: Fraction(8, 3), DetectorModel.SLOW_BD: Fraction(3, 4)},
}


@dataclass(frozen=True)
class RateFormula:
    """``p_t = pt_max * eta_d^a eta_a^b eta_i^2 (1-xi)^k`` and
    ``p_f = C * eta_d^c eta_a^b eta_i (1-eta_i) xi (1-xi)^(k-1)``."""

    kind: SchemeKind
    model: DetectorModel
    pt_max: Fraction
    c: Fraction
    pt_exp: tuple[int, int, int, int]   # (eta_d, eta_a, eta_i, 1 - xi)
    pf_exp: tuple[int, int, int, int]

    def p_t(self, eta_i: float, eta_a: float, eta_d: float, xi: float) -> float:
        d, a, i, x = self.pt_exp
        return float(self.pt_max) * eta_d ** d * eta_a ** a * eta_i ** i * (1 - xi) ** x

    def p_f(self, eta_i: float, eta_a: float, eta_d: float, xi: float) -> float:
        d, a, i, x = self.pf_exp
        return float(self.c) * eta_d ** d * eta_a ** a * eta_i ** i * (1 - eta_i) * xi * (1 - xi) ** x


def rate_formula(kind: SchemeKind, model: DetectorModel) -> RateFormula:
    kind, model = SchemeKind.parse(kind), DetectorModel.parse(model)
    if kind is SchemeKind.STANDARD:
        return RateFormula(kind, model, _PT_MAX[kind][model], _C[kind][model], (2, 0, 2, 4), (1, 0, 1, 3))
    return RateFormula(kind, model, _PT_MAX[kind][model], _C[kind][model], (4, 2, 2, 8), (3, 2, 1, 7))


def approx_rates(kind: SchemeKind, model: DetectorModel, eta_i: float, eta_a: float = 1.0,
                 eta_d: float = 1.0, xi: float = 0.0) -> tuple[float, float, float | None]:
    """``(p_t, p_f, fidelity)``; fidelity is None when both rates vanish."""
    for name, v in (("eta_i", eta_i), ("eta_a", eta_a), ("eta_d", eta_d), ("xi", xi)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name}={v} outside [0, 1]")
    f = rate_formula(kind, model)
    eta_a = eta_a if f.kind is SchemeKind.ENHANCED else 1.0
    pt = f.p_t(eta_i, eta_a, eta_d, xi)
    pf = f.p_f(eta_i, eta_a, eta_d, xi)
    tot = pt + pf
    return pt, pf, (pt / tot if tot > 0 else None)


def crossover(model: DetectorModel) -> float | None:
    """``eta_d * eta_a`` above which the enhanced p_t exceeds the standard one.

    Equating the two p_t forms at xi = 0 gives ``(eta_d eta_a)^2 = std / enh``;
    models whose enhanced maximum does not beat the standard one have none.
    """
    model = DetectorModel.parse(model)
    std = _PT_MAX[SchemeKind.STANDARD][model]
    enh = _PT_MAX[SchemeKind.ENHANCED][model]
    if enh <= std:
        return None
    return math.sqrt(std / enh)


@dataclass(frozen=True)
class Deviation:
    kind: SchemeKind
    model: DetectorModel
    eta_i: float
    eta_a: float
    eta_d: float
    xi: float
    p_t_exact: float
    p_t_approx: float
    fid_exact: float | None
    fid_approx: float | None

    @property
    def p_t_rel(self) -> float:
        return abs(self.p_t_approx - self.p_t_exact) / self.p_t_exact if self.p_t_exact else 0.0

    @property
    def fid_rel(self) -> float:
        if self.fid_exact is None or self.fid_approx is None:
            return 0.0
        return abs(self.fid_approx - self.fid_exact) / self.fid_exact


def approx_vs_exact_report(kind: SchemeKind, model: DetectorModel, eta_d_grid, eta_a_grid=(1.0,),
                           eta_i: float = 0.01, xi: float = 1e-5) -> list[Deviation]:
    """Relative deviation of the closed forms from the exact evaluator over a grid."""
    from .analyzer import SchemeSpec, build_plan, evaluate

    kind, model = SchemeKind.parse(kind), DetectorModel.parse(model)
    scheme = SchemeSpec(kind, model, count_preserving=model is DetectorModel.SLOW_PNRD)
    plan = build_plan(scheme)
    out = []
    for eta_a in (eta_a_grid if kind is SchemeKind.ENHANCED else (1.0,)):
        for eta_d in eta_d_grid:
            ex = evaluate(scheme, plan, eta_i, eta_a, eta_d, xi)
            pt, _, fid = approx_rates(kind, model, eta_i, eta_a, eta_d, xi)
            out.append(Deviation(kind, model, eta_i, eta_a, eta_d, xi, ex.p_t, pt, ex.fidelity, fid))
    return out
