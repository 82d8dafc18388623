"""Named objects of the constant-Q-curvature uniqueness argument.

Two expression families are built over the jet algebra: the dimension-4
family (conformal factor e^{2u}, exponential prefactors) and the general
family (conformal factor u^{4/(n-4)}, u-power prefactors, n symbolic or a
specialized value != 4).  For each family this module provides

* the Einstein-background curvature constants (Q, Paneitz coefficients),
* the conformal scalar curvature, its gradient, the trace-free Ricci
  tensor of the conformal metric with its norms,
* the nonnegative Obata-type integrand Theta assembled from definitions,
* the zero-integral integrands A_1..A_12 (resp. A_1..A_11) exactly as
  displayed, together with their alternative displayed forms,
* the coefficient combination that produces the final integrand, and
* the pointwise verification driver for all of the above.

A nonzero residual is a finding and is returned, never swallowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .ring import RF, RF_ONE, coerce_rf
from .jets import (
    GEN_R, GEN_LAP, GEN_GRAD2, GEN_HESS2, GEN_GG, GEN_GL, GEN_GLG, GEN_GL2,
    GEN_GG2, GEN_LAP2, GEN_GLL, GEN_HH, GEN_HGG, GEN_LG2, GEN_ROUGH, GEN_W,
    JetContext, JetExpr, TensorExpr, VectorExpr, V1, V2, V3,
    contract, divergence, hessian_of_weight,
)


# ---------------------------------------------------------------------------
# Einstein-background constants


def q_einstein(n, R) -> RF:
    """Q-curvature of an Einstein metric with scalar curvature R."""
    n = coerce_rf(n)
    R = coerce_rf(R)
    return (n + 2) * (n - 2) * R * R / (8 * n * (n - 1) ** 2)


def q_einstein_from_definition(n, R) -> RF:
    """Q rebuilt from the general fourth-order definition with the Einstein
    substitutions (constant scalar curvature, |Ric|^2 = R^2/n)."""
    n = coerce_rf(n)
    R = coerce_rf(R)
    lap_term = RF(0)  # scalar curvature is constant
    return (
        lap_term
        + (n ** 3 - 4 * n ** 2 + 16 * n - 16) / (8 * (n - 1) ** 2 * (n - 2) ** 2) * R * R
        - 2 / ((n - 2) ** 2) * (R * R / n)
    )


def paneitz_einstein(n, R) -> Tuple[RF, RF, RF]:
    """Coefficients (c2, c1, c0) of Delta^2 + c1 Delta + c0 on an Einstein
    background."""
    n = coerce_rf(n)
    R = coerce_rf(R)
    c1 = (n * n - 2 * n - 4) * R / (2 * n * (n - 1))
    c0 = (n - 4) / 2 * q_einstein(n, R)
    return (RF_ONE, c1, c0)


def cs_margin() -> RF:
    """Margin polynomial of the Cauchy-Schwarz bound: 4n(n-1)^2 - (3n-4)^2."""
    n = RF.n()
    return 4 * n * (n - 1) ** 2 - (3 * n - 4) ** 2


def cs_margin_scan(lo: int = 3, hi: int = 64) -> dict:
    """Integer positivity scan of the margin plus leading-coefficient check."""
    m = cs_margin()
    values = {k: m.eval(k) for k in range(lo, hi + 1)}
    return {
        "values": values,
        "all_positive": all(v > 0 for v in values.values()),
        "leading_positive": m.num.leading() > 0,
    }


@dataclass
class Normalization:
    kind: str      # "additive" or "multiplicative"
    value: float
    describe: str


def normalize_solution(q_tilde: float, case: str, n: Optional[int] = None) -> Normalization:
    """Constant mapping a solution with conformal Q-curvature q_tilde to a
    solution of the normalized equation."""
    if q_tilde <= 0:
        raise ValueError("the conformal Q-curvature must be positive")
    if case == "dim4":
        shift = 0.25 * math.log(q_tilde)
        return Normalization("additive", shift, f"u -> u + (1/4)ln({q_tilde})")
    if n is None or n == 4:
        raise ValueError("the general case needs n != 4")
    factor = ((n - 4) / 2 * q_tilde) ** ((n - 4) / 8)
    return Normalization(
        "multiplicative", factor, f"u -> ((n-4)/2 * {q_tilde})^((n-4)/8) u"
    )


# ---------------------------------------------------------------------------
# integrands and displays


@dataclass
class AIntegrand:
    case: str
    index: int
    integrand: JetExpr

    def __str__(self):
        return f"A{self.index}[{self.case}] = {self.integrand}"


class Residual:
    """Outcome of a pointwise verification."""

    def __init__(self, ident: str, kind: str, parts):
        self.ident = ident
        self.kind = kind  # scalar | vector | tensor
        self.parts = parts

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.parts)

    def __str__(self):
        if self.is_zero():
            return f"{self.ident}: 0"
        body = "; ".join(str(p) for p in self.parts if not p.is_zero())
        return f"{self.ident}: {body}"


def _scalar_residual(ident, lhs: JetExpr, rhs: JetExpr) -> Residual:
    return Residual(ident, "scalar", [(lhs - rhs).normal_form()])


def _vector_residual(ident, lhs: VectorExpr, rhs: VectorExpr) -> Residual:
    diff = (lhs - rhs).normal_form()
    return Residual(ident, "vector", list(diff.comps.values()) or [lhs.ctx.zero()])


def _tensor_residual(ident, lhs: TensorExpr, rhs: TensorExpr) -> Residual:
    diff = lhs - rhs
    parts = [v.normal_form() for v in diff.comps.values()]
    return Residual(ident, "tensor", parts or [lhs.ctx.zero()])


class Dim4Family:
    """All displayed objects of the dimension-4 theorem."""

    case = "dim4"

    def __init__(self):
        self.ctx = JetContext("dim4")
        c = self.ctx
        self.R = c.gen(GEN_R)
        self.g1 = c.gen(GEN_LAP)
        self.g2 = c.gen(GEN_GRAD2)
        self.g3 = c.gen(GEN_HESS2)
        self.g4 = c.gen(GEN_GG)
        self.g5 = c.gen(GEN_GL)
        self.g6 = c.gen(GEN_GLG)
        self.g7 = c.gen(GEN_GL2)
        self.g8 = c.gen(GEN_GG2)
        self.g9 = c.gen(GEN_LAP2)
        self.g10 = c.gen(GEN_GLL)
        self.g11 = c.gen(GEN_HH)
        self.g12 = c.gen(GEN_HGG)
        self.g13 = c.gen(GEN_LG2)
        self.g14 = c.gen(GEN_ROUGH)

    def half(self):
        return RF(Fraction(1, 2))

    # -- conformal scalar curvature -----------------------------------------

    def scal_display(self) -> JetExpr:
        w = self.ctx.weight_exp(-2)
        return w * (6 * self.g1 - 6 * self.g2 + self.R)

    def scal_chain(self) -> JetExpr:
        eu = self.ctx.weight_exp(1)
        return self.ctx.weight_exp(-3) * (6 * eu.laplacian() + self.R * eu)

    def scal_grad_display(self) -> VectorExpr:
        w = self.ctx.weight_exp(-2)
        return (
            VectorExpr.basis(self.ctx, V1, w * self.ctx.const(6))
            + VectorExpr.basis(self.ctx, V2, w * self.ctx.const(-6))
            + VectorExpr.basis(
                self.ctx, V3, w * (-12 * self.g1 + 12 * self.g2 - 2 * self.R)
            )
        )

    # -- trace-free Ricci of the conformal metric ----------------------------

    def einstein_engine(self) -> TensorExpr:
        # Einstein background: the trace-free Ricci of g itself vanishes
        sq = self.ctx.weight_exp(-1)        # sqrt of the conformal datum
        sqinv = self.ctx.weight_exp(1)
        G = TensorExpr.basis(self.ctx, "G")
        n = self.ctx.n
        inner = hessian_of_weight(sq) + G * (sq.laplacian() * (RF_ONE / n))
        return inner * (sqinv * (n - 2))

    def einstein_display(self) -> TensorExpr:
        c = self.ctx
        return (
            TensorExpr.basis(c, "H", c.const(-2))
            + TensorExpr.basis(c, "P", c.const(2))
            + TensorExpr.basis(c, "G", (self.g1 + self.g2) * RF(Fraction(-1, 2)))
        )

    def einstein_norm_display(self) -> JetExpr:
        g1, g2, g3, g4 = self.g1, self.g2, self.g3, self.g4
        return 4 * g3 - 4 * g4 - g1 * g1 - 2 * g2 * g1 + 3 * g2 * g2

    def applied_norm_display(self) -> JetExpr:
        g1, g2, g4, g8 = self.g1, self.g2, self.g4, self.g8
        w = self.ctx.weight_exp(-4)
        return w * (
            4 * g8
            + 4 * g4 * g1
            - 12 * g2 * g4
            + g2 * g1 * g1
            - 6 * g2 * g2 * g1
            + 9 * g2 ** 3
        )

    # -- the two halves of the Obata-type integrand ---------------------------

    def theta_grad_display(self) -> JetExpr:
        g1, g2, g4, g5, g6, g7, g8, R = (
            self.g1, self.g2, self.g4, self.g5, self.g6, self.g7, self.g8, self.R,
        )
        w = self.ctx.weight_exp(-4)
        core = (
            9 * g7
            - 6 * g6
            - 30 * g5 * g1
            + 18 * g2 * g5
            - 3 * g8
            + 6 * g4 * g1
            + 6 * g2 * g4
            + 24 * g2 * g1 * g1
            - 24 * g2 * g2 * g1
            - 6 * R * g5
            + 2 * R * g4
            + 10 * R * g2 * g1
            - 6 * R * g2 * g2
            + R * R * g2
        )
        return w * (4 * core)

    def theta_bulk_display(self) -> JetExpr:
        g1, g2, g3, g4, R = self.g1, self.g2, self.g3, self.g4, self.R
        w = self.ctx.weight_exp(-4)
        return w * (
            -168 * g4 * g1
            + 24 * g2 * g4
            - 24 * g2 * g3
            + 168 * g3 * g1
            - 42 * g1 ** 3
            - 78 * g2 * g1 * g1
            + 138 * g2 * g2 * g1
            - 18 * g2 ** 3
            - 40 * R * g4
            + 40 * R * g3
            - 10 * R * g1 * g1
            - 20 * R * g2 * g1
            + 30 * R * g2 * g2
        )

    # -- zero-integral integrands ---------------------------------------------

    def a_integrand(self, i: int) -> AIntegrand:
        g1, g2, g3, g4, g5, g6, g7, g8 = (
            self.g1, self.g2, self.g3, self.g4, self.g5, self.g6, self.g7, self.g8,
        )
        g9, g11, g12, g14, R = self.g9, self.g11, self.g12, self.g14, self.R
        half = self.half()
        table = {
            1: g14 - g11 + g12,
            2: 2 * g11 - g6 - 2 * g7 + half * R * g5,
            # The displayed third term carries coefficient 1; that reading
            # integrates to a provably nonzero value and contradicts the
            # -120 coefficient in the displayed combination, so the
            # coefficient is 2.  Flagged in reports as a source erratum.
            3: 2 * g12 + g6 - 2 * g5 * g1 - 2 * g2 * g5,
            4: g2 * g9 - g6 + g2 * g5,
            5: g6 - 2 * g5 * g1 + 2 * g3 * g1 - g4 * g1 + half * R * g2 * g1,
            6: 2 * g5 * g1 - g1 ** 3 - g2 * g1 * g1,
            7: 2 * g2 * g5 - 2 * g2 * g3 - g8 + g2 * g4 - half * R * g2 * g2,
            8: g2 * g5 + g4 * g1 - g2 * g1 * g1 - g2 * g2 * g1,
            9: 2 * g2 * g4 - g2 * g2 * g1 - g2 ** 3,
            10: 2 * g5 - 2 * g3 + g4 - half * R * g2,
            11: g5 - g1 * g1 - g2 * g1,
            12: g4 - g2 * g1 - g2 * g2,
        }
        if i not in table:
            raise KeyError(f"no integrand with index {i} in the dimension-4 family")
        return AIntegrand("dim4", i, self.ctx.weight_exp(-1) * table[i])

    def a_alternative(self, i: int) -> JetExpr:
        g1, g2, g4, g5, g6, g7, g8 = (
            self.g1, self.g2, self.g4, self.g5, self.g6, self.g7, self.g8,
        )
        g11, g13, R = self.g11, self.g13, self.R
        n = self.ctx.n
        # rough Laplacian of du paired with d(Delta u): <d Delta u - (R/n) du, d Delta u>
        rough_du_dlap = g7 - (RF_ONE / n) * R * g5
        table = {
            2: 2 * g11 - g6 - 2 * rough_du_dlap,
            5: g6 - g13 * g1 - g4 * g1,
            7: g2 * g13 - g8 + g2 * g4,
            10: g13 + g4,
        }
        if i not in table:
            raise KeyError(f"no alternative display for A{i} in the dimension-4 family")
        return self.ctx.weight_exp(-1) * table[i]

    ALT_INDICES = (2, 5, 7, 10)
    NUM_A = 12

    def lead_bracket(self) -> JetExpr:
        """The first displayed integrand: the pairing of the fourth-order
        operator content against the conformal test vector."""
        g1, g2, g5, g9, g14, R = self.g1, self.g2, self.g5, self.g9, self.g14, self.R
        return self.ctx.weight_exp(-1) * (
            g14
            + RF(Fraction(5, 12)) * R * g5
            - 4 * g2 * g9
            - RF(Fraction(2, 3)) * R * g2 * g1
            - RF(Fraction(1, 6)) * R * R * g2
        )

    def combo_display(self) -> JetExpr:
        g1, g2, g3, g4, g5, g6, g7, g8, R = (
            self.g1, self.g2, self.g3, self.g4, self.g5, self.g6, self.g7,
            self.g8, self.R,
        )
        return self.ctx.weight_exp(-1) * (
            36 * g7
            - 24 * g6
            - 120 * g5 * g1
            + 72 * g2 * g5
            - 12 * g8
            - 144 * g4 * g1
            + 48 * g2 * g4
            - 24 * g2 * g3
            + 168 * g3 * g1
            - 42 * g1 ** 3
            + 18 * g2 * g1 * g1
            + 42 * g2 * g2 * g1
            - 18 * g2 ** 3
            - 24 * R * g5
            - 32 * R * g4
            + 40 * R * g3
            - 10 * R * g1 * g1
            + 20 * R * g2 * g1
            + 6 * R * g2 * g2
            + 4 * R * R * g2
        )

    def combination(self):
        """Coefficients (as jet scalars, to carry powers of R) and target."""
        one = self.ctx.one()
        R = self.R
        coeffs = {
            0: 36 * one,
            1: -36 * one,
            2: -18 * one,
            3: 18 * one,
            4: 144 * one,
            5: 84 * one,
            6: 42 * one,
            7: 12 * one,
            8: -60 * one,
            9: 18 * one,
            10: -20 * R,
            11: 10 * R,
            12: -12 * R,
        }
        return coeffs, self.combo_display()

    # -- assembled Obata-type integrand ---------------------------------------

    def conformal_datum(self) -> JetExpr:
        return self.ctx.weight_exp(-2)

    def sqrt_datum(self) -> JetExpr:
        return self.ctx.weight_exp(-1)

    def theta_prefactor(self) -> JetExpr:
        # v^((1-n)/2) with v = e^{-2u} and n = 4
        return self.ctx.weight_exp(3)


class GeneralFamily:
    """All displayed objects of the general-dimension theorem (n != 4)."""

    case = "general"

    def __init__(self, nval: Optional[Fraction] = None):
        self.ctx = JetContext("general", nval)
        c = self.ctx
        self.R = c.gen(GEN_R)
        self.g1 = c.gen(GEN_LAP)
        self.g2 = c.gen(GEN_GRAD2)
        self.g3 = c.gen(GEN_HESS2)
        self.g4 = c.gen(GEN_GG)
        self.g5 = c.gen(GEN_GL)
        self.g6 = c.gen(GEN_GLG)
        self.g7 = c.gen(GEN_GL2)
        self.g8 = c.gen(GEN_GG2)
        self.g9 = c.gen(GEN_LAP2)
        self.g10 = c.gen(GEN_GLL)
        self.g11 = c.gen(GEN_HH)
        self.g12 = c.gen(GEN_HGG)
        self.g13 = c.gen(GEN_LG2)
        self.g14 = c.gen(GEN_ROUGH)
        self.w = c.gen(GEN_W)
        self.u = JetExpr(c, c.neutral_weight(), {((GEN_W, -1),): RF_ONE})

    # -- conformal scalar curvature -----------------------------------------

    def scal_display(self) -> JetExpr:
        n = self.ctx.n
        wt = self.ctx.weight_pow(-n / (n - 4))
        return wt * (
            (4 * (n - 1) / (n - 4)) * self.g1
            - (8 * (n - 1) / (n - 4) ** 2) * self.w * self.g2
            + self.R * self.u
        )

    def scal_chain(self) -> JetExpr:
        n = self.ctx.n
        upow = self.ctx.weight_pow((n - 2) / (n - 4))
        return self.ctx.weight_pow(-(n + 2) / (n - 4)) * (
            (4 * (n - 1) / (n - 2)) * upow.laplacian() + self.R * upow
        )

    def scal_grad_display(self) -> VectorExpr:
        n = self.ctx.n
        wt = self.ctx.weight_pow(-n / (n - 4)) * (4 / (n - 4))
        v3_coeff = (
            -(n * (n - 1) / (n - 4)) * self.w * self.g1
            + (4 * (n - 1) * (n - 2) / (n - 4) ** 2) * self.w * self.w * self.g2
            - self.R
        )
        return (
            VectorExpr.basis(self.ctx, V1, wt * (n - 1))
            + VectorExpr.basis(self.ctx, V2, wt * (-(2 * (n - 1) / (n - 4))) * self.w)
            + VectorExpr.basis(self.ctx, V3, wt * v3_coeff)
        )

    # -- trace-free Ricci ------------------------------------------------------

    def einstein_engine(self) -> TensorExpr:
        n = self.ctx.n
        sq = self.ctx.weight_pow(-2 / (n - 4))
        sqinv = self.ctx.weight_pow(2 / (n - 4))
        G = TensorExpr.basis(self.ctx, "G")
        inner = hessian_of_weight(sq) + G * (sq.laplacian() * (RF_ONE / n))
        return inner * (sqinv * (n - 2))

    def einstein_display(self) -> TensorExpr:
        n = self.ctx.n
        c = self.ctx
        pref = c.weight_pow(RF(-1)) * (-(2 * (n - 2) / (n - 4)))
        q = (n - 2) / (n - 4)
        return (
            TensorExpr.basis(c, "H", pref)
            + TensorExpr.basis(c, "P", pref * (-q) * self.w)
            + TensorExpr.basis(
                c, "G", pref * (RF_ONE / n) * (self.g1 + q * self.w * self.g2)
            )
        )

    def einstein_norm_display(self) -> JetExpr:
        n = self.ctx.n
        g1, g2, g3, g4, w = self.g1, self.g2, self.g3, self.g4, self.w
        pref = self.ctx.weight_pow(RF(-2)) * (4 * (n - 2) ** 2 / (n - 4) ** 2)
        return pref * (
            g3
            - ((n - 2) / (n - 4)) * w * g4
            - (RF_ONE / n) * g1 * g1
            - (2 * (n - 2) / (n * (n - 4))) * w * g2 * g1
            + ((n - 1) * (n - 2) ** 2 / (n * (n - 4) ** 2)) * w * w * g2 * g2
        )

    def applied_norm_display(self) -> JetExpr:
        n = self.ctx.n
        g1, g2, g4, g8, w = self.g1, self.g2, self.g4, self.g8, self.w
        pref = self.ctx.weight_pow(-4 * (n - 2) / (n - 4)) * (
            16 * (n - 2) ** 2 / (n - 4) ** 4
        )
        return pref * (
            g8
            + (4 / n) * g4 * g1
            - (4 * (n - 1) * (n - 2) / (n * (n - 4))) * w * g2 * g4
            + (4 / n ** 2) * g2 * g1 * g1
            - (8 * (n - 1) * (n - 2) / (n ** 2 * (n - 4))) * w * g2 * g2 * g1
            + (4 * (n - 1) ** 2 * (n - 2) ** 2 / (n ** 2 * (n - 4) ** 2)) * w * w * g2 ** 3
        )

    def theta_grad_display(self) -> JetExpr:
        n = self.ctx.n
        g1, g2, g4, g5, g6, g7, g8, w, R = (
            self.g1, self.g2, self.g4, self.g5, self.g6, self.g7, self.g8,
            self.w, self.R,
        )
        pref = self.ctx.weight_pow(-2 * n / (n - 4)) * (16 / (n - 4) ** 2)
        return pref * (
            (n - 1) ** 2 * g7
            - (n * (n - 1) / (n - 4)) * w * g6
            - (2 * (n - 1) * (n ** 3 - n ** 2 - 3 * n + 4) / (n * (n - 4))) * w * g5 * g1
            + (2 * (n - 1) ** 2 * (n - 2) * (n + 4) / (n * (n - 4) ** 2)) * w * w * g2 * g5
            - (2 * (n - 1) * (n - 2) / (n - 4) ** 2) * w * w * g8
            + ((n - 1) * (n - 2) ** 2 * (n + 4) / (n * (n - 4) ** 2)) * w * w * g4 * g1
            + (4 * (n - 1) * (n - 2) * (2 * n ** 2 - 7 * n + 4) / (n * (n - 4) ** 3))
            * w ** 3 * g2 * g4
            + ((n - 1) * (n - 2) * (n ** 2 + n - 4) / (n - 4) ** 2) * w * w * g2 * g1 * g1
            - (2 * (n - 1) * (n - 2) * (n ** 3 + 3 * n ** 2 - 16 * n + 16) / (n * (n - 4) ** 3))
            * w ** 3 * g2 * g2 * g1
            - (8 * (n - 1) ** 2 * (n - 2) ** 2 / (n * (n - 4) ** 3)) * w ** 4 * g2 ** 3
            - 2 * (n - 1) * R * g5
            + (n / (n - 4)) * R * w * g4
            + (2 * (n ** 3 - n ** 2 - 3 * n + 4) / (n * (n - 4))) * R * w * g2 * g1
            - (2 * (n - 1) * (n - 2) * (n + 4) / (n * (n - 4) ** 2)) * R * w * w * g2 * g2
            + R * R * g2
        )

    def theta_bulk_display(self) -> JetExpr:
        n = self.ctx.n
        g1, g2, g3, g4, w, R = self.g1, self.g2, self.g3, self.g4, self.w, self.R
        pref = self.ctx.weight_pow(-2 * n / (n - 4)) * (8 * (n - 2) ** 2 / (n - 4) ** 2)
        return pref * (
            -(4 * (n - 1) * (n - 2) * (n ** 2 - 2) / (n - 4) ** 2) * w * w * g4 * g1
            + (8 * (n - 1) * (n - 2) ** 2 / (n - 4) ** 3) * w ** 3 * g2 * g4
            - (8 * (n - 1) * (n - 2) / (n - 4) ** 2) * w * w * g2 * g3
            + (4 * (n - 1) * (n ** 2 - 2) / (n - 4)) * w * g3 * g1
            - (4 * (n - 1) * (n ** 2 - 2) / (n * (n - 4))) * w * g1 ** 3
            - (8 * (n - 1) * (n - 2) * (n ** 2 - 3) / (n * (n - 4) ** 2)) * w * w * g2 * g1 * g1
            + (4 * (n - 1) * (n - 2) ** 2 * (n ** 3 - n ** 2 - 2 * n + 6) / (n * (n - 4) ** 3))
            * w ** 3 * g2 * g2 * g1
            - (8 * (n - 1) ** 2 * (n - 2) ** 3 / (n * (n - 4) ** 4)) * w ** 4 * g2 ** 3
            - ((n - 2) * (n ** 2 + 2 * n - 4) / (n - 4)) * R * w * g4
            + (n ** 2 + 2 * n - 4) * R * g3
            - ((n ** 2 + 2 * n - 4) / n) * R * g1 * g1
            - (2 * (n - 2) * (n ** 2 + 2 * n - 4) / (n * (n - 4))) * R * w * g2 * g1
            + ((n - 1) * (n - 2) ** 2 * (n ** 2 + 2 * n - 4) / (n * (n - 4) ** 2))
            * R * w * w * g2 * g2
        )

    # -- zero-integral integrands ----------------------------------------------

    def _a_weight(self, i: int) -> JetExpr:
        n = self.ctx.n
        exps = {
            1: -2 / (n - 4),
            2: -(n - 2) / (n - 4),
            3: -(n - 2) / (n - 4),
            4: -(n - 2) / (n - 4),
            5: -2 * (n - 3) / (n - 4),
            6: -2 * (n - 3) / (n - 4),
            7: -(3 * n - 10) / (n - 4),
            8: -2 / (n - 4),
            9: -2 / (n - 4),
            10: -(n - 2) / (n - 4),
            11: (n - 6) / (n - 4),
        }
        return self.ctx.weight_pow(exps[i])

    def a_integrand(self, i: int) -> AIntegrand:
        n = self.ctx.n
        g1, g2, g3, g4, g5, g6, g7, g8, g9, w, R = (
            self.g1, self.g2, self.g3, self.g4, self.g5, self.g6, self.g7,
            self.g8, self.g9, self.w, self.R,
        )
        q = (n - 2) / (n - 4)
        table = {
            1: g9 * g1 - g7 + (2 / (n - 4)) * w * g5 * g1,
            2: g2 * g9 - g6 + q * w * g2 * g5,
            3: g6 - 2 * g5 * g1 + 2 * g3 * g1 - q * w * g4 * g1 + (2 / n) * R * g2 * g1,
            4: 2 * g5 * g1 - g1 ** 3 - q * w * g2 * g1 * g1,
            5: (
                2 * g2 * g5 - 2 * g2 * g3 - g8
                + (2 * (n - 3) / (n - 4)) * w * g2 * g4
                - (2 / n) * R * g2 * g2
            ),
            6: (
                g2 * g5 + g4 * g1 - g2 * g1 * g1
                - (2 * (n - 3) / (n - 4)) * w * g2 * g2 * g1
            ),
            7: 2 * g2 * g4 - g2 * g2 * g1 - ((3 * n - 10) / (n - 4)) * w * g2 ** 3,
            8: g5 - g1 * g1 - (2 / (n - 4)) * w * g2 * g1,
            9: 2 * g5 - 2 * g3 + (2 / (n - 4)) * w * g4 - (2 / n) * R * g2,
            10: g4 - g2 * g1 - q * w * g2 * g2,
            11: g1 - ((n - 6) / (n - 4)) * w * g2,
        }
        if i not in table:
            raise KeyError(f"no integrand with index {i} in the general family")
        return AIntegrand("general", i, self._a_weight(i) * table[i])

    def a_alternative(self, i: int) -> JetExpr:
        n = self.ctx.n
        g1, g2, g4, g8, g13, w = self.g1, self.g2, self.g4, self.g8, self.g13, self.w
        q = (n - 2) / (n - 4)
        if i == 3:
            expr = self.g6 - g13 * g1 - q * w * g4 * g1
        elif i == 5:
            expr = g2 * g13 - g8 + (2 * (n - 3) / (n - 4)) * w * g2 * g4
        elif i == 9:
            expr = g13 + (2 / (n - 4)) * w * g4
        else:
            raise KeyError(f"no alternative display for A{i} in the general family")
        return self._a_weight(i) * expr

    ALT_INDICES = (3, 5, 9)
    NUM_A = 11

    def lead_bracket(self) -> JetExpr:
        """(Delta u - ((n+2)/(n-4)) u^{-1}|grad u|^2) acting against the
        fourth-order operator applied to u."""
        n = self.ctx.n
        _, c1, c0 = paneitz_einstein(n, 1)
        R, u = self.R, self.u
        op = self.g9 + c1 * R * self.g1 + c0 * R * R * u
        test = self.g1 - ((n + 2) / (n - 4)) * self.w * self.g2
        return self.ctx.weight_pow(-2 / (n - 4)) * test * op

    def combo_display(self) -> JetExpr:
        n = self.ctx.n
        g1, g2, g3, g4, g5, g6, g7, g8, w, R = (
            self.g1, self.g2, self.g3, self.g4, self.g5, self.g6, self.g7,
            self.g8, self.w, self.R,
        )
        pref = self.ctx.weight_pow(-2 / (n - 4)) * (8 / (n - 4) ** 2)
        return pref * (
            2 * (n - 1) ** 2 * g7
            - (2 * n * (n - 1) / (n - 4)) * w * g6
            - (4 * (n - 1) * (n ** 3 - n ** 2 - 3 * n + 4) / (n * (n - 4))) * w * g5 * g1
            + (4 * (n - 1) ** 2 * (n - 2) * (n + 4) / (n * (n - 4) ** 2)) * w * w * g2 * g5
            - (4 * (n - 1) * (n - 2) / (n - 4) ** 2) * w * w * g8
            - (2 * (n - 1) * (n - 2) * (n + 2) * (2 * n ** 2 - 5 * n + 4) / (n * (n - 4) ** 2))
            * w * w * g4 * g1
            + (8 * (n - 1) * (n - 2) * (3 * n ** 2 - 9 * n + 4) / (n * (n - 4) ** 3))
            * w ** 3 * g2 * g4
            - (8 * (n - 1) * (n - 2) / (n - 4) ** 2) * w * w * g2 * g3
            + (4 * (n - 1) * (n ** 2 - 2) / (n - 4)) * w * g3 * g1
            - (4 * (n - 1) * (n ** 2 - 2) / (n * (n - 4))) * w * g1 ** 3
            + (2 * (n - 1) * (n - 2) ** 2 * (n - 3) * (n + 2) / (n * (n - 4) ** 2))
            * w * w * g2 * g1 * g1
            + (4 * (n - 1) * (n - 2) * (n ** 4 - 4 * n ** 3 - 3 * n ** 2 + 26 * n - 28)
               / (n * (n - 4) ** 3)) * w ** 3 * g2 * g2 * g1
            - (8 * (n - 1) ** 2 * (n - 2) ** 2 * (3 * n - 10) / (n * (n - 4) ** 4))
            * w ** 4 * g2 ** 3
            - 4 * (n - 1) * R * g5
            - ((n ** 3 - 10 * n + 8) / (n - 4)) * R * w * g4
            + (n ** 2 + 2 * n - 4) * R * g3
            - ((n ** 2 + 2 * n - 4) / n) * R * g1 * g1
            + (2 * (n ** 2 - 2 * n + 2) / (n - 4)) * R * w * g2 * g1
            + ((n - 1) * (n - 2) * (n ** 3 - 12 * n - 8) / (n * (n - 4) ** 2))
            * R * w * w * g2 * g2
            + 2 * R * R * g2
        )

    def combination(self):
        n = self.ctx.n
        one = self.ctx.one()
        R, R2 = self.R, self.R * self.R
        coeffs = {
            0: (16 * (n - 1) ** 2 / (n - 4) ** 2) * one,
            1: (-(16 * (n - 1) ** 2 / (n - 4) ** 2)) * one,
            2: (16 * (n - 1) ** 2 * (n + 2) / (n - 4) ** 3) * one,
            3: (16 * (n - 1) * (n ** 2 - 2) / (n - 4) ** 3) * one,
            4: (32 * (n - 1) * (n ** 2 - 2) / (n * (n - 4) ** 3)) * one,
            5: (32 * (n - 1) * (n - 2) / (n - 4) ** 4) * one,
            6: (-(16 * (n - 1) * (n - 2) * (n ** 3 - n ** 2 - 4 * n + 8)
                 / (n * (n - 4) ** 4))) * one,
            7: (64 * (n - 1) ** 2 * (n - 2) ** 2 / (n * (n - 4) ** 5)) * one,
            8: (8 * n * (n - 2) / (n - 4) ** 2) * R,
            9: (-(4 * (n ** 2 + 2 * n - 4) / (n - 4) ** 2)) * R,
            10: (-(8 * (n - 1) * (n ** 2 - 12) / (n - 4) ** 3)) * R,
            11: (-((n - 2) * (n + 2) / (n * (n - 4)))) * R2,
        }
        return coeffs, self.combo_display()

    # -- assembled Obata-type integrand ----------------------------------------

    def conformal_datum(self) -> JetExpr:
        n = self.ctx.n
        return self.ctx.weight_pow(-4 / (n - 4))

    def sqrt_datum(self) -> JetExpr:
        n = self.ctx.n
        return self.ctx.weight_pow(-2 / (n - 4))

    def theta_prefactor(self) -> JetExpr:
        n = self.ctx.n
        return self.ctx.weight_pow(2 * (n - 1) / (n - 4))


def make_family(case: str, nval=None):
    if case == "dim4":
        return Dim4Family()
    if case == "general":
        return GeneralFamily(nval)
    raise ValueError(case)


# ---------------------------------------------------------------------------
# assembled Theta construction (through the definitions, not the displays)


def _theta_bulk_factor(fam) -> JetExpr:
    """|E|^2 (2(n^2-2) S v + 4(n-1) R v^2 + n(n-1)^2 |grad v|^2), the bulk
    factor of the nonnegative integrand before dividing by (n-2)^2."""
    n = fam.ctx.n
    E = fam.einstein_engine()
    v = fam.conformal_datum()
    S = fam.scal_display()
    return contract(E, E) * (
        (2 * (n * n - 2)) * S * v
        + (4 * (n - 1)) * fam.ctx.gen(GEN_R) * v * v
        + (n * (n - 1) ** 2) * v.grad().norm2()
    )


def theta2(fam) -> JetExpr:
    """The nonnegative integrand, assembled from the trace-free Ricci tensor
    and the conformal scalar curvature of the conformal datum."""
    n = fam.ctx.n
    S = fam.scal_display()
    E = fam.einstein_engine()
    v = fam.conformal_datum()
    Ev = E.apply(v.grad())
    c = (3 * n - 4) / (2 * (n - 2))
    X = S.grad() + Ev * fam.ctx.const(c)
    part1 = X.norm2() - (c * c) * Ev.norm2()
    part2 = _theta_bulk_factor(fam) * (RF_ONE / (n - 2) ** 2)
    return (fam.theta_prefactor() * (part1 + part2)).normal_form()


def theta2_display_sum(fam) -> JetExpr:
    """The two displayed halves recombined with the Theta prefactor.

    The dimension-4 bulk display already carries the 1/(n-2)^2 factor; the
    general-family display keeps it outside.
    """
    n = fam.ctx.n
    bulk = fam.theta_bulk_display()
    if fam.case == "general":
        bulk = bulk * (RF_ONE / (n - 2) ** 2)
    return (fam.theta_prefactor() * (fam.theta_grad_display() + bulk)).normal_form()


# ---------------------------------------------------------------------------
# identity catalog and pointwise verification


IDENTITIES: List[Tuple[str, str, str]] = [
    # (ident, family, description)
    ("d4-scal", "dim4", "conformal scalar curvature: chain-rule expansion equals displayed polynomial"),
    ("d4-scal-grad", "dim4", "gradient of the conformal scalar curvature equals displayed vector"),
    ("d4-einstein", "dim4", "trace-free Ricci of the conformal metric equals displayed tensor"),
    ("d4-einstein-norm", "dim4", "squared norm of the trace-free Ricci equals displayed polynomial"),
    ("d4-einstein-grad-norm", "dim4", "squared norm of the trace-free Ricci applied to the datum gradient"),
    ("d4-theta-grad-part", "dim4", "gradient half of the nonnegative integrand equals displayed polynomial"),
    ("d4-theta-bulk-part", "dim4", "bulk half of the nonnegative integrand equals displayed polynomial"),
    ("d4-a2-alt", "dim4", "second displayed form of A2 equals the first"),
    ("d4-a5-alt", "dim4", "second displayed form of A5 equals the first"),
    ("d4-a7-alt", "dim4", "second displayed form of A7 equals the first"),
    ("d4-a10-alt", "dim4", "second displayed form of A10 equals the first"),
    ("gen-scal", "general", "conformal scalar curvature: chain-rule expansion equals displayed polynomial"),
    ("gen-scal-grad", "general", "gradient of the conformal scalar curvature equals displayed vector"),
    ("gen-einstein", "general", "trace-free Ricci of the conformal metric equals displayed tensor"),
    ("gen-einstein-norm", "general", "squared norm of the trace-free Ricci equals displayed polynomial"),
    ("gen-einstein-grad-norm", "general", "squared norm of the trace-free Ricci applied to the datum gradient"),
    ("gen-theta-grad-part", "general", "gradient half of the nonnegative integrand equals displayed polynomial"),
    ("gen-theta-bulk-part", "general", "bulk half of the nonnegative integrand equals displayed polynomial"),
    ("gen-a3-alt", "general", "second displayed form of A3 equals the first"),
    ("gen-a5-alt", "general", "second displayed form of A5 equals the first"),
    ("gen-a9-alt", "general", "second displayed form of A9 equals the first"),
]


def verify_pointwise(ident: str, fam=None) -> Residual:
    """Left minus right in normal form for one catalog identity."""
    family = dict((i, f) for i, f, _ in IDENTITIES)
    if ident not in family:
        raise KeyError(f"unknown identity {ident}")
    if fam is None:
        fam = make_family(family[ident])
    if fam.case != family[ident]:
        raise ValueError(f"{ident} belongs to the {family[ident]} family")

    if ident in ("d4-scal", "gen-scal"):
        return _scalar_residual(ident, fam.scal_chain(), fam.scal_display())
    if ident in ("d4-scal-grad", "gen-scal-grad"):
        return _vector_residual(ident, fam.scal_display().grad(), fam.scal_grad_display())
    if ident in ("d4-einstein", "gen-einstein"):
        return _tensor_residual(ident, fam.einstein_engine(), fam.einstein_display())
    if ident in ("d4-einstein-norm", "gen-einstein-norm"):
        E = fam.einstein_engine()
        return _scalar_residual(ident, contract(E, E), fam.einstein_norm_display())
    if ident in ("d4-einstein-grad-norm", "gen-einstein-grad-norm"):
        E = fam.einstein_engine()
        Ev = E.apply(fam.conformal_datum().grad())
        return _scalar_residual(ident, Ev.norm2(), fam.applied_norm_display())
    if ident in ("d4-theta-grad-part", "gen-theta-grad-part"):
        n = fam.ctx.n
        E = fam.einstein_engine()
        v = fam.conformal_datum()
        Ev = E.apply(v.grad())
        c = (3 * n - 4) / (2 * (n - 2))
        X = fam.scal_display().grad() + Ev * fam.ctx.const(c)
        lhs = X.norm2() - (c * c) * Ev.norm2()
        return _scalar_residual(ident, lhs, fam.theta_grad_display())
    if ident in ("d4-theta-bulk-part", "gen-theta-bulk-part"):
        n = fam.ctx.n
        lhs = _theta_bulk_factor(fam)
        if fam.case == "dim4":
            # the displayed left side absorbs the 1/(n-2)^2 = 1/4 factor
            lhs = lhs * (RF_ONE / (n - 2) ** 2)
        return _scalar_residual(ident, lhs, fam.theta_bulk_display())
    if ident.endswith("-alt"):
        i = int(ident.split("-")[1][1:])
        first = fam.a_integrand(i).integrand
        second = fam.a_alternative(i)
        return _scalar_residual(ident, second, first)
    raise KeyError(ident)


def verify_combination(fam, prover=None) -> dict:
    """Check that the displayed coefficient combination of the zero-integral
    integrands reproduces the displayed target, pointwise first and modulo
    an exact divergence as fallback."""
    coeffs, target = fam.combination()
    total = coeffs[0] * fam.lead_bracket()
    for i in range(1, fam.NUM_A + 1):
        total = total + coeffs[i] * fam.a_integrand(i).integrand
    residual = (total - target).normal_form()
    if residual.is_zero():
        return {"status": "pointwise-zero", "residual": residual, "certificate": None}
    if prover is not None:
        cert = prover(residual)
        if cert is not None:
            return {"status": "certified-divergence", "residual": residual, "certificate": cert}
    return {"status": "fail", "residual": residual, "certificate": None}


def final_assembly(fam) -> Residual:
    """The displayed combination target equals the assembled nonnegative
    integrand (both halves with the Theta prefactor), pointwise."""
    combo = fam.combination()[1]
    display_sum = theta2_display_sum(fam)
    r1 = (combo - display_sum).normal_form()
    r2 = (theta2(fam) - display_sum).normal_form()
    ident = "d4-assembly" if fam.case == "dim4" else "gen-assembly"
    return Residual(ident, "scalar", [r1, r2])
