"""Axially symmetric numerics on round spheres and on the product of two
round 2-spheres.

Everything is driven by a single polar variable x = cos(theta).  Conformal
factors are either exact polynomials in x (Profile) or closed-form smooth
expressions (dilation family); derivatives are always taken symbolically on
the datum, never by differencing samples.  The catalog generators reduce to
one-dimensional expressions through the polar Laplacian
L(P) = d*x*P' - (1-x^2)*P'' (d the Laplacian dimension) and the frame
components of axial Hessians.

Integration is Gauss-Jacobi with the surface measure weight (1-x^2)^((d-2)/2)
absorbed into the rule; for even-dimensional spheres and polynomial
integrands exact rational moments are available as a cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.special import eval_gegenbauer, roots_jacobi

from .ring import RF
from .jets import (
    GEN_R, GEN_LAP, GEN_GRAD2, GEN_HESS2, GEN_GG, GEN_GL, GEN_GLG, GEN_GL2,
    GEN_GG2, GEN_LAP2, GEN_GLL, GEN_HH, GEN_HGG, GEN_LG2, GEN_ROUGH, GEN_W,
    JetContext, JetExpr, V1, V2, V3, V4,
)
from . import identities as paper
from .identities import paneitz_einstein, q_einstein


def sphere_volume(k: int) -> float:
    """Volume of the unit round k-sphere."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class Geometry:
    """An Einstein background: a unit round sphere or the product of two."""

    kind: str          # "sphere" | "s2xs2"
    n: int             # ambient dimension
    lap_dim: int       # dimension entering the polar Laplacian
    kappa: int         # multiplicity of the angular frame directions
    R: int             # scalar curvature
    measure_const: float
    name: str

    @staticmethod
    def sphere(n: int) -> "Geometry":
        if n < 3:
            raise ValueError("spheres of dimension >= 3 only")
        return Geometry(
            "sphere", n, n, n - 1, n * (n - 1), sphere_volume(n - 1), f"S{n}"
        )

    @staticmethod
    def s2xs2() -> "Geometry":
        # profiles live on the first factor; the second contributes its volume
        return Geometry(
            "s2xs2", 4, 2, 1, 4, sphere_volume(2) * 2.0 * math.pi, "S2xS2"
        )

    @property
    def jacobi_alpha(self) -> float:
        return (self.lap_dim - 2) / 2.0

    def case(self) -> str:
        return "dim4" if self.n == 4 else "general"

    def family(self):
        if self.n == 4:
            return paper.make_family("dim4")
        return paper.make_family("general", Fraction(self.n))

    def volume(self) -> float:
        if self.kind == "sphere":
            return sphere_volume(self.n)
        return sphere_volume(2) ** 2


def make_geometry(name: str, n: Optional[int] = None) -> Geometry:
    if name == "sphere":
        return Geometry.sphere(n if n is not None else 4)
    if name == "s2xs2":
        return Geometry.s2xs2()
    raise ValueError(name)


# ---------------------------------------------------------------------------
# conformal-factor data


@dataclass(frozen=True)
class Profile:
    """Polynomial in x = cos(theta) with exact rational coefficients."""

    coeffs: Tuple[Fraction, ...]

    @staticmethod
    def of(*cs) -> "Profile":
        return Profile(tuple(Fraction(c) for c in cs))

    def to_sympy(self, x):
        acc = sp.Integer(0)
        for c in reversed(self.coeffs):
            acc = acc * x + sp.Rational(c.numerator, c.denominator)
        return acc

    def eval_fraction(self, v: Fraction) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * v + c
        return acc

    def __call__(self, xs):
        acc = np.zeros_like(np.asarray(xs, dtype=float))
        for c in reversed(self.coeffs):
            acc = acc * xs + float(c)
        return acc

    def min_on_grid(self, m: int = 2001) -> float:
        xs = np.linspace(-1.0, 1.0, m)
        return float(np.min(self(xs)))

    def is_positive(self) -> bool:
        return self.min_on_grid() > 0.0

    def __str__(self):
        return " + ".join(f"({c})*x^{k}" if k else f"({c})" for k, c in enumerate(self.coeffs))


class AxialDatum:
    """A smooth axially symmetric function of x = cos(theta), kept symbolic."""

    _x = sp.Symbol("x")

    def __init__(self, expr, label: str = ""):
        self.x = AxialDatum._x
        self.expr = sp.sympify(expr)
        self.label = label

    @staticmethod
    def from_profile(p: Profile) -> "AxialDatum":
        return AxialDatum(p.to_sympy(AxialDatum._x), label=str(p))

    def fn(self, expr=None):
        e = self.expr if expr is None else expr
        f = sp.lambdify(self.x, e, "numpy")

        def wrapped(xs):
            out = f(xs)
            return np.broadcast_to(np.asarray(out, dtype=float), np.shape(xs)).copy()

        return wrapped


def mobius_factor(geom: Geometry, s: float):
    """Conformal datum obtained by pulling the round metric back under a
    dilation of parameter s; validated downstream by its equation residual."""
    if geom.kind != "sphere":
        raise ValueError("the dilation family lives on round spheres")
    x = AxialDatum._x
    c, sh = math.cosh(s), math.sinh(s)
    base = sp.Float(c, 17) + sp.Float(sh, 17) * x
    if geom.n == 4:
        return AxialDatum(-sp.log(base), label=f"mobius4(s={s})")
    expo = sp.Rational(-(geom.n - 4), 2)
    return AxialDatum(base ** expo, label=f"mobius{geom.n}(s={s})")


# ---------------------------------------------------------------------------
# jet fields


def _sym_fields(geom: Geometry, datum: AxialDatum) -> dict:
    """All one-dimensional reductions as sympy expressions in x."""
    x = datum.x
    u = datum.expr
    d = geom.lap_dim
    k = geom.kappa
    ax2 = 1 - x ** 2
    D = lambda e: sp.diff(e, x)

    p1 = D(u)
    p2 = D(p1)
    L = d * x * p1 - ax2 * p2
    L1, L2 = D(L), D(D(L))
    LL = d * x * L1 - ax2 * L2
    LL1 = D(LL)
    aH, bH = -x * p1 + ax2 * p2, -x * p1
    aT, bT = -x * L1 + ax2 * L2, -x * L1
    g2 = ax2 * p1 ** 2
    g2x = D(g2)

    fields = {
        "u": u,
        GEN_LAP: L,
        GEN_GRAD2: g2,
        GEN_HESS2: aH ** 2 + k * bH ** 2,
        GEN_GG: ax2 * g2x * p1,
        GEN_GL: ax2 * L1 * p1,
        GEN_GLG: ax2 * L1 * g2x,
        GEN_GL2: ax2 * L1 ** 2,
        GEN_GG2: ax2 * g2x ** 2,
        GEN_LAP2: LL,
        GEN_GLL: ax2 * LL1 * p1,
        GEN_HH: aH * aT + k * bH * bT,
        GEN_HGG: aT * ax2 * p1 ** 2,
        # direct polar Laplacian of |grad u|^2: independent of the rewrite rule
        GEN_LG2: d * x * D(g2) - ax2 * D(D(g2)),
    }
    fields["_sigma"] = {V1: L1, V2: g2x, V3: p1, V4: LL1}
    fields["_tensor"] = {"H": (aH, bH), "T": (aT, bT)}
    return fields


def _rough_pairing_theta(geom: Geometry, datum: AxialDatum):
    """<rough-Laplacian d(Delta u), du> computed directly in the polar
    coordinate, as an oracle for the reduction rule (interior nodes only)."""
    x = datum.x
    th = sp.Symbol("theta")
    fields = _sym_fields(geom, datum)
    L_theta = fields[GEN_LAP].subs(x, sp.cos(th))
    h = sp.diff(L_theta, th)
    k = geom.kappa
    rough = -sp.diff(h, th, 2) - k * sp.cot(th) * sp.diff(h, th) + k * sp.cot(th) ** 2 * h
    du = sp.diff(datum.expr.subs(x, sp.cos(th)), th)
    f = sp.lambdify(th, rough * du, "numpy")

    def wrapped(xs):
        return np.asarray(f(np.arccos(np.clip(xs, -1.0, 1.0))), dtype=float)

    return wrapped


class JetField:
    """Numeric samples of every catalog generator for one datum."""

    def __init__(self, geom: Geometry, datum, nodes: np.ndarray,
                 with_rough: bool = False):
        if isinstance(datum, Profile):
            datum = AxialDatum.from_profile(datum)
        self.geom = geom
        self.datum = datum
        self.nodes = np.asarray(nodes, dtype=float)
        self._sym = _sym_fields(geom, datum)
        self._vals: Dict = {}
        for key in (
            "u", GEN_LAP, GEN_GRAD2, GEN_HESS2, GEN_GG, GEN_GL, GEN_GLG,
            GEN_GL2, GEN_GG2, GEN_LAP2, GEN_GLL, GEN_HH, GEN_HGG, GEN_LG2,
        ):
            self._vals[key] = datum.fn(self._sym[key])(self.nodes)
        self._sigma = {
            k: datum.fn(e)(self.nodes) for k, e in self._sym["_sigma"].items()
        }
        self._tensor = {
            k: (datum.fn(a)(self.nodes), datum.fn(b)(self.nodes))
            for k, (a, b) in self._sym["_tensor"].items()
        }
        if with_rough:
            self._vals[GEN_ROUGH] = _rough_pairing_theta(geom, datum)(self.nodes)

    def _sigma_of(self, desc):
        if desc in self._sigma:
            return self._sigma[desc]
        if desc[0] == "app":
            a, _ = self._tensor[desc[1]]
            return a * self._sigma_of(desc[2])
        raise KeyError(desc)

    def env(self, ctx: JetContext) -> dict:
        """Evaluation environment for jet expressions in the given context."""
        ax2 = 1.0 - self.nodes ** 2
        env = dict(self._vals)
        env["n"] = self.geom.n
        env[GEN_R] = float(self.geom.R)
        env[GEN_W] = 1.0 / env["u"]
        for key, gid in ctx._mints.items():
            if key[0] == "pair":
                env[gid] = ax2 * self._sigma_of(key[1]) * self._sigma_of(key[2])
            elif key[0] == "tensor2":
                aa, ba = self._tensor[key[1]]
                ab, bb = self._tensor[key[2]]
                env[gid] = aa * ab + self.geom.kappa * ba * bb
        return env


def jet_eval(geom: Geometry, datum, nodes, with_rough: bool = False) -> JetField:
    return JetField(geom, datum, nodes, with_rough=with_rough)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    nodes: int = 400
    tol: float = 1e-9


@lru_cache(maxsize=64)
def _jacobi_rule(n_nodes: int, alpha: float):
    x, w = roots_jacobi(n_nodes, alpha, alpha)
    return np.asarray(x), np.asarray(w)


def quad_nodes(geom: Geometry, n_nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    return _jacobi_rule(n_nodes, geom.jacobi_alpha)


def integrate_samples(geom: Geometry, weights: np.ndarray, values) -> float:
    return float(geom.measure_const * np.dot(weights, values))


def integrate_datum(geom: Geometry, datum, expr_fn, quad: QuadratureSpec,
                    check_doubling: bool = True) -> float:
    """Integrate expr_fn(JetField) over the manifold with a doubling check."""
    x1, w1 = quad_nodes(geom, quad.nodes)
    v1 = integrate_samples(geom, w1, expr_fn(JetField(geom, datum, x1)))
    if not check_doubling:
        return v1
    x2, w2 = quad_nodes(geom, 2 * quad.nodes)
    v2 = integrate_samples(geom, w2, expr_fn(JetField(geom, datum, x2)))
    if abs(v1 - v2) > quad.tol * (1.0 + abs(v2)):
        raise ArithmeticError(
            f"quadrature not converged: {v1} vs {v2} at {quad.nodes} nodes"
        )
    return v2


def exact_moment(m: int, k: int) -> Fraction:
    """Exact value of the integral of x^k (1-x^2)^m over [-1, 1]."""
    if k % 2 == 1:
        return Fraction(0)
    total = Fraction(0)
    for j in range(m + 1):
        total += Fraction((-1) ** j * math.comb(m, j), k + 2 * j + 1)
    return 2 * total


def integrate_exact(geom: Geometry, poly_coeffs: Sequence[Fraction]) -> Fraction:
    """Exact x-integral of a polynomial against the surface weight; the
    transcendental measure constant is kept separate (multiply afterwards)."""
    if geom.lap_dim % 2 != 0:
        raise ValueError("exact moments need an even-dimensional factor")
    m = (geom.lap_dim - 2) // 2
    return sum(
        (Fraction(c) * exact_moment(m, k) for k, c in enumerate(poly_coeffs)),
        Fraction(0),
    )


# ---------------------------------------------------------------------------
# identity residuals


def _a_totals(geom: Geometry, datum, fam, n_nodes: int) -> Dict[int, tuple]:
    x, w = quad_nodes(geom, n_nodes)
    env = JetField(geom, datum, x).env(fam.ctx)
    out = {}
    for i in range(1, fam.NUM_A + 1):
        vals = fam.a_integrand(i).integrand.normal_form().evaluate(env)
        out[i] = (
            integrate_samples(geom, w, vals),
            integrate_samples(geom, w, np.abs(vals)),
        )
    return out


def a_integral_residuals(geom: Geometry, datum, quad: QuadratureSpec,
                         fam=None) -> Dict[int, float]:
    """|integral| / (1 + integral of |integrand|) for every zero-integral
    integrand of the geometry's family."""
    fam = fam or geom.family()
    totals = _a_totals(geom, datum, fam, quad.nodes)
    return {i: abs(t) / (1.0 + m) for i, (t, m) in totals.items()}


def _assembled_sides(geom: Geometry, datum, fam, n_nodes: int) -> tuple:
    n = fam.ctx.n
    lead_const = float((16 * (n - 1) ** 2 / (n - 4) ** 2).eval(geom.n)) \
        if fam.case == "general" else 36.0
    x, w = quad_nodes(geom, n_nodes)
    env = JetField(geom, datum, x).env(fam.ctx)
    lhs = integrate_samples(geom, w, paper.theta2(fam).evaluate(env))
    rhs = lead_const * integrate_samples(
        geom, w, fam.lead_bracket().normal_form().evaluate(env)
    )
    return lhs, rhs


def assembled_identity_residual(geom: Geometry, datum, quad: QuadratureSpec,
                                fam=None) -> float:
    """Relative gap between the integral of the assembled nonnegative
    integrand and the constant times the leading bracket integral."""
    fam = fam or geom.family()
    lhs, rhs = _assembled_sides(geom, datum, fam, quad.nodes)
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1.0)


def verify_integral_identity(geom: Geometry, datum, quad: QuadratureSpec,
                             fam=None) -> dict:
    """Per-integrand and assembled residuals at the requested rule and at
    the doubled rule; the doubling discrepancy is reported alongside."""
    fam = fam or geom.family()
    if fam.case == "general":
        field_check = JetField(geom, datum, np.linspace(-0.999, 0.999, 801))
        if float(np.min(field_check._vals["u"])) <= 0.0:
            raise ValueError("the general family needs a positive datum")

    t1 = _a_totals(geom, datum, fam, quad.nodes)
    t2 = _a_totals(geom, datum, fam, 2 * quad.nodes)
    per_a = {i: abs(t) / (1.0 + m) for i, (t, m) in t2.items()}
    doubling = max(
        abs(t1[i][0] - t2[i][0]) / (1.0 + t2[i][1]) for i in t2
    )

    l1, r1 = _assembled_sides(geom, datum, fam, quad.nodes)
    l2, r2 = _assembled_sides(geom, datum, fam, 2 * quad.nodes)
    assembled = abs(l2 - r2) / (abs(l2) + abs(r2) + 1.0)
    doubling = max(
        doubling,
        abs(l1 - l2) / (abs(l2) + 1.0),
        abs(r1 - r2) / (abs(r2) + 1.0),
    )
    return {
        "per_integrand": per_a,
        "assembled": assembled,
        "doubling": doubling,
        "max_integrand_residual": max(per_a.values()),
    }


# ---------------------------------------------------------------------------
# equation residuals, the nonnegative integrand, path scans


def _operator_arrays(geom: Geometry, datum, xs) -> dict:
    field = JetField(geom, datum, xs)
    return {
        "u": field._vals["u"],
        "lap": field._vals[GEN_LAP],
        "bilap": field._vals[GEN_LAP2],
        "field": field,
    }


def pde_residual(geom: Geometry, datum, p: float, qtilde: float = 1.0,
                 n_nodes: int = 801) -> float:
    """Sup-norm residual of the constant-Q equation for the given datum."""
    xs, _ = quad_nodes(geom, n_nodes)
    ops = _operator_arrays(geom, datum, xs)
    n, R = geom.n, geom.R
    _, c1, c0 = paneitz_einstein(n, R)
    c1f, c0f = float(c1.eval(n)), float(c0.eval(n))
    u, L, LL = ops["u"], ops["lap"], ops["bilap"]
    if geom.case() == "dim4":
        Q = float(q_einstein(n, R).eval(n))
        res = LL + c1f * L + Q - qtilde * np.exp(p * u)
    else:
        if np.min(u) <= 0:
            raise ValueError("positive data only in the general family")
        res = LL + c1f * L + c0f * u - qtilde * np.power(u, p - 1.0)
    return float(np.max(np.abs(res)))


def theta2_eval(geom: Geometry, datum, quad: QuadratureSpec, fam=None) -> dict:
    """Samples of the nonnegative integrand with the scalar-curvature
    positivity precondition checked (violations reported, not asserted)."""
    fam = fam or geom.family()
    theta = paper.theta2(fam)
    scal = fam.scal_display().normal_form()
    x, w = quad_nodes(geom, quad.nodes)
    env = JetField(geom, datum, x).env(fam.ctx)
    tvals = np.asarray(theta.evaluate(env), dtype=float)
    svals = np.asarray(scal.evaluate(env), dtype=float)
    return {
        "min": float(np.min(tvals)),
        "sup": float(np.max(np.abs(tvals))),
        "l2": float(math.sqrt(max(integrate_samples(geom, w, tvals ** 2), 0.0))),
        "scal_positive": bool(np.min(svals) > 0.0),
        "scal_min": float(np.min(svals)),
    }


def gm_path_scan(geom: Geometry, datum, steps: int = 50, n_nodes: int = 801) -> dict:
    """Minimum of the conformal scalar curvature along the interpolation
    path from the background to the conformal datum."""
    xs, _ = quad_nodes(geom, n_nodes)
    field = JetField(geom, datum, xs)
    u = field._vals["u"]
    L = field._vals[GEN_LAP]
    g2 = field._vals[GEN_GRAD2]
    n, R = geom.n, float(geom.R)
    ts = np.linspace(0.0, 1.0, steps)
    mins = []
    for t in ts:
        if geom.case() == "dim4":
            scal = np.exp(-2.0 * t * u) * (6.0 * t * L - 6.0 * t * t * g2 + R)
        else:
            U = 1.0 - t + t * u
            if np.min(U) <= 0.0:
                mins.append(float("-inf"))
                continue
            nn = float(n)
            scal = np.power(U, -nn / (nn - 4.0)) * (
                (4.0 * (nn - 1.0) / (nn - 4.0)) * t * L
                - (8.0 * (nn - 1.0) / (nn - 4.0) ** 2) * (t * t * g2) / U
                + R * U
            )
        mins.append(float(np.min(scal)))
    overall = min(mins)
    return {"min": overall, "per_step": mins, "steps": steps}


def th1_bookkeeping(geom: Geometry, datum, qtilde: float,
                    quad: QuadratureSpec) -> Tuple[float, float]:
    """Both sides of the integrated transformation law.

    Dimension 4: Q vol(M) against qtilde * integral of e^{4u}.  Otherwise
    the zeroth-order pairing gives Q * integral of u against qtilde *
    integral of u^{(n+4)/(n-4)}.
    """
    n, R = geom.n, geom.R
    Q = float(q_einstein(n, R).eval(n))
    x, w = quad_nodes(geom, quad.nodes)
    u = JetField(geom, datum, x)._vals["u"]
    if geom.case() == "dim4":
        lhs = Q * integrate_samples(geom, w, np.ones_like(u))
        rhs = qtilde * integrate_samples(geom, w, np.exp(4.0 * u))
    else:
        expo = (n + 4.0) / (n - 4.0)
        lhs = Q * integrate_samples(geom, w, u)
        rhs = qtilde * integrate_samples(geom, w, np.power(u, expo))
    return lhs, rhs


# ---------------------------------------------------------------------------
# spectral Newton solver


class SpectralBasis:
    """Orthonormalized Gegenbauer-type eigenbasis of the polar Laplacian."""

    def __init__(self, geom: Geometry, modes: int, n_nodes: int = 200):
        self.geom = geom
        self.modes = modes
        self.x, self.w = quad_nodes(geom, n_nodes)
        lam = (geom.lap_dim - 1) / 2.0
        B = np.stack(
            [eval_gegenbauer(k, lam, self.x) for k in range(modes)], axis=1
        )
        norms = np.sqrt(np.einsum("i,ik,ik->k", self.w, B, B))
        self.B = B / norms
        self.eigs = np.array(
            [k * (k + geom.lap_dim - 1) for k in range(modes)], dtype=float
        )

    def project(self, values: np.ndarray) -> np.ndarray:
        return self.B.T @ (self.w * values)

    def synth(self, coeffs: np.ndarray) -> np.ndarray:
        return self.B @ coeffs


def newton_solve(geom: Geometry, p: float, init: np.ndarray, modes: int = 32,
                 tol: float = 1e-11, max_iter: int = 60) -> dict:
    """Damped spectral Newton iteration for the constant-Q equation.

    Returns the coefficient vector, the Galerkin residual trace, and the
    spectral mass outside the constant mode.
    """
    basis = SpectralBasis(geom, modes)
    n, R = geom.n, geom.R
    _, c1, c0 = paneitz_einstein(n, R)
    c1f, c0f = float(c1.eval(n)), float(c0.eval(n))
    Q = float(q_einstein(n, R).eval(n))
    lam = basis.eigs
    dim4 = geom.case() == "dim4"
    diag = lam ** 2 + c1f * lam + (0.0 if dim4 else c0f)

    c = np.zeros(modes)
    c[: len(init)] = init

    def residual(cv):
        u = basis.synth(cv)
        if dim4:
            nl = Q - np.exp(p * u)
        else:
            if np.min(u) <= 0:
                return None, None
            nl = -np.power(u, p - 1.0)
        return diag * cv + basis.project(nl), u

    F, u = residual(c)
    if F is None:
        raise ValueError("initial datum leaves the positive cone")
    trace = [float(np.linalg.norm(F))]
    note = ""
    for _ in range(max_iter):
        if trace[-1] <= tol:
            break
        if dim4:
            Jnl = -p * (basis.B.T * (basis.w * np.exp(p * u))) @ basis.B
        else:
            Jnl = -(p - 1.0) * (basis.B.T * (basis.w * np.power(u, p - 2.0))) @ basis.B
        J = np.diag(diag) + Jnl
        try:
            cond = np.linalg.cond(J)
            if cond > 1e12:
                note = f"near-singular Jacobian (cond={cond:.2e}), least-squares step"
                step = np.linalg.lstsq(J, -F, rcond=None)[0]
            else:
                step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            kmax = int(np.argmax(np.abs(np.diag(J))))
            raise ArithmeticError(f"singular Jacobian near mode {kmax}")
        lam_d = 1.0
        normF = np.linalg.norm(F)
        for _ in range(30):
            Fn, un = residual(c + lam_d * step)
            if Fn is not None and np.linalg.norm(Fn) <= (1.0 - 1e-4 * lam_d) * normF:
                break
            lam_d *= 0.5
        else:
            note = note or "line search stalled"
            break
        c = c + lam_d * step
        F, u = Fn, un
        trace.append(float(np.linalg.norm(F)))
    return {
        "coeffs": c,
        "residual": trace[-1],
        "trace": trace,
        "converged": trace[-1] <= tol,
        "nonconstant_mass": float(np.linalg.norm(c[1:])),
        "note": note,
        "basis": basis,
    }
