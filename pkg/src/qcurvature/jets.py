"""Scalar differential invariants of a function u on an Einstein background.

The algebra is generated by a fixed catalog of scalar jets (Laplacian,
gradient norms, Hessian contractions, ...) with coefficients in Q(n) and a
global conformal weight: integer multiples of u in an exponential prefactor
for the dimension-4 family, rational-function powers of u for the general
family.  Vectors and symmetric 2-tensors exist only to be contracted or
diverged; every inner product reduces to catalog scalars through fixed
tables, and pairings outside the tables mint fresh generators on demand.

Sign convention throughout: the Laplacian is the geometer's positive one,
Delta = -div grad, so trace(Hess u) = -Delta u.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Optional, Tuple, Union

from .ring import RF, RF_ONE, RF_ZERO, coerce_rf

# ---------------------------------------------------------------------------
# generator catalog

# fixed ids for the core catalog; minted generators are appended per context
GEN_R = 0        # scalar curvature of the background (a constant)
GEN_LAP = 1      # g1  = Delta u
GEN_GRAD2 = 2    # g2  = |grad u|^2
GEN_HESS2 = 3    # g3  = |Hess u|^2
GEN_GG = 4       # g4  = <grad|grad u|^2, grad u>
GEN_GL = 5       # g5  = <grad Delta u, grad u>
GEN_GLG = 6      # g6  = <grad Delta u, grad|grad u|^2>
GEN_GL2 = 7      # g7  = |grad Delta u|^2
GEN_GG2 = 8      # g8  = |grad|grad u|^2|^2
GEN_LAP2 = 9     # g9  = Delta^2 u
GEN_GLL = 10     # g10 = <grad Delta^2 u, grad u>
GEN_HH = 11      # g11 = <Hess Delta u, Hess u>
GEN_HGG = 12     # g12 = Hess Delta u (grad u, grad u)
GEN_LG2 = 13     # g13 = Delta |grad u|^2          (reducible alias)
GEN_ROUGH = 14   # g14 = <rough-Laplacian d Delta u, du>  (reducible alias)
GEN_W = 15       # w   = 1/u  (general family only; Laurent exponents allowed)

CORE_NAMES = {
    GEN_R: "R",
    GEN_LAP: "Δu",
    GEN_GRAD2: "|∇u|²",
    GEN_HESS2: "|∇²u|²",
    GEN_GG: "⟨∇|∇u|²,∇u⟩",
    GEN_GL: "⟨∇Δu,∇u⟩",
    GEN_GLG: "⟨∇Δu,∇|∇u|²⟩",
    GEN_GL2: "|∇Δu|²",
    GEN_GG2: "|∇|∇u|²|²",
    GEN_LAP2: "Δ²u",
    GEN_GLL: "⟨∇Δ²u,∇u⟩",
    GEN_HH: "⟨∇²Δu,∇²u⟩",
    GEN_HGG: "∇²Δu(∇u,∇u)",
    GEN_LG2: "Δ|∇u|²",
    GEN_ROUGH: "⟨Δ̄dΔu,du⟩",
    GEN_W: "u⁻¹",
}

# vector basis keys: ("V", i) with
#   V1 = grad Delta u, V2 = grad|grad u|^2, V3 = grad u, V4 = grad Delta^2 u
# applied vectors: ("app", S, ("V", i)) with S in {"H": Hess u, "T": Hess Delta u}
V1 = ("V", 1)
V2 = ("V", 2)
V3 = ("V", 3)
V4 = ("V", 4)

VEC_NAMES = {V1: "∇Δu", V2: "∇|∇u|²", V3: "∇u", V4: "∇Δ²u"}
TENSOR_NAMES = {"H": "∇²u", "T": "∇²Δu", "P": "∇u⊗∇u", "G": "g"}


def vec_name(key) -> str:
    if key in VEC_NAMES:
        return VEC_NAMES[key]
    if key[0] == "app":
        return f"{TENSOR_NAMES[key[1]]}({vec_name(key[2])})"
    raise KeyError(key)


class GenInfo:
    """Catalog entry: display name plus a structural recipe the numeric
    backend uses to evaluate the generator on axially symmetric data."""

    __slots__ = ("name", "kind", "data")

    def __init__(self, name, kind, data=None):
        self.name = name
        self.kind = kind  # "core" | "pair" | "tensor2"
        self.data = data


class JetContext:
    """One theorem family: dimension-4 (exponential weights, n = 4) or the
    general family (u-power weights, n symbolic or a specialized value)."""

    def __init__(self, case: str, nval: Optional[Fraction] = None):
        if case not in ("dim4", "general"):
            raise ValueError(case)
        if case == "dim4":
            nval = Fraction(4)
        elif nval is not None:
            nval = Fraction(nval)
            if nval == 4:
                raise ValueError("the general family excludes n = 4")
        self.case = case
        self.nval = nval
        self.n: RF = RF.n() if (case == "general" and nval is None) else RF(nval)
        self.gens: Dict[int, GenInfo] = {
            g: GenInfo(CORE_NAMES[g], "core") for g in CORE_NAMES
        }
        self._mints: Dict[tuple, int] = {}
        self._next_id = 16

    # -- catalog -----------------------------------------------------------

    def mint(self, key: tuple) -> int:
        """Fresh scalar generator for a pairing outside the fixed tables."""
        if key in self._mints:
            return self._mints[key]
        gid = self._next_id
        self._next_id += 1
        if key[0] == "pair":
            name = f"⟨{vec_name(key[1])},{vec_name(key[2])}⟩"
        elif key[0] == "tensor2":
            name = f"⟨{TENSOR_NAMES[key[1]]},{TENSOR_NAMES[key[2]]}⟩"
        else:
            raise ValueError(key)
        self.gens[gid] = GenInfo(name, key[0], key)
        self._mints[key] = gid
        return gid

    # -- scalar atoms --------------------------------------------------------

    def zero(self) -> "JetExpr":
        return JetExpr(self, self.neutral_weight(), {})

    def one(self) -> "JetExpr":
        return JetExpr(self, self.neutral_weight(), {(): RF_ONE})

    def gen(self, gid: int) -> "JetExpr":
        if gid == GEN_W and self.case == "dim4":
            raise ValueError("u-powers do not exist in the dimension-4 family")
        return JetExpr(self, self.neutral_weight(), {((gid, 1),): RF_ONE})

    def const(self, c) -> "JetExpr":
        c = coerce_rf(c)
        if c.is_zero():
            return self.zero()
        return JetExpr(self, self.neutral_weight(), {(): c})

    def neutral_weight(self):
        return Fraction(0) if self.case == "dim4" else RF_ZERO

    def weight_exp(self, k) -> "JetExpr":
        """The pure prefactor e^{k u} (dimension-4 family)."""
        if self.case != "dim4":
            raise ValueError("exponential weights belong to the dimension-4 family")
        return JetExpr(self, Fraction(k), {(): RF_ONE})

    def weight_pow(self, alpha) -> "JetExpr":
        """The pure prefactor u^alpha (general family)."""
        if self.case != "general":
            raise ValueError("power weights belong to the general family")
        return JetExpr(self, coerce_rf(alpha), {(): RF_ONE})

    # reduction targets, built on demand so they track self.n
    def bochner_rhs(self):
        # Delta|grad u|^2 = 2<grad Delta u, grad u> - 2|Hess u|^2 - (2R/n)|grad u|^2
        two_over_n = RF(2) / self.n
        return {
            ((GEN_GL, 1),): RF(2),
            ((GEN_HESS2, 1),): RF(-2),
            ((GEN_R, 1), (GEN_GRAD2, 1)): -two_over_n,
        }

    def weitzenbock_rhs(self):
        # <rough d Delta u, du> = <grad Delta^2 u, grad u> - (R/n)<grad Delta u, grad u>
        return {
            ((GEN_GLL, 1),): RF_ONE,
            ((GEN_R, 1), (GEN_GL, 1)): -(RF_ONE / self.n),
        }


Mono = Tuple[Tuple[int, int], ...]


def _mono_mul(a: Mono, b: Mono) -> Mono:
    d = dict(a)
    for g, e in b:
        d[g] = d.get(g, 0) + e
        if d[g] == 0:
            del d[g]
    return tuple(sorted(d.items()))


def _mono_total_degree(m: Mono) -> int:
    return sum(abs(e) for _, e in m)


def _poly_add(p: dict, q: dict) -> dict:
    out = dict(p)
    for m, c in q.items():
        nc = out.get(m, RF_ZERO) + c
        if nc.is_zero():
            out.pop(m, None)
        else:
            out[m] = nc
    return out


def _poly_mul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul(m1, m2)
            nc = out.get(m, RF_ZERO) + c1 * c2
            if nc.is_zero():
                out.pop(m, None)
            else:
                out[m] = nc
    return out


def _poly_scale(p: dict, c: RF) -> dict:
    if c.is_zero():
        return {}
    return {m: c * v for m, v in p.items()}


class JetExpr:
    """Weighted polynomial in the catalog generators.

    ``weight`` is the exponent k of e^{k u} (dim-4) or the exponent alpha of
    u^alpha (general).  In the general family any integer part of the weight
    is folded into Laurent powers of the generator u^{-1} so that the minimal
    u^{-1}-exponent across monomials is zero; this makes equality of weighted
    expressions decidable by direct comparison.
    """

    __slots__ = ("ctx", "weight", "poly")

    def __init__(self, ctx: JetContext, weight, poly: dict):
        poly = {m: c for m, c in poly.items() if not c.is_zero()}
        if not poly:
            weight = ctx.neutral_weight()
        elif ctx.case == "general":
            wmin = min((dict(m).get(GEN_W, 0) for m in poly), default=0)
            if wmin != 0:
                shifted = {}
                for m, c in poly.items():
                    d = dict(m)
                    e = d.pop(GEN_W, 0) - wmin
                    if e:
                        d[GEN_W] = e
                    shifted[tuple(sorted(d.items()))] = c
                poly = shifted
                weight = weight - wmin
        self.ctx = ctx
        self.weight = weight
        self.poly = poly

    # -- ring structure ----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.poly

    def _check(self, other: "JetExpr"):
        if self.ctx is not other.ctx:
            raise ValueError("mixed jet contexts")

    def __add__(self, other: "JetExpr") -> "JetExpr":
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        a, b = self, other
        apoly = a.poly
        if a.weight != b.weight:
            if self.ctx.case == "dim4":
                raise ValueError(
                    f"incompatible exponential weights {a.weight} vs {b.weight}"
                )
            delta = a.weight - b.weight
            k = delta.is_integer_constant()
            if k is None:
                raise ValueError(
                    f"incompatible u-power weights {a.weight} vs {b.weight}"
                )
            # u^(beta+k) p = u^beta (u^-1)^(-k) p; merge raw dicts at b's weight
            shift = ((GEN_W, -k),)
            apoly = {_mono_mul(m, shift): c for m, c in a.poly.items()}
        return JetExpr(a.ctx, b.weight, _poly_add(apoly, b.poly))

    def __neg__(self) -> "JetExpr":
        return JetExpr(self.ctx, self.weight, {m: -c for m, c in self.poly.items()})

    def __sub__(self, other: "JetExpr") -> "JetExpr":
        return self + (-other)

    def __mul__(self, other) -> "JetExpr":
        if isinstance(other, JetExpr):
            self._check(other)
            return JetExpr(
                self.ctx,
                self.weight + other.weight,
                _poly_mul(self.poly, other.poly),
            )
        return JetExpr(self.ctx, self.weight, _poly_scale(self.poly, coerce_rf(other)))

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "JetExpr":
        if k < 0:
            raise ValueError("negative powers of jet expressions")
        out = self.ctx.one()
        for _ in range(k):
            out = out * self
        return out

    # -- normal form ---------------------------------------------------------

    def _substitute(self, gid: int, replacement: dict) -> "JetExpr":
        if all(gid not in dict(m) for m in self.poly):
            return self
        out: dict = {}
        for m, c in self.poly.items():
            d = dict(m)
            e = d.pop(gid, 0)
            base = {tuple(sorted(d.items())): c}
            for _ in range(e):
                base = _poly_mul(base, replacement)
            out = _poly_add(out, base)
        return JetExpr(self.ctx, self.weight, out)

    def normal_form(self) -> "JetExpr":
        """Eliminate the reducible aliases and re-canonicalize."""
        e = self._substitute(GEN_LG2, self.ctx.bochner_rhs())
        e = e._substitute(GEN_ROUGH, e.ctx.weitzenbock_rhs())
        return e

    def __eq__(self, other) -> bool:
        if not isinstance(other, JetExpr):
            return NotImplemented
        a, b = self.normal_form(), other.normal_form()
        return a.weight == b.weight and a.poly == b.poly

    def __hash__(self):
        nf = self.normal_form()
        return hash((nf.weight, tuple(sorted(nf.poly.items(), key=lambda kv: kv[0]))))

    # -- display -------------------------------------------------------------

    def _weight_str(self) -> str:
        if self.ctx.case == "dim4":
            k = self.weight
            if k == 0:
                return ""
            return f"e^({k}u)·" if k != 1 else "e^(u)·"
        if self.weight.is_zero():
            return ""
        return f"u^({self.weight})·"

    def __str__(self) -> str:
        if not self.poly:
            return "0"
        names = self.ctx.gens
        parts = []
        for m in sorted(self.poly, key=lambda m: (_mono_total_degree(m), m)):
            c = self.poly[m]
            factors = []
            for g, e in m:
                nm = names[g].name
                factors.append(nm if e == 1 else f"{nm}^{e}")
            body = "·".join(factors) if factors else "1"
            parts.append(f"({c})·{body}" if not (c == RF_ONE and factors) else body)
        return self._weight_str() + " + ".join(parts)

    __repr__ = __str__

    # -- calculus ------------------------------------------------------------

    def grad(self) -> "VectorExpr":
        """Gradient, as a vector expression with weighted coefficients.

        Differentiable generators: Delta u, |grad u|^2, <grad Delta u, grad u>
        and u^{-1}; the weight contributes its logarithmic derivative along
        grad u.
        """
        ctx = self.ctx
        comps: Dict[tuple, JetExpr] = {}

        def add(key, expr):
            if expr.is_zero():
                return
            comps[key] = comps.get(key, ctx.zero()) + expr

        for m, c in self.poly.items():
            d = dict(m)
            for g, e in m:
                if g == GEN_R:
                    continue
                rest = dict(d)
                rest[g] = e - 1
                if rest[g] == 0:
                    del rest[g]
                partial = JetExpr(
                    ctx, self.weight, {tuple(sorted(rest.items())): c * e}
                )
                if g == GEN_LAP:
                    add(V1, partial)
                elif g == GEN_GRAD2:
                    add(V2, partial)
                elif g == GEN_GL:
                    # grad<grad Delta u, grad u> = HessDelta(grad u) + Hess(grad Delta u)
                    add(("app", "T", V3), partial)
                    add(("app", "H", V1), partial)
                elif g == GEN_W:
                    # grad u^{-1} = -u^{-2} grad u
                    wshift = JetExpr(ctx, ctx.neutral_weight(), {((GEN_W, 2),): RF(-1)})
                    add(V3, partial * wshift)
                else:
                    raise ValueError(
                        f"generator {ctx.gens[g].name} has no gradient rule"
                    )
        # logarithmic derivative of the weight
        if self.ctx.case == "dim4":
            if self.weight != 0:
                add(V3, self * RF(Fraction(self.weight)))
        else:
            if not self.weight.is_zero():
                wgen = JetExpr(ctx, ctx.neutral_weight(), {((GEN_W, 1),): self.weight})
                add(V3, self * wgen)
        return VectorExpr(ctx, comps)

    def laplacian(self) -> "JetExpr":
        return -divergence(self.grad())

    # -- numerics ------------------------------------------------------------

    def specialize(self, nval) -> "JetExpr":
        """Image of a symbolic general-family expression at a concrete n."""
        if self.ctx.case != "general" or self.ctx.nval is not None:
            raise ValueError("specialize applies to the symbolic general family")
        sub = JetContext("general", nval)
        v = Fraction(nval)
        poly = {}
        for m, c in self.poly.items():
            cv = c.eval(v)
            if cv != 0:
                poly[m] = RF(cv)
        return JetExpr(sub, RF(self.weight.eval(v)), poly)

    def evaluate(self, env: dict):
        """Numeric value; env maps 'u' and generator ids to arrays/floats."""
        total = None
        for m, c in self.poly.items():
            term = float(self._coef_value(c, env))
            acc = term
            for g, e in m:
                acc = acc * env[g] ** e
            total = acc if total is None else total + acc
        if total is None:
            return 0.0
        return total * self._weight_value(env)

    def _coef_value(self, c: RF, env: dict):
        nv = env.get("n")
        if self.ctx.nval is not None:
            nv = self.ctx.nval
        if nv is None:
            raise ValueError("numeric evaluation needs a concrete n")
        return c.eval(nv)

    def _weight_value(self, env: dict):
        import numpy as np

        u = env["u"]
        if self.ctx.case == "dim4":
            k = float(self.weight)
            return np.exp(k * u) if k else 1.0
        if self.weight.is_zero():
            return 1.0
        a = float(self._coef_value(self.weight, env))
        return np.power(u, a)


# ---------------------------------------------------------------------------
# vectors and symmetric 2-tensors


def _pair_key(a, b) -> tuple:
    return ("pair",) + tuple(sorted((a, b)))


def pair(ctx: JetContext, a, b) -> JetExpr:
    """Inner product of two basis vectors, reduced through the Gram table."""
    if a[0] == "app" and b[0] == "V":
        a, b = b, a
    ka, kb = a, b
    if ka[0] == "V" and kb[0] == "V":
        i, j = sorted((ka[1], kb[1]))
        table = {
            (1, 1): {((GEN_GL2, 1),): RF_ONE},
            (1, 2): {((GEN_GLG, 1),): RF_ONE},
            (1, 3): {((GEN_GL, 1),): RF_ONE},
            (2, 2): {((GEN_GG2, 1),): RF_ONE},
            (2, 3): {((GEN_GG, 1),): RF_ONE},
            (3, 3): {((GEN_GRAD2, 1),): RF_ONE},
            (3, 4): {((GEN_GLL, 1),): RF_ONE},
        }
        if (i, j) in table:
            return JetExpr(ctx, ctx.neutral_weight(), table[(i, j)])
        return ctx.gen(ctx.mint(_pair_key(ka, kb)))
    if ka[0] == "V" and kb[0] == "app":
        s, v = kb[1], kb[2]
        return _bilinear(ctx, s, v, ka)
    if ka[0] == "app" and kb[0] == "app":
        return ctx.gen(ctx.mint(_pair_key(ka, kb)))
    raise ValueError((a, b))


def _bilinear(ctx: JetContext, s: str, va, vb) -> JetExpr:
    """S(va, vb) for S in {Hess u, Hess Delta u} and plain basis vectors."""
    i, j = sorted((va[1], vb[1]))
    if s == "H":
        half = RF(Fraction(1, 2))
        table = {
            (3, 3): {((GEN_GG, 1),): half},
            (1, 3): {((GEN_GLG, 1),): half},
            (2, 3): {((GEN_GG2, 1),): half},
        }
        if (i, j) in table:
            return JetExpr(ctx, ctx.neutral_weight(), table[(i, j)])
    elif s == "T":
        if (i, j) == (3, 3):
            return ctx.gen(GEN_HGG)
    else:
        raise ValueError(s)
    return ctx.gen(ctx.mint(_pair_key(("app", s, ("V", i)), ("V", j))))


class VectorExpr:
    """Formal vector field: catalog coefficients on the vector basis."""

    __slots__ = ("ctx", "comps")

    def __init__(self, ctx: JetContext, comps: Dict[tuple, JetExpr]):
        self.ctx = ctx
        self.comps = {k: v for k, v in comps.items() if not v.is_zero()}

    @staticmethod
    def basis(ctx: JetContext, key, coeff: Optional[JetExpr] = None) -> "VectorExpr":
        coeff = ctx.one() if coeff is None else coeff
        if key[0] == "app":
            return apply_tensor_key(ctx, key[1], key[2], coeff)
        return VectorExpr(ctx, {key: coeff})

    def is_zero(self) -> bool:
        return not self.comps

    def __add__(self, other: "VectorExpr") -> "VectorExpr":
        comps = dict(self.comps)
        for k, v in other.comps.items():
            comps[k] = comps.get(k, self.ctx.zero()) + v
        return VectorExpr(self.ctx, comps)

    def __neg__(self) -> "VectorExpr":
        return VectorExpr(self.ctx, {k: -v for k, v in self.comps.items()})

    def __sub__(self, other: "VectorExpr") -> "VectorExpr":
        return self + (-other)

    def __mul__(self, scalar) -> "VectorExpr":
        if isinstance(scalar, JetExpr):
            return VectorExpr(self.ctx, {k: v * scalar for k, v in self.comps.items()})
        return VectorExpr(
            self.ctx, {k: v * coerce_rf(scalar) for k, v in self.comps.items()}
        )

    __rmul__ = __mul__

    def dot(self, other: "VectorExpr") -> JetExpr:
        out = self.ctx.zero()
        for ka, ca in self.comps.items():
            for kb, cb in other.comps.items():
                out = out + ca * cb * pair(self.ctx, ka, kb)
        return out

    def norm2(self) -> JetExpr:
        return self.dot(self)

    def normal_form(self) -> "VectorExpr":
        return VectorExpr(self.ctx, {k: v.normal_form() for k, v in self.comps.items()})

    def __str__(self):
        if not self.comps:
            return "0"
        return " + ".join(f"[{c}]·{vec_name(k)}" for k, c in sorted(self.comps.items()))

    __repr__ = __str__


def apply_tensor_key(ctx: JetContext, s: str, vkey, coeff: JetExpr) -> VectorExpr:
    """S(V) for a basis tensor symbol applied to a plain basis vector."""
    if vkey[0] != "V":
        raise ValueError("tensors apply to plain basis vectors only")
    if s == "G":
        return VectorExpr(ctx, {vkey: coeff})
    if s == "P":
        # (grad u ⊗ grad u)(V) = <grad u, V> grad u
        return VectorExpr(ctx, {V3: coeff * pair(ctx, V3, vkey)})
    if s == "H" and vkey == V3:
        # Hess u (grad u) = (1/2) grad|grad u|^2, the Leibniz reduction
        return VectorExpr(ctx, {V2: coeff * RF(Fraction(1, 2))})
    if s in ("H", "T"):
        return VectorExpr(ctx, {("app", s, vkey): coeff})
    raise ValueError(s)


class TensorExpr:
    """Symmetric 2-tensor on the basis {Hess u, Hess Delta u, grad u ⊗ grad u, g}."""

    __slots__ = ("ctx", "comps")

    KEYS = ("H", "T", "P", "G")

    def __init__(self, ctx: JetContext, comps: Dict[str, JetExpr]):
        self.ctx = ctx
        self.comps = {k: v for k, v in comps.items() if not v.is_zero()}

    @staticmethod
    def basis(ctx: JetContext, key: str, coeff: Optional[JetExpr] = None) -> "TensorExpr":
        return TensorExpr(ctx, {key: ctx.one() if coeff is None else coeff})

    def is_zero(self) -> bool:
        return not self.comps

    def __add__(self, other: "TensorExpr") -> "TensorExpr":
        comps = dict(self.comps)
        for k, v in other.comps.items():
            comps[k] = comps.get(k, self.ctx.zero()) + v
        return TensorExpr(self.ctx, comps)

    def __neg__(self):
        return TensorExpr(self.ctx, {k: -v for k, v in self.comps.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar) -> "TensorExpr":
        if isinstance(scalar, JetExpr):
            return TensorExpr(self.ctx, {k: v * scalar for k, v in self.comps.items()})
        return TensorExpr(
            self.ctx, {k: v * coerce_rf(scalar) for k, v in self.comps.items()}
        )

    __rmul__ = __mul__

    def _pair_basis(self, a: str, b: str) -> JetExpr:
        ctx = self.ctx
        a, b = sorted((a, b))
        if (a, b) == ("H", "H"):
            return ctx.gen(GEN_HESS2)
        if (a, b) == ("H", "T"):
            return ctx.gen(GEN_HH)
        if (a, b) == ("H", "P"):
            return ctx.gen(GEN_GG) * RF(Fraction(1, 2))
        if (a, b) == ("G", "H"):
            return -ctx.gen(GEN_LAP)
        if (a, b) == ("T", "T"):
            return ctx.gen(ctx.mint(("tensor2", "T", "T")))
        if (a, b) == ("P", "T"):
            return ctx.gen(GEN_HGG)
        if (a, b) == ("G", "T"):
            return -ctx.gen(GEN_LAP2)
        if (a, b) == ("P", "P"):
            return ctx.gen(GEN_GRAD2) ** 2
        if (a, b) == ("G", "P"):
            return ctx.gen(GEN_GRAD2)
        if (a, b) == ("G", "G"):
            return ctx.const(ctx.n)
        raise ValueError((a, b))

    def contract(self, other: "TensorExpr") -> JetExpr:
        out = self.ctx.zero()
        for ka, ca in self.comps.items():
            for kb, cb in other.comps.items():
                out = out + ca * cb * self._pair_basis(ka, kb)
        return out

    def trace(self) -> JetExpr:
        return self.contract(TensorExpr.basis(self.ctx, "G"))

    def apply(self, vec: VectorExpr) -> VectorExpr:
        out = VectorExpr(self.ctx, {})
        for s, cs in self.comps.items():
            for vk, cv in vec.comps.items():
                out = out + apply_tensor_key(self.ctx, s, vk, cs * cv)
        return out

    def __str__(self):
        if not self.comps:
            return "0"
        return " + ".join(f"[{c}]·{TENSOR_NAMES[k]}" for k, c in sorted(self.comps.items()))

    __repr__ = __str__


def contract(a, b) -> JetExpr:
    """Inner product of two tensors or two vectors."""
    if isinstance(a, TensorExpr) and isinstance(b, TensorExpr):
        return a.contract(b)
    if isinstance(a, VectorExpr) and isinstance(b, VectorExpr):
        return a.dot(b)
    raise TypeError("contract needs two vectors or two symmetric 2-tensors")


# ---------------------------------------------------------------------------
# divergence operator


def _div_basis(ctx: JetContext, key) -> JetExpr:
    """Exact divergence of an (unweighted) basis vector."""
    if key == V3:
        return -ctx.gen(GEN_LAP)
    if key == V1:
        return -ctx.gen(GEN_LAP2)
    if key == V2:
        # -Delta|grad u|^2, immediately Bochner-reduced
        return -JetExpr(ctx, ctx.neutral_weight(), ctx.bochner_rhs())
    if key == V4:
        raise ValueError("grad Delta^2 u cannot be diverged inside the catalog")
    if key[0] == "app":
        s, v = key[1], key[2]
        rn = RF_ONE / ctx.n
        if s == "H":
            # div Hess u = -grad Delta u + (R/n) grad u
            out = -pair(ctx, V1, v) + ctx.gen(GEN_R) * rn * pair(ctx, V3, v)
            if v == V1:
                out = out + ctx.gen(GEN_HH)  # <Hess u, Hess Delta u>
            elif v == V3:
                out = out + ctx.gen(GEN_HESS2)
            else:
                raise ValueError("no gradient rule for the applied direction")
            return out
        if s == "T":
            # div Hess Delta u = -grad Delta^2 u + (R/n) grad Delta u
            out = -pair(ctx, V4, v) + ctx.gen(GEN_R) * rn * pair(ctx, V1, v)
            if v == V3:
                out = out + ctx.gen(GEN_HH)
            elif v == V1:
                out = out + ctx.gen(ctx.mint(("tensor2", "T", "T")))
            else:
                raise ValueError("no gradient rule for the applied direction")
            return out
    raise ValueError(key)


def divergence(vec: VectorExpr) -> JetExpr:
    """div(sum_i c_i W_i) = sum_i (c_i div W_i + <grad c_i, W_i>)."""
    ctx = vec.ctx
    out = ctx.zero()
    for key, coeff in vec.comps.items():
        out = out + coeff * _div_basis(ctx, key)
        out = out + coeff.grad().dot(VectorExpr(ctx, {key: ctx.one()}))
    return out


def hessian_of_weight(expr: JetExpr) -> TensorExpr:
    """Hessian of a pure prefactor (e^{ku} or u^alpha times a constant)."""
    ctx = expr.ctx
    if any(m for m in expr.poly):
        raise ValueError("hessian_of_weight expects a pure weight")
    if ctx.case == "dim4":
        k = RF(Fraction(expr.weight))
        return TensorExpr(ctx, {"P": expr * (k * k), "H": expr * k})
    a = expr.weight
    w1 = JetExpr(ctx, ctx.neutral_weight(), {((GEN_W, 1),): RF_ONE})
    w2 = JetExpr(ctx, ctx.neutral_weight(), {((GEN_W, 2),): RF_ONE})
    return TensorExpr(ctx, {"P": expr * w2 * (a * (a - RF_ONE)), "H": expr * w1 * a})


def bochner_reduce(e: JetExpr) -> JetExpr:
    """Replace Delta|grad u|^2 by its Bochner expansion (Einstein Ricci)."""
    return e._substitute(GEN_LG2, e.ctx.bochner_rhs())


def weitzenbock_reduce(e: JetExpr) -> JetExpr:
    """Replace the rough-Laplacian pairing by its reduction."""
    return e._substitute(GEN_ROUGH, e.ctx.weitzenbock_rhs())


def normal_form(e: JetExpr) -> JetExpr:
    return e.normal_form()


# ---------------------------------------------------------------------------
# independent numeric instantiation of the contraction tables


def random_instantiation(ctx: JetContext, dim: int, rng) -> dict:
    """Random matrix/vector data realizing the catalog in ambient dimension
    ``dim``; dependent quantities are derived, so every table entry can be
    cross-checked against plain linear algebra.
    """
    import numpy as np

    H = rng.standard_normal((dim, dim))
    H = (H + H.T) / 2
    T = rng.standard_normal((dim, dim))
    T = (T + T.T) / 2
    a = rng.standard_normal(dim)   # grad u
    b = rng.standard_normal(dim)   # grad Delta u
    c = rng.standard_normal(dim)   # grad Delta^2 u
    v2 = 2.0 * H @ a               # grad|grad u|^2 = 2 Hess u (grad u)

    vecs = {V1: b, V2: v2, V3: a, V4: c}
    tens = {"H": H, "T": T, "P": np.outer(a, a), "G": np.eye(dim)}

    def vec_value(key):
        if key in vecs:
            return vecs[key]
        if key[0] == "app":
            return tens[key[1]] @ vec_value(key[2])
        raise KeyError(key)

    env = {
        "n": Fraction(dim),
        "u": 0.0,
        GEN_R: rng.standard_normal(),
        GEN_LAP: -np.trace(H),
        GEN_GRAD2: a @ a,
        GEN_HESS2: np.tensordot(H, H),
        GEN_GG: v2 @ a,
        GEN_GL: b @ a,
        GEN_GLG: b @ v2,
        GEN_GL2: b @ b,
        GEN_GG2: v2 @ v2,
        GEN_LAP2: -np.trace(T),
        GEN_GLL: c @ a,
        GEN_HH: np.tensordot(T, H),
        GEN_HGG: a @ T @ a,
    }
    for key, gid in ctx._mints.items():
        if key[0] == "pair":
            env[gid] = vec_value(key[1]) @ vec_value(key[2])
        elif key[0] == "tensor2":
            env[gid] = np.tensordot(tens[key[1]], tens[key[2]])
    env["_vec_value"] = vec_value
    env["_tensors"] = tens
    return env
