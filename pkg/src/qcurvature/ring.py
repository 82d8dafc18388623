"""Exact arithmetic: rationals, polynomials in the dimension symbol n,
the rational function field Q(n), and exact linear solving.

Everything here is immutable after construction and never rounds.  The
big-rational layer is ``fractions.Fraction`` from the standard library;
this module adds the univariate polynomial ring Q[n], its fraction field
Q(n) and a fraction-free linear solver used by the divergence-certificate
search.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Union

Rat = Fraction

Scalar = Union[int, Fraction, "NPoly", "RF"]


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"cannot coerce {x!r} to an exact rational")


class NPoly:
    """Dense univariate polynomial in the formal dimension symbol over Q."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Fraction]):
        cs = [_as_fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    @staticmethod
    def const(c) -> "NPoly":
        return NPoly([_as_fraction(c)])

    @staticmethod
    def symbol() -> "NPoly":
        return NPoly([Fraction(0), Fraction(1)])

    @property
    def degree(self) -> int:
        # degree of the zero polynomial is -1 by convention
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def leading(self) -> Fraction:
        if not self.coeffs:
            return Fraction(0)
        return self.coeffs[-1]

    def __eq__(self, other) -> bool:
        return isinstance(other, NPoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __add__(self, other: "NPoly") -> "NPoly":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return NPoly(out)

    def __neg__(self) -> "NPoly":
        return NPoly([-c for c in self.coeffs])

    def __sub__(self, other: "NPoly") -> "NPoly":
        return self + (-other)

    def __mul__(self, other) -> "NPoly":
        if isinstance(other, (int, Fraction)):
            f = _as_fraction(other)
            return NPoly([c * f for c in self.coeffs])
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1 or 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return NPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "NPoly":
        if k < 0:
            raise ValueError("negative power of a polynomial")
        r = NPoly.const(1)
        b = self
        while k:
            if k & 1:
                r = r * b
            b = b * b
            k >>= 1
        return r

    def divmod(self, other: "NPoly"):
        """Exact Euclidean division over Q."""
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        q = [Fraction(0)] * max(len(rem) - len(other.coeffs) + 1, 1)
        d = other.degree
        lead = other.leading()
        while len(rem) - 1 >= d and any(c != 0 for c in rem):
            while rem and rem[-1] == 0:
                rem.pop()
            if len(rem) - 1 < d:
                break
            shift = len(rem) - 1 - d
            factor = rem[-1] / lead
            q[shift] += factor
            for i, c in enumerate(other.coeffs):
                rem[shift + i] -= factor * c
            rem.pop()
        return NPoly(q), NPoly(rem)

    def monic(self) -> "NPoly":
        if self.is_zero():
            return self
        inv = 1 / self.leading()
        return NPoly([c * inv for c in self.coeffs])

    def gcd(self, other: "NPoly") -> "NPoly":
        a, b = self, other
        while not b.is_zero():
            _, r = a.divmod(b)
            a, b = b, r.monic() if not r.is_zero() else r
        return a.monic()

    def eval(self, v) -> Fraction:
        v = _as_fraction(v)
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * v + c
        return acc

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for d in range(self.degree, -1, -1):
            c = self.coeffs[d]
            if c == 0:
                continue
            if d == 0:
                parts.append(str(c))
            elif d == 1:
                parts.append(f"{c}*n" if c != 1 else "n")
            else:
                parts.append(f"{c}*n^{d}" if c != 1 else f"n^{d}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


def _coerce_npoly(x) -> NPoly:
    if isinstance(x, NPoly):
        return x
    if isinstance(x, (int, Fraction)):
        return NPoly.const(x)
    raise TypeError(f"cannot coerce {x!r} to a polynomial in n")


class RF:
    """Element of Q(n): a reduced ratio of polynomials with monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=None):
        num = _coerce_npoly(num)
        den = NPoly.const(1) if den is None else _coerce_npoly(den)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator in Q(n)")
        if num.is_zero():
            self.num, self.den = num, NPoly.const(1)
            return
        g = num.gcd(den)
        if g.degree > 0:
            num, _ = num.divmod(g)
            den, _ = den.divmod(g)
        lead = den.leading()
        if lead != 1:
            num = num * (1 / lead)
            den = den.monic()
        self.num, self.den = num, den

    @staticmethod
    def n() -> "RF":
        return RF(NPoly.symbol())

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_integer_constant(self) -> Optional[int]:
        """Return the value if this is a constant integer, else None."""
        if self.den.degree == 0 and self.num.degree <= 0:
            v = self.num.eval(0) / self.den.eval(0)
            if v.denominator == 1:
                return int(v)
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, (RF, NPoly, int, Fraction)):
            return NotImplemented
        other = coerce_rf(other)
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __add__(self, other):
        if not isinstance(other, (RF, NPoly, int, Fraction)):
            return NotImplemented
        other = coerce_rf(other)
        return RF(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RF(-self.num, self.den)

    def __sub__(self, other):
        if not isinstance(other, (RF, NPoly, int, Fraction)):
            return NotImplemented
        return self + (-coerce_rf(other))

    def __rsub__(self, other):
        return coerce_rf(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, (RF, NPoly, int, Fraction)):
            return NotImplemented
        other = coerce_rf(other)
        return RF(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = coerce_rf(other)
        if other.is_zero():
            raise ZeroDivisionError("division by zero in Q(n)")
        return RF(self.num * other.den, self.den * other.num)

    def __rtruediv__(self, other):
        return coerce_rf(other) / self

    def __pow__(self, k: int):
        if k < 0:
            return RF(self.den, self.num) ** (-k)
        return RF(self.num ** k, self.den ** k)

    def eval(self, v) -> Fraction:
        d = self.den.eval(v)
        if d == 0:
            raise ZeroDivisionError(f"denominator vanishes at n={v}")
        return self.num.eval(v) / d

    def __str__(self) -> str:
        if self.den.degree == 0:
            s = str(self.num)
            return s if self.num.degree <= 0 else f"({s})"
        return f"({self.num})/({self.den})"

    __repr__ = __str__


RF_ZERO = RF(0)
RF_ONE = RF(1)


def coerce_rf(x) -> RF:
    if isinstance(x, RF):
        return x
    if isinstance(x, (int, Fraction, NPoly)):
        return RF(x)
    raise TypeError(f"cannot coerce {x!r} into Q(n)")


def rf_arith(a: RF, b: RF, op: str) -> RF:
    """Field arithmetic dispatcher; kept as an explicit entry point."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown op {op!r}")


def _row_to_polys(row: Sequence[RF]) -> List[NPoly]:
    """Clear denominators of a row of rational functions."""
    den = NPoly.const(1)
    for e in row:
        if e.den.degree == 0:
            continue
        g = den.gcd(e.den)
        q, _ = e.den.divmod(g)
        den = den * q
    if den.degree == 0:
        return [e.num if e.den.degree == 0 else e.num * den.divmod(e.den)[0] for e in row]
    return [e.num * den.divmod(e.den)[0] for e in row]


def _row_primitive(row: List[NPoly]) -> List[NPoly]:
    """Divide a polynomial row by the gcd of its entries (content removal)."""
    g = NPoly.const(0)
    for e in row:
        if not e.is_zero():
            g = e.monic() if g.is_zero() else g.gcd(e)
            if g.degree == 0:
                break
    if g.is_zero() or g.degree == 0:
        return row
    return [e.divmod(g)[0] for e in row]


def solve_linear(rows: Sequence[Sequence[RF]], rhs: Sequence[RF]) -> Optional[List[RF]]:
    """One exact solution of A x = b over Q(n), or None if inconsistent.

    Fraction-free forward elimination (cross-multiplication with content
    removal after each update) keeps entries polynomial; pivots are chosen
    by lowest total degree.  Free variables are set to zero.  The returned
    solution is re-verified against the original system before return.
    """
    m = len(rows)
    ncols = len(rows[0]) if m else 0
    work = [_row_to_polys(list(r) + [b]) for r, b in zip(rows, rhs)]

    piv_of_col: dict[int, int] = {}
    used_rows: set[int] = set()
    for _ in range(min(m, ncols)):
        nnz = {
            i: sum(1 for x in work[i][:ncols] if not x.is_zero())
            for i in range(m)
            if i not in used_rows
        }
        best = None
        for i in nnz:
            for j in range(ncols):
                if j in piv_of_col:
                    continue
                e = work[i][j]
                if e.is_zero():
                    continue
                key = (e.degree, nnz[i], j, i)
                if best is None or key < best[0]:
                    best = (key, i, j)
        if best is None:
            break
        _, pi, pj = best
        piv_of_col[pj] = pi
        used_rows.add(pi)
        piv = work[pi][pj]
        for i in range(m):
            if i == pi:
                continue
            e = work[i][pj]
            if e.is_zero():
                continue
            work[i] = _row_primitive(
                [piv * a - e * b for a, b in zip(work[i], work[pi])]
            )

    for i in range(m):
        if i in used_rows:
            continue
        if all(work[i][j].is_zero() for j in range(ncols)) and not work[i][ncols].is_zero():
            return None

    x = [RF_ZERO] * ncols
    for j, i in piv_of_col.items():
        acc = RF(work[i][ncols])
        for k in range(ncols):
            if k != j and not work[i][k].is_zero() and not x[k].is_zero():
                acc = acc - RF(work[i][k]) * x[k]
        x[j] = acc / RF(work[i][j])

    for r, b in zip(rows, rhs):
        acc = RF_ZERO
        for e, v in zip(r, x):
            if not e.is_zero() and not v.is_zero():
                acc = acc + e * v
        if not (acc - b).is_zero():
            raise ArithmeticError("internal solver error: back-substitution check failed")
    return x


class ExactMatrix:
    """Rectangular matrix over Q(n)."""

    def __init__(self, entries: Sequence[Sequence[RF]]):
        self.entries = [[coerce_rf(e) for e in row] for row in entries]
        self.rows = len(self.entries)
        self.cols = len(self.entries[0]) if self.rows else 0
        for row in self.entries:
            if len(row) != self.cols:
                raise ValueError("ragged matrix")

    def solve(self, b: Sequence[RF]) -> Optional[List[RF]]:
        if len(b) != self.rows:
            raise ValueError("dimension mismatch")
        return solve_linear(self.entries, [coerce_rf(x) for x in b])

    def mul_vec(self, x: Sequence[RF]) -> List[RF]:
        out = []
        for row in self.entries:
            acc = RF_ZERO
            for e, v in zip(row, x):
                acc = acc + e * coerce_rf(v)
            out.append(acc)
        return out
