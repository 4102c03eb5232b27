"""Exact multivariate rational functions over Q and fraction-free linear algebra.

Polynomials are sparse dicts from exponent tuples to ``Fraction`` coefficients.
A :class:`RatFn` is a reduced quotient of two such polynomials over a
:class:`Chart`; the denominator is kept integral, primitive and with positive
graded-lex leading coefficient so that equal functions compare structurally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache, reduce
from typing import Iterable, Iterator, Sequence, Union

from sympy.polys.domains import ZZ
from sympy.polys.rings import PolyRing

Rat = Fraction
Exps = tuple[int, ...]
PolyDict = dict[Exps, Fraction]
Scalar = Union[int, Fraction, "RatFn"]


class RatFieldError(ValueError):
    """Base error for rational-function arithmetic."""


class ParseError(RatFieldError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} at position {position}")
        self.position = position


class EvalError(RatFieldError):
    pass


# ---------------------------------------------------------------------------
# Sparse polynomial kernel


def grlex_key(e: Exps) -> tuple[int, Exps]:
    return (sum(e), e)


def _zero_exps(n: int) -> Exps:
    return (0,) * n


def p_const(c: Fraction | int, n: int) -> PolyDict:
    return {_zero_exps(n): Fraction(c)} if c else {}


def p_add(a: PolyDict, b: PolyDict) -> PolyDict:
    if len(a) < len(b):
        a, b = b, a
    out = dict(a)
    for e, c in b.items():
        s = out.get(e, 0) + c
        if s:
            out[e] = s
        else:
            out.pop(e, None)
    return out


def p_neg(a: PolyDict) -> PolyDict:
    return {e: -c for e, c in a.items()}


def p_sub(a: PolyDict, b: PolyDict) -> PolyDict:
    out = dict(a)
    for e, c in b.items():
        s = out.get(e, 0) - c
        if s:
            out[e] = s
        else:
            out.pop(e, None)
    return out


def p_scale(a: PolyDict, c: Fraction | int) -> PolyDict:
    if not c:
        return {}
    return {e: v * c for e, v in a.items()}


def p_mul(a: PolyDict, b: PolyDict) -> PolyDict:
    if not a or not b:
        return {}
    if len(a) > len(b):
        a, b = b, a
    out: PolyDict = {}
    for ea, ca in a.items():
        for eb, cb in b.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            s = out.get(e, 0) + ca * cb
            if s:
                out[e] = s
            else:
                out.pop(e, None)
    return out


def p_pow(a: PolyDict, k: int, n: int) -> PolyDict:
    result = p_const(1, n)
    base = a
    while k:
        if k & 1:
            result = p_mul(result, base)
        k >>= 1
        if k:
            base = p_mul(base, base)
    return result


def p_mono(e: Exps, c: Fraction | int = 1) -> PolyDict:
    return {e: Fraction(c)} if c else {}


def p_is_const(a: PolyDict) -> bool:
    return not a or (len(a) == 1 and not any(next(iter(a))))


def p_lead(a: PolyDict) -> tuple[Exps, Fraction]:
    e = max(a, key=grlex_key)
    return e, a[e]


def p_total_degree(a: PolyDict) -> int:
    return max((sum(e) for e in a), default=0)


def p_deriv(a: PolyDict, i: int) -> PolyDict:
    out: PolyDict = {}
    for e, c in a.items():
        k = e[i]
        if k:
            e2 = e[:i] + (k - 1,) + e[i + 1 :]
            out[e2] = c * k
    return out


def p_eval(a: PolyDict, point: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for e, c in a.items():
        term = c
        for x, k in zip(point, e):
            if k:
                term *= x**k
        total += term
    return total


def p_divexact(a: PolyDict, b: PolyDict) -> PolyDict:
    """Quotient a/b, raising if b does not divide a."""
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    if len(b) == 1:
        (eb, cb), = b.items()
        out: PolyDict = {}
        for e, c in a.items():
            d = tuple(x - y for x, y in zip(e, eb))
            if min(d, default=0) < 0:
                raise RatFieldError("inexact polynomial division")
            out[d] = c / cb
        return out
    eb, cb = p_lead(b)
    rem = dict(a)
    quot: PolyDict = {}
    while rem:
        er, cr = p_lead(rem)
        d = tuple(x - y for x, y in zip(er, eb))
        if min(d, default=0) < 0:
            raise RatFieldError("inexact polynomial division")
        q = cr / cb
        quot[d] = quot.get(d, 0) + q
        rem = p_sub(rem, p_mul({d: q}, b))
    return quot


def _int_content(a: PolyDict) -> Fraction:
    """Positive rational c with a/c integral and primitive."""
    nums = [c.numerator for c in a.values()]
    dens = [c.denominator for c in a.values()]
    g = reduce(math.gcd, nums, 0)
    lcm = reduce(lambda x, y: x * y // math.gcd(x, y), dens, 1)
    return Fraction(abs(g), lcm)


def p_primitive(a: PolyDict) -> PolyDict:
    """Integral primitive associate of a with positive leading coefficient."""
    if not a:
        return {}
    c = _int_content(a)
    if p_lead(a)[1] < 0:
        c = -c
    return {e: v / c for e, v in a.items()}


def _degree_in(a: PolyDict, v: int) -> int:
    return max((e[v] for e in a), default=0)


@lru_cache(maxsize=None)
def _integer_ring(n: int) -> PolyRing:
    return PolyRing(tuple(f"t{i}" for i in range(n)), ZZ, "grlex")


def p_gcd(a: PolyDict, b: PolyDict) -> PolyDict:
    """Greatest common divisor over Q, normalized by :func:`p_primitive`."""
    if not a:
        return p_primitive(b)
    if not b:
        return p_primitive(a)
    n = len(next(iter(a)))
    if p_is_const(a) or p_is_const(b):
        return p_const(1, n)
    ring = _integer_ring(n)
    # Gauss's lemma: the gcd of the primitive integral associates is the gcd over Q
    fa = ring.from_dict({e: int(c) for e, c in p_primitive(a).items()})
    fb = ring.from_dict({e: int(c) for e, c in p_primitive(b).items()})
    g = fa.gcd(fb)
    return p_primitive({tuple(e): Fraction(int(c)) for e, c in g.items()})


def p_lcm(a: PolyDict, b: PolyDict) -> PolyDict:
    return p_primitive(p_divexact(p_mul(a, b), p_gcd(a, b)))


# ---------------------------------------------------------------------------
# Charts


def _poly_items(a: PolyDict) -> tuple[tuple[Exps, Fraction], ...]:
    return tuple(sorted(a.items(), key=lambda t: grlex_key(t[0]), reverse=True))


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names plus polynomials declared nonzero on the domain."""

    variables: tuple[str, ...]
    nonvanishing: tuple[tuple[tuple[Exps, Fraction], ...], ...] = field(default=())

    def __post_init__(self) -> None:
        if len(set(self.variables)) != len(self.variables):
            raise RatFieldError(f"duplicate chart variables in {self.variables}")
        for entry in self.nonvanishing:
            if not entry:
                raise RatFieldError("nonvanishing entry is the zero polynomial")

    @classmethod
    def of(cls, variables: Iterable[str], nonvanishing: Iterable[str] = ()) -> Chart:
        bare = cls(tuple(variables))
        polys = []
        for text in nonvanishing:
            f = parse(text, bare)
            polys.append(_poly_items(f.num))
            if not p_is_const(f.den):
                polys.append(_poly_items(f.den))
        return cls(bare.variables, tuple(polys))

    @property
    def dim(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise RatFieldError(f"unknown variable {name!r}") from None

    def var(self, name: str) -> RatFn:
        i = self.index(name)
        e = tuple(1 if k == i else 0 for k in range(self.dim))
        return RatFn._raw(self, {e: Fraction(1)}, p_const(1, self.dim))

    def gens(self) -> tuple[RatFn, ...]:
        return tuple(self.var(v) for v in self.variables)

    def const(self, c: int | Fraction) -> RatFn:
        return RatFn._raw(self, p_const(c, self.dim), p_const(1, self.dim))

    def zero(self) -> RatFn:
        return self.const(0)

    def one(self) -> RatFn:
        return self.const(1)

    def parse(self, text: str) -> RatFn:
        return parse(text, self)

    def nonvanishing_polys(self) -> list[PolyDict]:
        return [dict(entry) for entry in self.nonvanishing]

    def with_variables(self, variables: Iterable[str], nonvanishing: Iterable[str] = ()) -> Chart:
        return Chart.of(variables, nonvanishing)

    def __repr__(self) -> str:
        return f"Chart({', '.join(self.variables)})"


# ---------------------------------------------------------------------------
# Rational functions


def _normalize(num: PolyDict, den: PolyDict) -> tuple[PolyDict, PolyDict]:
    if not den:
        raise ZeroDivisionError("rational function with zero denominator")
    n = len(next(iter(den)))
    if not num:
        return {}, p_const(1, n)
    if not p_is_const(den):
        g = p_gcd(num, den)
        if not p_is_const(g):
            num = p_divexact(num, g)
            den = p_divexact(den, g)
    c = _int_content(den)
    if p_lead(den)[1] < 0:
        c = -c
    if c != 1:
        num = {e: v / c for e, v in num.items()}
        den = {e: v / c for e, v in den.items()}
    return num, den


class RatFn:
    """Reduced rational function over a chart."""

    __slots__ = ("chart", "num", "den", "_hash")

    chart: Chart
    num: PolyDict
    den: PolyDict

    def __init__(self, chart: Chart, num: PolyDict, den: PolyDict | None = None) -> None:
        if den is None:
            den = p_const(1, chart.dim)
        self.chart = chart
        self.num, self.den = _normalize(num, den)
        self._hash: int | None = None

    @classmethod
    def _raw(cls, chart: Chart, num: PolyDict, den: PolyDict) -> RatFn:
        obj = cls.__new__(cls)
        obj.chart = chart
        obj.num = num
        obj.den = den
        obj._hash = None
        return obj

    # -- predicates -------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.num

    def is_constant(self) -> bool:
        return p_is_const(self.num) and p_is_const(self.den)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise RatFieldError(f"{self} is not constant")
        num = next(iter(self.num.values()), Fraction(0))
        return num / next(iter(self.den.values()))

    def is_polynomial(self) -> bool:
        return p_is_const(self.den)

    def total_degree(self) -> int:
        return max(p_total_degree(self.num), p_total_degree(self.den))

    # -- coercion ---------------------------------------------------------
    def _coerce(self, other: object) -> RatFn:
        if isinstance(other, RatFn):
            if other.chart.variables != self.chart.variables:
                raise RatFieldError(f"chart mismatch: {self.chart} vs {other.chart}")
            return other
        if isinstance(other, (int, Fraction)):
            return self.chart.const(other)
        return NotImplemented  # type: ignore[return-value]

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other: Scalar) -> RatFn:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if not o.num:
            return self
        if not self.num:
            return o
        if self.den == o.den:
            return RatFn(self.chart, p_add(self.num, o.num), self.den)
        return RatFn(
            self.chart,
            p_add(p_mul(self.num, o.den), p_mul(o.num, self.den)),
            p_mul(self.den, o.den),
        )

    __radd__ = __add__

    def __neg__(self) -> RatFn:
        return RatFn._raw(self.chart, p_neg(self.num), self.den)

    def __pos__(self) -> RatFn:
        return self

    def __sub__(self, other: Scalar) -> RatFn:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: Scalar) -> RatFn:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other: Scalar) -> RatFn:
        if isinstance(other, (int, Fraction)):
            if not other:
                return self.chart.zero()
            return RatFn._raw(self.chart, p_scale(self.num, Fraction(other)), self.den)
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if not self.num or not o.num:
            return self.chart.zero()
        return RatFn(self.chart, p_mul(self.num, o.num), p_mul(self.den, o.den))

    __rmul__ = __mul__

    def inverse(self) -> RatFn:
        if not self.num:
            raise ZeroDivisionError("division by the zero rational function")
        return RatFn(self.chart, self.den, self.num)

    def __truediv__(self, other: Scalar) -> RatFn:
        if isinstance(other, (int, Fraction)):
            if not other:
                raise ZeroDivisionError("division by zero")
            return RatFn._raw(self.chart, p_scale(self.num, 1 / Fraction(other)), self.den)
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other: Scalar) -> RatFn:
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int) -> RatFn:
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        n = self.chart.dim
        return RatFn._raw(self.chart, p_pow(self.num, k, n), p_pow(self.den, k, n))

    # -- equality ---------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = self.chart.const(other)
        if not isinstance(other, RatFn):
            return NotImplemented
        if other.chart.variables != self.chart.variables:
            return False
        if self.num == other.num and self.den == other.den:
            return True
        return not p_sub(p_mul(self.num, other.den), p_mul(other.num, self.den))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.chart.variables, frozenset(self.num.items()), frozenset(self.den.items())))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self.num)

    # -- calculus and evaluation -----------------------------------------
    def deriv(self, var: str | int) -> RatFn:
        i = var if isinstance(var, int) else self.chart.index(var)
        dn = p_deriv(self.num, i)
        dd = p_deriv(self.den, i)
        if not dd:
            return RatFn(self.chart, dn, self.den)
        return RatFn(
            self.chart,
            p_sub(p_mul(dn, self.den), p_mul(self.num, dd)),
            p_mul(self.den, self.den),
        )

    def eval(self, point: Sequence[int | Fraction]) -> Fraction:
        if len(point) != self.chart.dim:
            raise EvalError(f"point has {len(point)} coordinates, chart has {self.chart.dim}")
        pt = [Fraction(x) for x in point]
        for poly in self.chart.nonvanishing_polys():
            if p_eval(poly, pt) == 0:
                raise EvalError("point violates a nonvanishing constraint")
        d = p_eval(self.den, pt)
        if d == 0:
            raise EvalError("denominator vanishes at point")
        return p_eval(self.num, pt) / d

    def substitute(self, values: Sequence[RatFn], target: Chart | None = None) -> RatFn:
        """Compose with a rational map given by one value per chart variable."""
        if len(values) != self.chart.dim:
            raise RatFieldError("substitution needs one value per chart variable")
        if target is None:
            if not values:
                raise RatFieldError("target chart required for an empty substitution")
            target = values[0].chart
        n = target.dim
        maxdeg = [
            max(_degree_in(self.num, i) if self.num else 0, _degree_in(self.den, i))
            for i in range(self.chart.dim)
        ]
        nums = [v.num for v in values]
        dens = [v.den for v in values]
        cache: dict[tuple[int, int, int], PolyDict] = {}

        def power(which: int, i: int, k: int) -> PolyDict:
            key = (which, i, k)
            if key not in cache:
                base = nums[i] if which == 0 else dens[i]
                cache[key] = p_pow(base, k, n)
            return cache[key]

        def homogenized(poly: PolyDict) -> PolyDict:
            total: PolyDict = {}
            for e, c in poly.items():
                term = p_const(c, n)
                for i, k in enumerate(e):
                    if k:
                        term = p_mul(term, power(0, i, k))
                    if maxdeg[i] - k:
                        term = p_mul(term, power(1, i, maxdeg[i] - k))
                total = p_add(total, term)
            return total

        den = homogenized(self.den)
        if not den:
            raise ZeroDivisionError("substitution makes the denominator vanish identically")
        return RatFn(target, homogenized(self.num), den)

    def to_chart(self, target: Chart) -> RatFn:
        """Re-express on a chart containing all variables this function uses."""
        return self.substitute([target.var(v) for v in self.chart.variables], target)

    def used_variables(self) -> set[str]:
        used = set()
        for poly in (self.num, self.den):
            for e in poly:
                used.update(self.chart.variables[i] for i, k in enumerate(e) if k)
        return used

    # -- printing ---------------------------------------------------------
    def __str__(self) -> str:
        return format_ratfn(self)

    def __repr__(self) -> str:
        return f"RatFn({format_ratfn(self)!r})"


def _format_monomial(e: Exps, names: Sequence[str]) -> str:
    parts = []
    for name, k in zip(names, e):
        if k == 1:
            parts.append(name)
        elif k:
            parts.append(f"{name}^{k}")
    return "*".join(parts)


def format_poly(poly: PolyDict, names: Sequence[str]) -> str:
    if not poly:
        return "0"
    out = []
    for i, (e, c) in enumerate(_poly_items(poly)):
        mono = _format_monomial(e, names)
        neg = c < 0
        a = -c if neg else c
        if not mono:
            body = str(a)
        elif a == 1:
            body = mono
        else:
            body = f"{a}*{mono}"
        if i == 0:
            out.append(f"-{body}" if neg else body)
        else:
            out.append(f" - {body}" if neg else f" + {body}")
    return "".join(out)


def format_ratfn(f: RatFn) -> str:
    names = f.chart.variables
    num = format_poly(f.num, names)
    if p_is_const(f.den):
        return num
    if len(f.num) > 1:
        num = f"({num})"
    den = format_poly(f.den, names)
    single_power = len(f.den) == 1 and next(iter(f.den.values())) == 1 and sum(1 for k in next(iter(f.den)) if k) == 1
    if not single_power:
        den = f"({den})"
    return f"{num}/{den}"


# ---------------------------------------------------------------------------
# Parser: precedence climbing over + - < * / < unary - < ^


class _Parser:
    def __init__(self, text: str, chart: Chart) -> None:
        self.text = text
        self.chart = chart
        self.pos = 0

    def error(self, message: str, pos: int | None = None) -> ParseError:
        return ParseError(message, self.pos if pos is None else pos)

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def parse(self) -> RatFn:
        if not self.text.strip():
            raise self.error("empty expression")
        value = self.expr()
        if self.peek():
            raise self.error(f"unexpected {self.peek()!r}")
        return value

    def expr(self) -> RatFn:
        value = self.term()
        while True:
            if self.take("+"):
                value = value + self.term()
            elif self.take("-"):
                value = value - self.term()
            else:
                return value

    def term(self) -> RatFn:
        value = self.unary()
        while True:
            if self.take("*"):
                value = value * self.unary()
            elif self.peek() == "/":
                at = self.pos
                self.pos += 1
                divisor = self.unary()
                if divisor.is_zero():
                    raise self.error("division by zero", at)
                value = value / divisor
            else:
                return value

    def unary(self) -> RatFn:
        if self.take("-"):
            return -self.unary()
        if self.take("+"):
            return self.unary()
        return self.power()

    def power(self) -> RatFn:
        base = self.atom()
        if self.take("^"):
            at = self.pos
            k = self.exponent()
            if k < 0 and base.is_zero():
                raise self.error("negative power of zero", at)
            base = base**k
        return base

    def exponent(self) -> int:
        if self.take("("):
            k = self.exponent()
            if not self.take(")"):
                raise self.error("expected ')'")
            return k
        sign = -1 if self.take("-") else 1
        self.skip()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            raise self.error("expected integer exponent")
        return sign * int(self.text[start : self.pos])

    def atom(self) -> RatFn:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            value = self.expr()
            if not self.take(")"):
                raise self.error("expected ')'")
            return value
        if ch.isdigit():
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self.pos += 1
            return self.chart.const(int(self.text[start : self.pos]))
        if ch.isalpha() or ch == "_":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] in "_'"):
                self.pos += 1
            name = self.text[start : self.pos]
            if name not in self.chart.variables:
                raise self.error(f"unknown variable {name!r}", start)
            return self.chart.var(name)
        if not ch:
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {ch!r}")


def parse(text: str, chart: Chart) -> RatFn:
    return _Parser(text, chart).parse()


# ---------------------------------------------------------------------------
# Linear algebra over the fraction field


@dataclass(frozen=True)
class LinearSolution:
    """Result of :func:`solve_linear`.

    ``witness`` is the last Bareiss pivot, a nonzero minor of maximal size; the
    reported rank is valid wherever it does not vanish.  When the system is
    inconsistent ``certificate`` is a row vector y with y*A = 0 and y*b != 0.
    """

    consistent: bool
    rank: int
    particular: tuple[RatFn, ...] | None
    nullspace: tuple[tuple[RatFn, ...], ...]
    witness: RatFn
    pivot_columns: tuple[int, ...]
    certificate: tuple[RatFn, ...] | None = None


def _pivot_key(p: PolyDict, i: int, j: int) -> tuple:
    e, _ = p_lead(p)
    return (p_total_degree(p), grlex_key(e), i, j)


def _infer_chart(A: Sequence[Sequence[RatFn]], b: Sequence[RatFn] | None, chart: Chart | None) -> Chart:
    if chart is not None:
        return chart
    for row in A:
        for x in row:
            if isinstance(x, RatFn):
                return x.chart
    for x in b or ():
        if isinstance(x, RatFn):
            return x.chart
    raise RatFieldError("cannot infer chart of an empty system; pass chart=")


def _as_ratfn(x: Scalar, chart: Chart) -> RatFn:
    return x if isinstance(x, RatFn) else chart.const(x)


def _bareiss(
    rows: list[list[PolyDict]], ncols: int, n: int
) -> tuple[list[list[PolyDict]], list[tuple[int, int]], PolyDict]:
    """Fraction-free forward elimination with full pivoting on the first ncols columns.

    Returns the transformed rows (columns permuted in place via the pivot list)
    and the pivot positions; the last pivot is the witness minor.
    """
    m = len(rows)
    col_order = list(range(ncols))
    pivots: list[tuple[int, int]] = []
    prev = p_const(1, n)
    k = 0
    while k < min(m, ncols):
        best = None
        for i in range(k, m):
            for jj in range(k, ncols):
                entry = rows[i][col_order[jj]]
                if entry:
                    key = _pivot_key(entry, i, col_order[jj])
                    if best is None or key < best[0]:
                        best = (key, i, jj)
        if best is None:
            break
        _, pi, pj = best
        rows[k], rows[pi] = rows[pi], rows[k]
        col_order[k], col_order[pj] = col_order[pj], col_order[k]
        pc = col_order[k]
        pivot = rows[k][pc]
        for i in range(k + 1, m):
            a_ik = rows[i][pc]
            new_row = []
            for j in range(len(rows[i])):
                val = p_sub(p_mul(pivot, rows[i][j]), p_mul(a_ik, rows[k][j]))
                if val and not p_is_const(prev):
                    val = p_divexact(val, prev)
                elif val:
                    val = p_scale(val, 1 / next(iter(prev.values())))
                new_row.append(val)
            rows[i] = new_row
        pivots.append((k, pc))
        prev = pivot
        k += 1
    return rows, pivots, prev


def _bareiss_constant(
    rows: list[list[PolyDict]], ncols: int
) -> tuple[list[list[PolyDict]], list[tuple[int, int]], PolyDict]:
    """Integer Bareiss for constant systems; same pivot rule as :func:`_bareiss`."""
    key = ()
    ints = [[int(r[key]) if r else 0 for r in row] for row in rows]
    m = len(ints)
    col_order = list(range(ncols))
    pivots: list[tuple[int, int]] = []
    prev = 1
    k = 0
    while k < min(m, ncols):
        found = None
        for i in range(k, m):
            for jj in range(k, ncols):
                if ints[i][col_order[jj]]:
                    cand = (i, col_order[jj], jj)
                    if found is None or (cand[0], cand[1]) < (found[0], found[1]):
                        found = cand
            if found is not None:
                break
        if found is None:
            break
        pi, _, pj = found
        ints[k], ints[pi] = ints[pi], ints[k]
        col_order[k], col_order[pj] = col_order[pj], col_order[k]
        pc = col_order[k]
        pivot = ints[k][pc]
        prow = ints[k]
        for i in range(k + 1, m):
            a_ik = ints[i][pc]
            row = ints[i]
            ints[i] = [(pivot * row[j] - a_ik * prow[j]) // prev for j in range(len(row))]
        pivots.append((k, pc))
        prev = pivot
        k += 1
    out = [[{key: Fraction(v)} if v else {} for v in row] for row in ints]
    return out, pivots, {key: Fraction(prev)}


def solve_linear(
    A: Sequence[Sequence[Scalar]],
    b: Sequence[Scalar] | None = None,
    chart: Chart | None = None,
    *,
    rank_only: bool = False,
) -> LinearSolution:
    """Solve A x = b over the rational-function field by Bareiss elimination.

    With ``rank_only`` the back substitution is skipped and only rank,
    witness and consistency are reported.
    """
    ch = _infer_chart(A, b, chart)
    n = ch.dim
    m = len(A)
    ncols = len(A[0]) if m else 0
    if any(len(row) != ncols for row in A):
        raise RatFieldError("ragged coefficient matrix")
    track = b is not None and not rank_only
    if b is None:
        b = [0] * m
    if len(b) != m:
        raise RatFieldError(f"right-hand side has {len(b)} entries, matrix has {m} rows")
    Af = [[_as_ratfn(x, ch) for x in row] for row in A]
    bf = [_as_ratfn(x, ch) for x in b]

    # Clear denominators row by row; scale[i] records the multiplier used.
    rows: list[list[PolyDict]] = []
    scales: list[RatFn] = []
    for i in range(m):
        entries = Af[i] + [bf[i]]
        lcm = p_const(1, n)
        for x in entries:
            if x.num and not p_is_const(x.den):
                lcm = p_lcm(lcm, x.den)
        poly_row = []
        for x in entries:
            poly_row.append(p_divexact(p_mul(x.num, lcm), x.den) if x.num else {})
        # integer coefficients keep the constant-system path exact
        d = 1
        for p in poly_row:
            for c in p.values():
                d = math.lcm(d, Fraction(c).denominator)
        if d != 1:
            poly_row = [p_scale(p, d) for p in poly_row]
            lcm = p_scale(lcm, d)
        tracker = [p_const(1, n) if j == i else {} for j in range(m)] if track else []
        rows.append(poly_row + tracker)
        scales.append(RatFn(ch, lcm))

    if n == 0:
        rows, pivots, last = _bareiss_constant(rows, ncols)
    else:
        rows, pivots, last = _bareiss(rows, ncols, n)
    rank = len(pivots)
    witness = RatFn(ch, last) if rank else ch.one()
    pivot_cols = tuple(pc for _, pc in pivots)

    for i in range(rank, m):
        if rows[i][ncols]:
            cert = tuple(RatFn(ch, rows[i][ncols + 1 + j]) * scales[j] for j in range(m)) if track else None
            return LinearSolution(False, rank, None, (), witness, pivot_cols, cert)

    if rank_only:
        return LinearSolution(True, rank, None, (), witness, pivot_cols)

    ech = [[RatFn(ch, x) for x in rows[i][: ncols + 1]] for i in range(rank)]

    def back_substitute(rhs: list[RatFn], fixed: dict[int, RatFn]) -> list[RatFn]:
        x = [ch.zero() for _ in range(ncols)]
        for j, v in fixed.items():
            x[j] = v
        for k in range(rank - 1, -1, -1):
            pc = pivot_cols[k]
            acc = rhs[k]
            for j in range(ncols):
                if j != pc and ech[k][j] and x[j]:
                    acc = acc - ech[k][j] * x[j]
            x[pc] = acc / ech[k][pc]
        return x

    particular = tuple(back_substitute([ech[k][ncols] for k in range(rank)], {}))
    free = [j for j in range(ncols) if j not in pivot_cols]
    basis = []
    zeros = [ch.zero()] * rank
    for f in free:
        vec = back_substitute(zeros, {f: ch.one()})
        basis.append(primitive_vector(vec, pivot=f))
    return LinearSolution(True, rank, particular, tuple(basis), witness, pivot_cols)


def primitive_vector(vec: Sequence[RatFn], pivot: int | None = None) -> tuple[RatFn, ...]:
    """Scale a vector to polynomial entries with no common factor.

    The entry at ``pivot`` (or the first nonzero entry) gets a positive
    leading coefficient.
    """
    nonzero = [x for x in vec if x]
    if not nonzero:
        return tuple(vec)
    chart = nonzero[0].chart
    n = chart.dim
    lcm = p_const(1, n)
    for x in nonzero:
        lcm = p_lcm(lcm, x.den)
    polys = [p_divexact(p_mul(x.num, lcm), x.den) if x else {} for x in vec]
    g: PolyDict = {}
    for p in polys:
        if p:
            g = p_gcd(g, p) if g else p_primitive(p)
    polys = [p_divexact(p, g) if p else {} for p in polys]
    ref = pivot if pivot is not None and polys[pivot] else next(i for i, p in enumerate(polys) if p)
    if p_lead(polys[ref])[1] < 0:
        polys = [p_neg(p) for p in polys]
    return tuple(RatFn(chart, p) for p in polys)


def rank(A: Sequence[Sequence[Scalar]], chart: Chart | None = None) -> tuple[int, RatFn]:
    """Generic rank over the fraction field and its witness minor."""
    if not A or not A[0]:
        ch = chart or (A[0][0].chart if A and A[0] else Chart(()))
        return 0, ch.one()
    sol = solve_linear(A, None, chart, rank_only=True)
    return sol.rank, sol.witness


def nullspace(A: Sequence[Sequence[Scalar]], chart: Chart | None = None) -> tuple[tuple[RatFn, ...], ...]:
    return solve_linear(A, None, chart).nullspace


def determinant(A: Sequence[Sequence[Scalar]], chart: Chart | None = None) -> RatFn:
    """Exact determinant by fraction-free elimination without column pivoting."""
    ch = _infer_chart(A, None, chart)
    size = len(A)
    if size == 0:
        return ch.one()
    if any(len(row) != size for row in A):
        raise RatFieldError("determinant of a non-square matrix")
    M = [[_as_ratfn(x, ch) for x in row] for row in A]
    sign = 1
    det = ch.one()
    for k in range(size):
        piv = next((i for i in range(k, size) if M[i][k]), None)
        if piv is None:
            return ch.zero()
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
            sign = -sign
        p = M[k][k]
        det = det * p
        for i in range(k + 1, size):
            if M[i][k]:
                factor = M[i][k] / p
                M[i] = [M[i][j] - factor * M[k][j] if j >= k else M[i][j] for j in range(size)]
    return det * sign


def iter_matrix(A: Sequence[Sequence[RatFn]]) -> Iterator[RatFn]:
    for row in A:
        yield from row
