"""Exterior calculus on coordinate charts with rational-function coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .ratfield import Chart, RatFieldError, RatFn, Scalar, determinant, rank, solve_linear


class ChartMismatch(RatFieldError):
    pass


def _check_chart(a: Chart, b: Chart) -> None:
    if a.variables != b.variables:
        raise ChartMismatch(f"chart mismatch: {a} vs {b}")


def _sort_with_parity(idx: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Sorted indices and the permutation sign, or sign 0 on a repeat."""
    items = list(idx)
    sign = 1
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(items, items[1:]):
        if a == b:
            return tuple(items), 0
    return tuple(items), sign


class DForm:
    """A p-form stored as increasing index tuples mapped to coefficients."""

    __slots__ = ("chart", "degree", "terms")

    def __init__(self, chart: Chart, degree: int, terms: Mapping[tuple[int, ...], RatFn] | None = None) -> None:
        self.chart = chart
        self.degree = degree
        clean: dict[tuple[int, ...], RatFn] = {}
        for idx, c in (terms or {}).items():
            if len(idx) != degree or any(i < 0 or i >= chart.dim for i in idx):
                raise RatFieldError(f"bad index tuple {idx} for a {degree}-form on {chart}")
            if list(idx) != sorted(set(idx)):
                raise RatFieldError(f"index tuple {idx} is not strictly increasing")
            if c:
                clean[tuple(idx)] = c
        self.terms = clean

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, chart: Chart, degree: int) -> DForm:
        return cls(chart, degree)

    @classmethod
    def function(cls, f: RatFn) -> DForm:
        return cls(f.chart, 0, {(): f})

    @classmethod
    def d(cls, chart: Chart, var: str | int) -> DForm:
        i = var if isinstance(var, int) else chart.index(var)
        return cls(chart, 1, {(i,): chart.one()})

    @classmethod
    def one_form(cls, chart: Chart, coeffs: Sequence[Scalar]) -> DForm:
        if len(coeffs) != chart.dim:
            raise RatFieldError("one coefficient per chart variable required")
        return cls(chart, 1, {(i,): _lift(c, chart) for i, c in enumerate(coeffs)})

    @classmethod
    def from_terms(cls, chart: Chart, degree: int, terms: Iterable[tuple[Sequence[int], Scalar]]) -> DForm:
        """Accumulate coefficients on arbitrary index orders with sign bookkeeping."""
        acc: dict[tuple[int, ...], RatFn] = {}
        for idx, c in terms:
            key, sign = _sort_with_parity(idx)
            if sign == 0:
                continue
            val = _lift(c, chart) * sign
            acc[key] = acc[key] + val if key in acc else val
        return cls(chart, degree, acc)

    # -- algebra ----------------------------------------------------------
    def coeff(self, idx: Sequence[int]) -> RatFn:
        key, sign = _sort_with_parity(idx)
        if sign == 0:
            return self.chart.zero()
        c = self.terms.get(key)
        return c * sign if c is not None else self.chart.zero()

    def one_form_coeffs(self) -> list[RatFn]:
        if self.degree != 1:
            raise RatFieldError("not a 1-form")
        return [self.coeff((i,)) for i in range(self.chart.dim)]

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: DForm) -> DForm:
        _check_chart(self.chart, other.chart)
        if self.degree != other.degree:
            raise RatFieldError("adding forms of different degree")
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return DForm(self.chart, self.degree, out)

    def __neg__(self) -> DForm:
        return DForm(self.chart, self.degree, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other: DForm) -> DForm:
        return self + (-other)

    def __mul__(self, f: Scalar) -> DForm:
        if isinstance(f, DForm):
            return NotImplemented
        g = _lift(f, self.chart)
        return DForm(self.chart, self.degree, {k: v * g for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __xor__(self, other: DForm) -> DForm:
        return wedge(self, other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DForm):
            return NotImplemented
        return (
            self.chart.variables == other.chart.variables
            and self.degree == other.degree
            and (self - other).is_zero()
        )

    def __hash__(self) -> int:
        return hash((self.chart.variables, self.degree, frozenset(self.terms.items())))

    def __call__(self, *fields: VField) -> RatFn:
        return evaluate(self, fields)

    def __str__(self) -> str:
        return format_form(self)

    def __repr__(self) -> str:
        return f"DForm({format_form(self)!r})"


def _lift(c: Scalar, chart: Chart) -> RatFn:
    if isinstance(c, RatFn):
        _check_chart(c.chart, chart)
        return c
    return chart.const(c)


def format_form(a: DForm) -> str:
    if a.is_zero():
        return "0"
    names = a.chart.variables
    parts = []
    for idx in sorted(a.terms):
        c = a.terms[idx]
        basis = "^".join(f"d{names[i]}" for i in idx)
        if not basis:
            parts.append(f"({c})")
        elif c == 1:
            parts.append(basis)
        else:
            parts.append(f"({c})*{basis}")
    return " + ".join(parts)


def wedge(a: DForm, b: DForm) -> DForm:
    _check_chart(a.chart, b.chart)
    terms = []
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            if set(ia) & set(ib):
                continue
            terms.append((ia + ib, ca * cb))
    return DForm.from_terms(a.chart, a.degree + b.degree, terms)


def dext(a: DForm) -> DForm:
    terms = []
    for idx, c in a.terms.items():
        for i in range(a.chart.dim):
            if i in idx:
                continue
            dc = c.deriv(i)
            if dc:
                terms.append(((i,) + idx, dc))
    return DForm.from_terms(a.chart, a.degree + 1, terms)


def evaluate(a: DForm, fields: Sequence[VField]) -> RatFn:
    """a(X_1, ..., X_p) with the determinant convention dx∧dy(X, Y) = X^x Y^y - X^y Y^x."""
    if len(fields) != a.degree:
        raise RatFieldError(f"{a.degree}-form evaluated on {len(fields)} vector fields")
    for X in fields:
        _check_chart(a.chart, X.chart)
    total = a.chart.zero()
    for idx, c in a.terms.items():
        minor = determinant([[X.coeffs[i] for i in idx] for X in fields], a.chart)
        if minor:
            total = total + c * minor
    return total


def interior(X: VField, a: DForm) -> DForm:
    """Contraction in the first slot."""
    _check_chart(X.chart, a.chart)
    terms = []
    for idx, c in a.terms.items():
        for pos, i in enumerate(idx):
            if X.coeffs[i]:
                sign = -1 if pos % 2 else 1
                terms.append((idx[:pos] + idx[pos + 1 :], c * X.coeffs[i] * sign))
    return DForm.from_terms(a.chart, a.degree - 1, terms)


class VField:
    """Vector field as a coefficient list over the chart's coordinate basis."""

    __slots__ = ("chart", "coeffs")

    def __init__(self, chart: Chart, coeffs: Sequence[Scalar]) -> None:
        if len(coeffs) != chart.dim:
            raise RatFieldError(f"vector field needs {chart.dim} coefficients, got {len(coeffs)}")
        self.chart = chart
        self.coeffs = tuple(_lift(c, chart) for c in coeffs)

    @classmethod
    def zero(cls, chart: Chart) -> VField:
        return cls(chart, [0] * chart.dim)

    @classmethod
    def partial(cls, chart: Chart, var: str | int) -> VField:
        i = var if isinstance(var, int) else chart.index(var)
        return cls(chart, [1 if k == i else 0 for k in range(chart.dim)])

    def apply(self, f: RatFn) -> RatFn:
        """Directional derivative X(f)."""
        _check_chart(self.chart, f.chart)
        total = self.chart.zero()
        for i, c in enumerate(self.coeffs):
            if c:
                d = f.deriv(i)
                if d:
                    total = total + c * d
        return total

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __add__(self, other: VField) -> VField:
        _check_chart(self.chart, other.chart)
        return VField(self.chart, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other: VField) -> VField:
        _check_chart(self.chart, other.chart)
        return VField(self.chart, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self) -> VField:
        return VField(self.chart, [-a for a in self.coeffs])

    def __mul__(self, f: Scalar) -> VField:
        if isinstance(f, VField):
            return NotImplemented
        g = _lift(f, self.chart)
        return VField(self.chart, [a * g for a in self.coeffs])

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VField):
            return NotImplemented
        return self.chart.variables == other.chart.variables and all(
            a == b for a, b in zip(self.coeffs, other.coeffs)
        )

    def __hash__(self) -> int:
        return hash((self.chart.variables, self.coeffs))

    def __str__(self) -> str:
        return format_vfield(self)

    def __repr__(self) -> str:
        return f"VField({format_vfield(self)!r})"


def format_vfield(X: VField) -> str:
    parts = []
    for name, c in zip(X.chart.variables, X.coeffs):
        if not c:
            continue
        if c == 1:
            parts.append(f"d/d{name}")
        else:
            parts.append(f"({c})*d/d{name}")
    return " + ".join(parts) if parts else "0"


def lie_bracket(X: VField, Y: VField) -> VField:
    _check_chart(X.chart, Y.chart)
    return VField(X.chart, [X.apply(b) - Y.apply(a) for a, b in zip(X.coeffs, Y.coeffs)])


@dataclass(frozen=True)
class RatMap:
    """Rational map given by one component per target variable, in source variables."""

    source: Chart
    target: Chart
    components: tuple[RatFn, ...]

    def __post_init__(self) -> None:
        if len(self.components) != self.target.dim:
            raise RatFieldError(f"map needs {self.target.dim} components, got {len(self.components)}")
        for c in self.components:
            _check_chart(c.chart, self.source)

    @classmethod
    def parse(cls, source: Chart, target: Chart, exprs: Sequence[str]) -> RatMap:
        return cls(source, target, tuple(source.parse(e) for e in exprs))

    @classmethod
    def identity(cls, chart: Chart) -> RatMap:
        return cls(chart, chart, chart.gens())

    def apply(self, f: RatFn) -> RatFn:
        """Pull back a function: f ∘ F."""
        _check_chart(f.chart, self.target)
        return f.substitute(self.components, self.source)

    def compose(self, inner: RatMap) -> RatMap:
        """self ∘ inner."""
        _check_chart(inner.target, self.source)
        return RatMap(inner.source, self.target, tuple(inner.apply(c) for c in self.components))

    def jacobian(self) -> list[list[RatFn]]:
        return [[c.deriv(j) for j in range(self.source.dim)] for c in self.components]

    def is_identity(self) -> bool:
        return self.source.variables == self.target.variables and all(
            c == g for c, g in zip(self.components, self.source.gens())
        )

    def evaluate(self, point: Sequence[int | Fraction]) -> tuple[Fraction, ...]:
        return tuple(c.eval(point) for c in self.components)


def pullback(F: RatMap, a: DForm) -> DForm:
    _check_chart(a.chart, F.target)
    src = F.source
    if a.degree == 0:
        return DForm.function(F.apply(a.coeff(())))
    differentials = [DForm.one_form(src, [c.deriv(j) for j in range(src.dim)]) for c in F.components]
    result = DForm.zero(src, a.degree)
    for idx, c in a.terms.items():
        term = DForm.function(F.apply(c))
        for i in idx:
            term = wedge(term, differentials[i])
        result = result + term
    return result


def pushforward(F: RatMap, F_inv: RatMap, X: VField) -> VField:
    """Push X forward along F, after checking F∘F_inv = id identically."""
    _check_chart(X.chart, F.source)
    if not F.compose(F_inv).is_identity():
        raise RatFieldError("supplied inverse does not satisfy F∘F⁻¹ = id")
    jac = F.jacobian()
    comps = []
    for row in jac:
        acc = F.source.zero()
        for d, x in zip(row, X.coeffs):
            if d and x:
                acc = acc + d * x
        comps.append(F_inv.apply(acc))
    return VField(F.target, comps)


@dataclass(frozen=True)
class CoframeResult:
    ok: bool
    witness: RatFn


def coframe_check(forms: Sequence[DForm]) -> CoframeResult:
    if not forms:
        raise RatFieldError("empty list of forms")
    chart = forms[0].chart
    for a in forms:
        if a.degree != 1:
            raise RatFieldError("coframe_check needs 1-forms")
        _check_chart(a.chart, chart)
    if len(forms) != chart.dim:
        raise RatFieldError(f"{len(forms)} forms on a {chart.dim}-dimensional chart")
    det = determinant([a.one_form_coeffs() for a in forms], chart)
    return CoframeResult(bool(det), det)


@dataclass(frozen=True)
class FrobeniusResult:
    involutive: bool
    rank: int
    witness: RatFn
    counterexample: tuple[int, int] | None = None


def span_rank(span: Sequence[VField]) -> tuple[int, RatFn]:
    chart = span[0].chart
    return rank([list(X.coeffs) for X in span], chart)


def in_span(span: Sequence[VField], X: VField) -> bool:
    """Whether X is a function-linear combination of the span."""
    if not span:
        return X.is_zero()
    chart = X.chart
    A = [[Y.coeffs[i] for Y in span] for i in range(chart.dim)]
    return solve_linear(A, list(X.coeffs), chart).consistent


def frobenius_involutive(span: Sequence[VField]) -> FrobeniusResult:
    if not span:
        raise RatFieldError("empty span")
    chart = span[0].chart
    for X in span:
        _check_chart(X.chart, chart)
    r, witness = span_rank(span)
    for i, j in combinations(range(len(span)), 2):
        if not in_span(span, lie_bracket(span[i], span[j])):
            return FrobeniusResult(False, r, witness, (i, j))
    return FrobeniusResult(True, r, witness)


def annihilator(span: Sequence[VField], chart: Chart | None = None) -> list[DForm]:
    """Basis of 1-forms vanishing on every field of the span."""
    ch = chart or span[0].chart
    if not span:
        return [DForm.d(ch, i) for i in range(ch.dim)]
    basis = solve_linear([list(X.coeffs) for X in span], None, ch).nullspace
    return [DForm.one_form(ch, vec) for vec in basis]
