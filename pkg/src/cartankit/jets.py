"""Truncated jets of local diffeomorphisms of Rⁿ and the jet-groupoid chart.

Jet tables store partial derivatives ∂^α F^i (not Taylor coefficients).
Composition and inversion convert to truncated power series internally.
Entries may be exact rationals or :class:`RatFn` values, so the same routines
serve pointwise arithmetic and symbolic chart computations.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations
from math import factorial, prod
from typing import Any, Iterable, Mapping, Sequence

from .chartcalc import DForm, RatMap, VField, pullback
from .ratfield import Chart, RatFieldError, RatFn

MultiIndex = tuple[int, ...]


class JetError(RatFieldError):
    pass


@lru_cache(maxsize=None)
def multi_indices(n: int, k: int) -> tuple[MultiIndex, ...]:
    """All α with |α| ≤ k in graded-lex order: by degree, then (1,0) before (0,1)."""
    out: list[MultiIndex] = []

    def rec(prefix: tuple[int, ...], remaining: int, slots: int) -> Iterable[MultiIndex]:
        if slots == 0:
            if remaining == 0:
                yield prefix
            return
        for a in range(remaining, -1, -1):
            yield from rec(prefix + (a,), remaining - a, slots - 1)

    for d in range(k + 1):
        out.extend(rec((), d, n))
    return tuple(out)


def unit_index(n: int, a: int) -> MultiIndex:
    return tuple(1 if b == a else 0 for b in range(n))


def add_index(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(alpha, beta))


def _factorial_of(alpha: MultiIndex) -> int:
    return prod(factorial(a) for a in alpha)


def _is_zero(x: Any) -> bool:
    return x == 0


# ---------------------------------------------------------------------------
# Truncated power series in n variables: dict α -> coefficient


Series = dict[MultiIndex, Any]


def _series_mul(a: Series, b: Series, k: int) -> Series:
    out: Series = {}
    for ea, ca in a.items():
        da = sum(ea)
        for eb, cb in b.items():
            if da + sum(eb) > k:
                continue
            e = add_index(ea, eb)
            out[e] = out[e] + ca * cb if e in out else ca * cb
    return {e: c for e, c in out.items() if not _is_zero(c)}


def _series_compose(outer: Sequence[Series], inner: Sequence[Series], n_in: int, k: int) -> list[Series]:
    """outer(inner(h)) truncated at degree k; inner has no constant terms."""
    m = len(inner)
    powers: list[list[Series]] = []
    one = {(0,) * n_in: 1}
    for j in range(m):
        col = [one]
        for _ in range(k):
            col.append(_series_mul(col[-1], inner[j], k))
        powers.append(col)
    result = []
    for comp in outer:
        acc: Series = {}
        for beta, c in comp.items():
            if _is_zero(c):
                continue
            term: Series = {(0,) * n_in: c}
            for j, b in enumerate(beta):
                if b:
                    term = _series_mul(term, powers[j][b], k)
            for e, v in term.items():
                acc[e] = acc[e] + v if e in acc else v
        result.append({e: v for e, v in acc.items() if not _is_zero(v)})
    return result


# ---------------------------------------------------------------------------
# Jet points


@dataclass(frozen=True)
class JetPoint:
    """k-jet at ``source`` of a map Rⁿ → Rⁿ, as derivatives (i, α) -> ∂^α F^i."""

    n: int
    k: int
    source: tuple[Any, ...]
    table: Mapping[tuple[int, MultiIndex], Any]

    def __post_init__(self) -> None:
        for i in range(self.n):
            for alpha in multi_indices(self.n, self.k):
                if (i, alpha) not in self.table:
                    raise JetError(f"missing derivative entry {(i, alpha)}")

    def __getitem__(self, key: tuple[int, MultiIndex]) -> Any:
        return self.table[key]

    @property
    def target(self) -> tuple[Any, ...]:
        zero = (0,) * self.n
        return tuple(self.table[(i, zero)] for i in range(self.n))

    def jacobian(self) -> list[list[Any]]:
        return [[self.table[(i, unit_index(self.n, a))] for a in range(self.n)] for i in range(self.n)]

    def flat(self) -> list[Any]:
        """Derivative table in (α graded-lex, i) order."""
        return [self.table[(i, alpha)] for alpha in multi_indices(self.n, self.k) for i in range(self.n)]

    def series(self) -> list[Series]:
        """Taylor series of F(source + h) − F(source) per component."""
        out = []
        for i in range(self.n):
            s: Series = {}
            for alpha in multi_indices(self.n, self.k):
                if sum(alpha) == 0:
                    continue
                c = self.table[(i, alpha)]
                if not _is_zero(c):
                    s[alpha] = c * Fraction(1, _factorial_of(alpha))
            out.append(s)
        return out

    @classmethod
    def from_series(cls, n: int, k: int, source: Sequence[Any], target: Sequence[Any], series: Sequence[Series]) -> JetPoint:
        table: dict[tuple[int, MultiIndex], Any] = {}
        for i in range(n):
            for alpha in multi_indices(n, k):
                if sum(alpha) == 0:
                    table[(i, alpha)] = target[i]
                else:
                    table[(i, alpha)] = series[i].get(alpha, 0) * _factorial_of(alpha)
        return cls(n, k, tuple(source), table)

    @classmethod
    def identity(cls, source: Sequence[Any], k: int) -> JetPoint:
        n = len(source)
        table: dict[tuple[int, MultiIndex], Any] = {}
        for i in range(n):
            for alpha in multi_indices(n, k):
                d = sum(alpha)
                if d == 0:
                    table[(i, alpha)] = source[i]
                elif d == 1:
                    table[(i, alpha)] = 1 if alpha == unit_index(n, i) else 0
                else:
                    table[(i, alpha)] = 0
        return cls(n, k, tuple(source), table)

    @classmethod
    def from_flat(cls, n: int, k: int, source: Sequence[Any], values: Sequence[Any]) -> JetPoint:
        keys = [(i, alpha) for alpha in multi_indices(n, k) for i in range(n)]
        if len(values) != len(keys):
            raise JetError(f"expected {len(keys)} derivative entries, got {len(values)}")
        return cls(n, k, tuple(source), dict(zip(keys, values)))

    def truncate(self, k: int) -> JetPoint:
        if k > self.k:
            raise JetError("cannot raise jet order by truncation")
        return JetPoint(self.n, k, self.source, {key: v for key, v in self.table.items() if sum(key[1]) <= k})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JetPoint):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and all(a == b for a, b in zip(self.source, other.source))
            and all(self.table[key] == other.table[key] for key in self.table)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.k))


def jet_of_map(F: RatMap, x0: Sequence[int | Fraction] | None, k: int) -> JetPoint:
    """k-jet of F at x0; with x0 None the entries stay symbolic in F's source chart."""
    n = F.source.dim
    if F.target.dim != n:
        raise JetError("jets are of maps Rⁿ → Rⁿ")
    table: dict[tuple[int, MultiIndex], Any] = {}
    for i, comp in enumerate(F.components):
        cache: dict[MultiIndex, RatFn] = {(0,) * n: comp}
        for alpha in multi_indices(n, k):
            if alpha not in cache:
                a = next(a for a in range(n) if alpha[a])
                lower = alpha[:a] + (alpha[a] - 1,) + alpha[a + 1 :]
                cache[alpha] = cache[lower].deriv(a)
            val = cache[alpha]
            table[(i, alpha)] = val if x0 is None else val.eval(x0)
    source = F.source.gens() if x0 is None else tuple(Fraction(x) for x in x0)
    return JetPoint(n, k, tuple(source), table)


def jet_compose(g: JetPoint, f: JetPoint, check_endpoints: bool = True) -> JetPoint:
    """The jet of g∘f at f.source."""
    if g.n != f.n:
        raise JetError("dimension mismatch")
    if g.k != f.k:
        raise JetError(f"order mismatch: {g.k} vs {f.k}")
    if check_endpoints and not all(a == b for a, b in zip(f.target, g.source)):
        raise JetError("source of the outer jet differs from the target of the inner jet")
    n, k = f.n, f.k
    composed = _series_compose(g.series(), f.series(), n, k)
    return JetPoint.from_series(n, k, f.source, g.target, composed)


def _invert_matrix(M: Sequence[Sequence[Any]]) -> list[list[Any]]:
    n = len(M)
    A = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        piv = next((r for r in range(c, n) if not _is_zero(A[r][c])), None)
        if piv is None:
            raise JetError("singular linear part")
        A[c], A[piv] = A[piv], A[c]
        p = A[c][c]
        A[c] = [x / p for x in A[c]]
        for r in range(n):
            if r != c and not _is_zero(A[r][c]):
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return [row[n:] for row in A]


def jet_inverse(j: JetPoint) -> JetPoint:
    """Inverse jet at j.target, by fixed-point iteration order by order."""
    n, k = j.n, j.k
    Linv = _invert_matrix(j.jacobian())
    ser = j.series()
    nonlinear = [{e: c for e, c in s.items() if sum(e) >= 2} for s in ser]
    # G(h) = L⁻¹ (h − N(G(h)))
    ident = [{unit_index(n, a): 1} for a in range(n)]

    def apply_linv(vecs: Sequence[Series]) -> list[Series]:
        out = []
        for i in range(n):
            acc: Series = {}
            for a in range(n):
                if _is_zero(Linv[i][a]):
                    continue
                for e, c in vecs[a].items():
                    v = Linv[i][a] * c
                    acc[e] = acc[e] + v if e in acc else v
            out.append({e: v for e, v in acc.items() if not _is_zero(v)})
        return out

    G = apply_linv(ident)
    for _ in range(k - 1):
        N = _series_compose(nonlinear, G, n, k)
        rhs = []
        for a in range(n):
            s = dict(ident[a])
            for e, c in N[a].items():
                s[e] = s[e] - c if e in s else -c
            rhs.append({e: v for e, v in s.items() if not _is_zero(v)})
        G = apply_linv(rhs)
    return JetPoint.from_series(n, k, j.target, j.source, G)


# ---------------------------------------------------------------------------
# Jet chart J^kRⁿ


def coordinate_name(i: int, alpha: MultiIndex) -> str:
    return f"u{i + 1}_{''.join(str(a) for a in alpha)}"


class JetChart:
    """Symbolic chart of J^kRⁿ: source coordinates then u^i_α in (α, i) order."""

    def __init__(self, n: int, k: int, source_names: Sequence[str] | None = None) -> None:
        if k < 0 or n < 1:
            raise JetError("need n ≥ 1 and k ≥ 0")
        self.n = n
        self.k = k
        self.source_names = tuple(source_names or [f"x{a + 1}" for a in range(n)])
        self.fiber_keys = [(i, alpha) for alpha in multi_indices(n, k) for i in range(n)]
        names = list(self.source_names) + [coordinate_name(i, a) for i, a in self.fiber_keys]
        nonvanishing = [_jacobian_text(n)] if k >= 1 else []
        self.chart = Chart.of(names, nonvanishing)

    def u(self, i: int, alpha: MultiIndex) -> RatFn:
        return self.chart.var(coordinate_name(i, alpha))

    def x(self, a: int) -> RatFn:
        return self.chart.var(self.source_names[a])

    def frame_keys(self) -> list[tuple[int, MultiIndex]]:
        """Frame of A^{k-1}: pairs (i, α) with |α| ≤ k − 1."""
        return [(i, a) for i, a in self.fiber_keys if sum(a) <= self.k - 1]

    def point(self) -> JetPoint:
        """The generic jet whose entries are the chart's own coordinates."""
        src = tuple(self.x(a) for a in range(self.n))
        return JetPoint(self.n, self.k, src, {key: self.u(*key) for key in self.fiber_keys})

    def unit_section(self, base: Chart | None = None) -> RatMap:
        """x ↦ identity jet at x, as a map from the source chart."""
        base = base or Chart.of(self.source_names)
        ident = JetPoint.identity(base.gens(), self.k)
        comps = [base.var(name) for name in self.source_names]
        comps += [_lift(ident[key], base) for key in self.fiber_keys]
        return RatMap(base, self.chart, tuple(comps))


def _jacobian_text(n: int) -> str:
    """det(u^i_{e_a}) written out by the Leibniz formula."""
    terms = []
    for perm in permutations(range(n)):
        inversions = sum(1 for a, b in combinations(range(n), 2) if perm[a] > perm[b])
        factors = "*".join(coordinate_name(i, unit_index(n, perm[i])) for i in range(n))
        terms.append(("-" if inversions % 2 else "+") + factors)
    return "".join(terms).lstrip("+")


def _lift(x: Any, chart: Chart) -> RatFn:
    return x if isinstance(x, RatFn) else chart.const(x)


def contact_forms(jc: JetChart) -> dict[tuple[int, MultiIndex], DForm]:
    """du^i_α − Σ_a u^i_{α+e_a} dx^a for |α| ≤ k − 1."""
    ch = jc.chart
    out = {}
    for i, alpha in jc.frame_keys():
        form = DForm.d(ch, coordinate_name(i, alpha))
        for a in range(jc.n):
            form = form - DForm.d(ch, jc.source_names[a]) * jc.u(i, add_index(alpha, unit_index(jc.n, a)))
        out[(i, alpha)] = form
    return out


def right_translation_matrix(jc: JetChart) -> dict[tuple[int, MultiIndex], dict[tuple[int, MultiIndex], RatFn]]:
    """Matrix of v ↦ d/dε (g + εv)·g⁻¹ on (k−1)-jets, g the chart's generic jet.

    Composition is linear in the outer jet, so the differential is obtained by
    composing each coordinate direction with the symbolic inverse of g.
    """
    if jc.k < 1:
        raise JetError("the Cartan form needs k ≥ 1")
    ch = jc.chart
    low = jc.k - 1
    g = jc.point().truncate(low)
    g_inv = jet_inverse(g) if low >= 1 else JetPoint(jc.n, 0, g.target, {(i, (0,) * jc.n): g.source[i] for i in range(jc.n)})
    keys = jc.frame_keys()
    matrix: dict[tuple[int, MultiIndex], dict[tuple[int, MultiIndex], RatFn]] = {k: {} for k in keys}
    for j, alpha in keys:
        table = {key: (1 if key == (j, alpha) else 0) for key in keys}
        direction = JetPoint(jc.n, low, g.source, table)
        image = _compose_linear(direction, g_inv)
        for key in keys:
            val = image[key]
            if not _is_zero(val):
                matrix[key][(j, alpha)] = _lift(val, ch)
    return matrix


def _compose_linear(outer: JetPoint, inner: JetPoint) -> JetPoint:
    """Composition where the outer jet's value entries are tangent directions."""
    n, k = inner.n, inner.k
    composed = _series_compose(outer.series(), inner.series(), n, k) if k else [{} for _ in range(n)]
    return JetPoint.from_series(n, k, inner.source, outer.target, composed)


def cartan_form_chart(n: int, k: int, source_names: Sequence[str] | None = None) -> tuple[JetChart, dict[tuple[int, MultiIndex], DForm]]:
    """Cartan form of J^kRⁿ, one 1-form per frame pair (i, α) with |α| ≤ k − 1."""
    jc = JetChart(n, k, source_names)
    theta = contact_forms(jc)
    R = right_translation_matrix(jc)
    forms = {}
    for key in jc.frame_keys():
        acc = DForm.zero(jc.chart, 1)
        for src, coeff in R[key].items():
            acc = acc + theta[src] * coeff
        forms[key] = acc
    return jc, forms


def restrict_forms(forms: Mapping[Any, DForm], embedding: RatMap) -> dict[Any, DForm]:
    """Pull the forms back along a defining-equation embedding."""
    return {key: pullback(embedding, form) for key, form in forms.items()}


# ---------------------------------------------------------------------------
# Sections


@dataclass(frozen=True)
class JetSection:
    """Section x ↦ (b^i_α(x)) of a k-jet bundle over a base chart."""

    base: Chart
    n: int
    k: int
    components: Mapping[tuple[int, MultiIndex], RatFn]

    def __post_init__(self) -> None:
        if self.base.dim != self.n:
            raise JetError("base chart dimension must equal n")
        for key in [(i, a) for a in multi_indices(self.n, self.k) for i in range(self.n)]:
            if key not in self.components:
                raise JetError(f"missing component {key}")

    def __getitem__(self, key: tuple[int, MultiIndex]) -> RatFn:
        return self.components[key]

    @classmethod
    def prolongation(cls, F: RatMap, k: int) -> JetSection:
        """The holonomic section x ↦ j^k_x F."""
        j = jet_of_map(F, None, k)
        return cls(F.source, F.source.dim, k, dict(j.table))

    @classmethod
    def from_values(cls, base: Chart, k: int, values: Mapping[tuple[int, MultiIndex], Any]) -> JetSection:
        n = base.dim
        comps = {}
        for alpha in multi_indices(n, k):
            for i in range(n):
                v = values.get((i, alpha), 0)
                comps[(i, alpha)] = v if isinstance(v, RatFn) else base.const(v)
        return cls(base, n, k, comps)


def holonomic_defect(b: JetSection) -> dict[tuple[int, MultiIndex, int], RatFn]:
    """∂_a b^i_α − b^i_{α+e_a} for |α| ≤ k − 1."""
    out = {}
    for alpha in multi_indices(b.n, b.k - 1) if b.k >= 1 else ():
        for i in range(b.n):
            for a in range(b.n):
                out[(i, alpha, a)] = b[(i, alpha)].deriv(a) - b[(i, add_index(alpha, unit_index(b.n, a)))]
    return out


def spencer_D(s: JetSection, X: VField) -> JetSection:
    """D_X(s)_α = X(s_α) − Σ_a X^a s_{α+e_a}, an order k − 1 section."""
    if s.k < 1:
        raise JetError("the Spencer operator needs order ≥ 1")
    comps = {}
    for alpha in multi_indices(s.n, s.k - 1):
        for i in range(s.n):
            val = X.apply(s[(i, alpha)])
            for a in range(s.n):
                if X.coeffs[a]:
                    val = val - X.coeffs[a] * s[(i, add_index(alpha, unit_index(s.n, a)))]
            comps[(i, alpha)] = val
    return JetSection(s.base, s.n, s.k - 1, comps)


# ---------------------------------------------------------------------------
# Prolonged action of a diffeomorphism


def prolong_element(
    phi: RatMap,
    phi_inv: RatMap | None,
    k: int,
    embedding: RatMap | None = None,
) -> RatMap:
    """j ↦ j·(j^kφ at s(j))⁻¹ on J^kRⁿ, or on the reduced chart of an embedding.

    ``phi_inv`` is optional and only certifies invertibility; the jet inverse
    is computed directly, so maps without a rational inverse are accepted.
    """
    if phi_inv is not None and (not phi.compose(phi_inv).is_identity() or not phi_inv.compose(phi).is_identity()):
        raise JetError("supplied inverse does not invert the map identically")
    n = phi.source.dim
    if embedding is None:
        jc = JetChart(n, k, phi.source.variables)
    else:
        jc = _chart_matching(embedding.target, n, k)
    b = _jet_along(phi, jc)
    new = jet_compose(jc.point(), jet_inverse(b), check_endpoints=False)
    comps = [_lift(c, jc.chart) for c in new.source] + [_lift(new[key], jc.chart) for key in jc.fiber_keys]
    full = RatMap(jc.chart, jc.chart, tuple(comps))
    if embedding is None:
        return full
    return _reduce_map(full, embedding)


def _chart_matching(chart: Chart, n: int, k: int) -> JetChart:
    names = chart.variables[:n]
    jc = JetChart(n, k, names)
    if jc.chart.variables != chart.variables:
        raise JetError("embedding target is not a jet chart of matching order")
    return jc


def _jet_along(phi: RatMap, jc: JetChart) -> JetPoint:
    """j^kφ at the source point of the generic jet, entries as chart functions."""
    sym = jet_of_map(phi, None, jc.k)
    to_src = [jc.x(a) for a in range(jc.n)]
    table = {key: v.substitute(to_src, jc.chart) for key, v in sym.table.items()}
    return JetPoint(jc.n, jc.k, tuple(to_src), table)


def reduced_coordinate_map(embedding: RatMap) -> dict[str, str]:
    """For each reduced coordinate, the jet coordinate that the embedding sets equal to it."""
    out = {}
    gens = {str(v): v for v in embedding.source.gens()}
    for name in embedding.source.variables:
        var = gens[name]
        hit = next((t for t, c in zip(embedding.target.variables, embedding.components) if c == var), None)
        if hit is None:
            raise JetError(f"reduced coordinate {name} is not a jet coordinate of the embedding")
        out[name] = hit
    return out


def _reduce_map(full: RatMap, embedding: RatMap) -> RatMap:
    red = embedding.source
    coords = reduced_coordinate_map(embedding)
    along = full.compose(embedding)
    comps = tuple(along.components[embedding.target.index(coords[name])] for name in red.variables)
    reduced = RatMap(red, red, comps)
    # The image must stay on the embedded locus.
    if not all(a == b for a, b in zip(embedding.compose(reduced).components, along.components)):
        raise JetError("prolonged map leaves the embedded locus")
    return reduced
