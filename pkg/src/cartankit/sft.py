"""From a groupoid chart with a Cartan-type form to a Cartan algebroid and its realization.

Groupoid charts are coordinate charts in which the target and the source are
coordinate projections, with the target coordinates listed first.  The Lie
algebroid frame is the set of non-source coordinate directions at the units.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Sequence

from .algebroid import AlmostCartanAlgebroid, FramedAlgebroid, mat_mul
from .chartcalc import DForm, RatMap, VField, frobenius_involutive, in_span, lie_bracket, pullback
from .jets import (
    JetChart,
    JetPoint,
    MultiIndex,
    cartan_form_chart,
    coordinate_name,
    jet_compose,
    reduced_coordinate_map,
    restrict_forms,
    unit_index,
)
from .ratfield import Chart, RatFieldError, RatFn, Scalar, grlex_key, rank, solve_linear
from .realization import PiFamily, RealizationData, solve_pi

Multiply = Callable[[Sequence[RatFn], Sequence[RatFn]], Sequence[RatFn]]


class GroupoidError(RatFieldError):
    pass


def extend_chart(chart: Chart, names: Sequence[str]) -> Chart:
    """Append coordinates, keeping the nonvanishing declarations."""
    k = len(names)
    polys = tuple(tuple((e + (0,) * k, c) for e, c in entry) for entry in chart.nonvanishing)
    return Chart(chart.variables + tuple(names), polys)


def fresh_name(chart: Chart, stem: str) -> str:
    name = stem
    while name in chart.variables:
        name += "_"
    return name


def _lift(x: Scalar, chart: Chart) -> RatFn:
    return x if isinstance(x, RatFn) else chart.const(x)


@dataclass
class GroupoidChart:
    """Chart of a Lie groupoid near its units with coordinate source and target."""

    chart: Chart
    base: Chart
    target_indices: tuple[int, ...]
    source_indices: tuple[int, ...]
    unit: RatMap
    multiply: Multiply

    def __post_init__(self) -> None:
        m = self.base.dim
        if self.target_indices != tuple(range(m)):
            raise GroupoidError("target coordinates must come first")
        if len(self.source_indices) != m or set(self.source_indices) & set(self.target_indices):
            raise GroupoidError("source coordinates must be distinct from the target coordinates")
        if self.unit.source.variables != self.base.variables or self.unit.target.variables != self.chart.variables:
            raise GroupoidError("unit must map the base chart into the groupoid chart")
        gens = self.base.gens()
        for idx in (self.source_indices, self.target_indices):
            for a, i in enumerate(idx):
                if self.unit.components[i] != gens[a]:
                    raise GroupoidError("unit is not a section of source and target")

    @property
    def m(self) -> int:
        return self.base.dim

    @property
    def frame_indices(self) -> tuple[int, ...]:
        """Non-source coordinate directions, a frame of ker ds along the units."""
        return tuple(i for i in range(self.chart.dim) if i not in self.source_indices)

    @property
    def frame_names(self) -> tuple[str, ...]:
        return tuple(self.chart.variables[i] for i in self.frame_indices)

    def target_of(self, coords: Sequence[RatFn]) -> list[RatFn]:
        return [coords[i] for i in self.target_indices]

    def source_of(self, coords: Sequence[RatFn]) -> list[RatFn]:
        return [coords[i] for i in self.source_indices]

    def unit_at(self, point: Sequence[RatFn], chart: Chart) -> list[RatFn]:
        return [c.substitute(list(point), chart) for c in self.unit.components]

    def at_units(self, f: RatFn) -> RatFn:
        return f.substitute(list(self.unit.components), self.base)

    def check_unit_law(self) -> bool:
        """m(unit(t(g)), g) = g identically."""
        g = self.chart.gens()
        out = self.multiply(self.unit_at(self.target_of(g), self.chart), g)
        return all(a == b for a, b in zip(out, g))


def groupoid_from_expressions(
    chart: Chart,
    base: Chart,
    source: Sequence[str],
    unit: Sequence[str],
    multiplication: Sequence[str],
) -> GroupoidChart:
    """User-presented groupoid; multiplication expressions use ``v_1`` for h and ``v_2`` for g."""
    names = [v + "_1" for v in chart.variables] + [v + "_2" for v in chart.variables]
    prod = Chart(tuple(names))
    comps = [prod.parse(e) for e in multiplication]
    if len(comps) != chart.dim:
        raise GroupoidError("multiplication needs one expression per groupoid coordinate")
    src_idx = tuple(chart.index(v) for v in source)

    def multiply(h: Sequence[RatFn], g: Sequence[RatFn]) -> list[RatFn]:
        vals = list(h) + list(g)
        target = vals[0].chart
        return [c.substitute(vals, target) for c in comps]

    unit_map = RatMap.parse(base, chart, unit)
    return GroupoidChart(chart, base, tuple(range(base.dim)), src_idx, unit_map, multiply)


# ---------------------------------------------------------------------------
# Jet groupoids


@dataclass
class JetGroupoid:
    groupoid: GroupoidChart
    jet_chart: JetChart
    embedding: RatMap
    cartan_form: dict[tuple[int, MultiIndex], DForm]
    form_names: tuple[str, ...]

    @property
    def omega(self) -> tuple[DForm, ...]:
        return tuple(self.cartan_form.values())


def _identity_value(jc: JetChart, name: str, base: Chart) -> RatFn:
    if name in jc.source_names:
        return base.var(name)
    for i, alpha in jc.fiber_keys:
        if coordinate_name(i, alpha) == name:
            if sum(alpha) == 0:
                return base.var(jc.source_names[i])
            if alpha == unit_index(jc.n, i):
                return base.one()
            return base.zero()
    raise GroupoidError(f"{name} is not a jet coordinate")


def _default_embedding(jc: JetChart) -> RatMap:
    """Reorder J^k coordinates as targets, sources, then higher derivatives."""
    zero = (0,) * jc.n
    order = [coordinate_name(i, zero) for i in range(jc.n)] + list(jc.source_names)
    order += [v for v in jc.chart.variables if v not in order]
    nonv = []
    perm = [jc.chart.variables.index(v) for v in order]
    for entry in jc.chart.nonvanishing:
        nonv.append(tuple((tuple(e[p] for p in perm), c) for e, c in entry))
    red = Chart(tuple(order), tuple(nonv))
    return RatMap(red, jc.chart, tuple(red.var(v) for v in jc.chart.variables))


def jet_groupoid(n: int, k: int, source_names: Sequence[str], embedding: RatMap | None = None) -> JetGroupoid:
    """Groupoid chart of J^kRⁿ or of a subgroupoid given by an embedding of a reduced chart."""
    jc, forms = cartan_form_chart(n, k, source_names)
    if embedding is None:
        embedding = _default_embedding(jc)
    if embedding.target.variables != jc.chart.variables:
        raise GroupoidError("embedding must land in the jet chart of the given order")
    red = embedding.source
    coords = reduced_coordinate_map(embedding)
    inverse_coords = {v: k_ for k_, v in coords.items()}
    zero = (0,) * n
    targets = [inverse_coords.get(coordinate_name(i, zero)) for i in range(n)]
    sources = [inverse_coords.get(s) for s in jc.source_names]
    if None in targets or None in sources:
        raise GroupoidError("reduced chart must contain every source and target coordinate")
    if list(red.variables[:n]) != targets:
        raise GroupoidError("reduced chart must list the target coordinates first")
    base = Chart.of(source_names)
    unit = RatMap(base, red, tuple(_identity_value(jc, coords[v], base) for v in red.variables))
    full_unit = jc.unit_section(base)
    if not all(a == b for a, b in zip(embedding.compose(unit).components, full_unit.components)):
        raise GroupoidError("the embedded locus does not contain the identity jets")
    emb = embedding
    keys = jc.fiber_keys

    def to_jet(coords_: Sequence[RatFn]) -> JetPoint:
        ch = coords_[0].chart
        full = [c.substitute(list(coords_), ch) for c in emb.components]
        by_name = dict(zip(jc.chart.variables, full))
        src = tuple(by_name[s] for s in jc.source_names)
        return JetPoint(n, k, src, {key: by_name[coordinate_name(*key)] for key in keys})

    name_to_key = {coordinate_name(*key): key for key in keys}

    def multiply(h: Sequence[RatFn], g: Sequence[RatFn]) -> list[RatFn]:
        comp = jet_compose(to_jet(h), to_jet(g), check_endpoints=False)
        ch = g[0].chart
        out = []
        for v in red.variables:
            jname = coords[v]
            if jname in jc.source_names:
                out.append(_lift(comp.source[jc.source_names.index(jname)], ch))
            else:
                out.append(_lift(comp[name_to_key[jname]], ch))
        return out

    G = GroupoidChart(red, base, tuple(range(n)), tuple(red.index(s) for s in sources), unit, multiply)
    restricted = restrict_forms(forms, embedding)
    names = []
    for key in jc.frame_keys():
        nm = coordinate_name(*key)
        names.append(inverse_coords.get(nm, nm))
    return JetGroupoid(G, jc, embedding, restricted, tuple(names))


# ---------------------------------------------------------------------------
# Right-invariant fields and the Lie algebroid


def right_invariant_field(G: GroupoidChart, direction: int) -> VField:
    """g ↦ d/dε m(unit(t(g)) + ε e, g) at ε = 0, for the coordinate direction e."""
    if direction in G.source_indices:
        raise GroupoidError("frame directions must be tangent to the source fibers")
    eps = fresh_name(G.chart, "eps")
    Ge = extend_chart(G.chart, [eps])
    g = [G_var.to_chart(Ge) for G_var in G.chart.gens()]
    h = G.unit_at(G.target_of(g), Ge)
    h[direction] = h[direction] + Ge.var(eps)
    out = G.multiply(h, g)
    back = list(G.chart.gens()) + [G.chart.zero()]
    return VField(G.chart, [c.deriv(eps).substitute(back, G.chart) for c in out])


@dataclass
class GroupoidAlgebroid:
    algebroid: FramedAlgebroid
    fields: tuple[VField, ...]
    frame_indices: tuple[int, ...]


def algebroid_from_groupoid(G: GroupoidChart) -> GroupoidAlgebroid:
    """Brackets of right-invariant extensions at the units, anchor dt at the units."""
    idx = G.frame_indices
    fields = tuple(right_invariant_field(G, a) for a in idx)
    pos = {a: n for n, a in enumerate(idx)}
    table: dict[tuple[int, int, int], RatFn] = {}
    for j, k in combinations(range(len(idx)), 2):
        br = lie_bracket(fields[j], fields[k])
        at_units = [G.at_units(c) for c in br.coeffs]
        for s in G.source_indices:
            if at_units[s]:
                raise GroupoidError("bracket of right-invariant fields is not source-vertical at the units")
        for a, val in enumerate(at_units):
            if val and a in pos:
                table[(pos[a], j, k)] = val
    anchor = []
    for a in idx:
        comps = [G.base.one() if a == t else G.base.zero() for t in G.target_indices]
        anchor.append(VField(G.base, comps))
    F = FramedAlgebroid(G.base, len(idx), tuple(anchor), table, G.frame_names)
    return GroupoidAlgebroid(F, fields, idx)


# ---------------------------------------------------------------------------
# Spencer operator from the form


@dataclass
class SpencerTable:
    """D_{∂_c}(α) for base directions c and frame sections α, plus the symbol l = ω|_A."""

    base: Chart
    D: dict[tuple[int, int], tuple[RatFn, ...]]
    l: tuple[tuple[RatFn, ...], ...]
    lifts: tuple[VField, ...]
    e_names: tuple[str, ...]
    a_names: tuple[str, ...]

    @property
    def e_rank(self) -> int:
        return len(self.l)

    @property
    def a_rank(self) -> int:
        return len(self.l[0]) if self.l else 0

    def l_of(self, v: Sequence[RatFn]) -> tuple[RatFn, ...]:
        out = []
        for row in self.l:
            acc = self.base.zero()
            for x, y in zip(row, v):
                if x and y:
                    acc = acc + x * y
            out.append(acc)
        return tuple(out)

    def D_partial(self, c: int, v: Sequence[RatFn]) -> tuple[RatFn, ...]:
        """D_{∂_c}(Σ v_α α) = Σ v_α D_{∂_c}α + ∂_c(v_α) l(α)."""
        out = [self.base.zero() for _ in range(self.e_rank)]
        for a, f in enumerate(v):
            if not f:
                continue
            Da = self.D[(c, a)]
            df = f.deriv(c)
            for b in range(self.e_rank):
                if Da[b]:
                    out[b] = out[b] + f * Da[b]
                if df and self.l[b][a]:
                    out[b] = out[b] + df * self.l[b][a]
        return tuple(out)

    def D_along(self, X: VField, v: Sequence[RatFn]) -> tuple[RatFn, ...]:
        out = [self.base.zero() for _ in range(self.e_rank)]
        for c, xc in enumerate(X.coeffs):
            if xc:
                d = self.D_partial(c, v)
                out = [o + xc * x for o, x in zip(out, d)]
        return tuple(out)

    def to_dict(self) -> dict:
        dx = [f"d{v}" for v in self.base.variables]
        out = {}
        for a, an in enumerate(self.a_names):
            terms = []
            for c in range(self.base.dim):
                for b, val in enumerate(self.D[(c, a)]):
                    if val:
                        terms.append(f"({val})*{dx[c]}@{self.e_names[b]}")
            out[an] = " + ".join(terms) if terms else "0"
        return out


def _lift_field(G: GroupoidChart, omega: Sequence[DForm], c: int) -> VField:
    """X̂ with dt(X̂) = ∂_c and ω(X̂) = 0."""
    ch = G.chart
    N = ch.dim
    rows, rhs = [], []
    for a, t in enumerate(G.target_indices):
        rows.append([ch.one() if j == t else ch.zero() for j in range(N)])
        rhs.append(ch.one() if a == c else ch.zero())
    for w in omega:
        rows.append(w.one_form_coeffs())
        rhs.append(ch.zero())
    sol = solve_linear(rows, rhs, ch)
    if not sol.consistent:
        raise GroupoidError(f"no lift of d/d{G.base.variables[c]} killed by the form exists")
    return VField(ch, sol.particular)


def spencer_from_cartanform(
    G: GroupoidChart,
    omega: Sequence[DForm],
    e_names: Sequence[str] = (),
    algebroid: GroupoidAlgebroid | None = None,
) -> SpencerTable:
    """D_X(α) = ω([X̂, α̃]) at the units, with α̃ right-invariant and X̂ a lift killed by ω."""
    alg = algebroid or algebroid_from_groupoid(G)
    idx = alg.frame_indices
    l = tuple(tuple(G.at_units(w.coeff((a,))) for a in idx) for w in omega)
    lifts = tuple(_lift_field(G, omega, c) for c in range(G.m))
    D: dict[tuple[int, int], tuple[RatFn, ...]] = {}
    for c, Xh in enumerate(lifts):
        for a, V in enumerate(alg.fields):
            br = lie_bracket(Xh, V)
            D[(c, a)] = tuple(G.at_units(w(br)) for w in omega)
    names = tuple(e_names) or tuple(f"E{b + 1}" for b in range(len(omega)))
    return SpencerTable(G.base, D, l, lifts, names, G.frame_names)


# ---------------------------------------------------------------------------
# The Cartan algebroid on TM ⊕ E


def inverse_matrix(M: Sequence[Sequence[RatFn]], chart: Chart) -> list[list[RatFn]]:
    n = len(M)
    cols = []
    for k in range(n):
        e = [chart.one() if i == k else chart.zero() for i in range(n)]
        sol = solve_linear([list(r) for r in M], e, chart)
        if not sol.consistent or sol.rank != n:
            raise GroupoidError("frame matrix is singular")
        cols.append(sol.particular)
    return [[cols[j][i] for j in range(n)] for i in range(n)]


def default_splitting(table: SpencerTable) -> list[list[RatFn]]:
    """A right inverse ξ of l, as an A×E matrix."""
    base = table.base
    cols = []
    for b in range(table.e_rank):
        e = [base.one() if i == b else base.zero() for i in range(table.e_rank)]
        sol = solve_linear([list(r) for r in table.l], e, base)
        if not sol.consistent:
            raise GroupoidError("l is not surjective; no splitting exists")
        cols.append(sol.particular)
    return [[cols[b][a] for b in range(table.e_rank)] for a in range(table.a_rank)]


@dataclass
class CartanBuild:
    standard: AlmostCartanAlgebroid
    user: AlmostCartanAlgebroid
    frame_matrix: tuple[tuple[RatFn, ...], ...]
    frame_inverse: tuple[tuple[RatFn, ...], ...]
    sigma_basis: tuple[tuple[RatFn, ...], ...]
    splitting: tuple[tuple[RatFn, ...], ...]


def _matvec(M: Sequence[Sequence[RatFn]], v: Sequence[RatFn], chart: Chart) -> tuple[RatFn, ...]:
    out = []
    for row in M:
        acc = chart.zero()
        for x, y in zip(row, v):
            if x and y:
                acc = acc + x * y
        out.append(acc)
    return tuple(out)


def build_cartan_algebroid(
    table: SpencerTable,
    groupoid_algebroid: FramedAlgebroid,
    splitting: Sequence[Sequence[Scalar]] | None = None,
    frame: Sequence[Sequence[Scalar]] | None = None,
    frame_names: Sequence[str] = (),
) -> CartanBuild:
    """Bracket ([X,Y], c(α,β) + ∇_Xβ − ∇_Yα) on TM⊕E with σ = ker l acting by D.

    ``splitting`` is ξ as an A×E matrix; ``frame`` has one column per user frame
    element in the standard basis (∂_1..∂_m, ε_1..ε_e).
    """
    base = table.base
    m, e, na = base.dim, table.e_rank, table.a_rank
    r = m + e
    xi = [[_lift(x, base) for x in row] for row in (splitting if splitting is not None else default_splitting(table))]
    if len(xi) != na or any(len(row) != e for row in xi):
        raise GroupoidError(f"splitting must be a {na}×{e} matrix")
    xi_cols = [tuple(xi[a][b] for a in range(na)) for b in range(e)]
    for b, col in enumerate(xi_cols):
        if list(table.l_of(col)) != [base.one() if i == b else base.zero() for i in range(e)]:
            raise GroupoidError("splitting is not a right inverse of l")
    FA = groupoid_algebroid
    # ∇_{∂_c} ε_j
    Gamma = {(c, j): table.D_partial(c, xi_cols[j]) for c in range(m) for j in range(e)}

    def nabla(X: VField, j: int) -> tuple[RatFn, ...]:
        out = [base.zero()] * e
        for c, xc in enumerate(X.coeffs):
            if xc:
                out = [o + xc * g for o, g in zip(out, Gamma[(c, j)])]
        return tuple(out)

    rho_xi = [FA.anchor_of(col) for col in xi_cols]
    std: dict[tuple[int, int, int], RatFn] = {}
    for c in range(m):
        for j in range(e):
            for b, val in enumerate(Gamma[(c, j)]):
                if val:
                    std[(m + b, c, m + j)] = val
    for i, j in combinations(range(e), 2):
        tors = table.l_of(FA.bracket(xi_cols[i], xi_cols[j]))
        tors = [t - x + y for t, x, y in zip(tors, nabla(rho_xi[i], j), nabla(rho_xi[j], i))]
        for b, val in enumerate(tors):
            if val:
                std[(m + b, m + i, m + j)] = val
    anchor = [VField.partial(base, c) for c in range(m)] + [VField.zero(base) for _ in range(e)]
    std_names = tuple(f"d{v}" for v in base.variables) + table.e_names
    F_std = FramedAlgebroid(base, r, tuple(anchor), std, std_names)
    sigma_rows = [list(row) for row in table.l if any(row)]
    if sigma_rows:
        sigma = solve_linear(sigma_rows, None, base).nullspace
    else:
        sigma = tuple(tuple(base.one() if i == a else base.zero() for i in range(na)) for a in range(na))
    mats = []
    for T in sigma:
        cols = []
        for c in range(m):
            cols.append((base.zero(),) * m + table.D_partial(c, T))
        for b in range(e):
            d = table.D_along(rho_xi[b], T)
            cols.append((base.zero(),) * m + tuple(-x for x in d))
        mats.append(tuple(tuple(cols[j][i] for j in range(r)) for i in range(r)))
    standard = AlmostCartanAlgebroid(F_std, tuple(mats), tuple(f"t{l + 1}" for l in range(len(mats))))
    if frame is None:
        Fm = [[base.one() if i == j else base.zero() for j in range(r)] for i in range(r)]
    else:
        Fm = [[_lift(x, base) for x in row] for row in frame]
        if len(Fm) != r or any(len(row) != r for row in Fm):
            raise GroupoidError(f"frame must be a {r}×{r} matrix")
    Finv = inverse_matrix(Fm, base)
    cols = [tuple(Fm[s][i] for s in range(r)) for i in range(r)]
    user: dict[tuple[int, int, int], RatFn] = {}
    for j, k in combinations(range(r), 2):
        coords = _matvec(Finv, F_std.bracket(cols[j], cols[k]), base)
        for i, val in enumerate(coords):
            if val:
                user[(i, j, k)] = val
    u_anchor = tuple(F_std.anchor_of(col) for col in cols)
    names = tuple(frame_names) or tuple(f"e{i + 1}" for i in range(r))
    F_user = FramedAlgebroid(base, r, u_anchor, user, names)
    u_mats = tuple(mat_mul(mat_mul(Finv, M), Fm) for M in mats)
    user_aca = AlmostCartanAlgebroid(F_user, u_mats, standard.symbol_names)
    return CartanBuild(
        standard,
        user_aca,
        tuple(tuple(row) for row in Fm),
        tuple(tuple(row) for row in Finv),
        tuple(sigma),
        tuple(tuple(row) for row in xi),
    )


def build_realization(G: GroupoidChart, omega: Sequence[DForm], build: CartanBuild) -> tuple[RealizationData, PiFamily]:
    """Ω = (dt, ω) in the user frame with I = t, completed by solve_pi."""
    ch = G.chart
    std_forms = [DForm.d(ch, t) for t in G.target_indices] + list(omega)
    if len(std_forms) != build.user.rank:
        raise GroupoidError(f"{len(std_forms)} standard forms for a rank {build.user.rank} algebroid")
    base_in_total = ch.gens()[: G.m]

    def pull(f: RatFn) -> RatFn:
        return f.substitute(list(base_in_total), ch) if G.m else ch.const(f.constant_value())

    forms = []
    for i in range(build.user.rank):
        acc = DForm.zero(ch, 1)
        for s, w in enumerate(std_forms):
            coeff = build.frame_inverse[i][s]
            if coeff:
                acc = acc + w * pull(coeff)
        forms.append(acc)
    R = RealizationData(ch, build.user, tuple(forms))
    fam = solve_pi(R)
    if fam.sat and fam.particular is not None:
        R = R.with_pi(fam.particular)
    return R, fam


# ---------------------------------------------------------------------------
# Gauge comparison of two builds


def gauge_parameter(A: AlmostCartanAlgebroid, B: AlmostCartanAlgebroid) -> list[list[RatFn]] | None:
    """η with B = gauge_twist(A, η), or None if no twist relates them."""
    base, r, p = A.base, A.rank, A.p
    if B.rank != r or B.p != p:
        return None
    if any(X != Y for X, Y in zip(A.algebroid.anchor, B.algebroid.anchor)):
        return None
    if any(x != y for M, N in zip(A.symbol, B.symbol) for rm, rn in zip(M, N) for x, y in zip(rm, rn)):
        return None
    nunk = p * r
    rows, rhs = [], []
    for j, k in combinations(range(r), 2):
        for i in range(r):
            row = [base.zero()] * nunk
            for lam in range(p):
                row[lam * r + j] = row[lam * r + j] + A.a(i, lam, k)
                row[lam * r + k] = row[lam * r + k] - A.a(i, lam, j)
            diff = B.algebroid.c(i, j, k) - A.algebroid.c(i, j, k)
            if any(row) or diff:
                rows.append(row)
                rhs.append(diff)
    if not rows:
        return [[base.zero()] * r for _ in range(p)]
    if nunk == 0:
        return None
    sol = solve_linear(rows, rhs, base)
    if not sol.consistent:
        return None
    return [list(sol.particular[lam * r : (lam + 1) * r]) for lam in range(p)]


# ---------------------------------------------------------------------------
# Lie-Pfaffian axioms


@dataclass
class AxiomReport:
    surjective: bool
    transversal: bool
    kernel_equality: bool
    involutive: bool
    multiplicative: bool | None
    standard: bool
    witnesses: list[RatFn] = field(default_factory=list)
    details: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (
            self.surjective
            and self.transversal
            and self.kernel_equality
            and self.involutive
            and self.multiplicative is not False
        )

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "pointwise_surjective": self.surjective,
            "transversal_to_source_fibers": self.transversal,
            "kernel_equality": self.kernel_equality,
            "kernel_involutive": self.involutive,
            "multiplicative": self.multiplicative,
            "standard": self.standard,
            "details": dict(sorted(self.details.items())),
            "rank_witnesses": sorted({str(w) for w in self.witnesses if not w.is_constant()}),
        }


def _kernel_fields(ch: Chart, rows: list[list[RatFn]]) -> list[VField]:
    rows = [r for r in rows if any(r)]
    if not rows:
        return [VField.partial(ch, i) for i in range(ch.dim)]
    return [VField(ch, v) for v in solve_linear(rows, None, ch).nullspace]


def _same_distribution(a: Sequence[VField], b: Sequence[VField]) -> bool:
    return all(in_span(list(a), X) for X in b) and all(in_span(list(b), X) for X in a)


def _composable_chart(G: GroupoidChart) -> tuple[Chart, list[RatFn], list[RatFn]]:
    """Chart on composable pairs (h, g): h's non-source coordinates and all of g."""
    ch = G.chart
    taken = set(ch.variables)
    h_names = []
    for i in range(ch.dim):
        if i in G.source_indices:
            continue
        nm = ch.variables[i] + "_h"
        while nm in taken:
            nm += "_"
        taken.add(nm)
        h_names.append(nm)
    nh = len(h_names)

    def factors(K: Chart) -> tuple[list[RatFn], list[RatFn]]:
        gvals = list(K.gens()[nh:])
        tg = G.target_of(gvals)
        it = iter(K.gens()[:nh])
        hvals = [tg[G.source_indices.index(i)] if i in G.source_indices else next(it) for i in range(ch.dim)]
        return hvals, gvals

    bare = Chart(tuple(h_names) + ch.variables)
    polys = []
    for entry in ch.nonvanishing:
        f = RatFn(ch, dict(entry))
        for vals in factors(bare):
            g = f.substitute(vals, bare)
            polys.append(tuple(sorted(g.num.items(), key=lambda t: grlex_key(t[0]), reverse=True)))
    K = Chart(bare.variables, tuple(dict.fromkeys(polys)))
    hvals, gvals = factors(K)
    return K, hvals, gvals


def lpg_axiom_check(
    G: GroupoidChart,
    omega: Sequence[DForm],
    table: SpencerTable | None = None,
    check_multiplicative: bool = True,
) -> AxiomReport:
    ch = G.chart
    N = ch.dim
    witnesses: list[RatFn] = []
    details: dict[str, str] = {}
    W = [w.one_form_coeffs() for w in omega]
    e = len(omega)
    rk, w = rank(W, ch) if W else (0, ch.one())
    witnesses.append(w)
    surjective = rk == e
    details["rank_omega"] = f"{rk} of {e}"
    if W:
        restricted = [[row[i] for i in range(N) if i not in G.source_indices] for row in W]
        rk2, w2 = rank(restricted, ch)
        witnesses.append(w2)
    else:
        rk2 = 0
    transversal = rk2 == e
    s_rows = [[ch.one() if j == i else ch.zero() for j in range(N)] for i in G.source_indices]
    t_rows = [[ch.one() if j == i else ch.zero() for j in range(N)] for i in G.target_indices]
    cw_s = _kernel_fields(ch, [list(r) for r in W] + s_rows)
    cw_t = _kernel_fields(ch, [list(r) for r in W] + t_rows)
    kernel_equality = _same_distribution(cw_s, cw_t)
    details["dim_C_cap_ker_ds"] = str(len(cw_s))
    details["dim_C_cap_ker_dt"] = str(len(cw_t))
    involutive = frobenius_involutive(cw_s).involutive if cw_s else True
    multiplicative: bool | None = None
    if check_multiplicative:
        K, hvals, gvals = _composable_chart(G)
        prod = RatMap(K, ch, tuple(G.multiply(hvals, gvals)))
        pr1 = RatMap(K, ch, tuple(hvals))
        pr2 = RatMap(K, ch, tuple(gvals))
        pulled2 = [pullback(pr2, w_).one_form_coeffs() for w_ in omega]
        multiplicative = True
        for b, w_ in enumerate(omega):
            diff = (pullback(prod, w_) - pullback(pr1, w_)).one_form_coeffs()
            rows = [[pulled2[c][j] for c in range(e)] for j in range(K.dim)]
            sol = solve_linear(rows, diff, K)
            if not sol.consistent:
                multiplicative = False
                details[f"multiplicative[{b + 1}]"] = "m*ω − pr1*ω is not a combination of pr2*ω"
    standard = True
    if table is not None:
        base = table.base
        l_rows = [list(r) for r in table.l if any(r)]
        sigma = solve_linear(l_rows, None, base).nullspace if l_rows else ()
        if sigma:
            cols = []
            for T in sigma:
                col = []
                for c in range(base.dim):
                    col.extend(table.D_partial(c, T))
                cols.append(col)
            mat = [[cols[s][i] for s in range(len(cols))] for i in range(len(cols[0]))]
            rk3, w3 = rank(mat, base)
            witnesses.append(w3)
            standard = rk3 == len(sigma)
        details["dim_sigma"] = str(len(sigma))
    return AxiomReport(surjective, transversal, kernel_equality, involutive, multiplicative, standard, witnesses, details)


# ---------------------------------------------------------------------------
# Pipeline


@dataclass
class PipelineResult:
    groupoid: GroupoidChart
    omega: tuple[DForm, ...]
    lie_algebroid: GroupoidAlgebroid
    spencer: SpencerTable
    build: CartanBuild
    realization: RealizationData
    pi_family: PiFamily
    axioms: AxiomReport


def run_pipeline(
    G: GroupoidChart,
    omega: Sequence[DForm],
    e_names: Sequence[str] = (),
    splitting: Sequence[Sequence[Scalar]] | None = None,
    frame: Sequence[Sequence[Scalar]] | None = None,
    frame_names: Sequence[str] = (),
    check_multiplicative: bool = True,
) -> PipelineResult:
    alg = algebroid_from_groupoid(G)
    table = spencer_from_cartanform(G, omega, e_names, alg)
    build = build_cartan_algebroid(table, alg.algebroid, splitting, frame, frame_names)
    R, fam = build_realization(G, omega, build)
    axioms = lpg_axiom_check(G, omega, table, check_multiplicative)
    return PipelineResult(G, tuple(omega), alg, table, build, R, fam, axioms)


def parse_matrix(rows: Sequence[Sequence[str | Scalar]], chart: Chart) -> list[list[RatFn]]:
    return [[chart.parse(x) if isinstance(x, str) else _lift(x, chart) for x in row] for row in rows]


def embedding_from_expressions(reduced: Chart, jc: JetChart, exprs: Mapping[str, str]) -> RatMap:
    """Embedding of a reduced chart; unspecified jet coordinates must be reduced variables of the same name."""
    comps = []
    for v in jc.chart.variables:
        if v in exprs:
            comps.append(reduced.parse(exprs[v]))
        elif v in reduced.variables:
            comps.append(reduced.var(v))
        else:
            raise GroupoidError(f"no expression for jet coordinate {v}")
    return RatMap(reduced, jc.chart, tuple(comps))
