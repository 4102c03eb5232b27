"""Realizations of almost Cartan algebroids: verification, completion and the systatic action.

The total chart P lists the base coordinates first, so the submersion to the
base is the projection onto the first ``n`` coordinates and base functions are
pulled back by positional substitution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Mapping, Sequence

from .algebroid import (
    AlmostCartanAlgebroid,
    CheckReport,
    SystaticData,
    substitute_algebroid,
    systatic_build,
)
from .chartcalc import (
    DForm,
    RatMap,
    VField,
    annihilator,
    dext,
    frobenius_involutive,
    in_span,
    lie_bracket,
    pullback,
    pushforward,
    span_rank,
    wedge,
)
from .ratfield import Chart, RatFieldError, RatFn, Scalar, determinant, grlex_key, solve_linear


class RealizationError(RatFieldError):
    pass


@dataclass(frozen=True)
class RealizationData:
    chart: Chart
    algebroid: AlmostCartanAlgebroid
    omega: tuple[DForm, ...]
    pi: tuple[DForm, ...] | None = None

    def __post_init__(self) -> None:
        A = self.algebroid
        if self.chart.dim < A.base.dim:
            raise RealizationError("total chart is smaller than the base")
        if len(self.omega) != A.rank:
            raise RealizationError(f"need {A.rank} forms ω, got {len(self.omega)}")
        for w in self.omega:
            if w.degree != 1 or w.chart.variables != self.chart.variables:
                raise RealizationError("ω must be 1-forms on the total chart")
        if self.pi is not None:
            if len(self.pi) != A.p:
                raise RealizationError(f"need {A.p} forms π, got {len(self.pi)}")
            for w in self.pi:
                if w.degree != 1 or w.chart.variables != self.chart.variables:
                    raise RealizationError("π must be 1-forms on the total chart")

    @property
    def n(self) -> int:
        return self.algebroid.base.dim

    @property
    def base_in_total(self) -> tuple[str, ...]:
        return self.chart.variables[: self.n]

    def pull(self, f: RatFn) -> RatFn:
        """Pull a base function back along the projection."""
        if self.n == 0:
            return self.chart.const(f.constant_value())
        return f.substitute(self.chart.gens()[: self.n], self.chart)

    def with_pi(self, pi: Sequence[DForm]) -> RealizationData:
        return RealizationData(self.chart, self.algebroid, self.omega, tuple(pi))


# ---------------------------------------------------------------------------
# check_realization


@dataclass
class RealizationReport:
    anchored: CheckReport
    coframe_ok: bool
    coframe_witness: RatFn | None
    residuals: dict[int, DForm]

    @property
    def ok(self) -> bool:
        return self.anchored.ok and self.coframe_ok and all(r.is_zero() for r in self.residuals.values())

    def failing(self) -> list[int]:
        return [i for i, r in self.residuals.items() if not r.is_zero()]

    def to_dict(self, names: Sequence[str] = ()) -> dict:
        label = (lambda i: names[i]) if names else (lambda i: f"omega{i + 1}")
        return {
            "ok": self.ok,
            "anchored": self.anchored.to_dict(),
            "coframe": {"ok": self.coframe_ok, "determinant": str(self.coframe_witness)},
            "residuals": {label(i): str(r) for i, r in self.residuals.items()},
        }


def structure_residual(R: RealizationData, i: int, pi: Sequence[DForm] | None = None) -> DForm:
    """dω_i + Σ_{j<k} c_i^{jk} ω_j∧ω_k − Σ a_i^{λj} π_λ∧ω_j."""
    A = R.algebroid
    F = A.algebroid
    pis = R.pi if pi is None else pi
    res = dext(R.omega[i])
    for j, k in combinations(range(A.rank), 2):
        c = F.c(i, j, k)
        if c:
            res = res + wedge(R.omega[j], R.omega[k]) * R.pull(c)
    if A.p:
        if pis is None:
            raise RealizationError("structure equations need π")
        for lam in range(A.p):
            for j in range(A.rank):
                a = A.a(i, lam, j)
                if a:
                    res = res - wedge(pis[lam], R.omega[j]) * R.pull(a)
    return res


def check_anchored(R: RealizationData) -> CheckReport:
    """Σ_i ρ_i^a ω_i = dI_a for every base coordinate."""
    A = R.algebroid
    F = A.algebroid
    report = CheckReport(True)
    for a in range(R.n):
        acc = DForm.zero(R.chart, 1)
        for i, X in enumerate(F.anchor):
            if X.coeffs[a]:
                acc = acc + R.omega[i] * R.pull(X.coeffs[a])
        diff = acc - DForm.d(R.chart, a)
        if not diff.is_zero():
            report.fail(f"anchored(d{R.chart.variables[a]})", diff)
    return report


def coframe_matrix(R: RealizationData, pi: Sequence[DForm] | None = None) -> list[list[RatFn]]:
    pis = R.pi if pi is None else pi
    return [w.one_form_coeffs() for w in R.omega] + [w.one_form_coeffs() for w in (pis or ())]


def check_realization(R: RealizationData) -> RealizationReport:
    anchored = check_anchored(R)
    M = coframe_matrix(R)
    if len(M) == R.chart.dim:
        det = determinant(M, R.chart)
        coframe_ok, witness = bool(det), det
    else:
        coframe_ok, witness = False, None
    residuals = {i: structure_residual(R, i) for i in range(R.algebroid.rank)}
    return RealizationReport(anchored, coframe_ok, witness, residuals)


# ---------------------------------------------------------------------------
# solve_pi


@dataclass
class PiFamily:
    """π = particular + Σ s_k directions[k] with arbitrary functions s_k."""

    sat: bool
    particular: tuple[DForm, ...] | None
    directions: tuple[tuple[DForm, ...], ...]
    certificate: str | None = None
    coframe_ok: bool = False

    @property
    def dim(self) -> int:
        return len(self.directions)

    def member(self, coeffs: Sequence[Scalar]) -> tuple[DForm, ...]:
        if self.particular is None:
            raise RealizationError("empty family")
        out = list(self.particular)
        for s, dirs in zip(coeffs, self.directions):
            out = [a + b * s for a, b in zip(out, dirs)]
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "sat": self.sat,
            "particular": [str(w) for w in self.particular] if self.particular is not None else None,
            "directions": [[str(w) for w in d] for d in self.directions],
            "dimension": self.dim,
            "completes_coframe": self.coframe_ok,
            "inconsistent_row": self.certificate,
        }


def solve_pi(R: RealizationData) -> PiFamily:
    """Solve the structure equations for π; linear in the coefficients of π."""
    A = R.algebroid
    P, N, p, r = R.chart, R.chart.dim, A.p, A.rank
    F = A.algebroid
    nunk = p * N
    rows: list[list[RatFn]] = []
    rhs: list[RatFn] = []
    labels: list[str] = []
    omega_coeffs = [w.one_form_coeffs() for w in R.omega]
    for i in range(r):
        lhs = dext(R.omega[i])
        for j, k in combinations(range(r), 2):
            c = F.c(i, j, k)
            if c:
                lhs = lhs + wedge(R.omega[j], R.omega[k]) * R.pull(c)
        for u, v in combinations(range(N), 2):
            row = [P.zero()] * nunk
            for lam in range(p):
                for j in range(r):
                    a = A.a(i, lam, j)
                    if not a:
                        continue
                    a = R.pull(a)
                    wj = omega_coeffs[j]
                    # (π_λ∧ω_j)_{uv} = π_λu ω_jv − π_λv ω_ju
                    if wj[v]:
                        row[lam * N + u] = row[lam * N + u] + a * wj[v]
                    if wj[u]:
                        row[lam * N + v] = row[lam * N + v] - a * wj[u]
            b = lhs.coeff((u, v))
            if any(row) or b:
                rows.append(row)
                rhs.append(b)
                labels.append(f"omega{i + 1} d{P.variables[u]}^d{P.variables[v]}")
    if p == 0:
        bad = next((lab for lab, b in zip(labels, rhs) if b), None)
        if bad is not None:
            return PiFamily(False, None, (), f"[{bad}] has no π terms but a nonzero residual")
        return PiFamily(True, (), (), None, _coframe_ok(R, ()))
    if not rows:
        particular = tuple(DForm.zero(P, 1) for _ in range(p))
        directions = tuple(
            tuple(DForm.d(P, u) if lam == mu else DForm.zero(P, 1) for mu in range(p)) for lam in range(p) for u in range(N)
        )
        return PiFamily(True, particular, directions, None, _coframe_ok(R, particular))
    sol = solve_linear(rows, rhs, P)
    if not sol.consistent:
        cert = sol.certificate or ()
        text = " + ".join(f"({c})*[{labels[n]}]" for n, c in enumerate(cert) if c)
        return PiFamily(False, None, (), text + " reduces to 0 = nonzero")
    particular = _forms_from_vector(P, sol.particular, p)
    directions = tuple(_forms_from_vector(P, v, p) for v in _canonical_directions(sol.nullspace))
    particular = _reduce_particular(particular, directions)
    return PiFamily(True, particular, directions, None, _coframe_ok(R, particular))


def _forms_from_vector(P: Chart, vec: Sequence[RatFn], p: int) -> tuple[DForm, ...]:
    N = P.dim
    return tuple(DForm.one_form(P, list(vec[lam * N : (lam + 1) * N])) for lam in range(p))


def _canonical_directions(vectors: Sequence[Sequence[RatFn]]) -> list[tuple[RatFn, ...]]:
    """Normalize each direction so its first nonzero entry is 1."""
    out = []
    for v in vectors:
        lead = next(x for x in v if x)
        out.append(tuple(x / lead for x in v))
    return out


def _reduce_particular(part: tuple[DForm, ...], directions: Sequence[tuple[DForm, ...]]) -> tuple[DForm, ...]:
    """Remove direction components whose leading entry sits on the particular solution's support."""
    flat = lambda forms: [c for w in forms for c in w.one_form_coeffs()]  # noqa: E731
    vec = flat(part)
    for d in directions:
        dv = flat(d)
        lead = next(n for n, x in enumerate(dv) if x)
        if vec[lead]:
            s = vec[lead]
            vec = [a - s * b for a, b in zip(vec, dv)]
    N = part[0].chart.dim if part else 0
    return tuple(DForm.one_form(part[0].chart, vec[lam * N : (lam + 1) * N]) for lam in range(len(part)))


def _coframe_ok(R: RealizationData, pi: Sequence[DForm]) -> bool:
    M = coframe_matrix(R, pi)
    return len(M) == R.chart.dim and bool(determinant(M, R.chart))


# ---------------------------------------------------------------------------
# Dual frame


@dataclass
class DualFrame:
    frame: tuple[VField, ...]
    symbol_fields: tuple[VField, ...]
    lemma: CheckReport
    kernel_involutive: bool

    def field_of_section(self, R: RealizationData, u: Sequence[RatFn]) -> VField:
        acc = VField.zero(R.chart)
        for f, X in zip(u, self.frame):
            if f:
                acc = acc + X * R.pull(f)
        return acc

    def to_dict(self, names: Sequence[str] = (), symbol_names: Sequence[str] = ()) -> dict:
        fn = names or [f"e{i + 1}" for i in range(len(self.frame))]
        sn = symbol_names or [f"t{i + 1}" for i in range(len(self.symbol_fields))]
        return {
            "frame": {n: str(X) for n, X in zip(fn, self.frame)},
            "symbol_fields": {n: str(X) for n, X in zip(sn, self.symbol_fields)},
            "lemma": self.lemma.to_dict(),
            "kernel_involutive": self.kernel_involutive,
        }


def dual_frame(R: RealizationData) -> DualFrame:
    """Invert (ω, π) and verify the bracket identities of the dual fields."""
    A = R.algebroid
    P = R.chart
    M = coframe_matrix(R)
    N = P.dim
    if len(M) != N:
        raise RealizationError(f"(ω, π) has {len(M)} forms on a {N}-dimensional chart")
    fields = []
    for k in range(N):
        e = [P.one() if i == k else P.zero() for i in range(N)]
        sol = solve_linear(M, e, P)
        if not sol.consistent or sol.rank != N:
            raise RealizationError("(ω, π) is not a coframe")
        fields.append(VField(P, sol.particular))
    r = A.rank
    frame, symb = tuple(fields[:r]), tuple(fields[r:])
    lemma = CheckReport(True)
    F = A.algebroid

    def omega_of(X: VField) -> list[RatFn]:
        return [w(X) for w in R.omega]

    for j, k in combinations(range(r), 2):
        got = omega_of(lie_bracket(frame[j], frame[k]))
        want = [R.pull(F.c(i, j, k)) for i in range(r)]
        for i in range(r):
            if got[i] != want[i]:
                lemma.fail(f"omega{i + 1}([X_{F.names[j]},X_{F.names[k]}])", got[i] - want[i])
    for j in range(r):
        for lam, Y in enumerate(symb):
            got = omega_of(lie_bracket(frame[j], Y))
            for i in range(r):
                want = R.pull(A.a(i, lam, j))
                if got[i] != want:
                    lemma.fail(f"omega{i + 1}([X_{F.names[j]},X_{A.symbol_names[lam]}])", got[i] - want)
    for eta, mu in combinations(range(len(symb)), 2):
        got = omega_of(lie_bracket(symb[eta], symb[mu]))
        for i in range(r):
            if got[i]:
                lemma.fail(f"omega{i + 1}([X_{A.symbol_names[eta]},X_{A.symbol_names[mu]}])", got[i])
    involutive = frobenius_involutive(list(symb)).involutive if symb else True
    return DualFrame(frame, symb, lemma, involutive)


# ---------------------------------------------------------------------------
# Systatic distribution


@dataclass
class SystaticDistribution:
    systatic: SystaticData
    section_fields: tuple[VField, ...]
    symbol_fields: tuple[VField, ...]
    involutive: bool
    rank: int
    rank_witness: RatFn
    annihilator: tuple[DForm, ...]
    systatic_system: tuple[DForm, ...]
    matches_systatic_system: bool
    pi_independent: bool | None

    @property
    def fields(self) -> tuple[VField, ...]:
        return self.section_fields + self.symbol_fields

    @property
    def ok(self) -> bool:
        return self.involutive and self.matches_systatic_system and self.pi_independent is not False

    def to_dict(self) -> dict:
        names = self.systatic.to_dict()["S"]
        return {
            "ok": self.ok,
            "fields": {n: str(X) for n, X in zip(names, self.fields)},
            "involutive": self.involutive,
            "rank": self.rank,
            "annihilator": [str(w) for w in self.annihilator],
            "systatic_system": [str(w) for w in self.systatic_system],
            "annihilator_matches_systatic_system": self.matches_systatic_system,
            "independent_of_pi": self.pi_independent,
        }


def systatic_fields(R: RealizationData, S: SystaticData | None = None) -> tuple[tuple[VField, ...], tuple[VField, ...]]:
    S = S or systatic_build(R.algebroid)
    dual = dual_frame(R)
    return tuple(dual.field_of_section(R, u) for u in S.s0_basis), dual.symbol_fields


def _same_span(a: Sequence[DForm], b: Sequence[DForm], chart: Chart) -> bool:
    def as_fields(forms: Sequence[DForm]) -> list[VField]:
        return [VField(chart, w.one_form_coeffs()) for w in forms]

    fa, fb = as_fields(a), as_fields(b)
    return all(in_span(fa, X) for X in fb) and all(in_span(fb, X) for X in fa)


def systatic_distribution(R: RealizationData, alternative_pi: Sequence[DForm] | None = None) -> SystaticDistribution:
    """Orbit distribution of the systatic action, its annihilator and Cartan's systatic system."""
    A = R.algebroid
    P = R.chart
    S = systatic_build(A)
    sec, sym = systatic_fields(R, S)
    span = list(sec + sym)
    nonzero = [X for X in span if not X.is_zero()]
    if nonzero:
        rk, witness = span_rank(nonzero)
        involutive = frobenius_involutive(nonzero).involutive
    else:
        rk, witness, involutive = 0, P.one(), True
    ann = tuple(annihilator(nonzero, P)) if nonzero else tuple(DForm.d(P, i) for i in range(P.dim))
    system = []
    for lam in range(A.p):
        for i in range(A.rank):
            w = DForm.zero(P, 1)
            for j in range(A.rank):
                a = A.a(i, lam, j)
                if a:
                    w = w + R.omega[j] * R.pull(a)
            if not w.is_zero():
                system.append(w)
    matches = _same_span(list(ann), system, P)
    independent: bool | None = None
    alt = alternative_pi
    if alt is None and A.p:
        fam = solve_pi(R.with_pi(R.pi or tuple(DForm.zero(P, 1) for _ in range(A.p))))
        if fam.sat and fam.dim:
            alt = fam.member([1] * fam.dim)
            if R.pi is not None and all(a == b for a, b in zip(alt, R.pi)):
                alt = fam.member([2] * fam.dim)
    if alt is not None:
        other = R.with_pi(alt)
        sec2, _ = systatic_fields(other, S)
        independent = all(X == Y for X, Y in zip(sec, sec2))
    return SystaticDistribution(S, sec, sym, involutive, rk, witness, ann, tuple(system), matches, independent)


# ---------------------------------------------------------------------------
# Transversal restriction


def _restrict_chart(P: Chart, values: Sequence[RatFn], target_vars: Sequence[str]) -> Chart:
    bare = Chart(tuple(target_vars))
    polys = []
    for poly in P.nonvanishing_polys():
        f = RatFn(P, poly)
        g = f.substitute(list(values), bare) if P.dim else f
        if not g:
            raise RealizationError(f"assignment makes the nonvanishing expression {f} vanish")
        if g.is_constant():
            continue
        polys.append(tuple(sorted(g.num.items(), key=lambda t: grlex_key(t[0]), reverse=True)))
    return Chart(tuple(target_vars), tuple(dict.fromkeys(polys)))


def restrict_transversal(R: RealizationData, assignments: Mapping[str, Scalar]) -> RealizationData:
    """Fix some base coordinates to rational values and restrict algebroid and forms."""
    if not assignments:
        return R
    A = R.algebroid
    F = A.algebroid
    anchored = F.anchored_indices()
    if anchored is None:
        raise RealizationError("restriction needs an anchor given by coordinate fields")
    P = R.chart
    base_names = list(R.base_in_total)
    alt_names = list(A.base.variables)
    fixed: dict[int, Fraction] = {}
    for name, val in assignments.items():
        if name in base_names:
            a = base_names.index(name)
        elif name in alt_names:
            a = alt_names.index(name)
        else:
            raise RealizationError(f"{name!r} is not a base coordinate")
        fixed[a] = Fraction(val) if not isinstance(val, RatFn) else val.constant_value()
    keep_vars = [v for k, v in enumerate(P.variables) if k not in fixed]
    newP_bare = Chart(tuple(keep_vars))
    values = [newP_bare.const(fixed[k]) if k in fixed else newP_bare.var(v) for k, v in enumerate(P.variables)]
    newP = _restrict_chart(P, values, keep_vars)
    values = [newP.const(fixed[k]) if k in fixed else newP.var(v) for k, v in enumerate(P.variables)]
    keep_base = [v for k, v in enumerate(A.base.variables) if k not in fixed]
    base_values_bare = Chart(tuple(keep_base))
    bvals = [base_values_bare.const(fixed[k]) if k in fixed else base_values_bare.var(v) for k, v in enumerate(A.base.variables)]
    newB = _restrict_chart(A.base, bvals, keep_base)
    bvals = [newB.const(fixed[k]) if k in fixed else newB.var(v) for k, v in enumerate(A.base.variables)]
    dropped = {anchored[a] for a in fixed}
    keep_idx = [i for i in range(F.rank) if i not in dropped]
    sub = substitute_algebroid(A, bvals, newB, keep_idx)
    ident = RatMap(newP, P, tuple(values))
    omega = tuple(pullback(ident, R.omega[i]) for i in keep_idx)
    pi = tuple(pullback(ident, w) for w in R.pi) if R.pi is not None else None
    return RealizationData(newP, sub, omega, pi)


def restrict_map(phi: RatMap, R: RealizationData, assignments: Mapping[str, Scalar]) -> RatMap:
    """Restrict a self-map of R's total chart to the slice where the given base coordinates are fixed.

    The fixed coordinates must be preserved identically on the slice.
    """
    P = R.chart
    if phi.source.variables != P.variables or phi.target.variables != P.variables:
        raise RealizationError("map must send the total chart to itself")
    sub_chart = restrict_transversal(R, assignments).chart
    base_names = list(R.base_in_total)
    alt_names = list(R.algebroid.base.variables)
    fixed: dict[int, Fraction] = {}
    for name, val in assignments.items():
        if name in base_names:
            a = base_names.index(name)
        elif name in alt_names:
            a = alt_names.index(name)
        else:
            raise RealizationError(f"{name!r} is not a base coordinate")
        fixed[a] = Fraction(val) if not isinstance(val, RatFn) else val.constant_value()
    values = [sub_chart.const(fixed[k]) if k in fixed else sub_chart.var(v) for k, v in enumerate(P.variables)]
    comps = []
    for k, c in enumerate(phi.components):
        g = c.substitute(values, sub_chart)
        if k in fixed:
            if g != sub_chart.const(fixed[k]):
                raise RealizationError(f"map does not preserve the slice {P.variables[k]} = {fixed[k]}")
        else:
            comps.append(g)
    return RatMap(sub_chart, sub_chart, tuple(comps))


# ---------------------------------------------------------------------------
# Symmetries


@dataclass
class SymmetryReport:
    ok: bool
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failures": list(self.failures)}


def _check_inverse(phi: RatMap, inverse: RatMap | None) -> None:
    if inverse is not None and not phi.compose(inverse).is_identity():
        raise RealizationError("supplied inverse does not satisfy φ∘φ⁻¹ = id")


def check_symmetry(phi: RatMap, R: RealizationData, inverse: RatMap | None = None) -> SymmetryReport:
    """φ preserves the projection and every ω exactly."""
    if phi.source.variables != R.chart.variables or phi.target.variables != R.chart.variables:
        raise RealizationError("symmetry must map the total chart to itself")
    _check_inverse(phi, inverse)
    report = SymmetryReport(True)
    gens = R.chart.gens()
    for a in range(R.n):
        if phi.components[a] != gens[a]:
            report.ok = False
            report.failures.append(f"I_{R.chart.variables[a]}: {phi.components[a]}")
    for i, w in enumerate(R.omega):
        diff = pullback(phi, w) - w
        if not diff.is_zero():
            report.ok = False
            report.failures.append(f"omega{i + 1}: {diff}")
    return report


def moves_field(phi: RatMap, X: VField) -> VField:
    """dφ(X) − X∘φ; zero exactly when φ pushes X to itself."""
    jac = phi.jacobian()
    comps = []
    for row, c in zip(jac, X.coeffs):
        acc = X.chart.zero()
        for d, x in zip(row, X.coeffs):
            if d and x:
                acc = acc + d * x
        comps.append(acc - phi.apply(c))
    return VField(X.chart, comps)


def check_systatic_invariance(
    phi: RatMap, R: RealizationData, inverse: RatMap | None = None, fields: Sequence[VField] | None = None
) -> SymmetryReport:
    """Every systatic field is φ-related to itself; with an inverse, also via pushforward."""
    _check_inverse(phi, inverse)
    if fields is None:
        sec, sym = systatic_fields(R)
        fields = list(sec + sym)
    report = SymmetryReport(True)
    for n, X in enumerate(fields):
        moved = moves_field(phi, X)
        if not moved.is_zero():
            report.ok = False
            report.failures.append(f"field {n + 1} ({X}) moved by {moved}")
        elif inverse is not None and pushforward(phi, inverse, X) != X:
            report.ok = False
            report.failures.append(f"field {n + 1} ({X}) changed under pushforward")
    return report


# ---------------------------------------------------------------------------
# Gauge transport


def gauge_transport(R: RealizationData, twisted: AlmostCartanAlgebroid, eta: Sequence[Sequence[Scalar]]) -> RealizationData:
    """Π^η(X) = Π(X) + η(Ω(X)) realizes the twisted data."""
    if R.pi is None:
        raise RealizationError("gauge transport needs π")
    A = R.algebroid
    pi = []
    for lam in range(A.p):
        w = R.pi[lam]
        for j in range(A.rank):
            e = eta[lam][j]
            e = e if isinstance(e, RatFn) else A.base.const(e)
            if e:
                w = w + R.omega[j] * R.pull(e)
        pi.append(w)
    return RealizationData(R.chart, twisted, R.omega, tuple(pi))


# ---------------------------------------------------------------------------
# Pfaffian lift to the fiber product


@dataclass
class PfaffianLift:
    chart: Chart
    theta: dict[int, DForm]
    action_fields: tuple[VField, ...]
    horizontal: CheckReport
    equivariant: CheckReport
    flat: CheckReport

    @property
    def ok(self) -> bool:
        return self.horizontal.ok and self.equivariant.ok and self.flat.ok

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "chart": list(self.chart.variables),
            "theta": {f"theta{i + 1}": str(w) for i, w in self.theta.items()},
            "horizontal": self.horizontal.to_dict(),
            "equivariant": self.equivariant.to_dict(),
            "flat": self.flat.to_dict(),
        }


def _copy_names(base: Sequence[str], fiber: Sequence[str]) -> tuple[list[str], list[str]]:
    taken = set(base) | set(fiber)
    for first, second in (("_t", "_s"), ("_tgt", "_src"), ("__t", "__s")):
        a = [v + first for v in fiber]
        b = [v + second for v in fiber]
        if not (set(a) | set(b)) & taken:
            return a, b
    raise RealizationError("could not name the doubled chart without clashes")


def _connection_apply(A: AlmostCartanAlgebroid, u: Sequence[RatFn], W: Sequence[Sequence[RatFn]] | None, v: Sequence[RatFn]):
    """∇_{(u,W)} v = [u, v] − W(v)."""
    F = A.algebroid
    out = list(F.bracket(u, v))
    if W is not None:
        for i in range(A.rank):
            for j in range(A.rank):
                if W[i][j] and v[j]:
                    out[i] = out[i] - W[i][j] * v[j]
    return tuple(out)


def pfaffian_lift(R: RealizationData) -> PfaffianLift:
    A = R.algebroid
    F = A.algebroid
    P = R.chart
    n = R.n
    base = list(P.variables[:n])
    fiber = list(P.variables[n:])
    tnames, snames = _copy_names(base, fiber)
    G = Chart(tuple(base + tnames + snames))
    gens = G.gens()
    to_t = RatMap(G, P, tuple(gens[:n]) + tuple(gens[n : n + len(fiber)]))
    to_s = RatMap(G, P, tuple(gens[:n]) + tuple(gens[n + len(fiber) :]))
    nonv = []
    for poly in P.nonvanishing_polys():
        f = RatFn(P, poly)
        for m in (to_t, to_s):
            g = m.apply(f)
            nonv.append(tuple(sorted(g.num.items(), key=lambda t: grlex_key(t[0]), reverse=True)))
    G = Chart(G.variables, tuple(dict.fromkeys(nonv)))
    gens = G.gens()
    to_t = RatMap(G, P, tuple(gens[:n]) + tuple(gens[n : n + len(fiber)]))
    to_s = RatMap(G, P, tuple(gens[:n]) + tuple(gens[n + len(fiber) :]))
    anchored = F.anchored_indices()
    skip = set(anchored.values()) if anchored else set()
    theta = {i: pullback(to_s, R.omega[i]) - pullback(to_t, R.omega[i]) for i in range(A.rank) if i not in skip}
    S = systatic_build(A)
    sec, sym = systatic_fields(R, S)

    def diagonal(X: VField) -> VField:
        bc = [to_t.apply(c) for c in X.coeffs[:n]]
        tc = [to_t.apply(c) for c in X.coeffs[n:]]
        sc = [to_s.apply(c) for c in X.coeffs[n:]]
        return VField(G, bc + tc + sc)

    actions = tuple(diagonal(X) for X in sec + sym)
    labels = [f"u{a + 1}" for a in range(len(sec))] + list(A.symbol_names)
    horizontal = CheckReport(True)
    for lab, V in zip(labels, actions):
        for i, th in theta.items():
            val = th(V)
            if val:
                horizontal.fail(f"theta{i + 1}({lab})", val)
    # ∇ coefficients Γ[m][i] for each action generator
    generators: list[tuple[Sequence[RatFn], Sequence[Sequence[RatFn]] | None]] = [(u, None) for u in S.s0_basis]
    zero = tuple(A.base.zero() for _ in range(A.rank))
    generators += [(zero, M) for M in A.symbol]
    equivariant = CheckReport(True)
    coords = [VField.partial(G, k) for k in range(G.dim)]
    for lab, V, (u, W) in zip(labels, actions, generators):
        gamma = [_connection_apply(A, u, W, F.unit(m)) for m in range(A.rank)]
        for Z, zname in zip(coords, G.variables):
            bracket = lie_bracket(V, Z)
            values = {m: th(Z) for m, th in theta.items()}
            for i, th in theta.items():
                res = V.apply(values[i]) - th(bracket)
                for m, val in values.items():
                    g = gamma[m][i]
                    if g and val:
                        res = res + val * to_t.apply(R.pull(g))
                if res:
                    equivariant.fail(f"equivariance(theta{i + 1},{lab},d/d{zname})", res)
    flat = CheckReport(True)
    if S.algebroid is not None:
        gens_s = generators
        s_count = len(gens_s)
        for a, b in combinations(range(s_count), 2):
            coeffs = S.algebroid.frame_bracket(a, b)
            u_ab = list(zero)
            W_ab = [[A.base.zero() for _ in range(A.rank)] for _ in range(A.rank)]
            for k, c in enumerate(coeffs):
                if not c:
                    continue
                uk, Wk = gens_s[k]
                u_ab = [x + c * y for x, y in zip(u_ab, uk)]
                if Wk is not None:
                    W_ab = [[x + c * y for x, y in zip(rx, ry)] for rx, ry in zip(W_ab, Wk)]
            ua, Wa = gens_s[a]
            ub, Wb = gens_s[b]
            for m in range(A.rank):
                e = F.unit(m)
                lhs = _connection_apply(A, ua, Wa, _connection_apply(A, ub, Wb, e))
                lhs = [x - y for x, y in zip(lhs, _connection_apply(A, ub, Wb, _connection_apply(A, ua, Wa, e)))]
                lhs = [x - y for x, y in zip(lhs, _connection_apply(A, u_ab, W_ab, e))]
                if any(lhs):
                    flat.fail(f"curvature({labels[a]},{labels[b]};e{m + 1})", ", ".join(str(x) for x in lhs))
    else:
        flat.fail("systatic-algebroid", "systatic data failed to build")
    return PfaffianLift(G, theta, actions, horizontal, equivariant, flat)

