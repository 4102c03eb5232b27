"""Framed anchored algebroids, Cartan's integrability conditions and systatic data.

Frame and symbol conventions (0-based internally):
  * ``c[(i, j, k)]`` with j < k is the coefficient of e_i in [e_j, e_k].
  * ``symbol[l][i][j]`` is the coefficient of e_i in T_l(e_j), so each T_l is an
    r×r matrix acting on frame coordinate vectors.
  * Sections are coordinate vectors of RatFn over the base chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping, Sequence

from .chartcalc import VField, lie_bracket
from .ratfield import Chart, LinearSolution, RatFieldError, RatFn, Scalar, rank, solve_linear
from .tableau import SpencerComplex, Tableau, prolong

Vector = tuple[RatFn, ...]
Matrix = tuple[tuple[RatFn, ...], ...]


class AlgebroidError(RatFieldError):
    pass


def _lift(x: Scalar, chart: Chart) -> RatFn:
    return x if isinstance(x, RatFn) else chart.const(x)


def _zero_vec(chart: Chart, r: int) -> list[RatFn]:
    return [chart.zero() for _ in range(r)]


def mat_vec(M: Sequence[Sequence[RatFn]], v: Sequence[RatFn]) -> Vector:
    out = []
    for row in M:
        acc = row[0] * 0
        for a, b in zip(row, v):
            if a and b:
                acc = acc + a * b
        out.append(acc)
    return tuple(out)


def mat_mul(A: Sequence[Sequence[RatFn]], B: Sequence[Sequence[RatFn]]) -> Matrix:
    cols = [mat_vec(A, col) for col in zip(*B)]
    return tuple(zip(*cols))


def mat_sub(A: Sequence[Sequence[RatFn]], B: Sequence[Sequence[RatFn]]) -> Matrix:
    return tuple(tuple(a - b for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


def mat_add(A: Sequence[Sequence[RatFn]], B: Sequence[Sequence[RatFn]]) -> Matrix:
    return tuple(tuple(a + b for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


def mat_is_zero(A: Sequence[Sequence[RatFn]]) -> bool:
    return all(not x for row in A for x in row)


def commutator(A: Sequence[Sequence[RatFn]], B: Sequence[Sequence[RatFn]]) -> Matrix:
    return mat_sub(mat_mul(A, B), mat_mul(B, A))


def solve_block(rows: list[list[RatFn]], rhs: list[RatFn], nunk: int, chart: Chart) -> LinearSolution:
    """solve_linear that also accepts systems without equations or unknowns."""
    if not rows:
        return LinearSolution(True, 0, tuple(chart.zero() for _ in range(nunk)), _unit_vectors(chart, nunk), chart.one(), ())
    if nunk == 0:
        bad = next((i for i, b in enumerate(rhs) if b), None)
        if bad is None:
            return LinearSolution(True, 0, (), (), chart.one(), ())
        cert = tuple(chart.one() if i == bad else chart.zero() for i in range(len(rhs)))
        return LinearSolution(False, 0, None, (), chart.one(), (), cert)
    return solve_linear(rows, rhs, chart)


def _unit_vectors(chart: Chart, n: int) -> tuple[Vector, ...]:
    return tuple(tuple(chart.one() if i == j else chart.zero() for i in range(n)) for j in range(n))


# ---------------------------------------------------------------------------
# Framed algebroids


@dataclass(frozen=True)
class FramedAlgebroid:
    """Anchored bracket on a trivialized bundle: anchor fields and structure functions."""

    base: Chart
    rank: int
    anchor: tuple[VField, ...]
    structure: Mapping[tuple[int, int, int], RatFn]
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.anchor) != self.rank:
            raise AlgebroidError(f"anchor needs {self.rank} fields, got {len(self.anchor)}")
        for (i, j, k), v in self.structure.items():
            if not (0 <= i < self.rank and 0 <= j < k < self.rank):
                raise AlgebroidError(f"structure key {(i, j, k)} must satisfy j < k within rank {self.rank}")
            if v.chart.variables != self.base.variables:
                raise AlgebroidError("structure function on a foreign chart")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"e{i + 1}" for i in range(self.rank)))

    @classmethod
    def build(
        cls,
        base: Chart,
        rank: int,
        anchor: Sequence[Sequence[Scalar]] | Sequence[VField],
        brackets: Mapping[tuple[int, int, int], Scalar],
        names: Sequence[str] = (),
    ) -> FramedAlgebroid:
        """Build from possibly unordered keys; (i, k, j) is stored as −(i, j, k)."""
        fields = tuple(a if isinstance(a, VField) else VField(base, [_lift(x, base) for x in a]) for a in anchor)
        table: dict[tuple[int, int, int], RatFn] = {}
        for (i, j, k), v in brackets.items():
            if j == k:
                if _lift(v, base):
                    raise AlgebroidError(f"diagonal bracket entry {(i, j, k)} must vanish")
                continue
            val = _lift(v, base)
            key, val = ((i, j, k), val) if j < k else ((i, k, j), -val)
            table[key] = table.get(key, base.zero()) + val
        return cls(base, rank, fields, {k: v for k, v in table.items() if v}, tuple(names))

    def c(self, i: int, j: int, k: int) -> RatFn:
        if j == k:
            return self.base.zero()
        if j < k:
            return self.structure.get((i, j, k), self.base.zero())
        return -self.structure.get((i, k, j), self.base.zero())

    def frame_bracket(self, j: int, k: int) -> Vector:
        return tuple(self.c(i, j, k) for i in range(self.rank))

    def anchor_of(self, v: Sequence[RatFn]) -> VField:
        acc = VField.zero(self.base)
        for f, X in zip(v, self.anchor):
            if f:
                acc = acc + X * f
        return acc

    def bracket(self, a: Sequence[RatFn], b: Sequence[RatFn]) -> Vector:
        """[Σ a_j e_j, Σ b_k e_k] with the Leibniz rule along the anchor."""
        out = _zero_vec(self.base, self.rank)
        for j, f in enumerate(a):
            if not f:
                continue
            for k, g in enumerate(b):
                if not g:
                    continue
                if j != k:
                    fg = f * g
                    for i in range(self.rank):
                        cij = self.c(i, j, k)
                        if cij:
                            out[i] = out[i] + fg * cij
        for j, f in enumerate(a):
            if f:
                X = self.anchor[j]
                for k, g in enumerate(b):
                    if g:
                        d = X.apply(g)
                        if d:
                            out[k] = out[k] + f * d
        for k, g in enumerate(b):
            if g:
                Y = self.anchor[k]
                for j, f in enumerate(a):
                    if f:
                        d = Y.apply(f)
                        if d:
                            out[j] = out[j] - g * d
        return tuple(out)

    def unit(self, j: int) -> Vector:
        return tuple(self.base.one() if i == j else self.base.zero() for i in range(self.rank))

    def anchored_indices(self) -> dict[int, int] | None:
        """Map base variable a ↦ frame index i when ρ(e_i) = ∂_a and every other anchor vanishes."""
        out: dict[int, int] = {}
        for i, X in enumerate(self.anchor):
            nz = [a for a, x in enumerate(X.coeffs) if x]
            if not nz:
                continue
            if len(nz) != 1 or X.coeffs[nz[0]] != 1 or nz[0] in out:
                return None
            out[nz[0]] = i
        if len(out) != self.base.dim:
            return None
        return out

    def is_normalized(self) -> bool:
        """Anchor is ∂_{x_a} on the first n frame elements and zero afterwards."""
        m = self.anchored_indices()
        return m is not None and all(m[a] == a for a in m)


@dataclass(frozen=True)
class Residual:
    label: str
    value: str

    def to_dict(self) -> dict:
        return {"label": self.label, "residual": self.value}


@dataclass
class CheckReport:
    ok: bool
    failures: list[Residual] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def fail(self, label: str, value: object) -> None:
        self.ok = False
        self.failures.append(Residual(label, str(value)))

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failures": [f.to_dict() for f in self.failures], "notes": list(self.notes)}


def check_almost_lie(F: FramedAlgebroid) -> CheckReport:
    """ρ([e_j, e_k]) = [ρ e_j, ρ e_k] on every frame pair."""
    report = CheckReport(True)
    for j, k in combinations(range(F.rank), 2):
        lhs = F.anchor_of(F.frame_bracket(j, k))
        rhs = lie_bracket(F.anchor[j], F.anchor[k])
        diff = lhs - rhs
        if not diff.is_zero():
            report.fail(f"anchor({F.names[j]},{F.names[k]})", diff)
    return report


def jacobiator(F: FramedAlgebroid) -> dict[tuple[int, int, int], Vector]:
    """Jac(e_j, e_k, e_l) = Σ_cyc [[e_j, e_k], e_l] for j < k < l."""
    out = {}
    for j, k, l in combinations(range(F.rank), 3):
        acc = _zero_vec(F.base, F.rank)
        for a, b, c in ((j, k, l), (k, l, j), (l, j, k)):
            term = F.bracket(F.frame_bracket(a, b), F.unit(c))
            acc = [x + y for x, y in zip(acc, term)]
        out[(j, k, l)] = tuple(acc)
    return out


def jacobi_residuals(F: FramedAlgebroid) -> CheckReport:
    report = CheckReport(True)
    for key, vec in jacobiator(F).items():
        if any(vec):
            report.fail("jacobi(" + ",".join(F.names[i] for i in key) + ")", "(" + ", ".join(str(x) for x in vec) + ")")
    return report


# ---------------------------------------------------------------------------
# Symbol action and almost Cartan algebroids


@dataclass(frozen=True)
class AlmostCartanAlgebroid:
    algebroid: FramedAlgebroid
    symbol: tuple[Matrix, ...]
    symbol_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        r = self.algebroid.rank
        for M in self.symbol:
            if len(M) != r or any(len(row) != r for row in M):
                raise AlgebroidError(f"symbol matrices must be {r}×{r}")
        if self.symbol:
            rk, _ = rank([[x for row in M for x in row] for M in self.symbol], self.base)
            if rk != len(self.symbol):
                raise AlgebroidError("symbol matrices are linearly dependent over the function field")
        for lam, M in enumerate(self.symbol):
            for j in range(r):
                image = self.algebroid.anchor_of(tuple(M[i][j] for i in range(r)))
                if not image.is_zero():
                    raise AlgebroidError(f"symbol T{lam + 1} maps e{j + 1} outside the kernel of the anchor")
        if not self.symbol_names:
            object.__setattr__(self, "symbol_names", tuple(f"t{l + 1}" for l in range(len(self.symbol))))

    @classmethod
    def build(
        cls, algebroid: FramedAlgebroid, entries: Mapping[tuple[int, int, int], Scalar], p: int, names: Sequence[str] = ()
    ) -> AlmostCartanAlgebroid:
        """``entries[(l, j, i)]`` is the coefficient of e_i in T_l(e_j)."""
        base, r = algebroid.base, algebroid.rank
        mats = [[[base.zero() for _ in range(r)] for _ in range(r)] for _ in range(p)]
        for (lam, j, i), v in entries.items():
            mats[lam][i][j] = _lift(v, base)
        return cls(algebroid, tuple(tuple(tuple(row) for row in M) for M in mats), tuple(names))

    @property
    def base(self) -> Chart:
        return self.algebroid.base

    @property
    def rank(self) -> int:
        return self.algebroid.rank

    @property
    def p(self) -> int:
        return len(self.symbol)

    def a(self, i: int, lam: int, j: int) -> RatFn:
        return self.symbol[lam][i][j]

    def check_c0(self) -> CheckReport:
        report = CheckReport(True)
        anchored = self.algebroid.anchored_indices()
        if anchored is None:
            report.fail("normalized-anchor", "anchor is not a coordinate frame on the base")
            return report
        F = self.algebroid
        for i in anchored.values():
            for j, k in combinations(range(F.rank), 2):
                if F.c(i, j, k):
                    report.fail(f"c0:c({i + 1};{j + 1},{k + 1})", F.c(i, j, k))
            for lam in range(self.p):
                for j in range(F.rank):
                    if self.a(i, lam, j):
                        report.fail(f"c0:a({i + 1};{lam + 1},{j + 1})", self.a(i, lam, j))
        return report

    def tableau(self) -> Tableau:
        return Tableau(self.rank, self.rank, self.symbol, self.base)

    def rho_derivative(self, k: int, f: RatFn) -> RatFn:
        return self.algebroid.anchor[k].apply(f)


# ---------------------------------------------------------------------------
# Cartan data (C1)-(C3)


@dataclass
class ConditionResult:
    name: str
    sat: bool
    unknowns: int
    equations: int
    solution: dict[tuple, RatFn]
    inconsistent: str | None = None
    residuals_zero: bool = True
    zero: RatFn = field(default_factory=lambda: Chart(()).zero())

    def to_dict(self) -> dict:
        return {
            "condition": self.name,
            "sat": self.sat,
            "unknowns": self.unknowns,
            "equations": self.equations,
            "solution": {",".join(str(i + 1) for i in key): str(v) for key, v in sorted(self.solution.items()) if v},
            "inconsistent_row": self.inconsistent,
            "back_substitution_zero": self.residuals_zero,
        }


@dataclass
class CartanDataCertificate:
    """Solutions ε (C1), ν (C2), ξ (C3), or the inconsistent combination of rows."""

    c0: CheckReport
    c1: ConditionResult
    c2: ConditionResult
    c3: ConditionResult

    @property
    def sat(self) -> bool:
        return self.c0.ok and self.c1.sat and self.c2.sat and self.c3.sat

    def eps(self, lam: int, eta: int, mu: int) -> RatFn:
        if eta == mu:
            return self.c1.zero
        if eta < mu:
            return self.c1.solution[(lam, eta, mu)]
        return -self.c1.solution[(lam, mu, eta)]

    def nu(self, lam: int, j: int, k: int) -> RatFn:
        if j == k:
            return self.c2.zero
        if j < k:
            return self.c2.solution[(lam, j, k)]
        return -self.c2.solution[(lam, k, j)]

    def xi(self, mu: int, lam: int, k: int) -> RatFn:
        """Coefficient of T_mu in ∇_{e_k} T_lam."""
        return self.c3.solution[(mu, lam, k)]

    def to_dict(self) -> dict:
        return {
            "sat": self.sat,
            "c0": self.c0.to_dict(),
            "c1": self.c1.to_dict(),
            "c2": self.c2.to_dict(),
            "c3": self.c3.to_dict(),
        }


def _describe_certificate(labels: list[str], cert: Sequence[RatFn] | None) -> str:
    if cert is None:
        return "inconsistent"
    parts = [f"({c})*[{labels[i]}]" for i, c in enumerate(cert) if c]
    return " + ".join(parts) + " reduces to 0 = nonzero"


def _finish(
    name: str, rows: list[list[RatFn]], rhs: list[RatFn], labels: list[str], keys: list[tuple], chart: Chart
) -> ConditionResult:
    sol = solve_block(rows, rhs, len(keys), chart)
    if not sol.consistent:
        return ConditionResult(
            name, False, len(keys), len(rows), {}, _describe_certificate(labels, sol.certificate), False, chart.zero()
        )
    values = dict(zip(keys, sol.particular or ()))
    ok = True
    for row, b in zip(rows, rhs):
        acc = -b
        for x, v in zip(row, sol.particular or ()):
            if x and v:
                acc = acc + x * v
        if acc:
            ok = False
    return ConditionResult(name, True, len(keys), len(rows), values, None, ok, chart.zero())


def c1_system(A: AlmostCartanAlgebroid) -> tuple[list[list[RatFn]], list[RatFn], list[str], list[tuple]]:
    """a_i^{λj} ε_λ^{ημ} = (T_η T_μ − T_μ T_η)_{ij}; unknowns ε_λ^{ημ}, η < μ."""
    ch, r, p = A.base, A.rank, A.p
    pairs = list(combinations(range(p), 2))
    keys = [(lam, eta, mu) for eta, mu in pairs for lam in range(p)]
    col = {k: n for n, k in enumerate(keys)}
    rows, rhs, labels = [], [], []
    for eta, mu in pairs:
        comm = commutator(A.symbol[eta], A.symbol[mu])
        for i in range(r):
            for j in range(r):
                row = [ch.zero()] * len(keys)
                for lam in range(p):
                    row[col[(lam, eta, mu)]] = A.a(i, lam, j)
                if any(row) or comm[i][j]:
                    rows.append(row)
                    rhs.append(comm[i][j])
                    labels.append(f"C1 i={i + 1} j={j + 1} eta={eta + 1} mu={mu + 1}")
    return rows, rhs, labels, keys


def c2_system(A: AlmostCartanAlgebroid) -> tuple[list[list[RatFn]], list[RatFn], list[str], list[tuple]]:
    """Jac(e_j,e_k,e_l)_i = Σ_cyc a_i^{λl} ν_λ^{jk}; unknowns ν_λ^{jk}, j < k."""
    ch, r, p = A.base, A.rank, A.p
    keys = [(lam, j, k) for j, k in combinations(range(r), 2) for lam in range(p)]
    col = {k: n for n, k in enumerate(keys)}
    jac = jacobiator(A.algebroid)
    rows, rhs, labels = [], [], []
    for (j, k, l), vec in jac.items():
        for i in range(r):
            row = [ch.zero()] * len(keys)
            for a, b, c in ((j, k, l), (k, l, j), (l, j, k)):
                sign = 1 if a < b else -1
                lo, hi = min(a, b), max(a, b)
                for lam in range(p):
                    coeff = A.a(i, lam, c)
                    if coeff:
                        n = col[(lam, lo, hi)]
                        row[n] = row[n] + coeff * sign
            if any(row) or vec[i]:
                rows.append(row)
                rhs.append(vec[i])
                labels.append(f"C2 i={i + 1} (j,k,l)=({j + 1},{k + 1},{l + 1})")
    return rows, rhs, labels, keys


def c3_lhs(A: AlmostCartanAlgebroid, i: int, lam: int, j: int, k: int) -> RatFn:
    """[e_k, T e_j] − [e_j, T e_k] − T[e_k, e_j] in component i."""
    F = A.algebroid
    acc = A.base.zero()
    for m in range(A.rank):
        acc = acc + A.a(i, lam, m) * F.c(m, j, k) - A.a(m, lam, j) * F.c(i, m, k) + A.a(m, lam, k) * F.c(i, m, j)
    acc = acc + A.rho_derivative(k, A.a(i, lam, j)) - A.rho_derivative(j, A.a(i, lam, k))
    return acc


def c3_system(A: AlmostCartanAlgebroid) -> tuple[list[list[RatFn]], list[RatFn], list[str], list[tuple]]:
    """c3_lhs = ξ^μ_{λk} a_i^{μj} − ξ^μ_{λj} a_i^{μk}; unknowns ξ^μ_{λk}."""
    ch, r, p = A.base, A.rank, A.p
    keys = [(mu, lam, k) for lam in range(p) for k in range(r) for mu in range(p)]
    col = {key: n for n, key in enumerate(keys)}
    rows, rhs, labels = [], [], []
    for lam in range(p):
        for j, k in combinations(range(r), 2):
            for i in range(r):
                row = [ch.zero()] * len(keys)
                for mu in range(p):
                    row[col[(mu, lam, k)]] = row[col[(mu, lam, k)]] + A.a(i, mu, j)
                    row[col[(mu, lam, j)]] = row[col[(mu, lam, j)]] - A.a(i, mu, k)
                b = c3_lhs(A, i, lam, j, k)
                if any(row) or b:
                    rows.append(row)
                    rhs.append(b)
                    labels.append(f"C3 i={i + 1} lambda={lam + 1} (j,k)=({j + 1},{k + 1})")
    return rows, rhs, labels, keys


def cartan_data_solve(A: AlmostCartanAlgebroid, *, joint: bool = False) -> CartanDataCertificate:
    """Solve (C1)-(C3) by exact linear algebra; ``joint`` solves all unknowns in one system."""
    c0 = A.check_c0() if A.algebroid.anchored_indices() is not None else CheckReport(True, notes=["general anchor"])
    systems = [("C1", c1_system(A)), ("C2", c2_system(A)), ("C3", c3_system(A))]
    if not joint:
        results = [_finish(name, *sys, A.base) for name, sys in systems]
        return CartanDataCertificate(c0, *results)
    rows: list[list[RatFn]] = []
    rhs: list[RatFn] = []
    labels: list[str] = []
    keys: list[tuple] = []
    offsets = []
    for _, (r_, b_, l_, k_) in systems:
        offsets.append(len(keys))
        keys.extend(k_)
    total = len(keys)
    for (_, (r_, b_, l_, k_)), off in zip(systems, offsets):
        for row, b, lab in zip(r_, b_, l_):
            full = [A.base.zero()] * total
            full[off : off + len(row)] = row
            rows.append(full)
            rhs.append(b)
            labels.append(lab)
    joint_res = _finish("joint", rows, rhs, labels, list(range(total)), A.base)
    results = []
    for (name, (r_, b_, l_, k_)), off in zip(systems, offsets):
        sol = {key: joint_res.solution[off + n] for n, key in enumerate(k_)} if joint_res.sat else {}
        results.append(
            ConditionResult(
                name, joint_res.sat, len(k_), len(r_), sol, joint_res.inconsistent, joint_res.residuals_zero, A.base.zero()
            )
        )
    return CartanDataCertificate(c0, *results)


# ---------------------------------------------------------------------------
# Gauge twists


def gauge_twist(A: AlmostCartanAlgebroid, eta: Sequence[Sequence[Scalar]]) -> AlmostCartanAlgebroid:
    """[α,β]^η = [α,β] + η(α)(β) − η(β)(α); ``eta[l][j]`` is the T_l-coefficient of η(e_j)."""
    base, r, p = A.base, A.rank, A.p
    if len(eta) != p or any(len(row) != r for row in eta):
        raise AlgebroidError(f"twist table must be {p}×{r}")
    et = [[_lift(x, base) for x in row] for row in eta]
    table: dict[tuple[int, int, int], RatFn] = dict(A.algebroid.structure)
    for j, k in combinations(range(r), 2):
        for i in range(r):
            add = base.zero()
            for lam in range(p):
                add = add + et[lam][j] * A.a(i, lam, k) - et[lam][k] * A.a(i, lam, j)
            if add:
                table[(i, j, k)] = table.get((i, j, k), base.zero()) + add
    F = A.algebroid
    twisted = FramedAlgebroid(base, r, F.anchor, {k: v for k, v in table.items() if v}, F.names)
    return AlmostCartanAlgebroid(twisted, A.symbol, A.symbol_names)


# ---------------------------------------------------------------------------
# Cartan pairs


@dataclass
class CartanPair:
    algebroid: FramedAlgebroid
    r: int
    p: int
    report: CheckReport
    standard: bool
    standard_witness: RatFn


def cartan_pair_build(
    A: AlmostCartanAlgebroid,
    t: Mapping[tuple[int, int], Sequence[Scalar]],
    nabla: Mapping[int, Sequence[Sequence[Scalar]]],
    eps: Mapping[tuple[int, int], Sequence[Scalar]] | None = None,
) -> CartanPair:
    """Bracket on C⊕σ from t (keys j<k ↦ σ-coordinates) and ∇ (k ↦ matrix, [mu][lam] = coefficient of T_mu in ∇_{e_k}T_lam).

    ``eps[(eta, mu)]`` gives [T_eta, T_mu] in σ-coordinates; when omitted it is
    solved from the commutator.
    """
    base, r, p = A.base, A.rank, A.p
    F = A.algebroid
    if eps is None:
        eps = {}
        for eta, mu in combinations(range(p), 2):
            vec = _in_sigma(A, commutator(A.symbol[eta], A.symbol[mu]))
            if vec is None:
                raise AlgebroidError(f"[T{eta + 1},T{mu + 1}] is not in the symbol span")
            eps[(eta, mu)] = vec
    table: dict[tuple[int, int, int], RatFn] = {}

    def put(i: int, j: int, k: int, v: RatFn) -> None:
        if v:
            table[(i, j, k)] = table.get((i, j, k), base.zero()) + v

    for j, k in combinations(range(r), 2):
        for i in range(r):
            put(i, j, k, F.c(i, j, k))
        tv = t.get((j, k))
        if tv is not None:
            for lam in range(p):
                put(r + lam, j, k, -_lift(tv[lam], base))
    for j in range(r):
        nab = nabla.get(j)
        for mu in range(p):
            for i in range(r):
                put(i, j, r + mu, -A.a(i, mu, j))
            if nab is not None:
                for lam in range(p):
                    put(r + lam, j, r + mu, _lift(nab[lam][mu], base))
    for (eta, mu), vec in eps.items():
        for lam in range(p):
            put(r + lam, r + eta, r + mu, _lift(vec[lam], base))
    anchor = tuple(F.anchor) + tuple(VField.zero(base) for _ in range(p))
    names = tuple(F.names) + tuple(A.symbol_names)
    big = FramedAlgebroid(base, r + p, anchor, table, names)
    report = CheckReport(True)
    for key, vec in jacobiator(big).items():
        if any(vec[:r]):
            report.fail("jacobi-mod-sigma(" + ",".join(names[i] for i in key) + ")", ", ".join(str(x) for x in vec[:r]))
    for eta, mu in combinations(range(p), 2):
        vec = big.frame_bracket(r + eta, r + mu)
        if any(vec[:r]):
            report.fail(f"sigma-involutive({names[r + eta]},{names[r + mu]})", ", ".join(str(x) for x in vec[:r]))
    rk, witness = rank([[x for row in M for x in row] for M in A.symbol], base) if p else (0, base.one())
    return CartanPair(big, r, p, report, rk == p, witness)


def _in_sigma(A: AlmostCartanAlgebroid, M: Sequence[Sequence[RatFn]]) -> Vector | None:
    """Coordinates of an endomorphism in the symbol basis, or None."""
    r, p = A.rank, A.p
    target = [M[i][j] for i in range(r) for j in range(r)]
    if p == 0:
        return () if not any(target) else None
    cols = [[A.symbol[lam][i][j] for lam in range(p)] for i in range(r) for j in range(r)]
    sol = solve_linear(cols, target, A.base)
    return sol.particular if sol.consistent else None


def cartan_pair_from_certificate(A: AlmostCartanAlgebroid, cert: CartanDataCertificate) -> CartanPair:
    """Cartan pair with t = ν and ∇ = ξ from a solved certificate."""
    r, p = A.rank, A.p
    t = {(j, k): [cert.nu(lam, j, k) for lam in range(p)] for j, k in combinations(range(r), 2)}
    nabla = {k: [[cert.xi(mu, lam, k) for lam in range(p)] for mu in range(p)] for k in range(r)}
    eps = {(eta, mu): [cert.eps(lam, eta, mu) for lam in range(p)] for eta, mu in combinations(range(p), 2)}
    return cartan_pair_build(A, t, nabla, eps)


# ---------------------------------------------------------------------------
# Freedom in t and ∇


@dataclass
class FreedomDims:
    z02: int
    sigma1: int
    witnesses: tuple[RatFn, ...]

    def to_dict(self) -> dict:
        return {"dim_Z02": self.z02, "dim_sigma1": self.sigma1, "witnesses": [str(w) for w in self.witnesses if not w.is_constant()]}


def freedom_dims(A: AlmostCartanAlgebroid) -> FreedomDims:
    """dim Z^{0,2}(σ) (freedom in t) and dim σ^(1) (freedom in ∇)."""
    if A.p == 0:
        return FreedomDims(0, 0, ())
    sigma = A.tableau()
    cx = SpencerComplex(sigma)
    sigma1 = prolong(sigma).dim
    r = A.rank
    domain = (r * (r - 1) // 2) * A.p
    if r >= 2:
        M = cx.delta(0, 2)
        rk, w = rank(M, A.base) if M and M[0] else (0, A.base.one())
    else:
        rk, w = 0, A.base.one()
    return FreedomDims(domain - rk, sigma1, (w,))


# ---------------------------------------------------------------------------
# Systatic space


@dataclass
class SystaticData:
    """S⁰ basis, the systatic algebroid on S⁰ ⊕ σ, and its verification."""

    s0_basis: tuple[Vector, ...]
    s0_witness: RatFn
    algebroid: FramedAlgebroid | None
    jacobi: CheckReport
    lemma: CheckReport
    source: AlmostCartanAlgebroid

    @property
    def rank_s0(self) -> int:
        return len(self.s0_basis)

    @property
    def is_lie(self) -> bool:
        return self.algebroid is not None and self.jacobi.ok and self.lemma.ok

    def to_dict(self) -> dict:
        names = self.source.algebroid.names
        return {
            "S0": [_format_vec(v, names) for v in self.s0_basis],
            "S": [_format_vec(v, names) for v in self.s0_basis] + list(self.source.symbol_names),
            "rank_witness": str(self.s0_witness),
            "lie_algebroid": self.is_lie,
            "jacobi": self.jacobi.to_dict(),
            "lemma": self.lemma.to_dict(),
        }


def _format_vec(v: Sequence[RatFn], names: Sequence[str]) -> str:
    parts = []
    for f, n in zip(v, names):
        if not f:
            continue
        if f == 1:
            parts.append(n)
        elif f == -1:
            parts.append(f"-{n}")
        else:
            parts.append(f"({f})*{n}")
    return " + ".join(parts) if parts else "0"


def partial_systatic_basis(A: AlmostCartanAlgebroid) -> tuple[tuple[Vector, ...], RatFn]:
    """Generic kernel of u ↦ (T_l u)_l."""
    r, base = A.rank, A.base
    rows = [list(A.symbol[lam][i]) for lam in range(A.p) for i in range(r)]
    rows = [row for row in rows if any(row)]
    if not rows:
        return _unit_vectors(base, r), base.one()
    sol = solve_linear(rows, None, base)
    return sol.nullspace, sol.witness


def endo_of_sections(A: AlmostCartanAlgebroid, fn) -> Matrix:
    """Matrix of a C-linear map given on frame vectors."""
    r = A.rank
    cols = [fn(A.algebroid.unit(j)) for j in range(r)]
    return tuple(tuple(cols[j][i] for j in range(r)) for i in range(r))


def ad_action(A: AlmostCartanAlgebroid, u: Sequence[RatFn], T: Sequence[Sequence[RatFn]]) -> Matrix:
    """Ad_u(T)(α) = [u, T α] − T [u, α]."""
    F = A.algebroid
    return endo_of_sections(A, lambda a: tuple(x - y for x, y in zip(F.bracket(u, mat_vec(T, a)), mat_vec(T, F.bracket(u, a)))))


def j_map(A: AlmostCartanAlgebroid, u: Sequence[RatFn], v: Sequence[RatFn]) -> Matrix:
    """J_{u,v}(α) = [[u,v],α] + [[v,α],u] + [[α,u],v]."""
    F = A.algebroid

    def fn(a: Vector) -> Vector:
        t1 = F.bracket(F.bracket(u, v), a)
        t2 = F.bracket(F.bracket(v, a), u)
        t3 = F.bracket(F.bracket(a, u), v)
        return tuple(x + y + z for x, y, z in zip(t1, t2, t3))

    return endo_of_sections(A, fn)


def _coords(basis: Sequence[Vector], v: Sequence[RatFn], chart: Chart) -> Vector | None:
    if not basis:
        return () if not any(v) else None
    cols = [[b[i] for b in basis] for i in range(len(v))]
    sol = solve_linear(cols, list(v), chart)
    return sol.particular if sol.consistent else None


def systatic_build(A: AlmostCartanAlgebroid) -> SystaticData:
    base, p = A.base, A.p
    F = A.algebroid
    basis, witness = partial_systatic_basis(A)
    s = len(basis)
    sym = A.symbol
    lemma = CheckReport(True)
    table: dict[tuple[int, int, int], RatFn] = {}

    def put(i: int, j: int, k: int, v: RatFn) -> None:
        if v:
            table[(i, j, k)] = table.get((i, j, k), base.zero()) + v

    def in_sigma(M: Matrix, label: str) -> Vector | None:
        vec = _in_sigma(A, M)
        if vec is None:
            lemma.fail(label, "not in the symbol span")
        return vec

    J: dict[tuple[int, int], Matrix] = {}
    for a, b in combinations(range(s), 2):
        br = F.bracket(basis[a], basis[b])
        co = _coords(basis, br, base)
        if co is None:
            lemma.fail(f"S0-closed({a + 1},{b + 1})", "bracket leaves S0")
            continue
        for c, v in enumerate(co):
            put(c, a, b, v)
        J[(a, b)] = j_map(A, basis[a], basis[b])
        vec = in_sigma(J[(a, b)], f"J({a + 1},{b + 1})")
        if vec is not None:
            for lam, v in enumerate(vec):
                put(s + lam, a, b, v)
    Ad: dict[tuple[int, int], Matrix] = {}
    for a in range(s):
        for mu in range(p):
            Ad[(a, mu)] = ad_action(A, basis[a], sym[mu])
            vec = in_sigma(Ad[(a, mu)], f"Ad({a + 1},t{mu + 1})")
            if vec is not None:
                for lam, v in enumerate(vec):
                    put(s + lam, a, s + mu, v)
    for eta, mu in combinations(range(p), 2):
        vec = in_sigma(commutator(sym[eta], sym[mu]), f"[t{eta + 1},t{mu + 1}]")
        if vec is not None:
            for lam, v in enumerate(vec):
                put(s + lam, s + eta, s + mu, -v)
    if not lemma.ok:
        return SystaticData(basis, witness, None, CheckReport(False), lemma, A)
    anchor = tuple(F.anchor_of(u) for u in basis) + tuple(VField.zero(base) for _ in range(p))
    names = tuple(_format_vec(u, F.names) for u in basis) + tuple(A.symbol_names)
    S = FramedAlgebroid(base, s + p, anchor, table, names)
    jac = jacobi_residuals(S)
    almost = check_almost_lie(S)
    for f in almost.failures:
        jac.fail(f.label, f.value)
    _lemma_identities(A, basis, J, Ad, lemma)
    return SystaticData(basis, witness, S, jac, lemma, A)


def _lemma_identities(
    A: AlmostCartanAlgebroid,
    basis: Sequence[Vector],
    J: Mapping[tuple[int, int], Matrix],
    Ad: Mapping[tuple[int, int], Matrix],
    report: CheckReport,
) -> None:
    """d_Ad J = 0, the curvature identity for Ad, and Ad as a derivation of [S,T]."""
    F = A.algebroid
    s, p = len(basis), A.p
    sym = A.symbol

    def Jm(a: int, b: int) -> Matrix:
        if a < b:
            return J[(a, b)]
        return tuple(tuple(-x for x in row) for row in J[(b, a)])

    def bracket_vec(a: int, b: int) -> Vector:
        return F.bracket(basis[a], basis[b])

    for a, b, c in combinations(range(s), 3):
        total = None
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            term = mat_sub(ad_action(A, basis[x], Jm(y, z)), j_map(A, bracket_vec(x, y), basis[z]))
            total = term if total is None else mat_add(total, term)
        if total is not None and not mat_is_zero(total):
            report.fail(f"dJ({a + 1},{b + 1},{c + 1})", "nonzero")
    for a, b in combinations(range(s), 2):
        for mu in range(p):
            lhs = mat_sub(
                mat_sub(ad_action(A, basis[a], Ad[(b, mu)]), ad_action(A, basis[b], Ad[(a, mu)])),
                ad_action(A, bracket_vec(a, b), sym[mu]),
            )
            rhs = commutator(sym[mu], Jm(a, b))
            if not mat_is_zero(mat_sub(lhs, rhs)):
                report.fail(f"Ad-curvature({a + 1},{b + 1},t{mu + 1})", "nonzero")
    for a in range(s):
        for eta, mu in combinations(range(p), 2):
            lhs = ad_action(A, basis[a], commutator(sym[eta], sym[mu]))
            rhs = mat_add(commutator(Ad[(a, eta)], sym[mu]), commutator(sym[eta], Ad[(a, mu)]))
            if not mat_is_zero(mat_sub(lhs, rhs)):
                report.fail(f"Ad-derivation({a + 1},t{eta + 1},t{mu + 1})", "nonzero")


# ---------------------------------------------------------------------------
# Substitution helpers shared with realization


def substitute_algebroid(A: AlmostCartanAlgebroid, values: Sequence[RatFn], target: Chart, keep: Sequence[int]) -> AlmostCartanAlgebroid:
    """Restrict to the frame indices ``keep`` and substitute base variables."""
    F = A.algebroid
    pos = {old: new for new, old in enumerate(keep)}
    table = {}
    for (i, j, k), v in F.structure.items():
        if i in pos and j in pos and k in pos:
            w = v.substitute(values, target)
            if w:
                table[(pos[i], pos[j], pos[k])] = w
    anchor = []
    for old in keep:
        X = F.anchor[old]
        comps = [X.coeffs[F.base.index(v)].substitute(values, target) for v in target.variables]
        anchor.append(VField(target, comps))
    sub = FramedAlgebroid(target, len(keep), tuple(anchor), table, tuple(F.names[i] for i in keep))
    mats = tuple(tuple(tuple(M[i][j].substitute(values, target) for j in keep) for i in keep) for M in A.symbol)
    return AlmostCartanAlgebroid(sub, mats, A.symbol_names)
