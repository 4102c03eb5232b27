"""Tableaux, their prolongations and bounded Spencer-cohomology computations.

A tableau is a family of F×E matrices spanning the image of ∂: σ → Hom(E, F).
Prolongation returns a tableau again: σ^(1) ⊂ Hom(E, σ) with its own matrices
expressed in the basis of σ, so repeated prolongation needs no special cases.

Basis conventions used by every matrix builder:
  * Hom(Λ^m E, V) has basis (I, β) for increasing index tuples I of length m
    (lexicographic) and basis vectors β of V, ordered I-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Sequence

from .ratfield import Chart, RatFieldError, RatFn, Scalar, rank, solve_linear

Matrix = tuple[tuple[RatFn, ...], ...]

POINTWISE = Chart(())


@dataclass(frozen=True)
class Tableau:
    """Span of linearly independent F×E matrices (the image of σ in Hom(E, F))."""

    dim_e: int
    dim_f: int
    basis: tuple[Matrix, ...]
    chart: Chart = POINTWISE

    def __post_init__(self) -> None:
        for M in self.basis:
            if len(M) != self.dim_f or any(len(row) != self.dim_e for row in M):
                raise RatFieldError(f"tableau matrices must be {self.dim_f}×{self.dim_e}")
        if self.basis:
            r, _ = rank([[x for row in M for x in row] for M in self.basis], self.chart)
            if r != len(self.basis):
                raise RatFieldError("tableau matrices are linearly dependent")

    @classmethod
    def from_matrices(
        cls, matrices: Sequence[Sequence[Sequence[Scalar]]], dim_e: int, dim_f: int, chart: Chart = POINTWISE
    ) -> Tableau:
        def lift(x: Scalar) -> RatFn:
            return x if isinstance(x, RatFn) else chart.const(Fraction(x))

        basis = tuple(tuple(tuple(lift(x) for x in row) for row in M) for M in matrices)
        return cls(dim_e, dim_f, basis, chart)

    @classmethod
    def full(cls, n: int, chart: Chart = POINTWISE) -> Tableau:
        """All of Hom(Rⁿ, Rⁿ), with row-major elementary matrices."""
        mats = []
        for i in range(n):
            for j in range(n):
                mats.append([[1 if (a, b) == (i, j) else 0 for b in range(n)] for a in range(n)])
        return cls.from_matrices(mats, n, n, chart)

    @classmethod
    def zero(cls, dim_e: int, dim_f: int, chart: Chart = POINTWISE) -> Tableau:
        return cls(dim_e, dim_f, (), chart)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def apply(self, beta: int, j: int) -> tuple[RatFn, ...]:
        """Coordinates in F of ∂(b_β)(e_j)."""
        return tuple(row[j] for row in self.basis[beta])


def prolong(sigma: Tableau) -> Tableau:
    """First prolongation: ξ ∈ Hom(E, σ) with ∂(ξ(u))(v) symmetric in u, v."""
    E, s = sigma.dim_e, sigma.dim
    ch = sigma.chart
    if s == 0:
        return Tableau(E, 0, (), ch)
    # unknown x[j][β] at column j*s + β
    nunk = E * s
    rows = []
    for j, k in combinations(range(E), 2):
        for gamma in range(sigma.dim_f):
            row = [ch.zero()] * nunk
            for beta in range(s):
                row[j * s + beta] = row[j * s + beta] + sigma.basis[beta][gamma][k]
                row[k * s + beta] = row[k * s + beta] - sigma.basis[beta][gamma][j]
            if any(row):
                rows.append(row)
    if rows:
        vectors = solve_linear(rows, None, ch).nullspace
    else:
        vectors = tuple(tuple(ch.one() if c == u else ch.zero() for c in range(nunk)) for u in range(nunk))
    mats = []
    for vec in vectors:
        mats.append(tuple(tuple(vec[j * s + beta] for j in range(E)) for beta in range(s)))
    return Tableau(E, s, tuple(mats), ch)


class SpencerComplex:
    """Lazily computed prolongation tower and δ matrices of a tableau."""

    def __init__(self, sigma: Tableau) -> None:
        self.sigma = sigma
        self._tower: list[Tableau] = [sigma]

    def level(self, l: int) -> Tableau:
        """σ^(l) as a tableau over σ^(l-1); l = 0 is σ itself."""
        if l < 0:
            raise RatFieldError("prolongation level must be ≥ 0")
        while len(self._tower) <= l:
            self._tower.append(prolong(self._tower[-1]))
        return self._tower[l]

    def dim(self, l: int) -> int:
        """dim σ^(l), with σ^(-1) = F."""
        return self.sigma.dim_f if l == -1 else self.level(l).dim

    def delta(self, l: int, m: int) -> list[list[RatFn]]:
        """Matrix of δ: Hom(Λ^m E, σ^(l)) → Hom(Λ^{m+1} E, σ^(l-1))."""
        if l < 0 or m < 0:
            raise RatFieldError(f"bidegree ({l},{m}) out of range")
        E = self.sigma.dim_e
        ch = self.sigma.chart
        tab = self.level(l)
        src_tuples = list(combinations(range(E), m))
        dst_tuples = list(combinations(range(E), m + 1))
        src_index = {t: n for n, t in enumerate(src_tuples)}
        s, f = tab.dim, tab.dim_f
        M = [[ch.zero()] * (len(src_tuples) * s) for _ in range(len(dst_tuples) * f)]
        for r, J in enumerate(dst_tuples):
            for i, ji in enumerate(J):
                I = J[:i] + J[i + 1 :]
                col0 = src_index[I] * s
                sign = -1 if i % 2 else 1
                for beta in range(s):
                    image = tab.apply(beta, ji)
                    for gamma in range(f):
                        if image[gamma]:
                            M[r * f + gamma][col0 + beta] = M[r * f + gamma][col0 + beta] + image[gamma] * sign
        return M

    def _rank(self, M: list[list[RatFn]]) -> tuple[int, RatFn]:
        if not M or not M[0]:
            return 0, self.sigma.chart.one()
        return rank(M, self.sigma.chart)

    def cohomology(self, l: int, m: int) -> tuple[int, list[RatFn]]:
        """dim H^{l,m} = dim ker δ_{l,m} − rank δ_{l+1,m−1}, with rank witnesses."""
        if m < 1:
            raise RatFieldError("cohomology degree m must be ≥ 1")
        E = self.sigma.dim_e
        r_out, w_out = self._rank(self.delta(l, m))
        domain = comb(E, m) * self.dim(l)
        r_in, w_in = self._rank(self.delta(l + 1, m - 1))
        return domain - r_out - r_in, [w_out, w_in]


def spencer_delta(sigma: Tableau, l: int, m: int) -> list[list[RatFn]]:
    if m < 1:
        raise RatFieldError("spencer_delta needs m ≥ 1")
    return SpencerComplex(sigma).delta(l, m)


@dataclass
class SpencerReport:
    prolongation_dims: dict[int, int]
    cohomology_dims: dict[tuple[int, int], int]
    witnesses: list[RatFn] = field(default_factory=list)
    finite_type_order: int | None = None

    def to_dict(self) -> dict:
        return {
            "prolongation_dims": {str(k): v for k, v in self.prolongation_dims.items()},
            "cohomology_dims": {f"{l},{m}": v for (l, m), v in self.cohomology_dims.items()},
            "finite_type_order": self.finite_type_order,
            "generic_rank_witnesses": sorted({str(w) for w in self.witnesses if not w.is_constant()}),
        }


def cohomology_dims(sigma: Tableau, l_max: int, m_max: int) -> SpencerReport:
    cx = SpencerComplex(sigma)
    dims = {l: cx.dim(l) for l in range(-1, l_max + 2)}
    table: dict[tuple[int, int], int] = {}
    witnesses: list[RatFn] = []
    for l in range(l_max + 1):
        for m in range(1, m_max + 1):
            h, w = cx.cohomology(l, m)
            table[(l, m)] = h
            witnesses.extend(w)
    finite = next((l for l in range(l_max + 2) if dims[l] == 0), None)
    return SpencerReport(dims, table, witnesses, finite)


@dataclass(frozen=True)
class InvolutivityVerdict:
    verdict: str
    r: int
    l_max: int
    failures: tuple[tuple[int, int], ...]
    finite_type_order: int | None
    report: SpencerReport

    @property
    def acyclic_within_bounds(self) -> bool:
        return not self.failures

    def describe(self) -> str:
        scope = f"bounded check: 1 ≤ m ≤ {self.r}, 0 ≤ l ≤ {self.l_max}"
        return f"{self.verdict} ({scope})"


def involutivity_verdict(sigma: Tableau, r: int, l_max: int) -> InvolutivityVerdict:
    if r < 1 or l_max < 1:
        raise RatFieldError("bounds must be ≥ 1")
    m_max = min(r, sigma.dim_e)
    report = cohomology_dims(sigma, l_max, m_max)
    failures = tuple(key for key, h in report.cohomology_dims.items() if h)
    finite = report.finite_type_order
    if finite is not None:
        verdict = f"FINITE-TYPE({finite})"
    elif failures:
        verdict = "FAIL"
    else:
        verdict = "PASS-within-bounds"
    return InvolutivityVerdict(verdict, r, l_max, failures, finite, report)
