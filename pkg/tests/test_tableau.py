from __future__ import annotations

from itertools import combinations
from math import comb

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from cartankit.ratfield import Chart, RatFieldError
from cartankit.tableau import (
    SpencerComplex,
    Tableau,
    cohomology_dims,
    involutivity_verdict,
    prolong,
    spencer_delta,
)

SO2 = Tableau.from_matrices([[[0, -1], [1, 0]]], 2, 2)


def _matmul_is_zero(A, B) -> bool:
    if not A or not B or not B[0]:
        return True
    for row in A:
        for j in range(len(B[0])):
            acc = None
            for a, brow in zip(row, B):
                term = a * brow[j]
                acc = term if acc is None else acc + term
            if acc is not None and not acc.is_zero():
                return False
    return True


# -- examples ----------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_full_tableau_prolongation_dims(n, k):
    # symmetric k-linear maps Rⁿ → Rⁿ
    assert SpencerComplex(Tableau.full(n)).dim(k - 1) == n * comb(n + k - 1, k)


def test_so2_is_finite_type_one():
    v = involutivity_verdict(SO2, 2, 2)
    assert v.verdict == "FINITE-TYPE(1)"
    assert v.report.prolongation_dims[1] == 0


def test_full_tableau_passes_within_bounds():
    v = involutivity_verdict(Tableau.full(2), 3, 3)
    assert v.verdict == "PASS-within-bounds"
    assert v.acyclic_within_bounds
    assert all(h == 0 for h in v.report.cohomology_dims.values())


def test_finite_type_tableau_keeps_top_cohomology():
    # first-order form of u_xx = u_yy = 0: σ = span{u_xy}, σ^(1) = 0, H^{0,2} = Hom(Λ²R², σ)
    sigma = Tableau.from_matrices([[[0, 1], [1, 0]]], 2, 2)
    rep = cohomology_dims(sigma, 1, 2)
    assert rep.prolongation_dims[1] == 0
    assert rep.cohomology_dims[(0, 2)] == 1


def test_example2_symbol_tableau():
    # T(e₁) = e₂ viewed as a map R² → R² over the base chart
    B = Chart.of(["x", "y"], ["y"])
    sigma = Tableau.from_matrices([[[0, 0], [1, 0]]], 2, 2, B)
    v = involutivity_verdict(sigma, 3, 3)
    assert v.verdict == "PASS-within-bounds"
    assert [v.report.prolongation_dims[l] for l in range(3)] == [1, 1, 1]


def test_dependent_matrices_rejected():
    with pytest.raises(RatFieldError):
        Tableau.from_matrices([[[1, 0]], [[2, 0]]], 2, 1)


def test_bounds_validated():
    with pytest.raises(RatFieldError):
        involutivity_verdict(SO2, 0, 1)
    with pytest.raises(RatFieldError):
        spencer_delta(SO2, 0, 0)


def test_describe_names_bounds():
    assert involutivity_verdict(Tableau.full(1), 2, 2).describe().endswith("(bounded check: 1 ≤ m ≤ 2, 0 ≤ l ≤ 2)")


# -- properties on random tableaux ------------------------------------------


@st.composite
def tableaux(draw) -> Tableau:
    e = draw(st.integers(1, 3))
    f = draw(st.integers(1, 2))
    count = draw(st.integers(0, e * f))
    mats = [
        [[draw(st.integers(-2, 2)) for _ in range(e)] for _ in range(f)]
        for _ in range(count)
    ]
    flat = sympy.Matrix([[x for row in M for x in row] for M in mats]) if mats else sympy.zeros(0, e * f)
    if mats and flat.rank() < count:
        basis = flat.T.columnspace()
        mats = [[[int(v[r * e + c]) for c in range(e)] for r in range(f)] for v in basis]
    return Tableau.from_matrices(mats, e, f)


def _sympy_prolongation_dim(sigma: Tableau) -> int:
    E, s, F = sigma.dim_e, sigma.dim, sigma.dim_f
    if s == 0:
        return 0
    xs = sympy.symbols(f"x0:{E * s}")
    eqs = []
    for j, k in combinations(range(E), 2):
        for g in range(F):
            lhs = sum(xs[j * s + b] * sigma.basis[b][g][k].constant_value() for b in range(s))
            rhs = sum(xs[k * s + b] * sigma.basis[b][g][j].constant_value() for b in range(s))
            eqs.append(lhs - rhs)
    if not eqs:
        return E * s
    M = sympy.Matrix([[sympy.Rational(eq.coeff(x)) for x in xs] for eq in map(sympy.expand, eqs)])
    return E * s - M.rank()


@given(tableaux())
def test_prolongation_dim_matches_sympy(sigma):
    assert prolong(sigma).dim == _sympy_prolongation_dim(sigma)


@given(tableaux())
def test_prolonged_elements_are_symmetric(sigma):
    for M in prolong(sigma).basis:
        for j, k in combinations(range(sigma.dim_e), 2):
            for g in range(sigma.dim_f):
                a = sum((M[b][j] * sigma.basis[b][g][k] for b in range(sigma.dim)), sigma.chart.zero())
                b_ = sum((M[b][k] * sigma.basis[b][g][j] for b in range(sigma.dim)), sigma.chart.zero())
                assert a == b_


@settings(max_examples=30)
@given(tableaux())
def test_first_cohomology_vanishes(sigma):
    cx = SpencerComplex(sigma)
    for l in range(3):
        assert cx.cohomology(l, 1)[0] == 0


@settings(max_examples=30)
@given(tableaux())
def test_delta_squares_to_zero(sigma):
    cx = SpencerComplex(sigma)
    for l in range(2):
        for m in range(sigma.dim_e - 1):
            assert _matmul_is_zero(cx.delta(l, m + 1), cx.delta(l + 1, m))
