from __future__ import annotations

import random
from fractions import Fraction

import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from cartankit.ratfield import Chart, EvalError, ParseError, RatFieldError, determinant, rank, solve_linear

from conftest import XY, fraction_matrices, nonzero_ratfns, polynomials, ratfns, sym_equal, to_sympy

XYC = Chart.of(["x", "y"], ["y"])


# -- parse and print -------------------------------------------------------


def test_parse_reciprocal_structure_function():
    f = XYC.parse("1/y")
    assert f.num == {(0, 0): 1}
    assert f.den == {(0, 1): 1}


def test_parse_zero():
    assert XY.parse("0").is_zero()


def test_parse_expands_polynomials():
    assert str(XY.parse("(x+y)^2 - x^2 - 2*x*y")) == "y^2"


def test_parse_negative_exponent_and_rationals():
    P = Chart.of(["u", "v"])
    assert P.parse("u^-1") == P.parse("1/u")
    assert P.parse("1/2*v^2/u^3") * 2 == P.parse("v^2*u^(-3)")


@pytest.mark.parametrize(
    "text",
    ["x +", "x ** 2", "(x", "x / 0", "q", "x^y", "2..3"],
)
def test_parse_errors(text):
    with pytest.raises(RatFieldError):
        XY.parse(text)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as err:
        XY.parse("x + + )")
    assert err.value.position >= 0


@given(ratfns())
def test_print_parse_fixed_point(f):
    g = XY.parse(str(f))
    assert g == f
    assert str(g) == str(f)


@given(ratfns())
def test_parse_matches_sympy(f):
    assert sym_equal(f, to_sympy(XY.parse(str(f))))


# -- field operations --------------------------------------------------------


def test_inverse_cancels():
    y = XYC.var("y")
    assert (1 / y) * y == XYC.one()


def test_disjoint_sum():
    P = Chart.of(["Y", "y", "u"], ["Y"])
    f = P.parse("y/Y") + P.var("u")
    assert f == P.parse("(y + u*Y)/Y")
    assert sym_equal(f, sympy.sympify("y/Y + u"))


def test_cancelling_difference():
    X = Chart.of(["x"])
    f = X.parse("x/(x-1)") - X.parse("1/(x-1)")
    assert (f - 1).is_zero()


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        XY.var("x") / XY.zero()


@given(ratfns(), ratfns(), ratfns())
def test_field_axioms(a, b, c):
    assert ((a + b) + c - (a + (b + c))).is_zero()
    assert ((a * b) * c - a * (b * c)).is_zero()
    assert (a * (b + c) - (a * b + a * c)).is_zero()
    assert (a - a).is_zero()


@given(nonzero_ratfns())
def test_multiplicative_inverse(a):
    assert a * (1 / a) == XY.one()


@given(ratfns(), ratfns())
def test_sum_and_product_match_sympy(a, b):
    assert sym_equal(a + b, to_sympy(a) + to_sympy(b))
    assert sym_equal(a * b, to_sympy(a) * to_sympy(b))


@given(ratfns())
def test_canonical_denominator(f):
    lead_exp = max(f.den, key=lambda e: (sum(e), e))
    assert f.den[lead_exp] > 0
    assert all(Fraction(c).denominator == 1 for c in f.den.values())
    from math import gcd

    g = 0
    for c in f.den.values():
        g = gcd(g, int(c))
    assert g == 1


# -- derivatives ---------------------------------------------------------------


def test_deriv_examples():
    f = XYC.parse("1/y")
    assert f.deriv("y") == XYC.parse("-1/y^2")
    assert f.deriv("x").is_zero()
    P = Chart.of(["y", "u", "v"], ["u"])
    assert P.parse("y/u^3 * v^2/2").deriv("v") == P.parse("y*v/u^3")


def test_deriv_unknown_variable():
    with pytest.raises(RatFieldError):
        XY.var("x").deriv("q")


@given(ratfns(), ratfns())
def test_leibniz_rule(a, b):
    assert (a * b).deriv("x") == a.deriv("x") * b + a * b.deriv("x")


@given(ratfns())
def test_mixed_partials_commute(f):
    assert f.deriv("x").deriv("y") == f.deriv("y").deriv("x")


@given(ratfns())
def test_deriv_matches_sympy(f):
    assert sym_equal(f.deriv("y"), sympy.diff(to_sympy(f), sympy.Symbol("y")))


# -- evaluation ------------------------------------------------------------------


def test_eval_examples():
    assert XYC.parse("1/y").eval([0, 2]) == Fraction(1, 2)
    assert (XY.var("x") - XY.var("x")).eval([3, 5]) == 0
    with pytest.raises(EvalError, match="denominator vanishes"):
        XY.parse("1/y").eval([0, 0])


def test_eval_rejects_nonvanishing_violation():
    with pytest.raises(EvalError):
        XYC.parse("x").eval([1, 0])


# -- linear algebra ----------------------------------------------------------------


def test_solve_identity():
    one, zero = XYC.one(), XYC.zero()
    sol = solve_linear([[one, zero], [zero, one]], [XYC.parse("1/y"), XYC.var("x")], XYC)
    assert sol.consistent
    assert sol.particular == (XYC.parse("1/y"), XYC.var("x"))
    assert sol.nullspace == ()


def test_solve_nullspace():
    sol = solve_linear([[XY.one(), XY.var("y")]], [XY.zero()], XY)
    assert sol.consistent
    assert all(v.is_zero() for v in sol.particular)
    assert len(sol.nullspace) == 1
    v = sol.nullspace[0]
    assert (v[0] + v[1] * XY.var("y")).is_zero()
    assert v == (-XY.var("y"), XY.one())


def test_solve_inconsistent_has_certificate():
    sol = solve_linear([[1], [1]], [0, 1], XY)
    assert not sol.consistent
    y = sol.certificate
    assert (y[0] + y[1]).is_zero()
    assert not (y[1]).is_zero()


def test_dimension_mismatch():
    with pytest.raises(RatFieldError):
        solve_linear([[1, 2], [3]], [0, 0], XY)


def _naive_rank(M):
    A = [row[:] for row in M]
    r = 0
    cols = len(A[0]) if A else 0
    for c in range(cols):
        piv = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c] / A[r][c]
                A[i] = [a - f * b for a, b in zip(A[i], A[r])]
        r += 1
    return r


@given(fraction_matrices(), st.randoms(use_true_random=False))
def test_rank_and_solve_agree_with_naive_elimination(M, rnd):
    ch = Chart(())
    r, _ = rank(M, ch)
    assert r == _naive_rank(M)
    b = [Fraction(rnd.randint(-3, 3)) for _ in M]
    sol = solve_linear(M, b, ch)
    augmented = [row + [bi] for row, bi in zip(M, b)]
    assert sol.consistent == (_naive_rank(augmented) == r)
    if sol.consistent:
        for row, bi in zip(M, b):
            assert sum(a * x.constant_value() for a, x in zip(row, sol.particular)) == bi
        assert len(sol.nullspace) == len(M[0]) - r
        for v in sol.nullspace:
            for row in M:
                assert sum(a * x.constant_value() for a, x in zip(row, v)) == 0


@given(st.lists(st.lists(polynomials(XY, max_terms=2), min_size=3, max_size=3), min_size=3, max_size=3))
def test_solve_matches_sympy_function_field(rows):
    b = [XY.var("x"), XY.one(), XY.var("y")]
    sol = solve_linear(rows, b, XY)
    SM = sympy.Matrix([[to_sympy(x) for x in row] for row in rows])
    assert sol.rank == SM.rank(simplify=True)
    if sol.consistent:
        for row, bi in zip(rows, b):
            acc = XY.zero()
            for a, x in zip(row, sol.particular):
                acc = acc + a * x
            assert acc == bi


@given(st.lists(st.lists(polynomials(XY, max_terms=2), min_size=3, max_size=3), min_size=3, max_size=3))
def test_determinant_matches_sympy(rows):
    det = determinant(rows, XY)
    SM = sympy.Matrix([[to_sympy(x) for x in row] for row in rows])
    assert sym_equal(det, SM.det())


@given(st.lists(st.lists(polynomials(XY, max_terms=2), min_size=3, max_size=3), min_size=2, max_size=4), st.randoms(use_true_random=False))
def test_rank_invariances(rows, rnd: random.Random):
    r, _ = rank(rows, XY)
    perm_rows = rows[:]
    rnd.shuffle(perm_rows)
    cols = list(range(3))
    rnd.shuffle(cols)
    permuted = [[row[c] for c in cols] for row in perm_rows]
    assert rank(permuted, XY)[0] == r
    scaled = [[x * XY.parse("y^2 + 1") for x in rows[0]]] + rows[1:]
    assert rank(scaled, XY)[0] == r


def test_rank_witness_is_nonzero_minor():
    y = XYC.var("y")
    r, w = rank([[XYC.one(), y], [y, y * y]], XYC)
    assert r == 1
    assert not w.is_zero()
