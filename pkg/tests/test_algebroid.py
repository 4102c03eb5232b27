from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartankit.algebroid import (
    AlgebroidError,
    AlmostCartanAlgebroid,
    FramedAlgebroid,
    cartan_data_solve,
    cartan_pair_from_certificate,
    check_almost_lie,
    gauge_twist,
    jacobiator,
)
from cartankit.project import FIXTURE_NAMES, load_project
from cartankit.ratfield import Chart
from cartankit.realization import check_realization, gauge_transport, solve_pi

from conftest import polynomials

POINT = Chart(())
B = Chart.of(["x", "y"], ["y"])
INTACT = [name for name in FIXTURE_NAMES if not name.endswith("_broken")]


def lie_algebra(brackets, rank=3) -> AlmostCartanAlgebroid:
    F = FramedAlgebroid.build(POINT, rank, [[] for _ in range(rank)], brackets)
    return AlmostCartanAlgebroid(F, ())


def example2() -> AlmostCartanAlgebroid:
    y = B.var("y")
    F = FramedAlgebroid.build(
        B, 4, [[0, 0], [0, 0], [1, 0], [0, 1]], {(0, 0, 1): 1 / y, (0, 0, 3): -1 / y, (1, 1, 3): 1 / y}
    )
    return AlmostCartanAlgebroid.build(F, {(0, 0, 1): 1}, 1, ["t"])


# -- Lie algebras: (C2) is the Jacobi identity ---------------------------------


SL2 = {(0, 0, 1): 1, (1, 0, 2): 1, (2, 1, 2): 1}


def test_sl2_constants_are_sat():
    cert = cartan_data_solve(lie_algebra(SL2))
    assert cert.sat
    # no symbol: C2 has no unknowns and only Jacobiator rows, all identically zero
    assert cert.c2.unknowns == 0 and cert.c2.equations == 0
    assert all(not any(v) for v in jacobiator(lie_algebra(SL2).algebroid).values())


def test_perturbed_bracket_is_unsat_with_certificate():
    broken = dict(SL2)
    broken[(2, 1, 2)] = 2
    cert = cartan_data_solve(lie_algebra(broken))
    assert not cert.sat
    assert not cert.c2.sat
    assert cert.c2.inconsistent is not None
    assert cert.c2.inconsistent.endswith("reduces to 0 = nonzero")
    assert "C2" in cert.c2.inconsistent


def _brute_jacobi(c, r: int) -> bool:
    def br(a, b):
        out = [Fraction(0)] * r
        for j in range(r):
            for k in range(r):
                if a[j] and b[k]:
                    for i in range(r):
                        out[i] += a[j] * b[k] * c(i, j, k)
        return out

    basis = [[Fraction(int(i == j)) for i in range(r)] for j in range(r)]
    for a, b, d in combinations(basis, 3):
        total = [sum(t) for t in zip(br(a, br(b, d)), br(b, br(d, a)), br(d, br(a, b)))]
        if any(total):
            return False
    return True


@st.composite
def constant_brackets(draw):
    r = 3
    table = {}
    for j, k in combinations(range(r), 2):
        for i in range(r):
            v = draw(st.sampled_from([0, 0, 1, -1, 2]))
            if v:
                table[(i, j, k)] = v
    return table


@given(constant_brackets())
def test_c2_matches_brute_force_jacobi(table):
    A = lie_algebra(table)

    def c(i, j, k):
        if j == k:
            return 0
        return table.get((i, j, k), 0) if j < k else -table.get((i, k, j), 0)

    cert = cartan_data_solve(A)
    assert cert.c2.sat == _brute_jacobi(c, 3)
    assert cert.sat == cert.c2.sat
    assert cartan_data_solve(A, joint=True).sat == cert.sat


# -- Example 2 ------------------------------------------------------------------------


def test_example2_base_data_is_sat_with_zero_residuals():
    A = example2()
    assert check_almost_lie(A.algebroid).ok
    assert A.check_c0().ok
    cert = cartan_data_solve(A)
    assert cert.sat
    assert all(res.residuals_zero for res in (cert.c1, cert.c2, cert.c3))
    assert cartan_data_solve(A, joint=True).sat
    pair = cartan_pair_from_certificate(A, cert)
    assert pair.report.ok
    assert pair.standard


def test_example2_structure_functions():
    F = example2().algebroid
    y = B.var("y")
    assert F.c(0, 0, 1) == 1 / y
    assert F.c(0, 1, 0) == -1 / y
    assert F.c(0, 0, 3) == -1 / y
    assert F.c(1, 1, 3) == 1 / y
    assert F.c(1, 0, 2).is_zero()


def test_symbol_must_land_in_anchor_kernel():
    F = example2().algebroid
    with pytest.raises(AlgebroidError):
        AlmostCartanAlgebroid.build(F, {(0, 0, 2): 1}, 1)


def test_dependent_symbol_rejected():
    F = example2().algebroid
    with pytest.raises(AlgebroidError):
        AlmostCartanAlgebroid.build(F, {(0, 0, 1): 1, (1, 0, 1): B.var("y")}, 2)


def test_build_antisymmetrizes():
    F = FramedAlgebroid.build(POINT, 2, [[], []], {(0, 1, 0): 3})
    assert F.c(0, 0, 1) == POINT.const(-3)
    with pytest.raises(AlgebroidError):
        FramedAlgebroid.build(POINT, 2, [[], []], {(0, 1, 1): 1})


# -- gauge twists ---------------------------------------------------------------------


@st.composite
def twists(draw):
    return [[draw(polynomials(B, max_terms=2, max_deg=1)) for _ in range(4)]]


@given(twists())
def test_gauge_twist_roundtrip(eta):
    A = example2()
    back = gauge_twist(gauge_twist(A, eta), [[-x for x in row] for row in eta])
    assert dict(back.algebroid.structure) == dict(A.algebroid.structure)


@pytest.fixture(scope="module")
def example2_realization():
    project = load_project("example2")
    R = project.realization
    return R if R.pi is not None else R.with_pi(solve_pi(R).particular)


@settings(max_examples=20)
@given(twists())
def test_realization_pass_implies_sat_under_gauge_twists(example2_realization, eta):
    R = example2_realization
    assert check_realization(R).ok
    A = R.algebroid
    assert A.base == B
    twisted = gauge_twist(A, eta)
    moved = gauge_transport(R, twisted, eta)
    assert check_realization(moved).ok
    assert cartan_data_solve(twisted).sat


@pytest.mark.parametrize("name", INTACT)
def test_realization_pass_implies_sat_on_fixtures(name):
    project = load_project(name)
    if project.realization is None:
        pytest.skip("fixture has no realization section")
    R = project.realization
    if R.pi is None and R.algebroid.p:
        R = R.with_pi(solve_pi(R).particular)
    elif R.pi is None:
        R = R.with_pi(())
    assert check_realization(R).ok
    assert cartan_data_solve(R.algebroid).sat
