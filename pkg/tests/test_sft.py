from __future__ import annotations

from math import factorial

import pytest
import sympy

from cartankit.algebroid import cartan_data_solve, gauge_twist
from cartankit.cli import run
from cartankit.chartcalc import DForm, dext, wedge
from cartankit.jets import cartan_form_chart
from cartankit.project import load_project
from cartankit.realization import check_realization, restrict_transversal
from cartankit.sft import (
    algebroid_from_groupoid,
    build_cartan_algebroid,
    gauge_parameter,
    run_pipeline,
    spencer_from_cartanform,
)

from conftest import to_sympy


def pipeline(name: str):
    project = load_project(name)
    JG = project.jet_groupoid()
    G = JG.groupoid
    splitting, frame, frame_names = project.groupoid_frames(G.base)
    return project, JG, run_pipeline(G, JG.omega, JG.form_names, splitting, frame, frame_names)


@pytest.fixture(scope="module")
def ex1():
    return pipeline("example1")


@pytest.fixture(scope="module")
def ex2():
    return pipeline("example2")


# -- Example 1 --------------------------------------------------------------------


def test_example1_cartan_form(ex1):
    _, JG, _ = ex1
    P = JG.groupoid.chart
    d = lambda v: DForm.d(P, v)  # noqa: E731
    u, v = P.var("u"), P.var("v")
    expected = [
        d("X") - d("x") * u,
        (d("u") - d("x") * v) * (1 / u),
        (d("v") - d("u") * (v / u) - d("x") * (v * v / (2 * u))) * (1 / (u * u)),
    ]
    assert list(JG.omega) == expected


def test_example1_brackets(ex1):
    _, _, res = ex1
    F = res.build.user.algebroid
    one = F.base.one()
    assert F.c(0, 0, 1) == one  # [e1, e2] = e1
    assert F.c(1, 0, 2) == one  # [e1, e3] = e2
    assert F.c(2, 1, 2) == one  # [e2, e3] = e3
    assert len(F.structure) == 3
    assert res.build.user.p == 0
    assert res.axioms.ok


def test_example1_realization_and_restriction(ex1):
    _, _, res = ex1
    R = res.realization.with_pi(())
    assert check_realization(R).ok
    Rr = restrict_transversal(R, {"X": 0})
    assert check_realization(Rr).ok
    w1, w2, w3 = Rr.omega
    assert dext(w1) == wedge(w2, w1)
    assert dext(w2) == wedge(w3, w1)
    assert dext(w3) == wedge(w3, w2)


# -- Example 2 --------------------------------------------------------------------


def test_example2_structure_functions(ex2):
    _, _, res = ex2
    user = res.build.user
    F = user.algebroid
    y = F.base.var("y")
    assert dict(F.structure) == {(0, 0, 1): 1 / y, (0, 0, 3): -1 / y, (1, 1, 3): 1 / y}
    # T(e1) = e2
    assert user.a(1, 0, 0) == F.base.one()
    assert all(user.a(i, 0, j).is_zero() for i in range(4) for j in range(4) if (i, j) != (1, 0))
    assert cartan_data_solve(user).sat


def test_example2_realization(ex2):
    _, _, res = ex2
    R = res.realization
    P = R.chart
    assert R.omega[0] == DForm.d(P, "x") * P.parse("y/Y")
    assert R.omega[1] == DForm.d(P, "x") * P.var("u") + DForm.d(P, "y") * P.parse("Y/y")
    assert res.pi_family.sat
    assert check_realization(R.with_pi(res.pi_family.particular)).ok


def test_splitting_changes_data_by_a_gauge_twist(ex2):
    _, JG, res = ex2
    G = JG.groupoid
    alg = algebroid_from_groupoid(G)
    table = spencer_from_cartanform(G, JG.omega, JG.form_names, alg)
    frame = [[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 1, 0], [0, -1, 0, 1]]
    a = build_cartan_algebroid(table, alg.algebroid, [[1, 0], [0, 1], [0, 0]], frame)
    b = build_cartan_algebroid(table, alg.algebroid, [[1, 0], [0, 1], [G.base.parse("x*y"), 3]], frame)
    eta = gauge_parameter(a.user, b.user)
    assert eta is not None
    assert dict(gauge_twist(a.user, eta).algebroid.structure) == dict(b.user.algebroid.structure)
    assert cartan_data_solve(b.user).sat


def test_fixture_sft_matches_declared_data():
    for name in ("example1", "example2"):
        assert run("sft", name).passed
    assert not run("sft", "example1_broken").passed


# -- Cartan form oracle on J^k R ----------------------------------------------------


def _sympy_cartan_form(k: int):
    """Right-translated contact forms via series reversion, as coefficient lists."""
    x = sympy.Symbol("x")
    U = [sympy.Symbol(f"u1_{j}") for j in range(k + 1)]
    coords = [x] + U
    t = sympy.Symbol("t")
    b = sympy.symbols(f"b1:{k}")
    inner = sum((b[m - 1] * t**m / factorial(m) for m in range(1, k)), sympy.Integer(0))
    outer = sum(U[j] * inner**j / factorial(j) for j in range(1, k))
    eqs = sympy.Poly(sympy.expand(outer - t), t)
    sol = sympy.solve([eqs.coeff_monomial(t**m) for m in range(1, k)], b, dict=True)[0] if k > 1 else {}
    g = sympy.expand(inner.subs(sol))

    def theta(j):
        row = [sympy.Integer(0)] * len(coords)
        row[1 + j] = sympy.Integer(1)
        row[0] = -U[j + 1]
        return row

    forms = []
    for m in range(k):
        acc = [sympy.Integer(0)] * len(coords)
        for j in range(k):
            weight = sympy.expand(g**j / factorial(j)).coeff(t, m) * factorial(m) if j else (1 if m == 0 else 0)
            if weight:
                acc = [a + weight * c for a, c in zip(acc, theta(j))]
        forms.append([sympy.cancel(a) for a in acc])
    return coords, forms


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_cartan_form_matches_series_reversion(k):
    jc, forms = cartan_form_chart(1, k, ["x"])
    coords, oracle = _sympy_cartan_form(k)
    assert [str(s) for s in coords] == list(jc.chart.variables)
    for m, want in enumerate(oracle):
        got = [to_sympy(c) for c in forms[(0, (m,))].one_form_coeffs()]
        assert all(sympy.cancel(a - b) == 0 for a, b in zip(got, want))
