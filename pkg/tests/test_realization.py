from __future__ import annotations

from itertools import combinations

import pytest
import sympy
from hypothesis import given, settings

from cartankit.chartcalc import DForm, RatMap, VField, lie_bracket, pullback, pushforward
from cartankit.jets import prolong_element
from cartankit.project import load_project
from cartankit.ratfield import Chart
from cartankit.realization import (
    RealizationData,
    check_realization,
    check_symmetry,
    check_systatic_invariance,
    dual_frame,
    pfaffian_lift,
    restrict_map,
    restrict_transversal,
    solve_pi,
    structure_residual,
    systatic_distribution,
)

from conftest import polynomials, to_sympy


def realization(name: str) -> RealizationData:
    R = load_project(name).realization
    if R.pi is not None:
        return R
    if R.algebroid.p == 0:
        return R.with_pi(())
    return R.with_pi(solve_pi(R).particular)


@pytest.fixture(scope="module")
def ex2():
    return realization("example2")


@pytest.fixture(scope="module")
def ex2_restricted(ex2):
    return restrict_transversal(ex2, load_project("example2").restriction())


# -- independent structure-equation oracle -------------------------------------


def _sym_coeffs(w: DForm) -> list[sympy.Expr]:
    return [to_sympy(c) for c in w.one_form_coeffs()]


def _sym_d(w, syms):
    n = len(syms)
    return {(a, b): sympy.diff(w[b], syms[a]) - sympy.diff(w[a], syms[b]) for a, b in combinations(range(n), 2)}


def _sym_wedge(u, v, n):
    return {(a, b): u[a] * v[b] - u[b] * v[a] for a, b in combinations(range(n), 2)}


def sympy_structure_residuals(R: RealizationData) -> list[dict]:
    A = R.algebroid
    F = A.algebroid
    syms = [sympy.Symbol(v) for v in R.chart.variables]
    n = len(syms)
    om = [_sym_coeffs(w) for w in R.omega]
    pi = [_sym_coeffs(w) for w in (R.pi or ())]
    out = []
    for i in range(A.rank):
        res = _sym_d(om[i], syms)
        for j, k in combinations(range(A.rank), 2):
            c = F.c(i, j, k)
            if c:
                cw = to_sympy(R.pull(c))
                for key, val in _sym_wedge(om[j], om[k], n).items():
                    res[key] += cw * val
        for lam in range(A.p):
            for j in range(A.rank):
                a = A.a(i, lam, j)
                if a:
                    aw = to_sympy(R.pull(a))
                    for key, val in _sym_wedge(pi[lam], om[j], n).items():
                        res[key] -= aw * val
        out.append({key: sympy.cancel(v) for key, v in res.items()})
    return out


@pytest.mark.parametrize("name", ["example1", "example2", "halfplane", "liegroup-sl2"])
def test_structure_equations_match_sympy(name):
    R = realization(name)
    oracle = sympy_structure_residuals(R)
    assert check_realization(R).ok
    for i, res in enumerate(oracle):
        assert all(v == 0 for v in res.values())
        assert structure_residual(R, i).is_zero()


@pytest.mark.parametrize("name", ["example1_broken", "example2_broken", "halfplane_broken"])
def test_broken_realizations_fail_where_sympy_says(name):
    R = load_project(name).realization
    fam = solve_pi(R) if R.pi is None and R.algebroid.p else None
    if fam is not None and not fam.sat:
        assert fam.certificate is not None
        return
    R = R.with_pi(fam.particular) if fam is not None else (R if R.pi is not None else R.with_pi(()))
    report = check_realization(R)
    oracle = sympy_structure_residuals(R)
    expected = [i for i, res in enumerate(oracle) if any(v != 0 for v in res.values())]
    assert not report.ok
    assert report.failing() == expected


# -- Example 2 --------------------------------------------------------------------


def test_example2_forms(ex2):
    P = ex2.chart
    assert [str(w) for w in ex2.omega[:2]] == ["(y/Y)*dx", "(u)*dx + (Y/y)*dy"]
    assert ex2.omega[0] == DForm.d(P, "x") * P.parse("y/Y")


def test_restriction_forms(ex2_restricted):
    R = ex2_restricted
    P = R.chart
    assert P.variables == ("x", "y", "u")
    assert R.omega[0] == DForm.d(P, "x") * P.var("y")
    assert R.omega[1] == DForm.d(P, "x") * P.var("u") + DForm.d(P, "y") * P.parse("1/y")
    assert check_realization(R).ok


def test_restricted_pi_family(ex2_restricted):
    R = ex2_restricted
    P = R.chart
    fam = solve_pi(R)
    assert fam.sat and fam.dim == 1
    target = DForm.d(P, "u") * P.parse("1/y")
    # congruent to (1/y) du modulo dx
    diff = fam.particular[0] - target
    assert diff.coeff((P.index("y"),)).is_zero() and diff.coeff((P.index("u"),)).is_zero()


@settings(max_examples=20)
@given(polynomials(Chart.of(["x", "y", "u"], ["y"]), max_terms=2))
def test_every_pi_family_member_realizes(f):
    R = restrict_transversal(realization("example2"), {"X": 0, "Y": 1})
    fam = solve_pi(R)
    member = fam.member([f])
    assert check_realization(R.with_pi(member)).ok


def test_example2_broken_pi_unsat():
    R = load_project("example2_broken").realization
    fam = solve_pi(R)
    assert not fam.sat
    assert fam.certificate is not None


def test_dual_frame_inverts_coframe(ex2_restricted):
    R = ex2_restricted
    df = dual_frame(R)
    fields = list(df.frame) + list(df.symbol_fields)
    forms = list(R.omega) + list(R.pi)
    for a, w in enumerate(forms):
        for b, X in enumerate(fields):
            assert w(X) == (R.chart.one() if a == b else R.chart.zero())


def test_systatic_action_on_restricted_example2(ex2_restricted):
    R = ex2_restricted
    P = R.chart
    y = P.var("y")
    sd = systatic_distribution(R)
    assert sd.systatic.to_dict()["S0"] == ["e2"]
    assert sd.systatic.to_dict()["S"] == ["e2", "t"]
    assert sd.fields == (VField(P, [0, y, 0]), VField(P, [0, 0, y]))
    assert sd.involutive
    assert sd.annihilator == (DForm.d(P, "x"),)
    assert sd.pi_independent is True
    # bracket stays in the span: [y∂y, y∂u] = y∂u
    assert lie_bracket(*sd.fields) == sd.fields[1]


def test_halfplane_action_in_original_chart():
    project = load_project("halfplane")
    R = realization("halfplane")
    orig, to_orig, from_orig = project.chart_change()
    sd = systatic_distribution(R)
    got = [pushforward(to_orig, from_orig, X) for X in sd.fields]
    p, y = orig.var("p"), orig.var("y")
    assert got == [
        VField(orig, [1, 0, 0]),
        VField(orig, [-p, 1, 0]),
        VField(orig, [-1, 0, 1 / y]),
    ]


# -- symmetries ---------------------------------------------------------------------


def test_prolonged_generator_is_symmetry(ex2):
    project = load_project("example2")
    emb = project.jet_groupoid().embedding
    B = RatMap.parse(ex2.algebroid.base, ex2.algebroid.base, ["2*x + x^2", "y/(2 + 2*x)"])
    m = prolong_element(B, None, 1, emb)
    assert check_symmetry(m, ex2).ok
    assert check_systatic_invariance(m, ex2).ok
    assignments = project.restriction()
    Rr = restrict_transversal(ex2, assignments)
    mr = restrict_map(m, ex2, assignments)
    assert check_symmetry(mr, Rr).ok
    assert check_systatic_invariance(mr, Rr).ok


def test_non_symmetry_detected(ex2_restricted):
    R = ex2_restricted
    P = R.chart
    scale = RatMap.parse(P, P, ["x", "2*y", "u"])
    assert not check_symmetry(scale, R).ok


# -- Pfaffian lift ------------------------------------------------------------------


def test_pfaffian_lift_sl2():
    L = pfaffian_lift(realization("liegroup-sl2"))
    assert L.ok
    G = L.chart
    R = realization("liegroup-sl2")
    # θ = s*Ω − t*Ω on the doubled chart
    for i, w in enumerate(R.omega):
        src = RatMap(G, R.chart, tuple(G.var(v + "_s") for v in R.chart.variables))
        tgt = RatMap(G, R.chart, tuple(G.var(v + "_t") for v in R.chart.variables))
        assert L.theta[i] == pullback(src, w) - pullback(tgt, w)


def test_pfaffian_lift_restricted_example2(ex2_restricted):
    assert pfaffian_lift(ex2_restricted).ok
