from __future__ import annotations

from fractions import Fraction
from math import factorial

import pytest
import sympy
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cartankit.chartcalc import RatMap, VField, pullback
from cartankit.jets import (
    JetChart,
    JetError,
    JetPoint,
    JetSection,
    add_index,
    cartan_form_chart,
    holonomic_defect,
    jet_compose,
    jet_inverse,
    jet_of_map,
    multi_indices,
    spencer_D,
    unit_index,
)
from cartankit.ratfield import Chart, EvalError

from conftest import polynomials, small_fracs, to_sympy

CHARTS = {1: Chart.of(["x"]), 2: Chart.of(["x", "y"])}


def _det(M):
    if len(M) == 1:
        return M[0][0]
    return M[0][0] * M[1][1] - M[0][1] * M[1][0]


@st.composite
def dims(draw):
    return draw(st.integers(1, 2)), draw(st.integers(1, 3))


@st.composite
def jets(draw, n: int, k: int, source) -> JetPoint:
    table = {}
    for alpha in multi_indices(n, k):
        for i in range(n):
            table[(i, alpha)] = draw(small_fracs)
    j = JetPoint(n, k, tuple(source), table)
    assume(_det(j.jacobian()) != 0)
    return j


@st.composite
def composable_triples(draw):
    n, k = draw(dims())
    src = [draw(small_fracs) for _ in range(n)]
    f = draw(jets(n, k, src))
    g = draw(jets(n, k, f.target))
    h = draw(jets(n, k, g.target))
    return f, g, h


# -- groupoid axioms ------------------------------------------------------------


@settings(max_examples=200)
@given(composable_triples())
def test_jet_groupoid_axioms(triple):
    f, g, h = triple
    assert jet_compose(h, jet_compose(g, f)) == jet_compose(jet_compose(h, g), f)
    assert jet_compose(JetPoint.identity(f.target, f.k), f) == f
    assert jet_compose(f, JetPoint.identity(f.source, f.k)) == f
    inv = jet_inverse(f)
    assert inv.source == f.target and inv.target == f.source
    assert jet_compose(inv, f) == JetPoint.identity(f.source, f.k)
    assert jet_compose(f, inv) == JetPoint.identity(f.target, f.k)


def test_compose_checks_endpoints():
    a = JetPoint.identity((Fraction(0),), 1)
    b = JetPoint.identity((Fraction(1),), 1)
    with pytest.raises(JetError):
        jet_compose(a, b)


def test_singular_jet_has_no_inverse():
    j = JetPoint.from_flat(1, 1, [0], [0, 0])
    with pytest.raises(JetError):
        jet_inverse(j)


# -- jets of maps ---------------------------------------------------------------


def test_jet_of_map_example():
    X = CHARTS[1]
    F = RatMap.parse(X, X, ["2*x + x^2"])
    j = jet_of_map(F, [1], 3)
    assert [j[(0, (d,))] for d in range(4)] == [3, 4, 2, 0]


@st.composite
def rational_maps(draw, n: int) -> RatMap:
    ch = CHARTS[n]
    comps = []
    for _ in range(n):
        num = draw(polynomials(ch, max_terms=3, max_deg=2))
        den = draw(polynomials(ch, max_terms=2, max_deg=1).filter(bool))
        comps.append(num / den)
    return RatMap(ch, ch, tuple(comps))


@st.composite
def map_pairs(draw):
    n, k = draw(dims())
    x0 = [draw(small_fracs) for _ in range(n)]
    return n, k, x0, draw(rational_maps(n)), draw(rational_maps(n))


@settings(max_examples=100)
@given(map_pairs())
def test_jet_of_map_is_functorial(data):
    n, k, x0, F, G = data
    try:
        jf = jet_of_map(F, x0, k)
        jg = jet_of_map(G, list(jf.target), k)
        jgf = jet_of_map(G.compose(F), x0, k)
    except (EvalError, ZeroDivisionError):
        assume(False)
    assert jgf == jet_compose(jg, jf)


@settings(max_examples=30)
@given(map_pairs())
def test_jet_of_map_matches_sympy_derivatives(data):
    n, k, x0, F, _ = data
    try:
        j = jet_of_map(F, x0, k)
    except (EvalError, ZeroDivisionError):
        assume(False)
    syms = [sympy.Symbol(v) for v in F.source.variables]
    at = dict(zip(syms, x0))
    for (i, alpha), value in j.table.items():
        expr = to_sympy(F.components[i])
        for s, a in zip(syms, alpha):
            if a:
                expr = sympy.diff(expr, s, a)
        assert sympy.Rational(value.numerator, value.denominator) == expr.subs(at)


# -- sections and the holonomic defect ----------------------------------------


@settings(max_examples=50)
@given(dims().flatmap(lambda nk: st.tuples(st.just(nk), rational_maps(nk[0]))))
def test_prolongations_are_holonomic_and_perturbations_are_not(data):
    (n, k), F = data
    s = JetSection.prolongation(F, k)
    assert all(v.is_zero() for v in holonomic_defect(s).values())
    base = s.base
    for key in s.components:
        bump = base.var(base.variables[0]) if sum(key[1]) == 0 else base.one()
        moved = dict(s.components)
        moved[key] = moved[key] + bump
        perturbed = JetSection(base, n, k, moved)
        assert any(not v.is_zero() for v in holonomic_defect(perturbed).values())


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_cartan_form_vanishes_on_unit_section(n, k):
    jc, forms = cartan_form_chart(n, k)
    unit = jc.unit_section()
    assert len(forms) == len(jc.frame_keys())
    for form in forms.values():
        assert pullback(unit, form).is_zero()


def test_cartan_form_first_order_one_dimensional():
    jc, forms = cartan_form_chart(1, 1, ["x"])
    (form,) = forms.values()
    # du − u_x dx pushed to the identity by right translation
    assert str(form.coeff((jc.chart.index("u1_0"),))) == "1"
    assert form.coeff((jc.chart.index("x"),)) == -jc.u(0, (1,))


def test_jet_chart_names_and_sizes():
    jc = JetChart(2, 2, ["x", "y"])
    assert jc.chart.variables[:4] == ("x", "y", "u1_00", "u2_00")
    assert len(jc.fiber_keys) == 2 * 6
    assert len(jc.frame_keys()) == 2 * 3


# -- the Spencer operator ---------------------------------------------------------


@st.composite
def sections(draw, n: int, k: int) -> JetSection:
    base = CHARTS[n]
    values = {}
    for alpha in multi_indices(n, k):
        for i in range(n):
            values[(i, alpha)] = draw(polynomials(base, max_terms=2, max_deg=2))
    return JetSection.from_values(base, k, values)


@st.composite
def spencer_data(draw):
    n, k = draw(dims())
    base = CHARTS[n]
    s = draw(sections(n, k))
    t = draw(sections(n, k))
    X = VField(base, [draw(polynomials(base, max_terms=2)) for _ in range(n)])
    Y = VField(base, [draw(polynomials(base, max_terms=2)) for _ in range(n)])
    f = draw(polynomials(base, max_terms=2))
    return s, t, X, Y, f


def _scale(s: JetSection, f) -> JetSection:
    return JetSection(s.base, s.n, s.k, {key: f * v for key, v in s.components.items()})


def _add(s: JetSection, t: JetSection) -> JetSection:
    return JetSection(s.base, s.n, s.k, {key: v + t[key] for key, v in s.components.items()})


def _truncate(s: JetSection) -> JetSection:
    keep = {key: v for key, v in s.components.items() if sum(key[1]) <= s.k - 1}
    return JetSection(s.base, s.n, s.k - 1, keep)


@given(spencer_data())
def test_spencer_operator_is_connection_like(data):
    s, t, X, Y, f = data
    D = spencer_D
    # additive in the section and in the direction
    assert D(_add(s, t), X) == _add(D(s, X), D(t, X))
    assert D(s, X + Y) == _add(D(s, X), D(s, Y))
    # tensorial in the direction
    assert D(s, X * f) == _scale(D(s, X), f)
    # Leibniz rule in the section
    assert D(_scale(s, f), X) == _add(_scale(D(s, X), f), _scale(_truncate(s), X.apply(f)))


@settings(max_examples=30)
@given(dims().flatmap(lambda nk: rational_maps(nk[0]).map(lambda F: (nk[1], F))))
def test_spencer_operator_kills_prolongations(data):
    k, F = data
    s = JetSection.prolongation(F, k)
    for a in range(F.source.dim):
        assert all(v.is_zero() for v in spencer_D(s, VField.partial(F.source, F.source.variables[a])).components.values())


def test_multi_index_helpers():
    assert multi_indices(2, 1) == ((0, 0), (1, 0), (0, 1))
    assert add_index((1, 0), unit_index(2, 1)) == (1, 1)
    assert len(multi_indices(2, 3)) == factorial(5) // (factorial(2) * factorial(3))
