from __future__ import annotations

import os
from fractions import Fraction

import sympy
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from cartankit.ratfield import Chart, RatFn

settings.register_profile(
    "default",
    max_examples=int(os.environ.get("CARTANKIT_EXAMPLES", "60")),
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

XYZ = Chart.of(["x", "y", "z"])
XY = Chart.of(["x", "y"])


def to_sympy(f: RatFn) -> sympy.Expr:
    names = {v: sympy.Symbol(v) for v in f.chart.variables}
    return sympy.sympify(str(f).replace("^", "**"), locals=names)


def sym_equal(f: RatFn, expr: sympy.Expr) -> bool:
    return sympy.cancel(to_sympy(f) - expr) == 0


small_ints = st.integers(min_value=-4, max_value=4)
small_fracs = st.builds(Fraction, st.integers(-6, 6), st.integers(1, 4))


@st.composite
def polynomials(draw, chart: Chart = XY, max_terms: int = 4, max_deg: int = 2) -> RatFn:
    acc = chart.zero()
    for _ in range(draw(st.integers(0, max_terms))):
        c = draw(small_fracs)
        term = chart.const(c)
        for v in chart.variables:
            term = term * chart.var(v) ** draw(st.integers(0, max_deg))
        acc = acc + term
    return acc


@st.composite
def ratfns(draw, chart: Chart = XY) -> RatFn:
    num = draw(polynomials(chart))
    den = draw(polynomials(chart).filter(bool))
    return num / den


@st.composite
def nonzero_ratfns(draw, chart: Chart = XY) -> RatFn:
    return draw(ratfns(chart).filter(bool))


@st.composite
def fraction_matrices(draw, max_size: int = 5):
    rows = draw(st.integers(1, max_size))
    cols = draw(st.integers(1, max_size))
    entry = st.one_of(st.just(Fraction(0)), small_fracs)
    return [[draw(entry) for _ in range(cols)] for _ in range(rows)]
