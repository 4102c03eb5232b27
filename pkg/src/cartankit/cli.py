"""Command-line front end: verify project files and render reports.

Exit codes: 0 every check passes, 1 a check fails with a counterexample,
2 the input is malformed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Any, Callable, Sequence

from .algebroid import AlmostCartanAlgebroid, cartan_data_solve, check_almost_lie, jacobi_residuals
from .chartcalc import DForm, RatMap, VField, pullback, pushforward
from .jets import JetSection, cartan_form_chart, coordinate_name, holonomic_defect, prolong_element
from .project import Project, ProjectError, algebroid_to_spec, canonicalize, chart_to_spec, form_to_spec, load_project
from .ratfield import RatFieldError
from .realization import (
    RealizationData,
    check_realization,
    check_symmetry,
    check_systatic_invariance,
    pfaffian_lift,
    restrict_map,
    restrict_transversal,
    solve_pi,
    systatic_distribution,
)
from .sft import run_pipeline
from .tableau import SpencerComplex, involutivity_verdict

VERBOSITY_ENV = "CARTANKIT_VERBOSITY"
DEFAULT_BOUNDS = (3, 3)


@dataclass
class Report:
    """Outcome of one command: verdict, structured data and a human-readable walkthrough."""

    command: str
    source: str
    verdict: str
    data: dict[str, Any] = field(default_factory=dict)
    counterexamples: list[str] = field(default_factory=list)
    sections: list[tuple[str, list[str]]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict in ("PASS", "SAT")

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def section(self, title: str, lines: Sequence[str]) -> None:
        self.sections.append((title, list(lines)))

    def to_dict(self) -> dict[str, Any]:
        return {
            "command": self.command,
            "source": self.source,
            "verdict": self.verdict,
            "counterexamples": list(self.counterexamples),
            "data": self.data,
        }


def explain(report: Report, verbosity: int = 1) -> str:
    """Render a report: verdict line, then each labelled block, then counterexamples."""
    out = [f"{report.command} {report.source}: {report.verdict}"]
    if verbosity >= 1:
        for title, lines in report.sections:
            out.append(f"[{title}]")
            out.extend(f"  {line}" for line in lines)
    if report.counterexamples:
        out.append("[counterexamples]")
        out.extend(f"  {c}" for c in report.counterexamples)
    if verbosity >= 2:
        out.append("[data]")
        out.append(json.dumps(report.data, indent=2, ensure_ascii=False))
    return "\n".join(out)


# ---------------------------------------------------------------------------
# Rendering helpers


def _form_label(i: int) -> str:
    return f"omega{i + 1}"


def _pi_label(A: AlmostCartanAlgebroid, lam: int) -> str:
    return f"pi[{A.symbol_names[lam]}]"


def structure_equation_lines(A: AlmostCartanAlgebroid) -> list[str]:
    """dω_i = −Σ c ω_j∧ω_k + Σ a π∧ω with the table entries substituted."""
    F = A.algebroid
    lines = []
    for i in range(A.rank):
        terms = []
        for j, k in combinations(range(A.rank), 2):
            c = F.c(i, j, k)
            if c:
                terms.append(f"({-c}) {_form_label(j)}^{_form_label(k)}")
        for lam in range(A.p):
            for j in range(A.rank):
                a = A.a(i, lam, j)
                if a:
                    terms.append(f"({a}) {_pi_label(A, lam)}^{_form_label(j)}")
        lines.append(f"d{_form_label(i)} = " + (" + ".join(terms) if terms else "0"))
    return lines


def algebroid_lines(A: AlmostCartanAlgebroid) -> list[str]:
    F = A.algebroid
    lines = [f"base ({', '.join(F.base.variables)}), rank {F.rank}, frame {', '.join(F.names)}"]
    for n, X in zip(F.names, F.anchor):
        if not X.is_zero():
            lines.append(f"anchor({n}) = {X}")
    for j, k in combinations(range(F.rank), 2):
        v = F.frame_bracket(j, k)
        terms = [f"({x})*{F.names[i]}" for i, x in enumerate(v) if x]
        if terms:
            lines.append(f"[{F.names[j]},{F.names[k]}] = " + " + ".join(terms))
    for lam in range(A.p):
        for j in range(F.rank):
            terms = [f"({A.symbol[lam][i][j]})*{F.names[i]}" for i in range(F.rank) if A.symbol[lam][i][j]]
            if terms:
                lines.append(f"{A.symbol_names[lam]}({F.names[j]}) = " + " + ".join(terms))
    return lines


def _forms(ws: Sequence[DForm]) -> list[str]:
    return [str(w) for w in ws]


# ---------------------------------------------------------------------------
# Commands


@dataclass
class Options:
    assignments: dict[str, Fraction] = field(default_factory=dict)
    bounds: tuple[int, int] | None = None


def _realization_with_pi(project: Project, report: Report) -> RealizationData | None:
    """The project's realization, solving for π when it is not given."""
    project.require("realization")
    R = project.realization
    assert R is not None
    if R.pi is not None or R.algebroid.p == 0:
        return R if R.pi is not None else R.with_pi(())
    fam = solve_pi(R)
    if not fam.sat:
        report.verdict = "FAIL"
        report.counterexamples.append(f"pi: no solution, {fam.certificate}")
        return None
    report.section("pi (solved)", _forms(fam.particular or ()))
    return R.with_pi(fam.particular or ())


def cmd_check_data(project: Project, opts: Options) -> Report:
    project.require("algebroid")
    A = project.algebroid
    assert A is not None
    cert = cartan_data_solve(A)
    report = Report("check-data", project.name, "SAT" if cert.sat else "UNSAT")
    report.data["certificate"] = cert.to_dict()
    almost = check_almost_lie(A.algebroid)
    report.data["almost_lie"] = almost.to_dict()
    if A.p == 0:
        jac = jacobi_residuals(A.algebroid)
        report.data["jacobi"] = jac.to_dict()
        report.data["c2_equals_jacobi"] = jac.ok == cert.c2.sat
    report.section("algebroid", algebroid_lines(A))
    report.section("structure-equations", structure_equation_lines(A))
    for cond, unknown in ((cert.c1, "epsilon"), (cert.c2, "nu"), (cert.c3, "xi")):
        lines = [f"{cond.unknowns} unknowns, {cond.equations} equations: {'SAT' if cond.sat else 'UNSAT'}"]
        for key, v in sorted(cond.solution.items()):
            if v:
                lines.append(f"{','.join(str(k + 1) for k in key)}: {v}")
        if cond.sat:
            lines.append(f"back-substituted residuals zero: {cond.residuals_zero}")
        else:
            lines.append(f"inconsistent row: {cond.inconsistent}")
            report.counterexamples.append(f"{cond.name}: {cond.inconsistent}")
        report.section(f"{cond.name}: {unknown}", lines)
    for r in cert.c0.failures:
        report.counterexamples.append(f"C0 {r.label}: {r.value}")
    if A.p == 0:
        report.section("jacobi", [f"sigma = 0, so C2 is the Jacobi identity: {'holds' if report.data['jacobi']['ok'] else 'fails'}"])
    return report


def cmd_check_realization(project: Project, opts: Options) -> Report:
    report = Report("check-realization", project.name, "PASS")
    R = _realization_with_pi(project, report)
    if R is None:
        return report
    if opts.assignments:
        R = restrict_transversal(R, opts.assignments)
    res = check_realization(R)
    report.data = res.to_dict()
    report.section("structure-equations", structure_equation_lines(R.algebroid))
    report.section("residuals", [f"{_form_label(i)}: {r}" for i, r in res.residuals.items()])
    report.section("coframe", [f"determinant {res.coframe_witness}" if res.coframe_ok else "omega and pi do not form a coframe"])
    if not res.ok:
        report.verdict = "FAIL"
        for i in res.failing():
            report.counterexamples.append(f"{_form_label(i)}: residual {res.residuals[i]}")
        for r in res.anchored.failures:
            report.counterexamples.append(f"{r.label}: {r.value}")
        if not res.coframe_ok:
            report.counterexamples.append(f"coframe: determinant {res.coframe_witness}")
    return report


def cmd_solve_pi(project: Project, opts: Options) -> Report:
    project.require("realization")
    R = project.realization
    assert R is not None
    if opts.assignments:
        R = restrict_transversal(R, opts.assignments)
    fam = solve_pi(R)
    report = Report("solve-pi", project.name, "SAT" if fam.sat else "UNSAT", fam.to_dict())
    if fam.sat:
        report.section("particular", _forms(fam.particular or ()))
        report.section("free directions", [", ".join(_forms(d)) for d in fam.directions] or ["none"])
        report.section("coframe", [f"completes the coframe: {fam.coframe_ok}"])
    else:
        report.counterexamples.append(f"inconsistent row: {fam.certificate}")
    return report


def _chart_change_lines(project: Project, fields: Sequence[tuple[str, VField]]) -> tuple[list[str], dict[str, str]]:
    change = project.chart_change()
    if change is None:
        return [], {}
    orig, to_orig, from_orig = change
    out = {}
    for name, X in fields:
        out[name] = str(pushforward(to_orig, from_orig, X))
    return [f"{n} -> {v}" for n, v in out.items()], out


def cmd_systatic(project: Project, opts: Options) -> Report:
    report = Report("systatic", project.name, "PASS")
    R = _realization_with_pi(project, report)
    if R is None:
        return report
    if opts.assignments:
        R = restrict_transversal(R, opts.assignments)
    sd = systatic_distribution(R)
    S = sd.systatic
    names = S.to_dict()["S"]
    report.data = {"systatic": S.to_dict(), "distribution": sd.to_dict()}
    report.section("partial systatic space", S.to_dict()["S0"] or ["0"])
    report.section("systatic space", names)
    named = list(zip(names, sd.fields))
    report.section("action on " + ", ".join(R.chart.variables), [f"{n} -> {X}" for n, X in named])
    lines, original = _chart_change_lines(project, named)
    if lines and not opts.assignments:
        report.data["action_in_original_chart"] = original
        report.section("action in original chart", lines)
    report.section(
        "distribution",
        [
            f"rank {sd.rank}, involutive: {sd.involutive}",
            "annihilator: " + (", ".join(_forms(sd.annihilator)) or "0"),
            "systatic system: " + (", ".join(_forms(sd.systatic_system)) or "0"),
            f"annihilator equals systatic system: {sd.matches_systatic_system}",
            f"independent of pi: {sd.pi_independent}",
        ],
    )
    if not sd.ok:
        report.verdict = "FAIL"
        if not sd.involutive:
            report.counterexamples.append("distribution is not involutive")
        if not sd.matches_systatic_system:
            report.counterexamples.append("annihilator differs from the systatic system")
        if sd.pi_independent is False:
            report.counterexamples.append("action fields depend on the choice of pi")
    if not S.is_lie:
        report.verdict = "FAIL"
        report.counterexamples.extend(f"{r.label}: {r.value}" for r in S.jacobi.failures + S.lemma.failures)
    return report


def cmd_restrict(project: Project, opts: Options) -> Report:
    report = Report("restrict", project.name, "PASS")
    R = _realization_with_pi(project, report)
    if R is None:
        return report
    assignments = opts.assignments or project.restriction()
    if not assignments:
        raise ProjectError("$.realization.restrict", "no assignments: pass --set VAR=RAT or add a restrict section")
    Rr = restrict_transversal(R, assignments)
    res = check_realization(Rr)
    spec = algebroid_to_spec(Rr.algebroid)
    report.data = {
        "assignments": {k: str(v) for k, v in assignments.items()},
        "chart": chart_to_spec(Rr.chart),
        **spec,
        "omega": [form_to_spec(w) for w in Rr.omega],
        "pi": [form_to_spec(w) for w in Rr.pi or ()],
        "check": res.to_dict(),
    }
    report.section("assignments", [f"{k} = {v}" for k, v in assignments.items()])
    report.section("algebroid", algebroid_lines(Rr.algebroid))
    report.section("omega", [f"{_form_label(i)} = {w}" for i, w in enumerate(Rr.omega)])
    if Rr.pi:
        report.section("pi", [f"{_pi_label(Rr.algebroid, lam)} = {w}" for lam, w in enumerate(Rr.pi)])
    report.section("structure-equations", structure_equation_lines(Rr.algebroid))
    if not res.ok:
        report.verdict = "FAIL"
        report.counterexamples.extend(f"{_form_label(i)}: residual {res.residuals[i]}" for i in res.failing())
    return report


def cmd_tableau(project: Project, opts: Options) -> Report:
    T = project.tableau()
    l_max, m_max = opts.bounds or project.bounds() or DEFAULT_BOUNDS
    verdict = involutivity_verdict(T, m_max, l_max)
    cx = SpencerComplex(T)
    dd_zero = True
    for l in range(l_max + 1):
        for m in range(1, min(m_max, T.dim_e)):
            outer = cx.delta(l, m + 1)
            inner = cx.delta(l + 1, m)
            for row in outer:
                for j in range(len(inner[0]) if inner else 0):
                    acc = sum((row[k] * inner[k][j] for k in range(len(inner))), T.chart.zero())
                    if acc:
                        dd_zero = False
    rep = verdict.report
    report = Report("tableau", project.name, "PASS" if verdict.verdict != "FAIL" and dd_zero else "FAIL")
    report.data = {"verdict": verdict.verdict, "bounds": [l_max, m_max], "delta_squared_zero": dd_zero, **rep.to_dict()}
    report.section("tableau", [f"dim E = {T.dim_e}, dim F = {T.dim_f}, dim = {T.dim}"])
    report.section("prolongations", [f"dim g^({k}) = {v}" for k, v in rep.prolongation_dims.items()])
    header = "l\\m " + " ".join(f"{m:>3}" for m in range(1, m_max + 1))
    rows = [header]
    for l in range(l_max + 1):
        cells = [rep.cohomology_dims.get((l, m)) for m in range(1, m_max + 1)]
        rows.append(f"{l:>3} " + " ".join(f"{c:>3}" if c is not None else "  -" for c in cells))
    report.section("H^{l,m}", rows)
    report.section("verdict", [verdict.describe(), f"delta o delta = 0: {dd_zero}"])
    for l, m in verdict.failures if verdict.verdict == "FAIL" else ():
        report.counterexamples.append(f"H^({l},{m}) has dimension {rep.cohomology_dims[(l, m)]}")
    if not dd_zero:
        report.counterexamples.append("delta o delta is not zero")
    return report


def cmd_jets(project: Project, opts: Options) -> Report:
    report = Report("jets", project.name, "PASS")
    G = None
    if "jets" in project.raw:
        js = project.raw["jets"]
        n, k = js["n"], js["k"]
        source = js.get("source") or [f"x{a + 1}" for a in range(n)]
    else:
        G = project.jet_groupoid()
        n, k, source = G.jet_chart.n, G.jet_chart.k, list(G.jet_chart.source_names)
    jc, forms = cartan_form_chart(n, k, source)
    report.data["jet_chart"] = list(jc.chart.variables)
    report.section("jet chart", [f"J^{k}R^{n}: " + ", ".join(jc.chart.variables)])
    unit = jc.unit_section()
    unit_ok = True
    for (i, alpha), w in forms.items():
        pulled = pullback(unit, w)
        if not pulled.is_zero():
            unit_ok = False
            report.counterexamples.append(f"unit pullback of {coordinate_name(i, alpha)}: {pulled}")
    report.data["unit_pullback_zero"] = unit_ok
    defect = holonomic_defect(JetSection.prolongation(RatMap.identity(unit.source), k))
    holo_ok = all(not v for v in defect.values())
    report.data["identity_prolongation_holonomic"] = holo_ok
    if not holo_ok:
        report.counterexamples.append("prolonged identity has a nonzero holonomic defect")
    lines = [f"unit section pulls the Cartan form back to zero: {unit_ok}", f"prolonged identity is holonomic: {holo_ok}"]
    if G is not None:
        law = G.groupoid.check_unit_law()
        report.data["unit_law"] = law
        lines.append(f"unit law on the embedded groupoid: {law}")
        if not law:
            report.counterexamples.append("unit law fails on the embedded groupoid")
        report.data["cartan_form"] = {nm: str(w) for nm, w in zip(G.form_names, G.omega)}
        report.section("cartan form", [f"{nm}: {w}" for nm, w in zip(G.form_names, G.omega)])
    else:
        report.data["cartan_form"] = {coordinate_name(i, alpha): str(w) for (i, alpha), w in forms.items()}
        report.section("cartan form", [f"{nm}: {w}" for nm, w in report.data["cartan_form"].items()])
    report.section("checks", lines)
    if report.counterexamples:
        report.verdict = "FAIL"
    return report


def _compare_sections(expected: dict[str, Any], got: dict[str, Any], label: str) -> list[str]:
    if expected == got:
        return []
    return [f"{label}: fixture has {json.dumps(expected, sort_keys=True)}, pipeline gives {json.dumps(got, sort_keys=True)}"]


def cmd_sft(project: Project, opts: Options) -> Report:
    project.require("groupoid")
    sec = project.raw["groupoid"]
    if "jets" in sec:
        JG = project.jet_groupoid()
        G, omega, e_names = JG.groupoid, JG.omega, JG.form_names
    else:
        G, omega, e_names = project.presented_groupoid()
    splitting, frame, frame_names = project.groupoid_frames(G.base)
    res = run_pipeline(G, omega, e_names, splitting, frame, frame_names)
    user = res.build.user
    R = res.realization
    fam = res.pi_family
    report = Report("sft", project.name, "PASS")
    pi = fam.particular if fam.sat else None
    check = check_realization(R.with_pi(pi)) if pi is not None else None
    report.data = {
        "cartan_form": {nm: str(w) for nm, w in zip(e_names, omega)},
        "lie_algebroid": algebroid_lines(AlmostCartanAlgebroid.build(res.lie_algebroid.algebroid, {}, 0)),
        "spencer": res.spencer.to_dict(),
        **algebroid_to_spec(user),
        "omega": [form_to_spec(w) for w in R.omega],
        "pi_family": fam.to_dict(),
        "check_realization": check.to_dict() if check else None,
        "axioms": res.axioms.to_dict(),
    }
    report.section("cartan form", [f"{nm}: {w}" for nm, w in zip(e_names, omega)])
    report.section("lie algebroid", report.data["lie_algebroid"])
    report.section("spencer operator", [f"D({k}) = {v}" for k, v in res.spencer.to_dict().items()])
    report.section("cartan algebroid", algebroid_lines(user))
    report.section("structure-equations", structure_equation_lines(user))
    report.section("realization", [f"{_form_label(i)} = {w}" for i, w in enumerate(R.omega)])
    report.section("pi family", [f"particular: {', '.join(_forms(pi or ()))}", f"free directions: {fam.dim}"])
    report.section("axioms", [f"{k}: {v}" for k, v in res.axioms.to_dict().items() if k not in ("details", "rank_witnesses")])
    if not res.axioms.ok:
        report.counterexamples.append(f"groupoid axioms fail: {json.dumps(res.axioms.to_dict(), sort_keys=True)}")
    if not fam.sat:
        report.counterexamples.append(f"pi: {fam.certificate}")
    elif check is not None and not check.ok:
        report.counterexamples.extend(f"{_form_label(i)}: residual {check.residuals[i]}" for i in check.failing())
    if project.algebroid is not None:
        mine = algebroid_to_spec(project.algebroid)
        theirs = algebroid_to_spec(user)
        for key in ("algebroid", "sigma"):
            a, b = mine.get(key), theirs.get(key)
            if key == "algebroid" and a and b:
                a = {k: v for k, v in a.items() if k not in ("names", "base")}
                b = {k: v for k, v in b.items() if k not in ("names", "base")}
            if key == "sigma" and a and b:
                a, b = a["action"], b["action"]
            report.counterexamples.extend(_compare_sections(a or {}, b or {}, key))
    if project.realization is not None:
        mine_w = [form_to_spec(w) for w in project.realization.omega]
        theirs_w = [form_to_spec(w) for w in R.omega]
        for i, (a, b) in enumerate(zip(mine_w, theirs_w)):
            report.counterexamples.extend(_compare_sections(a, b, _form_label(i)))
    if report.counterexamples:
        report.verdict = "FAIL"
    return report


def _symmetry_map(project: Project) -> tuple[RatMap, RatMap | None]:
    sec = project.raw.get("symmetry")
    if sec is None:
        raise ProjectError("$.symmetry", "section required by this command is missing")
    R = project.realization
    assert R is not None
    P = R.chart
    inverse = None
    if "map" in sec:
        try:
            phi = RatMap.parse(P, P, sec["map"])
            if "inverse" in sec:
                inverse = RatMap.parse(P, P, sec["inverse"])
        except RatFieldError as exc:
            raise ProjectError("$.symmetry.map", str(exc)) from None
        return phi, inverse
    if "prolong" not in sec:
        raise ProjectError("$.symmetry", "need 'map' or 'prolong'")
    JG = project.jet_groupoid()
    base = project.algebroid.base if project.algebroid is not None else JG.groupoid.base
    try:
        psi = RatMap.parse(base, base, sec["prolong"])
    except RatFieldError as exc:
        raise ProjectError("$.symmetry.prolong", str(exc)) from None
    phi = prolong_element(psi, None, JG.jet_chart.k, JG.embedding)
    if phi.source.variables != P.variables:
        raise ProjectError("$.symmetry.prolong", "groupoid chart differs from the realization chart")
    return RatMap(P, P, tuple(c.to_chart(P) for c in phi.components)), None


def cmd_symmetry(project: Project, opts: Options) -> Report:
    report = Report("symmetry", project.name, "PASS")
    R = _realization_with_pi(project, report)
    if R is None:
        return report
    phi, inverse = _symmetry_map(project)
    assignments = opts.assignments or project.restriction("symmetry")
    targets = [("total chart", R, phi, inverse)]
    if assignments:
        Rr = restrict_transversal(R, assignments)
        targets.append(("restricted", Rr, restrict_map(phi, R, assignments), None))
    report.data["map"] = [str(c) for c in phi.components]
    for label, RR, m, inv in targets:
        sym = check_symmetry(m, RR, inv)
        inv_rep = check_systatic_invariance(m, RR, inv)
        report.data[label] = {"map": [str(c) for c in m.components], "symmetry": sym.to_dict(), "systatic_invariance": inv_rep.to_dict()}
        report.section(
            f"{label} ({', '.join(RR.chart.variables)})",
            [
                "map: (" + ", ".join(str(c) for c in m.components) + ")",
                f"preserves projection and omega: {sym.ok}",
                f"fixes every systatic field: {inv_rep.ok}",
            ],
        )
        for f in sym.failures + inv_rep.failures:
            report.counterexamples.append(f"{label}: {f}")
    if report.counterexamples:
        report.verdict = "FAIL"
    return report


def cmd_reduce(project: Project, opts: Options) -> Report:
    report = Report("reduce", project.name, "PASS")
    R = _realization_with_pi(project, report)
    if R is None:
        return report
    if opts.assignments:
        R = restrict_transversal(R, opts.assignments)
    lift = pfaffian_lift(R)
    report.data = lift.to_dict()
    report.section("theta", [f"theta{i + 1} = {w}" for i, w in lift.theta.items()])
    report.section("residuals", [f"horizontal: {lift.horizontal.ok}", f"equivariant: {lift.equivariant.ok}", f"flat: {lift.flat.ok}"])
    if not lift.ok:
        report.verdict = "FAIL"
        for r in lift.horizontal.failures + lift.equivariant.failures + lift.flat.failures:
            report.counterexamples.append(f"{r.label}: {r.value}")
    return report


COMMANDS: dict[str, Callable[[Project, Options], Report]] = {
    "check-data": cmd_check_data,
    "check-realization": cmd_check_realization,
    "solve-pi": cmd_solve_pi,
    "systatic": cmd_systatic,
    "restrict": cmd_restrict,
    "tableau": cmd_tableau,
    "jets": cmd_jets,
    "sft": cmd_sft,
    "symmetry": cmd_symmetry,
    "reduce": cmd_reduce,
}


def run(command: str, source: Any, opts: Options | None = None) -> Report:
    """Load a project (path, bundled fixture name or dict) and run one command on it."""
    if command not in COMMANDS:
        raise ProjectError("$", f"unknown command {command!r}")
    project = load_project(source)
    try:
        return COMMANDS[command](project, opts or Options())
    except ProjectError:
        raise
    except RatFieldError as exc:
        raise ProjectError("$", str(exc)) from None


# ---------------------------------------------------------------------------
# Entry point


def _parse_set(items: Sequence[str]) -> dict[str, Fraction]:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ProjectError("--set", f"expected VAR=RAT, got {item!r}")
        try:
            out[name.strip()] = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ProjectError("--set", f"not a rational number: {value!r}") from None
    return out


def _parse_bounds(text: str | None) -> tuple[int, int] | None:
    if text is None:
        return None
    try:
        l, m = (int(x) for x in text.split(","))
    except ValueError:
        raise ProjectError("--bounds", f"expected l,m, got {text!r}") from None
    if l < 1 or m < 1:
        raise ProjectError("--bounds", "bounds must be positive")
    return l, m


def _verbosity() -> int:
    raw = os.environ.get(VERBOSITY_ENV, "1")
    try:
        return max(0, min(2, int(raw)))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cartankit", description="Exact verification of structure equations and realizations.")
    parser.add_argument("command", choices=sorted(COMMANDS) + ["fixtures", "canonical"])
    parser.add_argument("files", nargs="*", help="project files or bundled fixture names")
    parser.add_argument("--set", dest="assignments", action="append", default=[], metavar="VAR=RAT", help="fix a base coordinate")
    parser.add_argument("--bounds", metavar="l,m", help="Spencer cohomology bounds")
    parser.add_argument("--json", action="store_true", help="print the structured report")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "fixtures":
        from .project import fixtures

        print("\n".join(fixtures()))
        return 0
    if not args.files:
        print("error: no input files", file=sys.stderr)
        return 2
    try:
        opts = Options(_parse_set(args.assignments), _parse_bounds(args.bounds))
        if args.command == "canonical":
            for f in args.files:
                print(json.dumps(canonicalize(load_project(f).raw), indent=2, ensure_ascii=False))
            return 0
        reports = [run(args.command, f, opts) for f in args.files]
    except ProjectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        payload = [r.to_dict() for r in reports]
        print(json.dumps(payload[0] if len(payload) == 1 else payload, indent=2, ensure_ascii=False))
    else:
        level = _verbosity()
        print("\n\n".join(explain(r, level) for r in reports))
    return max(r.exit_code for r in reports)


if __name__ == "__main__":
    raise SystemExit(main())
