"""Project files: one JSON document with optional sections, expressions as strings.

Sections: chart, algebroid, sigma, realization, symmetry, groupoid, jets, tableau.
Index keys in bracket and action tables are 1-based strings "(i,j,k)".
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import jsonschema

from .algebroid import AlmostCartanAlgebroid, FramedAlgebroid
from .chartcalc import DForm, RatMap, VField
from .jets import JetChart
from .ratfield import Chart, RatFieldError, RatFn
from .realization import RealizationData
from .sft import JetGroupoid, embedding_from_expressions, groupoid_from_expressions, jet_groupoid, parse_matrix
from .tableau import Tableau


class ProjectError(ValueError):
    """Schema or semantic error in a project file, with a path to the offending field."""

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


_expr = {"type": "string"}
_exprs = {"type": "array", "items": _expr}
_chart = {
    "type": "object",
    "required": ["variables"],
    "additionalProperties": False,
    "properties": {"variables": {"type": "array", "items": {"type": "string"}}, "nonvanishing": _exprs},
}
_sparse = {"type": "object", "patternProperties": {r"^\(\d+,\d+,\d+\)$": _expr}, "additionalProperties": False}
_form = {"type": "object", "patternProperties": {"^d.+$": _expr}, "additionalProperties": False}
_matrix = {"type": "array", "items": {"type": "array", "items": {"type": ["string", "integer"]}}}
_assign = {"type": "object", "additionalProperties": {"type": ["string", "integer"]}}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "checks": {"type": "array", "items": {"type": "string"}},
        "chart": _chart,
        "algebroid": {
            "type": "object",
            "required": ["base", "rank", "anchor"],
            "additionalProperties": False,
            "properties": {
                "base": _chart,
                "rank": {"type": "integer", "minimum": 1},
                "names": {"type": "array", "items": {"type": "string"}},
                "anchor": {"type": "array", "items": {"type": "object", "additionalProperties": _expr}},
                "brackets": _sparse,
            },
        },
        "sigma": {
            "type": "object",
            "required": ["names", "action"],
            "additionalProperties": False,
            "properties": {"names": {"type": "array", "items": {"type": "string"}}, "action": _sparse},
        },
        "realization": {
            "type": "object",
            "required": ["omega"],
            "additionalProperties": False,
            "properties": {
                "omega": {"type": "array", "items": _form},
                "pi": {"type": "array", "items": _form},
                "restrict": _assign,
                "chart_change": {
                    "type": "object",
                    "required": ["chart", "to_original", "from_original"],
                    "additionalProperties": False,
                    "properties": {"chart": _chart, "to_original": _exprs, "from_original": _exprs},
                },
            },
        },
        "symmetry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "map": _exprs,
                "inverse": _exprs,
                "prolong": _exprs,
                "restrict": _assign,
            },
        },
        "groupoid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "jets": {
                    "type": "object",
                    "required": ["n", "k", "source"],
                    "additionalProperties": False,
                    "properties": {
                        "n": {"type": "integer", "minimum": 1},
                        "k": {"type": "integer", "minimum": 1},
                        "source": {"type": "array", "items": {"type": "string"}},
                        "embedding": {"type": "object", "additionalProperties": _expr},
                    },
                },
                "presented": {
                    "type": "object",
                    "required": ["base", "source", "unit", "multiplication", "omega"],
                    "additionalProperties": False,
                    "properties": {
                        "base": _chart,
                        "source": {"type": "array", "items": {"type": "string"}},
                        "unit": _exprs,
                        "multiplication": _exprs,
                        "omega": {"type": "array", "items": _form},
                        "form_names": {"type": "array", "items": {"type": "string"}},
                    },
                },
                "splitting": _matrix,
                "frame": _matrix,
                "frame_names": {"type": "array", "items": {"type": "string"}},
                "restrict": _assign,
            },
        },
        "jets": {
            "type": "object",
            "required": ["n", "k"],
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "k": {"type": "integer", "minimum": 1},
                "source": {"type": "array", "items": {"type": "string"}},
            },
        },
        "tableau": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "full": {"type": "integer", "minimum": 1},
                "dim_e": {"type": "integer", "minimum": 1},
                "dim_f": {"type": "integer", "minimum": 1},
                "matrices": {"type": "array", "items": _matrix},
                "bounds": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
            },
        },
    },
}

_KEY = re.compile(r"^\((\d+),(\d+),(\d+)\)$")


def _path(parts: Sequence[Any]) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in parts)


def _chart_from(section: Mapping[str, Any], path: str) -> Chart:
    try:
        return Chart.of(section["variables"], section.get("nonvanishing", ()))
    except RatFieldError as exc:
        raise ProjectError(path, str(exc)) from None


def _parse(chart: Chart, text: str | int, path: str) -> RatFn:
    try:
        return chart.parse(str(text))
    except RatFieldError as exc:
        raise ProjectError(path, f"{exc} in {text!r}") from None


def _index(key: str, path: str) -> tuple[int, int, int]:
    m = _KEY.match(key)
    if not m:
        raise ProjectError(path, f"bad index key {key!r}")
    vals = tuple(int(g) - 1 for g in m.groups())
    if min(vals) < 0:
        raise ProjectError(path, f"indices are 1-based in {key!r}")
    return vals  # type: ignore[return-value]


def _form_from(chart: Chart, spec: Mapping[str, str], path: str) -> DForm:
    coeffs = [chart.zero() for _ in range(chart.dim)]
    for key, text in spec.items():
        var = key[1:]
        if var not in chart.variables:
            raise ProjectError(f"{path}.{key}", f"unknown variable {var!r}")
        coeffs[chart.index(var)] = _parse(chart, text, f"{path}.{key}")
    return DForm.one_form(chart, coeffs)


def form_to_spec(a: DForm) -> dict[str, str]:
    return {f"d{v}": str(c) for v, c in zip(a.chart.variables, a.one_form_coeffs()) if c}


def _assignments(spec: Mapping[str, Any], path: str) -> dict[str, Fraction]:
    out = {}
    for k, v in spec.items():
        try:
            out[k] = Fraction(str(v))
        except (ValueError, ZeroDivisionError):
            raise ProjectError(f"{path}.{k}", f"not a rational number: {v!r}") from None
    return out


@dataclass
class Project:
    raw: dict[str, Any]
    chart: Chart | None
    algebroid: AlmostCartanAlgebroid | None
    realization: RealizationData | None

    @property
    def name(self) -> str:
        return self.raw.get("name", "project")

    def section(self, key: str) -> dict[str, Any] | None:
        return self.raw.get(key)

    def require(self, *keys: str) -> None:
        for k in keys:
            if k not in self.raw:
                raise ProjectError(f"$.{k}", "section required by this command is missing")

    # -- derived objects ------------------------------------------------------
    def restriction(self, key: str = "realization") -> dict[str, Fraction]:
        sec = self.raw.get(key) or {}
        return _assignments(sec.get("restrict", {}), f"$.{key}.restrict")

    def chart_change(self) -> tuple[Chart, RatMap, RatMap] | None:
        sec = (self.raw.get("realization") or {}).get("chart_change")
        if sec is None or self.chart is None:
            return None
        orig = _chart_from(sec["chart"], "$.realization.chart_change.chart")
        if len(sec["to_original"]) != orig.dim or len(sec["from_original"]) != self.chart.dim:
            raise ProjectError("$.realization.chart_change", "component counts do not match the charts")
        to_orig = RatMap(
            self.chart,
            orig,
            tuple(_parse(self.chart, e, f"$.realization.chart_change.to_original[{i}]") for i, e in enumerate(sec["to_original"])),
        )
        from_orig = RatMap(
            orig,
            self.chart,
            tuple(_parse(orig, e, f"$.realization.chart_change.from_original[{i}]") for i, e in enumerate(sec["from_original"])),
        )
        if not to_orig.compose(from_orig).is_identity():
            raise ProjectError("$.realization.chart_change", "maps are not mutually inverse")
        return orig, to_orig, from_orig

    def jet_groupoid(self) -> JetGroupoid:
        self.require("groupoid")
        sec = self.raw["groupoid"]
        if "jets" not in sec:
            raise ProjectError("$.groupoid.jets", "jet data required")
        js = sec["jets"]
        if self.chart is None:
            raise ProjectError("$.chart", "groupoid needs the total chart")
        jc = JetChart(js["n"], js["k"], js["source"])
        emb_spec = js.get("embedding")
        if emb_spec is None:
            return jet_groupoid(js["n"], js["k"], js["source"])
        for key in emb_spec:
            if key not in jc.chart.variables:
                raise ProjectError(f"$.groupoid.jets.embedding.{key}", "not a jet coordinate")
        try:
            emb = embedding_from_expressions(self.chart, jc, emb_spec)
            return jet_groupoid(js["n"], js["k"], js["source"], emb)
        except RatFieldError as exc:
            raise ProjectError("$.groupoid.jets", str(exc)) from None

    def presented_groupoid(self):
        sec = self.raw["groupoid"]["presented"]
        if self.chart is None:
            raise ProjectError("$.chart", "groupoid needs the total chart")
        base = _chart_from(sec["base"], "$.groupoid.presented.base")
        try:
            G = groupoid_from_expressions(self.chart, base, sec["source"], sec["unit"], sec["multiplication"])
        except RatFieldError as exc:
            raise ProjectError("$.groupoid.presented", str(exc)) from None
        omega = [_form_from(self.chart, f, f"$.groupoid.presented.omega[{i}]") for i, f in enumerate(sec["omega"])]
        names = sec.get("form_names") or [f"E{b + 1}" for b in range(len(omega))]
        return G, omega, names

    def groupoid_frames(self, base: Chart) -> tuple[Any, Any, list[str]]:
        sec = self.raw["groupoid"]
        splitting = parse_matrix(sec["splitting"], base) if "splitting" in sec else None
        frame = parse_matrix(sec["frame"], base) if "frame" in sec else None
        return splitting, frame, list(sec.get("frame_names", []))

    def tableau(self) -> Tableau:
        sec = self.raw.get("tableau") or {}
        if not {"full", "matrices"} & set(sec):
            if self.algebroid is None or not self.algebroid.p:
                raise ProjectError("$.tableau", "no tableau section and no symbol to derive one from")
            return self.algebroid.tableau()
        if "full" in sec:
            return Tableau.full(sec["full"])
        if not {"dim_e", "dim_f", "matrices"} <= set(sec):
            raise ProjectError("$.tableau", "need either 'full' or 'dim_e', 'dim_f' and 'matrices'")
        point = Chart(())
        mats = []
        for n, M in enumerate(sec["matrices"]):
            mats.append([[_parse(point, x, f"$.tableau.matrices[{n}]") for x in row] for row in M])
        try:
            return Tableau.from_matrices(mats, sec["dim_e"], sec["dim_f"])
        except RatFieldError as exc:
            raise ProjectError("$.tableau.matrices", str(exc)) from None

    def bounds(self) -> tuple[int, int] | None:
        sec = self.raw.get("tableau") or {}
        b = sec.get("bounds")
        return (b[0], b[1]) if b else None

    # -- serialization -------------------------------------------------------
    def canonical(self) -> dict[str, Any]:
        """The document with every expression reprinted in normal form."""
        return canonicalize(self.raw)


def _canon_chart(sec: Mapping[str, Any], path: str) -> tuple[Chart, dict[str, Any]]:
    chart = _chart_from(sec, path)
    bare = Chart(chart.variables)
    out: dict[str, Any] = {"variables": list(chart.variables)}
    if sec.get("nonvanishing"):
        out["nonvanishing"] = [str(_parse(bare, e, f"{path}.nonvanishing")) for e in sec["nonvanishing"]]
    return chart, out


def _canon_expr(chart: Chart, text: Any, path: str) -> str:
    return str(_parse(chart, text, path))


def canonicalize(raw: Mapping[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key in ("name", "description", "checks"):
        if key in raw:
            out[key] = raw[key]
    chart = None
    if "chart" in raw:
        chart, out["chart"] = _canon_chart(raw["chart"], "$.chart")
    base = None
    if "algebroid" in raw:
        sec = raw["algebroid"]
        base, bsec = _canon_chart(sec["base"], "$.algebroid.base")
        a: dict[str, Any] = {"base": bsec, "rank": sec["rank"]}
        if "names" in sec:
            a["names"] = list(sec["names"])
        a["anchor"] = [
            {v: _canon_expr(base, x, f"$.algebroid.anchor[{i}].{v}") for v, x in sorted(comp.items(), key=lambda t: base.index(t[0]))}
            for i, comp in enumerate(sec["anchor"])
        ]
        a["brackets"] = {
            k: _canon_expr(base, v, f"$.algebroid.brackets.{k}") for k, v in sorted(sec.get("brackets", {}).items(), key=lambda t: _index(t[0], "$"))
        }
        out["algebroid"] = a
    if "sigma" in raw:
        sec = raw["sigma"]
        ch = base or Chart(())
        out["sigma"] = {
            "names": list(sec["names"]),
            "action": {k: _canon_expr(ch, v, f"$.sigma.action.{k}") for k, v in sorted(sec["action"].items(), key=lambda t: _index(t[0], "$"))},
        }
    if "realization" in raw and chart is not None:
        sec = raw["realization"]
        r: dict[str, Any] = {}
        for key in ("omega", "pi"):
            if key in sec:
                r[key] = [form_to_spec(_form_from(chart, f, f"$.realization.{key}[{i}]")) for i, f in enumerate(sec[key])]
        if "restrict" in sec:
            r["restrict"] = {k: str(v) for k, v in _assignments(sec["restrict"], "$.realization.restrict").items()}
        if "chart_change" in sec:
            cc = sec["chart_change"]
            orig, osec = _canon_chart(cc["chart"], "$.realization.chart_change.chart")
            r["chart_change"] = {
                "chart": osec,
                "to_original": [_canon_expr(chart, e, "$.realization.chart_change.to_original") for e in cc["to_original"]],
                "from_original": [_canon_expr(orig, e, "$.realization.chart_change.from_original") for e in cc["from_original"]],
            }
        out["realization"] = r
    for key in ("symmetry", "groupoid", "jets", "tableau"):
        if key in raw:
            out[key] = json.loads(json.dumps(raw[key]))
    return out


def load_project(source: str | Path | Mapping[str, Any]) -> Project:
    """Validate and build the objects a project file describes."""
    if isinstance(source, Mapping):
        raw = json.loads(json.dumps(source))
    else:
        path = resolve_path(source)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ProjectError("$", f"invalid JSON: {exc}") from None
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ProjectError(_path(list(err.absolute_path)), err.message)
    chart = _chart_from(raw["chart"], "$.chart") if "chart" in raw else None
    aca = _build_algebroid(raw) if "algebroid" in raw else None
    if "sigma" in raw and aca is None:
        raise ProjectError("$.sigma", "a symbol needs an algebroid section")
    R = None
    if "realization" in raw:
        if chart is None or aca is None:
            raise ProjectError("$.realization", "a realization needs chart and algebroid sections")
        sec = raw["realization"]
        omega = tuple(_form_from(chart, f, f"$.realization.omega[{i}]") for i, f in enumerate(sec["omega"]))
        pi = tuple(_form_from(chart, f, f"$.realization.pi[{i}]") for i, f in enumerate(sec["pi"])) if "pi" in sec else None
        try:
            R = RealizationData(chart, aca, omega, pi)
        except RatFieldError as exc:
            raise ProjectError("$.realization", str(exc)) from None
    return Project(raw, chart, aca, R)


def _build_algebroid(raw: Mapping[str, Any]) -> AlmostCartanAlgebroid:
    sec = raw["algebroid"]
    base = _chart_from(sec["base"], "$.algebroid.base")
    r = sec["rank"]
    if len(sec["anchor"]) != r:
        raise ProjectError("$.algebroid.anchor", f"need {r} anchor entries, got {len(sec['anchor'])}")
    anchor = []
    for i, comp in enumerate(sec["anchor"]):
        coeffs = [base.zero() for _ in range(base.dim)]
        for v, text in comp.items():
            if v not in base.variables:
                raise ProjectError(f"$.algebroid.anchor[{i}].{v}", "unknown base variable")
            coeffs[base.index(v)] = _parse(base, text, f"$.algebroid.anchor[{i}].{v}")
        anchor.append(VField(base, coeffs))
    brackets = {}
    for key, text in sec.get("brackets", {}).items():
        path = f"$.algebroid.brackets.{key}"
        i, j, k = _index(key, path)
        if max(i, j, k) >= r:
            raise ProjectError(path, f"index exceeds rank {r}")
        brackets[(i, j, k)] = _parse(base, text, path)
    try:
        F = FramedAlgebroid.build(base, r, anchor, brackets, sec.get("names", ()))
    except RatFieldError as exc:
        raise ProjectError("$.algebroid", str(exc)) from None
    entries = {}
    names: Sequence[str] = ()
    p = 0
    if "sigma" in raw:
        s = raw["sigma"]
        names = s["names"]
        p = len(names)
        for key, text in s["action"].items():
            path = f"$.sigma.action.{key}"
            lam, j, i = _index(key, path)
            if lam >= p or max(i, j) >= r:
                raise ProjectError(path, "index out of range")
            entries[(lam, j, i)] = _parse(base, text, path)
    try:
        return AlmostCartanAlgebroid.build(F, entries, p, names)
    except RatFieldError as exc:
        raise ProjectError("$.sigma", str(exc)) from None


FIXTURE_NAMES = (
    "example1",
    "example1_broken",
    "example2",
    "example2_broken",
    "halfplane",
    "halfplane_broken",
    "liegroup-sl2",
    "liegroup-sl2_broken",
)


def fixtures() -> list[str]:
    return list(FIXTURE_NAMES)


def fixture_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    stem = stem.split("/")[-1]
    ref = resources.files("cartankit") / "fixtures" / f"{stem}.json"
    return Path(str(ref))


def resolve_path(source: str | Path) -> Path:
    """A file path, or the bundled fixture of the same name."""
    p = Path(source)
    if p.exists():
        return p
    fp = fixture_path(str(source))
    if fp.exists():
        return fp
    raise ProjectError("$", f"no such file or bundled fixture: {source}")


def chart_to_spec(chart: Chart) -> dict[str, Any]:
    out: dict[str, Any] = {"variables": list(chart.variables)}
    if chart.nonvanishing:
        out["nonvanishing"] = [str(RatFn(chart, p)) for p in chart.nonvanishing_polys()]
    return out


def algebroid_to_spec(A: AlmostCartanAlgebroid) -> dict[str, Any]:
    """The algebroid and sigma sections describing A."""
    F = A.algebroid
    anchor = [{v: str(c) for v, c in zip(F.base.variables, X.coeffs) if c} for X in F.anchor]
    brackets = {f"({i + 1},{j + 1},{k + 1})": str(v) for (i, j, k), v in sorted(F.structure.items()) if v}
    out: dict[str, Any] = {
        "algebroid": {"base": chart_to_spec(F.base), "rank": F.rank, "names": list(F.names), "anchor": anchor, "brackets": brackets}
    }
    if A.p:
        action = {}
        for lam in range(A.p):
            for j in range(F.rank):
                for i in range(F.rank):
                    v = A.symbol[lam][i][j]
                    if v:
                        action[f"({lam + 1},{j + 1},{i + 1})"] = str(v)
        out["sigma"] = {"names": list(A.symbol_names), "action": action}
    return out
