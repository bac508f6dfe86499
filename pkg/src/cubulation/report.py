"""Input parsing, analysis dispatch and the report format shared by the CLI."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from . import __version__, fbc, median, rbf, tubular
from .errors import InputError

KINDS = ("tubular", "fbc", "median", "rbf")

_INT = {"type": "integer"}
_RATIONAL = {"anyOf": [{"type": "integer"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$"}]}
_PATH = {"type": "array", "items": {"type": "string"}}

SCHEMAS: dict[str, dict] = {
    "tubular": {
        "type": "object",
        "required": ["vertices", "edges"],
        "properties": {
            "vertices": {"type": "array", "minItems": 1, "items": {"type": "string"}},
            "edges": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["id", "from", "to", "w_from", "w_to"],
                    "properties": {
                        "id": {"type": "string"},
                        "from": {"type": "string"},
                        "to": {"type": "string"},
                        "w_from": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2},
                        "w_to": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2},
                    },
                },
            },
        },
    },
    "fbc": {
        "type": "object",
        "required": ["vertices", "edges", "strata"],
        "properties": {
            "vertices": {"type": "array", "items": {"type": "string"}},
            "edges": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["id", "from", "to"],
                    "properties": {"id": {"type": "string"}, "from": {"type": "string"},
                                   "to": {"type": "string"}},
                },
            },
            "strata": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": list(fbc.KINDS)},
                        "edge": {"type": "string"},
                        "edges": _PATH,
                        "suffix": {
                            "type": "object",
                            "required": ["cycle", "exp"],
                            "properties": {"cycle": {"type": "string"}, "exp": _INT, "offset": _INT},
                        },
                    },
                },
            },
            "nielsen_cycles": {"type": "array", "items": {
                "type": "object", "required": ["id", "path"],
                "properties": {"id": {"type": "string"}, "path": _PATH}}},
            "nielsen_paths": {"type": "array", "items": {
                "type": "object", "required": ["id", "path"],
                "properties": {"id": {"type": "string"}, "path": _PATH}}},
            "fixed_vertices": _PATH,
        },
    },
    "median": {
        "oneOf": [
            {
                "type": "object",
                "required": ["elements", "med"],
                "properties": {
                    "elements": {"type": "array", "minItems": 1, "items": {"type": "string"}},
                    "med": {"type": "array", "items": {
                        "type": "array", "items": _INT, "minItems": 4, "maxItems": 4}},
                    "metric": {"type": "array", "items": _RATIONAL},
                },
            },
            {"type": "object", "required": ["hypercube"],
             "properties": {"hypercube": {"type": "integer", "minimum": 1}}},
            {"type": "object", "required": ["box"],
             "properties": {"box": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
                            "origin": {"type": "array", "items": _INT}}},
            {"type": "object", "required": ["tree"],
             "properties": {"tree": {"type": "object", "required": ["nodes", "edges"], "properties": {
                 "nodes": _PATH,
                 "edges": {"type": "array", "items": {"type": "array", "items": {"type": "string"},
                                                      "minItems": 2, "maxItems": 2}}}}}},
        ]
    },
    "rbf": {
        "type": "object",
        "required": ["n", "directions"],
        "properties": {
            "n": {"type": "integer"},
            "directions": {"type": "array", "items": {"type": "array", "items": _INT}},
            "positions": {"anyOf": [{"const": "lattice"},
                                    {"type": "array", "items": {"type": "array", "items": _RATIONAL}}]},
            "periods": {"type": "array", "items": _RATIONAL},
            "density": _RATIONAL,
            "provenance": {"type": "string"},
        },
    },
}


def _field_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def fixture_names() -> list[str]:
    root = resources.files("cubulation") / "fixtures"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def _read(path: str | Path) -> str:
    p = Path(path)
    if not p.exists():
        name = p.name if p.name.endswith(".json") else p.name + ".json"
        if str(p) in (p.name, p.stem) and name in fixture_names():
            return (resources.files("cubulation") / "fixtures" / name).read_text(encoding="utf-8")
        raise InputError(f"no such file: {path}")
    try:
        return p.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not valid UTF-8") from exc
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def load_json(path: str | Path) -> Any:
    text = _read(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"JSON syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def check_schema(data: Any, kind: str) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMAS[kind])
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = max(errors, key=lambda e: len(e.absolute_path))
        if kind == "median" and err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        raise InputError(f"schema violation: {err.message}", path=_field_path(err.absolute_path))


def build_spec(data: Any, kind: str, limit: int | None = None):
    """Typed spec from already-decoded JSON, after the schema and the domain validator."""
    if kind not in KINDS:
        raise InputError(f"unknown input kind {kind!r} (expected one of {', '.join(KINDS)})")
    check_schema(data, kind)
    if kind == "tubular":
        return tubular.TubularGroupSpec.from_json(data)
    if kind == "fbc":
        spec = fbc.IrttSpec.from_json(data)
        report = fbc.validate_irtt(spec)
        if not report.ok:
            raise InputError("invalid IRTT structure: " + "; ".join(report.problems))
        return spec
    if kind == "rbf":
        spec = rbf.RbfSpec.from_json(data)
        report = rbf.validate_rbf_spec(spec)
        if not report.ok:
            raise InputError("invalid RBF spec: " + "; ".join(report.problems))
        return spec
    if "hypercube" in data:
        return median.hypercube(data["hypercube"], limit=limit)
    if "box" in data:
        return median.lattice_box(data["box"], data.get("origin"), limit=limit)
    if "tree" in data:
        t = data["tree"]
        return median.tree(t["nodes"], [tuple(e) for e in t["edges"]], limit=limit)
    return median.FiniteMedianAlgebra.from_json(data)


def parse_input(path: str | Path, kind: str, limit: int | None = None):
    """Read, schema-check and validate an input file of the given kind."""
    if kind not in KINDS:
        raise InputError(f"unknown input kind {kind!r} (expected one of {', '.join(KINDS)})")
    return build_spec(load_json(path), kind, limit)


def digest(data: Any) -> str:
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class AnalysisReport:
    kind: str
    operation: str
    input_digest: str
    verdict: dict
    certificates: dict | None = None
    version: str = __version__
    reasoning: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "operation": self.operation,
            "input_digest": self.input_digest,
            "verdict": self.verdict,
            "certificates": self.certificates,
            "reasoning": list(self.reasoning),
            "version": self.version,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, data: dict) -> "AnalysisReport":
        return cls(data["kind"], data["operation"], data["input_digest"], data["verdict"],
                   data.get("certificates"), data.get("version", __version__),
                   list(data.get("reasoning", [])))


class CertificateError(RuntimeError):
    """An emitted certificate failed to re-verify."""


def run_report(spec, kind: str, operation: str = "analyze", *, witness: bool = False,
               limit: int | None = None, source: Any = None, **options) -> AnalysisReport:
    """Dispatch one analysis and wrap the result.

    ``source`` is the decoded input used for the digest (the input's own JSON
    form when omitted).  With ``witness`` the certificates are embedded and
    re-verified first; a failure raises :class:`CertificateError`.
    """
    if source is None:
        source = spec.to_json()
    tag = digest(source)
    if kind == "tubular":
        verdict = tubular.classify_tubular(spec)
        body = verdict.to_json(witness=witness)
        certs = body.pop("certificates", None)
        if witness and not tubular.verify_verdict(spec, verdict):
            raise CertificateError("tubular certificates failed to re-verify")
        return AnalysisReport(kind, operation, tag, body, certs, reasoning=body.pop("reasons"))
    if kind == "fbc":
        verdict = fbc.classify_fbc(spec)
        body = verdict.to_json(witness=witness)
        certs = None
        if witness and verdict.witness is not None:
            if not fbc.verify_witness(spec, verdict.witness):
                raise CertificateError("rich-linearity witness failed to re-verify")
            certs = {"rich_linearity": body.pop("witness")}
        return AnalysisReport(kind, operation, tag, body, certs, reasoning=body.pop("reasons"))
    if kind == "median":
        return _median_report(spec, operation, tag, witness, limit, **options)
    if kind == "rbf":
        return _rbf_report(spec, operation, tag, **options)
    raise InputError(f"unknown input kind {kind!r}")


def _median_report(M: median.FiniteMedianAlgebra, operation: str, tag: str, witness: bool,
                   limit: int | None, subset=None, **_) -> AnalysisReport:
    if operation == "verify":
        check = median.verify_median_axioms(M)
        return AnalysisReport("median", operation, tag, {"size": len(M), **check.to_json()})
    if operation == "rank":
        rep = median.rank(M, limit=limit)
        certs = None
        if witness:
            if not median.verify_rank_report(M, rep):
                raise CertificateError("rank witnesses failed to re-verify")
            body = rep.to_json()
            certs = {"witness_walls": body["witness_walls"], "witness_cube": body["witness_cube"]}
        verdict = {"size": len(M), "rank_walls": rep.rank_walls, "rank_cube": rep.rank_cube,
                   "rank": rep.rank_walls if rep.agree else None, "agree": rep.agree}
        return AnalysisReport("median", operation, tag, verdict, certs)
    if operation == "hull":
        if not subset:
            raise InputError("hull needs a nonempty --subset")
        hull = median.convex_hull(M, subset)
        order = {e: i for i, e in enumerate(M.elements)}
        verdict = {
            "subset": sorted(subset, key=order.__getitem__),
            "j_closure": sorted(median.j_closure(M, subset), key=order.__getitem__),
            "hull": sorted(hull, key=order.__getitem__),
            "steps": median.hull_depth(M, subset),
        }
        return AnalysisReport("median", operation, tag, verdict)
    raise InputError(f"unknown median operation {operation!r}")


def _rbf_report(spec, operation: str, tag: str, radius: int = 1, depth: int = 1,
                vertex: str | None = None, **_) -> AnalysisReport:
    if operation == "from-tubular":
        names = spec.vertices if vertex is None else [vertex]
        for v in names:
            found = rbf.tubular_rbf_directions(spec, v)
            if found is not None:
                return AnalysisReport("tubular", operation, tag, {"vertex": v, "rbf": found.to_json()})
        return AnalysisReport("tubular", operation, tag, {"vertex": vertex, "rbf": None})
    if operation == "from-fbc":
        witness = fbc.rich_linearity(spec)
        if witness is None:
            return AnalysisReport("fbc", operation, tag, {"rbf": None, "witness": None})
        return AnalysisReport("fbc", operation, tag,
                              {"rbf": rbf.fbc_rbf_directions(witness).to_json(), "witness": witness.to_json()})
    if operation == "build":
        model = rbf.build_discrete_rbf(spec, radius, depth)
        problems = rbf.check_model(model)
        if problems:
            raise CertificateError("; ".join(problems))
        return AnalysisReport("rbf", operation, tag, {**model.summary(), "disjoint_outside_base": True})
    if operation == "validate":
        return AnalysisReport("rbf", operation, tag, rbf.validate_rbf_spec(spec).to_json())
    raise InputError(f"unknown rbf operation {operation!r}")


def render_text(report: AnalysisReport) -> str:
    """Human-readable form: the verdict fields, then the numbered reasoning trail."""
    lines = [f"{report.kind} {report.operation}  (input sha256 {report.input_digest[:16]})"]
    for key, value in report.verdict.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        lines.append(f"  {key}: {value}")
    if report.reasoning:
        lines.append("reasoning:")
        lines.extend(f"  {i}. {r}" for i, r in enumerate(report.reasoning, 1))
    if report.certificates:
        lines.append("certificates (re-verified):")
        for key, value in report.certificates.items():
            lines.append(f"  {key}: {json.dumps(value, sort_keys=True)}")
    return "\n".join(lines)
