"""Free-by-cyclic groups described by a declared improved relative train track.

Nielsen paths and cycles are inputs, not computed: finding the fixed paths
of a graph map is a train-track computation outside this toolkit.  Every
classification is therefore relative to the declared data, and
``Inconclusive`` is an honest answer.

Edge references inside paths are edge ids, with a trailing ``~`` for
reversed traversal.
"""

from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError, PreconditionError
from .rbf import RbfSpec, ValidationReport, fbc_rbf_directions

KINDS = ("invariant", "exponential", "linear", "polynomial", "zero")
SINGLE_EDGE_KINDS = ("invariant", "linear", "polynomial")


@dataclass(frozen=True)
class GraphEdge:
    id: str
    source: str
    target: str


@dataclass(frozen=True)
class Suffix:
    cycle: str
    exp: int
    offset: int = 0


@dataclass(frozen=True)
class Stratum:
    kind: str
    edges: tuple[str, ...]
    suffix: Suffix | None = None

    @property
    def edge(self) -> str:
        return self.edges[0]


@dataclass(frozen=True)
class DeclaredPath:
    id: str
    path: tuple[str, ...]


@dataclass(frozen=True)
class IrttSpec:
    vertices: tuple[str, ...]
    edges: tuple[GraphEdge, ...]
    strata: tuple[Stratum, ...]
    nielsen_cycles: tuple[DeclaredPath, ...] = ()
    nielsen_paths: tuple[DeclaredPath, ...] = ()
    fixed_vertices: tuple[str, ...] | None = None

    @property
    def edge_map(self) -> dict[str, GraphEdge]:
        return {e.id: e for e in self.edges}

    def cycle(self, cycle_id: str) -> DeclaredPath:
        for c in self.nielsen_cycles:
            if c.id == cycle_id:
                return c
        raise InputError(f"undeclared Nielsen cycle {cycle_id!r}")

    def linear_stratum(self, edge: str) -> Stratum:
        for s in self.strata:
            if edge in s.edges:
                if s.kind != "linear":
                    raise InputError(f"stratum of edge {edge!r} is {s.kind}, not linear")
                return s
        raise InputError(f"no stratum contains edge {edge!r}")

    @classmethod
    def from_json(cls, data: dict) -> "IrttSpec":
        if not isinstance(data, dict):
            raise InputError("expected a JSON object")
        try:
            vertices = tuple(str(v) for v in data["vertices"])
            edges = tuple(GraphEdge(str(e["id"]), str(e["from"]), str(e["to"])) for e in data["edges"])
            raw_strata = data["strata"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"IRTT JSON is missing field {exc}") from exc
        strata = []
        for pos, s in enumerate(raw_strata):
            where = f"strata[{pos}]"
            kind = s.get("kind")
            if kind not in KINDS:
                raise InputError(f"unknown stratum kind {kind!r}", path=f"{where}.kind")
            if "edge" in s:
                members = (str(s["edge"]),)
            elif "edges" in s:
                members = tuple(str(e) for e in s["edges"])
            else:
                raise InputError("stratum needs 'edge' or 'edges'", path=where)
            suffix = None
            if kind == "linear":
                raw = s.get("suffix")
                if not isinstance(raw, dict) or "cycle" not in raw or "exp" not in raw:
                    raise InputError("linear stratum needs suffix {cycle, exp, offset}", path=f"{where}.suffix")
                exp, offset = raw["exp"], raw.get("offset", 0)
                if not isinstance(exp, int) or not isinstance(offset, int):
                    raise InputError("suffix exp and offset must be integers", path=f"{where}.suffix")
                suffix = Suffix(str(raw["cycle"]), exp, offset)
            strata.append(Stratum(kind, members, suffix))

        def paths(key: str) -> tuple[DeclaredPath, ...]:
            out = []
            for pos, p in enumerate(data.get(key, [])):
                try:
                    out.append(DeclaredPath(str(p["id"]), tuple(str(x) for x in p["path"])))
                except (KeyError, TypeError) as exc:
                    raise InputError("needs 'id' and 'path'", path=f"{key}[{pos}]") from exc
            return tuple(out)

        fixed = data.get("fixed_vertices")
        return cls(vertices, edges, tuple(strata), paths("nielsen_cycles"), paths("nielsen_paths"),
                   None if fixed is None else tuple(str(v) for v in fixed))

    def to_json(self) -> dict:
        strata = []
        for s in self.strata:
            rec: dict = {"kind": s.kind}
            if s.kind in SINGLE_EDGE_KINDS:
                rec["edge"] = s.edge
            else:
                rec["edges"] = list(s.edges)
            if s.suffix is not None:
                rec["suffix"] = {"cycle": s.suffix.cycle, "exp": s.suffix.exp, "offset": s.suffix.offset}
            strata.append(rec)
        out = {
            "vertices": list(self.vertices),
            "edges": [{"id": e.id, "from": e.source, "to": e.target} for e in self.edges],
            "strata": strata,
            "nielsen_cycles": [{"id": c.id, "path": list(c.path)} for c in self.nielsen_cycles],
            "nielsen_paths": [{"id": p.id, "path": list(p.path)} for p in self.nielsen_paths],
        }
        if self.fixed_vertices is not None:
            out["fixed_vertices"] = list(self.fixed_vertices)
        return out


# ---------------------------------------------------------------------------
# paths


def _step(spec: IrttSpec, ref: str) -> tuple[str, str, str]:
    """``(edge id, start, end)`` for an edge reference, honouring ``~``."""
    name, rev = (ref[:-1], True) if ref.endswith("~") else (ref, False)
    edge = spec.edge_map.get(name)
    if edge is None:
        raise InputError(f"unknown edge {name!r}")
    return (name, edge.target, edge.source) if rev else (name, edge.source, edge.target)


def _inverse(ref: str) -> str:
    return ref[:-1] if ref.endswith("~") else ref + "~"


def path_vertices(spec: IrttSpec, path: Sequence[str]) -> list[str]:
    steps = [_step(spec, r) for r in path]
    return [steps[0][1]] + [s[2] for s in steps]


def _path_problems(spec: IrttSpec, path: Sequence[str], closed: bool) -> list[str]:
    if not path:
        return ["path is empty"]
    try:
        steps = [_step(spec, r) for r in path]
    except InputError as exc:
        return [str(exc)]
    problems = []
    for (_, _, end), (_, start, _) in zip(steps, steps[1:]):
        if end != start:
            problems.append("consecutive edges do not meet")
            break
    pairs = list(zip(path, path[1:]))
    if closed:
        if steps[-1][2] != steps[0][1]:
            problems.append("cycle is not closed")
        else:
            pairs.append((path[-1], path[0]))
    if any(b == _inverse(a) for a, b in pairs):
        problems.append("path backtracks (not immersed)")
    return problems


def _rotations(path: Sequence[str]) -> set[tuple[str, ...]]:
    p = tuple(path)
    return {p[i:] + p[:i] for i in range(len(p))}


def _reverse(path: Sequence[str]) -> tuple[str, ...]:
    return tuple(_inverse(r) for r in reversed(path))


def _is_proper_power(path: Sequence[str]) -> bool:
    n = len(path)
    return any(n % d == 0 and tuple(path) == tuple(path[:d]) * (n // d) for d in range(1, n))


# ---------------------------------------------------------------------------
# validation


def validate_irtt(spec: IrttSpec) -> ValidationReport:
    problems: list[str] = []
    verts = set(spec.vertices)
    if len(verts) != len(spec.vertices):
        problems.append("vertices: identifiers are not distinct")
    ids = [e.id for e in spec.edges]
    if len(set(ids)) != len(ids):
        problems.append("edges: identifiers are not distinct")
    for pos, e in enumerate(spec.edges):
        for end in (e.source, e.target):
            if end not in verts:
                problems.append(f"edges[{pos}]: unknown vertex {end!r}")
        if e.id.endswith("~"):
            problems.append(f"edges[{pos}]: edge ids may not end in '~'")
    fixed = verts if spec.fixed_vertices is None else set(spec.fixed_vertices)
    for v in fixed - verts:
        problems.append(f"fixed_vertices: unknown vertex {v!r}")
    if problems:
        return ValidationReport(False, tuple(problems))

    edge_map = spec.edge_map
    cycles = {c.id: c for c in spec.nielsen_cycles}
    if len(cycles) != len(spec.nielsen_cycles):
        problems.append("nielsen_cycles: identifiers are not distinct")
    for pos, c in enumerate(spec.nielsen_cycles):
        for msg in _path_problems(spec, c.path, closed=True):
            problems.append(f"nielsen_cycles[{pos}] ({c.id}): {msg}")
        if c.path and _is_proper_power(c.path):
            problems.append(f"nielsen_cycles[{pos}] ({c.id}): cycle is a proper power")
    for (i, c), (j, d) in itertools.combinations(enumerate(spec.nielsen_cycles), 2):
        if c.path and tuple(d.path) in _rotations(c.path) | _rotations(_reverse(c.path)):
            problems.append(f"nielsen_cycles[{j}] ({d.id}): same cycle as {c.id} up to rotation/inversion")
    for pos, p in enumerate(spec.nielsen_paths):
        for msg in _path_problems(spec, p.path, closed=False):
            problems.append(f"nielsen_paths[{pos}] ({p.id}): {msg}")

    # strata partition the edges, listed in filtration order
    owner: dict[str, int] = {}
    for pos, s in enumerate(spec.strata):
        if not s.edges:
            problems.append(f"strata[{pos}]: empty stratum")
        for e in s.edges:
            if e not in edge_map:
                problems.append(f"strata[{pos}]: unknown edge {e!r}")
            elif e in owner:
                problems.append(f"strata[{pos}]: edge {e!r} already in strata[{owner[e]}]")
            else:
                owner[e] = pos
        if s.kind in SINGLE_EDGE_KINDS and len(s.edges) != 1:
            problems.append(f"strata[{pos}]: a {s.kind} stratum is a single edge")
    for e in edge_map:
        if e not in owner:
            problems.append(f"edges: {e!r} belongs to no stratum")
    seen_other = False
    for pos, s in enumerate(spec.strata):
        if s.kind == "invariant" and seen_other:
            problems.append(f"strata[{pos}]: invariant strata must precede all others")
        seen_other = seen_other or s.kind != "invariant"

    suffixes: dict[Suffix, int] = {}
    for pos, s in enumerate(spec.strata):
        if s.kind not in ("linear", "polynomial") or len(s.edges) != 1 or s.edge not in edge_map:
            continue
        edge = edge_map[s.edge]
        for end in (edge.source, edge.target):
            if end not in fixed:
                problems.append(f"strata[{pos}]: endpoint {end!r} of {s.kind} edge {edge.id} is not fixed")
        if s.kind != "linear":
            continue
        suf = s.suffix
        cyc = cycles.get(suf.cycle)
        if cyc is None:
            problems.append(f"strata[{pos}].suffix: undeclared Nielsen cycle {suf.cycle!r}")
            continue
        if suf.exp == 0:
            problems.append(f"strata[{pos}].suffix: exponent must be nonzero")
        if not 0 <= suf.offset < max(1, len(cyc.path)):
            problems.append(f"strata[{pos}].suffix: offset {suf.offset} out of range")
        elif cyc.path and not _path_problems(spec, cyc.path, closed=True):
            base = path_vertices(spec, cyc.path)[suf.offset]
            if base != edge.target:
                problems.append(
                    f"strata[{pos}].suffix: suffix is based at {base!r}, not at the terminal vertex "
                    f"{edge.target!r} of {edge.id}"
                )
            later = [r for r in cyc.path if owner.get(_step(spec, r)[0], -1) >= pos]
            if later:
                problems.append(f"strata[{pos}].suffix: cycle {cyc.id} uses edges not below this stratum")
        if suf in suffixes:
            problems.append(f"strata[{pos}].suffix: same suffix as strata[{suffixes[suf]}]")
        else:
            suffixes[suf] = pos
    kinds = {s.kind for s in spec.strata}
    if "polynomial" in kinds and "linear" not in kinds:
        problems.append("strata: non-exponential strata exist but none is linear")
    return ValidationReport(not problems, tuple(problems))


def _require_valid(spec: IrttSpec) -> None:
    report = validate_irtt(spec)
    if not report.ok:
        raise InputError("invalid IRTT spec: " + "; ".join(report.problems))


# ---------------------------------------------------------------------------
# supports, internal strata, sources


def supports(spec: IrttSpec, cycle: str) -> list[Stratum]:
    """Linear strata whose suffix is a power of a rotation of the given cycle."""
    spec.cycle(cycle)
    return [s for s in spec.strata if s.kind == "linear" and s.suffix.cycle == cycle]


@dataclass(frozen=True)
class PathWitness:
    """A concatenation of hops; each hop is ``(kind, id, from, to)``."""

    start: str
    end: str
    hops: tuple[tuple[str, str, str, str], ...] = ()

    def to_json(self) -> dict:
        return {"start": self.start, "end": self.end,
                "hops": [{"kind": k, "id": i, "from": a, "to": b} for k, i, a, b in self.hops]}


def _nielsen_arcs(spec: IrttSpec) -> list[tuple[str, str, str, str]]:
    """Declared Nielsen paths plus invariant edges (which are fixed, hence Nielsen)."""
    arcs = []
    for p in spec.nielsen_paths:
        vs = path_vertices(spec, p.path)
        arcs.append(("nielsen_path", p.id, vs[0], vs[-1]))
    edge_map = spec.edge_map
    for s in spec.strata:
        if s.kind == "invariant":
            e = edge_map[s.edge]
            arcs.append(("invariant_edge", e.id, e.source, e.target))
    return arcs


def _search(arcs, start: Iterable[str], targets: set[str]) -> PathWitness | None:
    starts = list(dict.fromkeys(start))
    prev: dict[str, tuple[str, tuple] | None] = {v: None for v in starts}
    queue = deque(starts)
    while queue:
        u = queue.popleft()
        if u in targets:
            hops = []
            v = u
            while prev[v] is not None:
                w, hop = prev[v]
                hops.append(hop)
                v = w
            hops.reverse()
            return PathWitness(v, u, tuple(hops))
        for kind, ident, a, b in arcs:
            for x, y in ((a, b), (b, a)):
                if x == u and y not in prev:
                    prev[y] = (u, (kind, ident, x, y))
                    queue.append(y)
    return None


def cycle_vertices(spec: IrttSpec, cycle: str) -> list[str]:
    return list(dict.fromkeys(path_vertices(spec, spec.cycle(cycle).path)))


def is_internal(spec: IrttSpec, stratum: str | Stratum) -> tuple[bool, PathWitness | None]:
    """Is there a linear path from the initial vertex of the stratum to a Nielsen cycle?

    A linear path is a concatenation of Nielsen paths and linear edges other
    than the stratum's own edge; the empty path counts.
    """
    s = spec.linear_stratum(stratum.edge if isinstance(stratum, Stratum) else stratum)
    edge = spec.edge_map[s.edge]
    arcs = _nielsen_arcs(spec)
    for t in spec.strata:
        if t.kind == "linear" and t.edge != s.edge:
            e = spec.edge_map[t.edge]
            arcs.append(("linear_edge", e.id, e.source, e.target))
    targets = {v for c in spec.nielsen_cycles for v in cycle_vertices(spec, c.id)}
    found = _search(arcs, [edge.source], targets)
    return found is not None, found


def sources(spec: IrttSpec) -> list[str]:
    edge_map = spec.edge_map
    return list(dict.fromkeys(edge_map[s.edge].source for s in spec.strata if s.kind == "linear"))


def has_nearby_source(spec: IrttSpec, cycle: str) -> tuple[bool, PathWitness | None]:
    """Is some vertex of the cycle joined to a source by a Nielsen path (possibly empty)?"""
    found = _search(_nielsen_arcs(spec), cycle_vertices(spec, cycle), set(sources(spec)))
    return found is not None, found


# ---------------------------------------------------------------------------
# rich linearity and the verdict


@dataclass(frozen=True)
class WitnessStratum:
    edge: str
    exponent: int
    offset: int
    path: PathWitness

    def to_json(self) -> dict:
        return {"edge": self.edge, "exponent": self.exponent, "offset": self.offset,
                "internal_path": self.path.to_json()}


@dataclass(frozen=True)
class RichLinearityWitness:
    cycle: str
    strata: tuple[WitnessStratum, ...]
    source: PathWitness | None = None

    def to_json(self) -> dict:
        return {"cycle": self.cycle, "internal_strata": [s.to_json() for s in self.strata],
                "nearby_source": None if self.source is None else self.source.to_json()}


def _cycle_order(spec: IrttSpec) -> list[str]:
    owner = {e: pos for pos, s in enumerate(spec.strata) for e in s.edges}

    def key(item):
        pos, c = item
        return (max(owner[_step(spec, r)[0]] for r in c.path), pos)

    return [c.id for _, c in sorted(enumerate(spec.nielsen_cycles), key=key)]


def _pick(internal: list[WitnessStratum], k: int) -> tuple[WitnessStratum, ...]:
    """First k-subset with pairwise distinct exponents, else the first k."""
    for combo in itertools.combinations(internal, k):
        if len({s.exponent for s in combo}) == k:
            return combo
    return tuple(internal[:k])


def rich_linearity(spec: IrttSpec) -> RichLinearityWitness | None:
    """First cycle supporting three internal strata, or two plus a nearby source."""
    for cyc in _cycle_order(spec):
        internal = []
        for s in supports(spec, cyc):
            ok, path = is_internal(spec, s)
            if ok:
                internal.append(WitnessStratum(s.edge, s.suffix.exp, s.suffix.offset, path))
        if len(internal) >= 3:
            return RichLinearityWitness(cyc, _pick(internal, 3))
        if len(internal) == 2:
            near, path = has_nearby_source(spec, cyc)
            if near:
                return RichLinearityWitness(cyc, _pick(internal, 2), path)
    return None


def verify_witness(spec: IrttSpec, witness: RichLinearityWitness) -> bool:
    supported = {s.edge for s in supports(spec, witness.cycle)}
    if len({s.edge for s in witness.strata}) != len(witness.strata):
        return False
    for ws in witness.strata:
        if ws.edge not in supported or not is_internal(spec, ws.edge)[0]:
            return False
    if witness.source is None:
        return len(witness.strata) >= 3
    return len(witness.strata) >= 2 and has_nearby_source(spec, witness.cycle)[0]


class FbcBranch(str, enum.Enum):
    HYPERBOLIC = "Hyperbolic_CocompactlyCubulated"
    RELHYP = "RelHyp_over_F_times_Z"
    HHG = "Virtually_Colourable_HHG"
    RICH = "NoCoarseMedian_RichLinearity"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class FbcVerdict:
    branch: FbcBranch
    witness: RichLinearityWitness | None = None
    rbf: RbfSpec | None = None
    reasons: list[str] = field(default_factory=list)

    def to_json(self, witness: bool = True) -> dict:
        out: dict = {"branch": self.branch.value, "reasons": list(self.reasons)}
        if self.witness is not None:
            out["witness"] = self.witness.to_json() if witness else {"cycle": self.witness.cycle}
        if self.rbf is not None:
            out["rbf"] = self.rbf.to_json()
        return out


def classify_fbc(spec: IrttSpec) -> FbcVerdict:
    _require_valid(spec)
    witness = rich_linearity(spec)
    if witness is not None:
        names = ", ".join(s.edge for s in witness.strata)
        reasons = [f"Nielsen cycle {witness.cycle} supports internal linear strata {names}"
                   + (" and has a nearby source" if witness.source else "")]
        try:
            rbf = fbc_rbf_directions(witness)
            dirs = ", ".join(str(list(d)) for d in rbf.directions)
            reasons.append(f"three pairwise non-parallel branching directions {dirs}: a 2-RBF")
        except PreconditionError as exc:
            rbf = None
            reasons.append(f"branching directions not certified ({exc})")
        reasons += [
            "geometric dimension 2 bounds the rank of any coarse median by 2",
            "a rank-2 coarse median space admits no quasi-isometric embedding of a 2-RBF",
            "no coarse median",
        ]
        return FbcVerdict(FbcBranch.RICH, witness, rbf, reasons)
    if not spec.nielsen_cycles:
        return FbcVerdict(FbcBranch.HYPERBOLIC, reasons=[
            "no Nielsen cycles: atoroidal, so hyperbolic",
            "hyperbolic free-by-cyclic groups are cocompactly cubulated",
        ])
    kinds = [s.kind for s in spec.strata]
    if "linear" not in kinds:
        return FbcVerdict(FbcBranch.RELHYP, reasons=[
            "no linear strata: virtually hyperbolic relative to F' x Z subgroups",
            "quasi-isometric to a finite-dimensional CAT(0) cube complex",
        ])
    overloaded = [c.id for c in spec.nielsen_cycles if len(supports(spec, c.id)) > 1]
    if "polynomial" not in kinds and not overloaded:
        return FbcVerdict(FbcBranch.HHG, reasons=[
            "all non-exponential strata are linear and each Nielsen cycle supports at most one",
            "virtually a colourable hierarchically hyperbolic group",
            "quasi-isometric to a finite-dimensional CAT(0) cube complex",
        ])
    why = []
    if "polynomial" in kinds:
        why.append("a non-exponential stratum is not linear")
    if overloaded:
        why.append(f"cycles {', '.join(overloaded)} support several linear strata without rich linearity")
    return FbcVerdict(FbcBranch.INCONCLUSIVE, reasons=why + ["no decision from the declared data"])
