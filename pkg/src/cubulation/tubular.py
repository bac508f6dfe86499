"""Tubular groups: transport graph, distortion, Dehn class and the cubulation verdict.

A tubular group is given by a finite graph of groups with ``Z^2`` vertex
groups (fixed bases) and ``Z`` edge groups.  Each edge records the images
``w_from``/``w_to`` of its generator in the two end vertex groups.

The distortion graph is realized as a *transport graph*: nodes are
``(vertex, primitive direction)`` pairs and each group edge becomes one arc
labelled ``|m_to| / |m_from|`` where ``w = m * primitive(w)``.  Around any
closed walk the basis-dependent norms of the primitive vectors cancel, so
cycle products are well defined; all arithmetic is exact.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import gcd, lcm
from typing import Sequence

from .errors import InputError
from .rbf import RbfSpec, primitive, tubular_rbf_directions

Vec = tuple[int, int]
Node = tuple[str, Vec]


@dataclass(frozen=True)
class TubularEdge:
    id: str
    source: str
    target: str
    w_source: Vec
    w_target: Vec


@dataclass(frozen=True)
class TubularGroupSpec:
    vertices: tuple[str, ...]
    edges: tuple[TubularEdge, ...]

    def __post_init__(self) -> None:
        verts = tuple(self.vertices)
        edges = tuple(self.edges)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        if not verts:
            raise InputError("a tubular group needs at least one vertex", path="vertices")
        if len(set(verts)) != len(verts):
            raise InputError("vertex identifiers must be distinct", path="vertices")
        known = set(verts)
        seen_ids = set()
        for pos, e in enumerate(edges):
            where = f"edges[{pos}]"
            if e.id in seen_ids:
                raise InputError(f"duplicate edge id {e.id!r}", path=f"{where}.id")
            seen_ids.add(e.id)
            for end, name in ((e.source, "from"), (e.target, "to")):
                if end not in known:
                    raise InputError(f"unknown vertex {end!r}", path=f"{where}.{name}")
            for vec, name in ((e.w_source, "w_from"), (e.w_target, "w_to")):
                if len(vec) != 2 or not all(isinstance(c, int) and not isinstance(c, bool) for c in vec):
                    raise InputError("expected an integer 2-vector", path=f"{where}.{name}")
                if vec == (0, 0):
                    raise InputError("edge-group image must be nonzero", path=f"{where}.{name}")
        # connectivity
        adj: dict[str, set[str]] = {v: set() for v in verts}
        for e in edges:
            adj[e.source].add(e.target)
            adj[e.target].add(e.source)
        reached = {verts[0]}
        queue = deque([verts[0]])
        while queue:
            for w in adj[queue.popleft()]:
                if w not in reached:
                    reached.add(w)
                    queue.append(w)
        if len(reached) != len(verts):
            missing = sorted(set(verts) - reached)
            raise InputError(f"graph is not connected (unreached: {', '.join(missing)})", path="edges")

    @classmethod
    def from_json(cls, data: dict) -> "TubularGroupSpec":
        if not isinstance(data, dict):
            raise InputError("expected a JSON object")
        try:
            verts = tuple(str(v) for v in data["vertices"])
            raw = data["edges"]
        except (KeyError, TypeError) as exc:
            raise InputError("tubular JSON needs 'vertices' and 'edges'") from exc
        edges = []
        for pos, e in enumerate(raw):
            try:
                edges.append(TubularEdge(
                    str(e["id"]), str(e["from"]), str(e["to"]),
                    tuple(e["w_from"]), tuple(e["w_to"]),
                ))
            except (KeyError, TypeError) as exc:
                raise InputError(f"missing field {exc}", path=f"edges[{pos}]") from exc
        return cls(verts, tuple(edges))

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"id": e.id, "from": e.source, "to": e.target,
                 "w_from": list(e.w_source), "w_to": list(e.w_target)}
                for e in self.edges
            ],
        }


def normalize_primitive(v: Sequence[int]) -> tuple[Vec, int]:
    """``v = m * p`` with ``p`` primitive and its first nonzero entry positive."""
    if len(v) != 2:
        raise InputError("expected a 2-vector")
    p = primitive(v)
    m = v[0] // p[0] if p[0] else v[1] // p[1]
    return p, m


@dataclass(frozen=True)
class CommensurabilityClass:
    direction: Vec
    ends: tuple[tuple[str, str], ...]  # (edge id, "from" | "to")


def _incident_ends(spec: TubularGroupSpec, vertex: str):
    if vertex not in spec.vertices:
        raise InputError(f"unknown vertex {vertex!r}")
    for e in spec.edges:
        if e.source == vertex:
            yield e.id, "from", e.w_source
        if e.target == vertex:
            yield e.id, "to", e.w_target


def commensurability_classes(spec: TubularGroupSpec, vertex: str) -> list[CommensurabilityClass]:
    """Incident edge ends grouped by primitive direction, in first-occurrence order."""
    groups: dict[Vec, list[tuple[str, str]]] = {}
    for eid, side, w in _incident_ends(spec, vertex):
        groups.setdefault(normalize_primitive(w)[0], []).append((eid, side))
    return [CommensurabilityClass(p, tuple(ends)) for p, ends in groups.items()]


def max_classes(spec: TubularGroupSpec) -> int:
    return max(len(commensurability_classes(spec, v)) for v in spec.vertices)


# ---------------------------------------------------------------------------
# transport graph


@dataclass(frozen=True)
class Arc:
    edge: str
    tail: Node
    head: Node
    label: Fraction
    m_tail: int
    m_head: int


@dataclass(frozen=True)
class TransportGraph:
    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]

    def to_json(self) -> dict:
        return {
            "nodes": [_node_json(n) for n in self.nodes],
            "arcs": [
                {"edge": a.edge, "tail": _node_json(a.tail), "head": _node_json(a.head),
                 "label": _frac_json(a.label)}
                for a in self.arcs
            ],
        }


def _node_json(node: Node) -> dict:
    return {"vertex": node[0], "direction": list(node[1])}


def _frac_json(q: Fraction):
    return q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def build_transport_graph(spec: TubularGroupSpec) -> TransportGraph:
    nodes: dict[Node, None] = {}
    arcs = []
    for e in spec.edges:
        p_s, m_s = normalize_primitive(e.w_source)
        p_t, m_t = normalize_primitive(e.w_target)
        tail, head = (e.source, p_s), (e.target, p_t)
        nodes.setdefault(tail)
        nodes.setdefault(head)
        arcs.append(Arc(e.id, tail, head, Fraction(abs(m_t), abs(m_s)), abs(m_s), abs(m_t)))
    return TransportGraph(tuple(nodes), tuple(arcs))


@dataclass(frozen=True)
class Step:
    arc: int
    forward: bool


@dataclass(frozen=True)
class UnbalancedCycle:
    """Closed walk of arcs (each forward or reversed) with label product != 1."""

    start: Node
    steps: tuple[Step, ...]
    product: Fraction

    def to_json(self, tg: TransportGraph) -> dict:
        return {
            "start": _node_json(self.start),
            "steps": [{"edge": tg.arcs[s.arc].edge, "forward": s.forward} for s in self.steps],
            "product": _frac_json(self.product),
        }


def walk_product(tg: TransportGraph, start: Node, steps: Sequence[Step]) -> Fraction:
    """Label product of a walk; raises InputError if the walk is not closed and connected."""
    at = start
    prod = Fraction(1)
    for s in steps:
        a = tg.arcs[s.arc]
        src, dst = (a.tail, a.head) if s.forward else (a.head, a.tail)
        if src != at:
            raise InputError("walk is not connected")
        prod *= a.label if s.forward else 1 / a.label
        at = dst
    if at != start:
        raise InputError("walk is not closed")
    return prod


def _propagate(tg: TransportGraph):
    """Spanning-forest potentials ``phi(head) = phi(tail) * label`` per component.

    Returns ``(potential, parent_step, component_of, first_bad_arc)`` where
    ``parent_step[v]`` is the arc step reaching ``v`` from its tree parent.
    """
    incident: dict[Node, list[int]] = {v: [] for v in tg.nodes}
    for i, a in enumerate(tg.arcs):
        incident[a.tail].append(i)
        if a.head != a.tail:
            incident[a.head].append(i)
    potential: dict[Node, Fraction] = {}
    parent: dict[Node, tuple[Node, Step] | None] = {}
    component: dict[Node, int] = {}
    tree_arcs: set[int] = set()
    for comp, root in enumerate(v for v in tg.nodes):
        if root in potential:
            continue
        potential[root] = Fraction(1)
        parent[root] = None
        component[root] = comp
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for i in incident[u]:
                a = tg.arcs[i]
                if a.tail == u and a.head not in potential:
                    nxt, step, phi = a.head, Step(i, True), potential[u] * a.label
                elif a.head == u and a.tail not in potential:
                    nxt, step, phi = a.tail, Step(i, False), potential[u] / a.label
                else:
                    continue
                potential[nxt] = phi
                parent[nxt] = (u, step)
                component[nxt] = comp
                tree_arcs.add(i)
                queue.append(nxt)
    bad = [i for i, a in enumerate(tg.arcs)
           if i not in tree_arcs and potential[a.tail] * a.label != potential[a.head]]
    return potential, parent, component, bad


def _tree_path(parent, v: Node) -> list[tuple[Node, Step]]:
    """Steps from the root down to ``v``."""
    path = []
    while parent[v] is not None:
        u, step = parent[v]
        path.append((u, step))
        v = u
    path.reverse()
    return path


def _cycle_through(tg: TransportGraph, parent, arc: int) -> UnbalancedCycle:
    a = tg.arcs[arc]
    down_tail = _tree_path(parent, a.tail)
    down_head = _tree_path(parent, a.head)
    # drop the shared prefix (path to the lowest common ancestor)
    k = 0
    while k < min(len(down_tail), len(down_head)) and down_tail[k] == down_head[k]:
        k += 1
    lca = down_tail[k][0] if k < len(down_tail) else (
        down_head[k][0] if k < len(down_head) else a.tail)
    steps = [s for _, s in down_tail[k:]]
    steps.append(Step(arc, True))
    steps.extend(Step(s.arc, not s.forward) for _, s in reversed(down_head[k:]))
    return UnbalancedCycle(lca, tuple(steps), walk_product(tg, lca, steps))


def detect_unbalance(tg: TransportGraph) -> UnbalancedCycle | None:
    """A closed walk with label product != 1, or None if every cycle is balanced."""
    _, parent, _, bad = _propagate(tg)
    if not bad:
        return None
    return _cycle_through(tg, parent, bad[0])


def undistortion_certificate(tg: TransportGraph) -> dict[Node, int] | None:
    """Positive integer potentials ``N`` with ``N(head) = N(tail) * label`` on every arc.

    Each component is scaled to the smallest positive integer solution
    (entries with gcd 1).  None when some cycle is unbalanced.
    """
    potential, _, component, bad = _propagate(tg)
    if bad:
        return None
    out: dict[Node, int] = {}
    for comp in sorted(set(component.values())):
        members = [v for v in tg.nodes if component[v] == comp]
        scale = reduce(lcm, (potential[v].denominator for v in members), 1)
        ints = [int(potential[v] * scale) for v in members]
        g = reduce(gcd, ints)
        for v, k in zip(members, ints):
            out[v] = k // g
    return out


def verify_potentials(tg: TransportGraph, potentials: dict[Node, int]) -> bool:
    return all(potentials[v] > 0 for v in tg.nodes) and all(
        potentials[a.tail] * a.label == potentials[a.head] for a in tg.arcs
    )


def distorted_classes(tg: TransportGraph) -> frozenset[Node]:
    """Nodes joined by a walk to a node on an unbalanced cycle: whole unbalanced components."""
    _, _, component, bad = _propagate(tg)
    bad_comps = {component[tg.arcs[i].tail] for i in bad}
    return frozenset(v for v in tg.nodes if component[v] in bad_comps)


class Dehn(str, enum.Enum):
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"
    SUPER_QUADRATIC = "super_quadratic_unclassified"


def dehn_class(spec: TubularGroupSpec) -> Dehn:
    distorted = distorted_classes(build_transport_graph(spec))
    if not distorted:
        return Dehn.QUADRATIC
    per_vertex: dict[str, int] = {}
    for vertex, _ in distorted:
        per_vertex[vertex] = per_vertex.get(vertex, 0) + 1
    if max(per_vertex.values()) <= 1:
        return Dehn.EXPONENTIAL
    return Dehn.SUPER_QUADRATIC


@dataclass(frozen=True)
class BSWitness:
    """``g p^m g^-1 = p^n`` read off an unbalanced cycle.

    ``(m, n)`` is the cycle product ``n/m`` in lowest terms; ``(raw_m, raw_n)``
    are the products of the edge multipliers met along the walk, which give a
    relation that holds on the nose.
    """

    m: int
    n: int
    raw_m: int
    raw_n: int
    cycle: UnbalancedCycle

    def to_json(self, tg: TransportGraph) -> dict:
        return {"m": self.m, "n": self.n, "raw_m": self.raw_m, "raw_n": self.raw_n,
                "cycle": self.cycle.to_json(tg)}


def bs_witness_from_cycle(tg: TransportGraph, cycle: UnbalancedCycle) -> BSWitness:
    raw_m = raw_n = 1
    for s in cycle.steps:
        a = tg.arcs[s.arc]
        enter, leave = (a.m_tail, a.m_head) if s.forward else (a.m_head, a.m_tail)
        raw_m *= enter
        raw_n *= leave
    q = cycle.product
    return BSWitness(q.denominator, q.numerator, raw_m, raw_n, cycle)


def bs_witness(spec: TubularGroupSpec) -> BSWitness | None:
    tg = build_transport_graph(spec)
    cycle = detect_unbalance(tg)
    if cycle is None:
        return None
    return bs_witness_from_cycle(tg, cycle)


# ---------------------------------------------------------------------------
# verdict


class TubularStatus(str, enum.Enum):
    CUBULATED = "CoarseMedian_CocompactlyCubulated_VirtuallySpecial"
    NO_MEDIAN_RBF = "NoCoarseMedian_via_RBF"
    NO_MEDIAN_DISTORTION = "NoCoarseMedian_via_Distortion"


@dataclass
class TubularVerdict:
    status: TubularStatus
    distorted: bool
    dehn: Dehn
    max_classes: int
    unbalanced_cycle: UnbalancedCycle | None = None
    bs: BSWitness | None = None
    potentials: dict[Node, int] | None = None
    rbf: RbfSpec | None = None
    rbf_vertex: str | None = None
    reasons: list[str] = field(default_factory=list)
    transport: TransportGraph | None = None

    def to_json(self, witness: bool = True) -> dict:
        tg = self.transport
        out: dict = {
            "status": self.status.value,
            "distorted": self.distorted,
            "dehn": self.dehn.value,
            "max_classes": self.max_classes,
            "reasons": list(self.reasons),
        }
        if self.bs is not None:
            out["bs_witness"] = {"m": self.bs.m, "n": self.bs.n}
        if self.rbf is not None:
            out["rbf"] = self.rbf.to_json()
            out["rbf_vertex"] = self.rbf_vertex
        if witness and tg is not None:
            out["certificates"] = {
                "transport_graph": tg.to_json(),
                "unbalanced_cycle": self.unbalanced_cycle.to_json(tg) if self.unbalanced_cycle else None,
                "bs_witness": self.bs.to_json(tg) if self.bs else None,
                "potentials": None if self.potentials is None else [
                    {**_node_json(v), "N": k} for v, k in self.potentials.items()
                ],
            }
        return out


def classify_tubular(spec: TubularGroupSpec) -> TubularVerdict:
    """Trichotomy: distorted, undistorted with a 3-class vertex, or cubulated."""
    tg = build_transport_graph(spec)
    cycle = detect_unbalance(tg)
    dehn = dehn_class(spec)
    classes = max_classes(spec)
    if cycle is not None:
        bs = bs_witness_from_cycle(tg, cycle)
        reasons = [
            f"transport cycle with label product {cycle.product} != 1: "
            f"a vertex group is distorted (BS({bs.m},{bs.n}) relation)",
            f"distorted tubular groups have super-quadratic Dehn function ({dehn.value})",
            "coarse median groups have quadratic isoperimetric function",
            "no coarse median",
        ]
        return TubularVerdict(TubularStatus.NO_MEDIAN_DISTORTION, True, dehn, classes,
                              unbalanced_cycle=cycle, bs=bs, reasons=reasons, transport=tg)
    potentials = undistortion_certificate(tg)
    for v in spec.vertices:
        rbf = tubular_rbf_directions(spec, v)
        if rbf is not None:
            dirs = ", ".join(str(list(d)) for d in rbf.directions)
            reasons = [
                "all transport cycles balanced: undistorted, quadratic Dehn function",
                f"vertex {v} has three non-commensurable incident edge groups ({dirs}): "
                "a quasi-isometrically embedded 2-RBF",
                "geometric dimension 2 bounds the rank of any coarse median by 2",
                "a rank-2 coarse median space admits no quasi-isometric embedding of a 2-RBF",
                "no coarse median",
            ]
            return TubularVerdict(TubularStatus.NO_MEDIAN_RBF, False, dehn, classes,
                                  potentials=potentials, rbf=rbf, rbf_vertex=v,
                                  reasons=reasons, transport=tg)
    reasons = [
        "all transport cycles balanced: undistorted, no BS(m,n) subgroup with m != +-n",
        f"every vertex has at most {classes} commensurability classes of incident edge groups",
        "undistorted with at most two classes per vertex: cocompactly cubulated and virtually compact special",
    ]
    return TubularVerdict(TubularStatus.CUBULATED, False, dehn, classes,
                          potentials=potentials, reasons=reasons, transport=tg)


def verify_verdict(spec: TubularGroupSpec, verdict: TubularVerdict) -> bool:
    """Re-check the certificates of a verdict against the group spec."""
    tg = build_transport_graph(spec)
    if verdict.distorted == (verdict.potentials is not None):
        return False
    if (verdict.rbf is not None) != (verdict.status is TubularStatus.NO_MEDIAN_RBF):
        return False
    if verdict.distorted:
        cyc = verdict.unbalanced_cycle
        if cyc is None or walk_product(tg, cyc.start, cyc.steps) != cyc.product or cyc.product == 1:
            return False
        if verdict.bs is None or verdict.bs.m in (verdict.bs.n, -verdict.bs.n):
            return False
    else:
        if not verify_potentials(tg, verdict.potentials):
            return False
    if verdict.rbf is not None:
        from .rbf import validate_rbf_spec

        if not validate_rbf_spec(verdict.rbf).ok:
            return False
        dirs = {c.direction for c in commensurability_classes(spec, verdict.rbf_vertex)}
        if not set(verdict.rbf.directions) <= dirs:
            return False
    return True
