"""Richly branching flats: direction data, validation and a discrete planar model.

An n-RBF is a base flat ``Z^n`` with half-flats glued along every hyperplane
``p * v_i + v_i^perp`` for ``p`` in a coarsely dense position set ``P_i``.
Here we only certify that such direction data exists and is well formed; the
obstruction it licenses is not simulated.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import TYPE_CHECKING, Sequence

from .errors import InputError, LimitError, PreconditionError

if TYPE_CHECKING:
    from .fbc import RichLinearityWitness

MODEL_LIMIT = 200_000

LATTICE = "lattice"


@dataclass(frozen=True)
class PositionSet:
    """A periodic subset of R: ``{p + k * period : p in points, k in Z}``."""

    points: tuple[Fraction, ...]
    period: Fraction

    def max_gap(self) -> Fraction:
        pts = sorted({p % self.period for p in self.points})
        gaps = [b - a for a, b in zip(pts, pts[1:])]
        gaps.append(pts[0] + self.period - pts[-1])
        return max(gaps)


@dataclass(frozen=True)
class RbfSpec:
    n: int
    directions: tuple[tuple[int, ...], ...]
    positions: str | tuple[PositionSet, ...] = LATTICE
    density: Fraction = Fraction(1)
    provenance: str = ""

    def to_json(self) -> dict:
        if self.positions == LATTICE:
            positions: object = LATTICE
            periods = None
        else:
            positions = [[_num(p) for p in ps.points] for ps in self.positions]
            periods = [_num(ps.period) for ps in self.positions]
        out = {
            "n": self.n,
            "directions": [list(v) for v in self.directions],
            "positions": positions,
            "density": _num(self.density),
            "provenance": self.provenance,
        }
        if periods is not None:
            out["periods"] = periods
        return out

    @classmethod
    def from_json(cls, data: dict) -> "RbfSpec":
        try:
            n = data["n"]
            directions = tuple(tuple(int(c) for c in v) for v in data["directions"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError("RBF JSON needs 'n' and integer 'directions'") from exc
        raw = data.get("positions", LATTICE)
        density = _frac(data.get("density", 1), "density")
        if raw == LATTICE:
            positions: str | tuple[PositionSet, ...] = LATTICE
        else:
            periods = data.get("periods")
            if periods is None or len(periods) != len(raw):
                raise InputError("explicit positions need a matching 'periods' list", path="periods")
            sets = []
            for i, (pts, per) in enumerate(zip(raw, periods)):
                period = _frac(per, f"periods[{i}]")
                if period <= 0 or not pts:
                    raise InputError("each position set needs points and a positive period",
                                     path=f"positions[{i}]")
                sets.append(PositionSet(tuple(_frac(p, f"positions[{i}]") for p in pts), period))
            positions = tuple(sets)
        return cls(int(n), directions, positions, density, str(data.get("provenance", "")))


def _num(v: Fraction):
    return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _frac(v, path: str) -> Fraction:
    if isinstance(v, bool) or isinstance(v, float) and not v.is_integer():
        raise InputError("expected an exact rational", path=path)
    try:
        return Fraction(v)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InputError("expected an exact rational", path=path) from exc


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    problems: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "problems": list(self.problems)}


def parallel(u: Sequence[int], v: Sequence[int]) -> bool:
    """True iff u and v are linearly dependent over Q (all 2x2 minors vanish)."""
    return all(u[i] * v[j] - u[j] * v[i] == 0 for i, j in itertools.combinations(range(len(u)), 2))


def validate_rbf_spec(spec: RbfSpec) -> ValidationReport:
    problems: list[str] = []
    if spec.n < 2:
        problems.append(f"dimension {spec.n} < 2")
    if len(spec.directions) != spec.n + 1:
        problems.append(f"expected {spec.n + 1} directions, got {len(spec.directions)}")
    for i, v in enumerate(spec.directions):
        if len(v) != spec.n:
            problems.append(f"direction {i} {list(v)} is not in Z^{spec.n}")
        elif not any(v):
            problems.append(f"direction {i} is zero")
    if problems:
        return ValidationReport(False, tuple(problems))
    for (i, u), (j, v) in itertools.combinations(enumerate(spec.directions), 2):
        if parallel(u, v):
            problems.append(f"directions {i} {list(u)} and {j} {list(v)} are parallel")
    if spec.density <= 0:
        problems.append("density constant must be positive")
    elif spec.positions != LATTICE:
        if len(spec.positions) != len(spec.directions):
            problems.append("need one position set per direction")
        else:
            for i, ps in enumerate(spec.positions):
                gap = ps.max_gap()
                # every real lies within gap/2 of a position
                if gap > 2 * spec.density:
                    problems.append(f"position set {i} has a gap of {gap} > 2 * density {spec.density}")
    return ValidationReport(not problems, tuple(problems))


def primitive(v: Sequence[int]) -> tuple[int, ...]:
    """Primitive integer vector: gcd 1, first nonzero coordinate positive."""
    g = 0
    for c in v:
        g = gcd(g, c)
    if g == 0:
        raise InputError("zero vector has no primitive form")
    p = [c // g for c in v]
    lead = next(c for c in p if c)
    return tuple(-c for c in p) if lead < 0 else tuple(p)


def tubular_rbf_directions(spec, vertex: str) -> RbfSpec | None:
    """2-RBF direction data at a vertex with three non-commensurable incident edge groups.

    Takes the first three commensurability classes in edge order.
    """
    from .tubular import commensurability_classes

    classes = commensurability_classes(spec, vertex)
    if len(classes) < 3:
        return None
    dirs = tuple(c.direction for c in classes[:3])
    return RbfSpec(2, dirs, LATTICE, Fraction(1), f"tubular vertex {vertex}")


def fbc_rbf_directions(witness: "RichLinearityWitness") -> RbfSpec:
    """Branching directions in (cycle axis, fibre axis) coordinates.

    A linear stratum with suffix ``p^k`` glues along lines where one fibre
    step moves ``k`` steps along ``p``: direction ``(k, 1)``.  A nearby
    source contributes fibre lines, direction ``(0, 1)``.
    """
    exps = [s.exponent for s in witness.strata]
    dirs = [(k, 1) for k in exps]
    if witness.source is not None:
        dirs.append((0, 1))
    if len(dirs) != 3:
        raise PreconditionError(f"witness yields {len(dirs)} branching directions, need 3")
    for (i, u), (j, v) in itertools.combinations(enumerate(dirs), 2):
        if parallel(u, v):
            names = [s.edge for s in witness.strata]
            raise PreconditionError(
                f"strata {names[i]} and {names[j]} have equal suffix exponent {u[0]} "
                "and give parallel branching lines"
            )
    return RbfSpec(2, tuple(dirs), LATTICE, Fraction(1), f"rich linearity on cycle {witness.cycle}")


# ---------------------------------------------------------------------------
# discrete model


@dataclass(frozen=True)
class Strip:
    direction_index: int
    position: Fraction
    line: tuple[tuple[int, int], ...]
    vertices: frozenset
    depth: int


@dataclass
class DiscreteRbfModel:
    radius: int
    depth: int
    directions: tuple[tuple[int, int], ...]
    base: frozenset
    strips: list[Strip] = field(default_factory=list)
    adjacency: list[tuple] = field(default_factory=list)

    @property
    def vertex_count(self) -> int:
        return len(self.base) + sum(len(s.vertices) - len(s.line) for s in self.strips)

    def summary(self) -> dict:
        return {
            "radius": self.radius,
            "depth": self.depth,
            "directions": [list(v) for v in self.directions],
            "base_vertices": len(self.base),
            "strips": len(self.strips),
            "strips_per_direction": [
                sum(1 for s in self.strips if s.direction_index == i) for i in range(len(self.directions))
            ],
            "vertices": self.vertex_count,
            "edges": len(self.adjacency),
        }


def _positions_for(spec: RbfSpec, i: int, v: tuple[int, int], radius: int) -> list[Fraction]:
    """Positions p whose line <x, v> = p |v|^2 can meet the base box."""
    norm2 = v[0] * v[0] + v[1] * v[1]
    reach = radius * (abs(v[0]) + abs(v[1]))
    lo, hi = Fraction(-reach, norm2), Fraction(reach, norm2)
    if spec.positions == LATTICE:
        return [Fraction(p) for p in range(int(lo) - 1, int(hi) + 2) if lo <= p <= hi]
    ps = spec.positions[i]
    out = set()
    for base in ps.points:
        k0 = (lo - base) // ps.period
        k = k0
        while base + k * ps.period <= hi:
            p = base + k * ps.period
            if p >= lo:
                out.add(p)
            k += 1
    return sorted(out)


def build_discrete_rbf(spec: RbfSpec, radius: int, depth: int,
                       limit: int = MODEL_LIMIT) -> DiscreteRbfModel:
    """Base box ``[-R, R]^2`` with a half-strip of the given depth on every branching line.

    Strip vertices are ``("S", i, p, k, t)`` for the ``k``-th lattice point of
    the line at depth ``t >= 1``; depth 0 is the base point itself.
    """
    if spec.n != 2:
        raise InputError("only 2-dimensional models can be built")
    report = validate_rbf_spec(spec)
    if not report.ok:
        raise InputError("invalid RBF spec: " + "; ".join(report.problems))
    if radius < 1 or depth < 1:
        raise InputError("radius and depth must be positive integers")
    side = 2 * radius + 1
    # each direction has at most ~side lines of at most side points
    if side * side * (1 + 3 * depth) > limit:
        raise LimitError(f"model with R={radius}, L={depth} exceeds the size cap {limit}")
    base = frozenset(("B", x, y) for x in range(-radius, radius + 1) for y in range(-radius, radius + 1))
    adjacency: list[tuple] = []
    for x in range(-radius, radius + 1):
        for y in range(-radius, radius + 1):
            if x < radius:
                adjacency.append((("B", x, y), ("B", x + 1, y)))
            if y < radius:
                adjacency.append((("B", x, y), ("B", x, y + 1)))
    strips: list[Strip] = []
    directions = tuple((int(v[0]), int(v[1])) for v in spec.directions)
    for i, v in enumerate(directions):
        norm2 = v[0] * v[0] + v[1] * v[1]
        perp = (-v[1], v[0])
        for p in _positions_for(spec, i, v, radius):
            level = p * norm2
            line = sorted(
                ((x, y) for x in range(-radius, radius + 1) for y in range(-radius, radius + 1)
                 if x * v[0] + y * v[1] == level),
                key=lambda q: q[0] * perp[0] + q[1] * perp[1],
            )
            if not line:
                continue
            verts = {("B",) + q for q in line}
            for k, q in enumerate(line):
                prev = ("B",) + q
                for t in range(1, depth + 1):
                    node = ("S", i, p, k, t)
                    verts.add(node)
                    adjacency.append((prev, node))
                    if k > 0:
                        adjacency.append((("S", i, p, k - 1, t), node))
                    prev = node
            strips.append(Strip(i, p, tuple(line), frozenset(verts), depth))
    model = DiscreteRbfModel(radius, depth, directions, base, strips, adjacency)
    problems = check_model(model)
    if problems:  # pragma: no cover - construction guarantees these
        raise AssertionError("; ".join(problems))
    return model


def check_model(model: DiscreteRbfModel) -> list[str]:
    """Re-verify strip disjointness outside the base and attachment-line directions."""
    problems = []
    for s, t in itertools.combinations(range(len(model.strips)), 2):
        common = model.strips[s].vertices & model.strips[t].vertices
        if not common <= model.base:
            problems.append(f"strips {s} and {t} meet outside the base")
    for idx, strip in enumerate(model.strips):
        v = model.directions[strip.direction_index]
        for a, b in zip(strip.line, strip.line[1:]):
            if (b[0] - a[0]) * v[0] + (b[1] - a[1]) * v[1] != 0:
                problems.append(f"strip {idx} attachment line is not orthogonal to {list(v)}")
        if not {("B",) + q for q in strip.line} <= model.base:
            problems.append(f"strip {idx} attaches outside the base")
    return problems
