"""Exact finite median algebras.

A finite median algebra is stored as a total ternary table over an ordered
tuple of opaque string identifiers.  The element order is the canonical order
used for every deterministic tie-break (wall ordering, witness selection).

Subsets are handled internally as Python ``int`` bitmasks over element
indices; the public API speaks in ``frozenset`` of identifiers.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache, reduce
from math import lcm
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InputError, LimitError, PreconditionError

DEFAULT_LIMIT = 32
# tables are |M|^3 int16 entries; above this the memory cost is unreasonable
HARD_LIMIT = 256

__all__ = [
    "DEFAULT_LIMIT",
    "FiniteMedianAlgebra",
    "MedianCheck",
    "RankReport",
    "Wall",
    "ball",
    "ball_hull_bound_check",
    "closure",
    "convex_hull",
    "diagonal_chain",
    "diagonal_chain_scan",
    "enumerate_walls",
    "five_point_chain_check",
    "five_point_counterexample",
    "hull_depth",
    "hypercube",
    "interval",
    "is_convex",
    "j_closure",
    "lattice_box",
    "median_graph",
    "product",
    "rank",
    "rank_by_cube",
    "rank_by_walls",
    "subalgebra",
    "subalgebras",
    "tree",
    "verify_median_axioms",
    "verify_rank_report",
]


def _cap(size: int, limit: int | None, what: str) -> None:
    cap = DEFAULT_LIMIT if limit is None else limit
    if size > cap:
        raise LimitError(f"{what}: {size} elements exceeds the size cap {cap} (raise it with limit=)")
    if size > HARD_LIMIT:
        raise LimitError(f"{what}: {size} elements exceeds the hard ceiling {HARD_LIMIT}")


_int_fraction = lru_cache(maxsize=4096)(Fraction)


def _to_fraction(value) -> Fraction:
    if type(value) is Fraction:
        return value
    if type(value) is int:
        return _int_fraction(value)
    if isinstance(value, bool):
        raise InputError(f"metric entry {value!r} is not a number")
    if isinstance(value, float):
        # floats are only accepted when they are exact integers
        if not value.is_integer():
            raise InputError(f"metric entry {value!r} must be an exact rational")
        return Fraction(int(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"metric entry {value!r} is not an exact rational") from exc


def _pack_words(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean array along its last axis into little-endian uint64 words."""
    packed = np.packbits(bits, axis=-1, bitorder="little")
    pad = -packed.shape[-1] % 8
    if pad:
        packed = np.concatenate([packed, np.zeros(packed.shape[:-1] + (pad,), np.uint8)], axis=-1)
    return np.ascontiguousarray(packed).view("<u8")


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _checked_table(table, n: int) -> np.ndarray:
    """A read-only int16 copy of a total table on ``n`` elements."""
    raw = np.asarray(table)
    if raw.shape != (n, n, n):
        raise InputError(f"non-total table: expected shape {(n, n, n)}, got {raw.shape}")
    if raw.dtype != np.int16 and raw.size and (raw.min() < 0 or raw.max() >= n):
        raise InputError("table entries must be element indices")
    table = np.array(raw, dtype=np.int16)
    # for int16 input, negative entries wrap around to large unsigned values
    if table.size and table.view(np.uint16).max() >= n:
        raise InputError("table entries must be element indices")
    table.flags.writeable = False
    return table


@dataclass(frozen=True, eq=False)
class FiniteMedianAlgebra:
    """Element identifiers, a total ternary table and an optional exact metric.

    ``table[i, j, k]`` is the index of ``med(elements[i], elements[j], elements[k])``.
    Construction checks totality only; use :func:`verify_median_axioms` to check
    the median identities.
    """

    elements: tuple[str, ...]
    table: np.ndarray
    metric: tuple[tuple[Fraction, ...], ...] | None = None

    def __post_init__(self) -> None:
        elements = tuple(str(e) for e in self.elements)
        n = len(elements)
        if n == 0:
            raise InputError("a median algebra needs at least one element")
        if len(set(elements)) != n:
            raise InputError("element identifiers must be distinct")
        if n > HARD_LIMIT:
            raise LimitError(f"{n} elements exceeds the hard ceiling {HARD_LIMIT}")
        table = _checked_table(self.table, n)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "table", table)
        if self.metric is not None:
            rows = [tuple(_to_fraction(v) for v in row) for row in self.metric]
            if len(rows) != n or any(len(r) != n for r in rows):
                raise InputError(f"metric must be a {n}x{n} table")
            if any(v.numerator < 0 for r in rows for v in r):
                raise InputError("metric entries must be nonnegative")
            object.__setattr__(self, "metric", tuple(rows))

    def with_table(self, table) -> "FiniteMedianAlgebra":
        """Same elements and (already validated) metric with another table."""
        out = object.__new__(FiniteMedianAlgebra)
        object.__setattr__(out, "elements", self.elements)
        object.__setattr__(out, "table", _checked_table(table, len(self)))
        object.__setattr__(out, "metric", self.metric)
        return out

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        return f"FiniteMedianAlgebra(<{len(self)} elements>, metric={self.metric is not None})"

    @cached_property
    def index(self) -> dict[str, int]:
        return {e: i for i, e in enumerate(self.elements)}

    def idx(self, element: str) -> int:
        try:
            return self.index[element]
        except KeyError:
            raise InputError(f"unknown element {element!r}") from None

    def med(self, a: str, b: str, c: str) -> str:
        return self.elements[self.table[self.idx(a), self.idx(b), self.idx(c)]]

    def dist(self, a: str, b: str) -> Fraction:
        if self.metric is None:
            raise InputError("this median algebra carries no metric")
        return self.metric[self.idx(a)][self.idx(b)]

    @property
    def full_mask(self) -> int:
        return (1 << len(self)) - 1

    @cached_property
    def interval_masks(self) -> tuple[tuple[int, ...], ...]:
        """``interval_masks[i][j]`` is the bitmask of ``{x : med(i, j, x) = x}``."""
        n = len(self)
        words = _pack_words(self.table == np.arange(n, dtype=np.int16)[None, None, :])
        total = np.zeros(words.shape[:2], dtype=object)
        for k in range(words.shape[2]):
            total += words[..., k].astype(object) << (64 * k)
        return tuple(tuple(row) for row in total.tolist())

    @cached_property
    def metric_scale(self) -> int:
        """The lcm of the metric's denominators."""
        if self.metric is None:
            raise InputError("this median algebra carries no metric")
        return reduce(lcm, (v.denominator for r in self.metric for v in r), 1)

    @cached_property
    def scaled_metric(self) -> np.ndarray:
        """The metric multiplied by :attr:`metric_scale`, as exact int64."""
        scale = self.metric_scale
        return np.array([[v.numerator * (scale // v.denominator) for v in r] for r in self.metric],
                        dtype=np.int64)

    def mask(self, subset: Iterable[str]) -> int:
        m = 0
        for e in subset:
            m |= 1 << self.idx(e)
        return m

    def members(self, mask: int) -> frozenset[str]:
        return frozenset(self.elements[i] for i in _bits(mask))

    def sorted_members(self, mask: int) -> list[str]:
        return [self.elements[i] for i in sorted(_bits(mask))]

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict:
        n = len(self)
        grid = np.indices((n, n, n)).reshape(3, -1).T
        med = [[int(i), int(j), int(k), int(self.table[i, j, k])] for i, j, k in grid]
        out: dict = {"elements": list(self.elements), "med": med}
        if self.metric is not None:
            out["metric"] = [_fraction_json(v) for row in self.metric for v in row]
        return out

    @classmethod
    def from_json(cls, data: dict) -> "FiniteMedianAlgebra":
        try:
            elements = [str(e) for e in data["elements"]]
            entries = data["med"]
        except (KeyError, TypeError) as exc:
            raise InputError("median algebra JSON needs 'elements' and 'med'") from exc
        n = len(elements)
        if n > HARD_LIMIT:
            raise LimitError(f"{n} elements exceeds the hard ceiling {HARD_LIMIT}")
        table = np.full((n, n, n), -1, dtype=np.int32)
        for pos, entry in enumerate(entries):
            if not (isinstance(entry, (list, tuple)) and len(entry) == 4):
                raise InputError("entry must be [i, j, k, m]", path=f"med[{pos}]")
            if not all(isinstance(v, int) and 0 <= v < n for v in entry):
                raise InputError("indices out of range", path=f"med[{pos}]")
            i, j, k, m = entry
            if table[i, j, k] != -1:
                raise InputError(f"duplicate entry for ({i},{j},{k})", path=f"med[{pos}]")
            table[i, j, k] = m
        missing = np.argwhere(table < 0)
        if len(missing):
            i, j, k = (int(v) for v in missing[0])
            raise InputError(f"non-total table: no entry for ({i},{j},{k})", path="med")
        metric = None
        if data.get("metric") is not None:
            flat = data["metric"]
            if len(flat) != n * n:
                raise InputError(f"metric must have {n * n} entries", path="metric")
            metric = [flat[r * n:(r + 1) * n] for r in range(n)]
        return cls(tuple(elements), table, metric)


def _fraction_json(v: Fraction):
    return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


# ---------------------------------------------------------------------------
# axiom verification


@dataclass(frozen=True)
class MedianCheck:
    ok: bool
    axiom: str | None = None
    counterexample: tuple[str, ...] | None = None
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "axiom": self.axiom,
            "counterexample": list(self.counterexample) if self.counterexample else None,
            "detail": self.detail,
        }


def _first(mask: np.ndarray) -> tuple[int, ...] | None:
    flat = mask.ravel()
    i = int(flat.argmax())
    if not flat[i]:
        return None
    return tuple(int(v) for v in np.unravel_index(i, mask.shape))


def five_point_counterexample(M: FiniteMedianAlgebra) -> tuple[int, int, int, int, int] | None:
    """Brute-force search for ``(a, b, x, y, z)`` violating the five-point condition.

    Lexicographically first violation in index order, or None.  Cost is |M|^5.
    """
    t = M.table
    n = len(M)
    ar = np.arange(n)
    for a in range(n):
        for b in range(n):
            proj = t[a, b]
            lhs = proj[t]
            rhs = t[proj[:, None, None], proj[None, :, None], ar[None, None, :]]
            hit = _first(lhs != rhs)
            if hit is not None:
                return (a, b) + hit
    return None


def _edges(M: FiniteMedianAlgebra) -> list[tuple[int, int]]:
    iv = M.interval_masks
    n = len(M)
    return [(i, j) for i in range(n) for j in range(i + 1, n) if iv[i][j] == (1 << i) | (1 << j)]


def _edge_halfspaces(M: FiniteMedianAlgebra) -> list[int]:
    """Distinct halfspaces cut by 'edges' (pairs whose interval is the pair).

    Each is returned as the bitmask of the side *not* containing element 0,
    sorted by the sorted index tuple of that side.
    """
    t = M.table
    full = M.full_mask
    seen: set[int] = set()
    for i, j in _edges(M):
        side = 0
        for x in np.flatnonzero(t[i, j] == i):
            side |= 1 << int(x)
        if side & 1:
            side = full ^ side
        if side:
            seen.add(side)
    return sorted(seen, key=lambda s: sorted(_bits(s)))


def _codes(n: int, sides: Sequence[int]) -> np.ndarray:
    words = max(1, -(-len(sides) // 64))
    codes = np.zeros((n, words), dtype=np.uint64)
    for w, side in enumerate(sides):
        bit = np.uint64(1) << np.uint64(w % 64)
        for x in _bits(side):
            codes[x, w // 64] |= bit
    return codes


def _embeds_in_cube(M: FiniteMedianAlgebra) -> bool:
    """Certificate check: the edge halfspaces give an injective median morphism into a cube.

    Any subset of a hypercube closed under majority is median, so success
    proves the median identities.  For genuine finite median algebras the
    edge halfspaces are exactly the walls, so success is also necessary.
    """
    n = len(M)
    codes = _codes(n, _edge_halfspaces(M))
    if len({row.tobytes() for row in codes}) != n:
        return False
    t = M.table
    block = max(1, 2_000_000 // (n * n))
    for k in range(codes.shape[1]):
        c = codes[:, k]
        for lo in range(0, n, block):
            a = c[lo:lo + block, None, None]
            maj = (a & c[None, :, None]) | (a & c[None, None, :]) | (c[None, :, None] & c[None, None, :])
            if not np.array_equal(c[t[lo:lo + block]], maj):
                return False
    return True


def _metric_violation(M: FiniteMedianAlgebra) -> tuple[tuple[int, ...], str] | None:
    D = M.scaled_metric
    n = len(M)
    if np.any(np.diag(D) != 0):
        i = int(np.flatnonzero(np.diag(D))[0])
        return (i,), "d(x,x) != 0"
    hit = _first(D != D.T)
    if hit is not None:
        return hit, "metric not symmetric"
    off = D + np.eye(n, dtype=np.int64)
    hit = _first(off <= 0)
    if hit is not None:
        return hit, "distinct points at distance 0"
    # packed[x, y] has bit p set iff d(x,p) + d(p,y) = d(x,y)
    between = D[:, None, :] + D.T[None, :, :] == D[:, :, None]
    packed = _pack_words(between)
    onehot = _pack_words(np.eye(n, dtype=bool))
    t = M.table
    block = max(1, 2_000_000 // (n * n))
    for lo in range(0, n, block):
        xs = slice(lo, lo + block)
        bad = np.zeros((min(block, n - lo), n, n), dtype=bool)
        for k in range(packed.shape[2]):
            p = packed[:, :, k]
            common = p[xs][:, :, None] & p[xs][:, None, :] & p[None, :, :]
            bad |= common != onehot[:, k][t[xs]]
        hit = _first(bad)
        if hit is not None:
            x, y, z = lo + hit[0], hit[1], hit[2]
            m = int(t[x, y, z])
            common = packed[x, y] & packed[x, z] & packed[y, z]
            inside = int(common[m // 64]) >> (m % 64) & 1
            why = "median point is not unique" if inside else "median is not between the three points"
            return (x, y, z), why
    return None


def verify_median_axioms(M: FiniteMedianAlgebra) -> MedianCheck:
    """Check absorption, symmetry, the five-point condition and (if present) the metric.

    On failure the first violated axiom is reported with a concrete tuple of
    element identifiers.  The five-point condition is settled by a hypercube
    embedding certificate; only when that fails is the |M|^5 search run to
    produce the counterexample.
    """
    t = M.table
    n = len(M)
    ids = M.elements
    diag = t[np.arange(n), np.arange(n), :]
    hit = _first(diag != np.arange(n)[:, None])
    if hit is not None:
        a, x = hit
        return MedianCheck(False, "absorption", (ids[a], ids[a], ids[x]),
                           f"med(a,a,x) = {ids[t[a, a, x]]}, expected {ids[a]}")
    # a transposition and a 3-cycle generate all permutations
    for perm in ((1, 0, 2), (1, 2, 0)):
        hit = _first(t != t.transpose(perm))
        if hit is not None:
            a, b, c = hit
            return MedianCheck(False, "symmetry", (ids[a], ids[b], ids[c]),
                               f"med changes under argument permutation {perm}")
    if not _embeds_in_cube(M):
        found = five_point_counterexample(M)
        if found is None:  # pragma: no cover - would contradict the embedding theorem
            raise AssertionError("cube embedding failed but no five-point violation exists")
        return MedianCheck(False, "five_point", tuple(ids[i] for i in found),
                           "med(a,b,med(x,y,z)) != med(med(a,b,x),med(a,b,y),z)")
    if M.metric is not None:
        bad = _metric_violation(M)
        if bad is not None:
            where, why = bad
            return MedianCheck(False, "metric", tuple(ids[i] for i in where), why)
    return MedianCheck(True)


# ---------------------------------------------------------------------------
# intervals, J, hulls


def interval(M: FiniteMedianAlgebra, a: str, b: str) -> frozenset[str]:
    return M.members(M.interval_masks[M.idx(a)][M.idx(b)])


def _j_mask(M: FiniteMedianAlgebra, mask: int) -> int:
    iv = M.interval_masks
    idx = list(_bits(mask))
    out = 0
    for pos, i in enumerate(idx):
        row = iv[i]
        for j in idx[pos:]:
            out |= row[j]
    return out


def _nonempty(M: FiniteMedianAlgebra, subset: Iterable[str]) -> int:
    mask = M.mask(subset)
    if not mask:
        raise InputError("subset must be nonempty")
    return mask


def j_closure(M: FiniteMedianAlgebra, subset: Iterable[str]) -> frozenset[str]:
    """``J(A) = {med(a, a', x) : a, a' in A, x in M}``, the union of intervals over A."""
    return M.members(_j_mask(M, _nonempty(M, subset)))


def _hull_mask(M: FiniteMedianAlgebra, mask: int) -> tuple[int, int]:
    steps = 0
    while True:
        nxt = _j_mask(M, mask)
        if nxt == mask:
            return mask, steps
        mask = nxt
        steps += 1


def convex_hull(M: FiniteMedianAlgebra, subset: Iterable[str]) -> frozenset[str]:
    """Smallest median-convex superset, by iterating J to a fixed point."""
    return M.members(_hull_mask(M, _nonempty(M, subset))[0])


def hull_depth(M: FiniteMedianAlgebra, subset: Iterable[str]) -> int:
    """Number of strictly increasing applications of J before the hull is reached."""
    return _hull_mask(M, _nonempty(M, subset))[1]


def is_convex(M: FiniteMedianAlgebra, subset: Iterable[str]) -> bool:
    mask = M.mask(subset)
    return not mask or _j_mask(M, mask) == mask


def closure(M: FiniteMedianAlgebra, subset: Iterable[str]) -> frozenset[str]:
    """Median subalgebra generated by ``subset``."""
    return M.members(_closure_mask(M, _nonempty(M, subset)))


def _closure_mask(M: FiniteMedianAlgebra, mask: int) -> int:
    t = M.table
    while True:
        idx = np.array(list(_bits(mask)))
        out = 0
        for v in np.unique(t[np.ix_(idx, idx, idx)]):
            out |= 1 << int(v)
        if out == mask:
            return mask
        mask = out


def subalgebra(M: FiniteMedianAlgebra, subset: Iterable[str]) -> FiniteMedianAlgebra:
    """Restriction of ``M`` to a median-closed subset, in canonical element order."""
    mask = _nonempty(M, subset)
    if _closure_mask(M, mask) != mask:
        raise InputError("subset is not closed under the median")
    idx = np.array(sorted(_bits(mask)))
    remap = np.full(len(M), -1, dtype=np.int32)
    remap[idx] = np.arange(len(idx))
    table = remap[M.table[np.ix_(idx, idx, idx)]]
    metric = None
    if M.metric is not None:
        metric = [[M.metric[i][j] for j in idx] for i in idx]
    return FiniteMedianAlgebra(tuple(M.elements[i] for i in idx), table, metric)


def subalgebras(M: FiniteMedianAlgebra, limit: int | None = None) -> list[frozenset[str]]:
    """All nonempty median subalgebras, each as a set of identifiers."""
    _cap(len(M), limit, "subalgebras")
    n = len(M)
    seen: set[int] = set()
    queue = deque(1 << i for i in range(n))
    seen.update(queue)
    while queue:
        mask = queue.popleft()
        for x in range(n):
            if mask >> x & 1:
                continue
            nxt = _closure_mask(M, mask | 1 << x)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return [M.members(m) for m in sorted(seen, key=lambda s: (s.bit_count(), sorted(_bits(s))))]


def ball(M: FiniteMedianAlgebra, x: str, r) -> frozenset[str]:
    r = _to_fraction(r)
    if M.metric is None:
        raise InputError("ball needs a metric")
    row = M.metric[M.idx(x)]
    return frozenset(e for e, d in zip(M.elements, row) if d <= r)


def _ball_mask(row: np.ndarray, scale: int, r: Fraction) -> int:
    # scaled distances are integers, so d <= r iff d * scale <= floor(r * scale)
    inside = row <= r.numerator * scale // r.denominator
    return int.from_bytes(np.packbits(inside, bitorder="little").tobytes(), "little")


def _wall_data(M: FiniteMedianAlgebra) -> tuple[int, list[int]]:
    """``(rank, both sides of every wall)``, computed once per algebra."""
    cached = M.__dict__.get("_wall_data")
    if cached is None:
        masks = _wall_masks(M, HARD_LIMIT)
        full = M.full_mask
        rank = len(_max_clique(_crossing(masks, full)))
        cached = (rank, masks + [full ^ m for m in masks])
        object.__setattr__(M, "_wall_data", cached)
    return cached


def ball_hull_bound_check(M: FiniteMedianAlgebra, x: str, r, limit: int | None = None) -> bool:
    """True iff the convex hull of ``B(x, r)`` lies in ``B(x, 2**rank(M) * r)``.

    The hull is taken as the intersection of the wall halfspaces containing the
    ball, which is the convex hull in a finite median algebra.  Walls and rank
    are cached on ``M`` so scanning many ``(x, r)`` stays cheap.
    """
    if M.metric is None:
        raise InputError("ball_hull_bound_check needs a metric")
    r = _to_fraction(r)
    if r < 0:
        raise InputError("radius must be nonnegative")
    _cap(len(M), limit, "ball_hull_bound_check")
    rank, sides = _wall_data(M)
    row, scale = M.scaled_metric[M.idx(x)], M.metric_scale
    ball_mask = _ball_mask(row, scale, r)
    hull = M.full_mask
    for side in sides:
        if not ball_mask & ~side:
            hull &= side
    return not hull & ~_ball_mask(row, scale, r * 2 ** rank)


# ---------------------------------------------------------------------------
# walls and rank


@dataclass(frozen=True)
class Wall:
    side_a: frozenset[str]
    side_b: frozenset[str]

    def crosses(self, other: "Wall") -> bool:
        return all(
            p & q for p in (self.side_a, self.side_b) for q in (other.side_a, other.side_b)
        )

    def to_json(self) -> dict:
        return {"side_a": sorted(self.side_a), "side_b": sorted(self.side_b)}


def _wall_masks(M: FiniteMedianAlgebra, limit: int | None) -> list[int]:
    _cap(len(M), limit, "enumerate_walls")
    sides = _edge_halfspaces(M)
    full = M.full_mask
    for side in sides:
        if not (is_convex_mask(M, side) and is_convex_mask(M, full ^ side)):
            raise PreconditionError("table is not a median algebra: a cut halfspace is not convex")
    return sides


def is_convex_mask(M: FiniteMedianAlgebra, mask: int) -> bool:
    return _j_mask(M, mask) == mask


def _wall(M: FiniteMedianAlgebra, side_b: int) -> Wall:
    return Wall(M.members(M.full_mask ^ side_b), M.members(side_b))


def enumerate_walls(M: FiniteMedianAlgebra, limit: int | None = None) -> list[Wall]:
    """All walls of a median algebra.

    Every wall of a finite median algebra separates some pair ``a, b`` whose
    interval is ``{a, b}``, and is then ``{x : med(a,b,x) = a}`` versus the
    rest.  Side ``a`` always holds the first element in canonical order.
    """
    return [_wall(M, s) for s in _wall_masks(M, limit)]


def _crossing(masks: Sequence[int], full: int) -> list[list[bool]]:
    def cross(p: int, q: int) -> bool:
        pc, qc = full ^ p, full ^ q
        return bool(p & q and p & qc and pc & q and pc & qc)

    return [[cross(p, q) for q in masks] for p in masks]


def _max_clique(adj: list[list[bool]]) -> list[int]:
    """Lexicographically least maximum clique (depth-first in index order)."""
    k = len(adj)
    best: list[int] = []

    def grow(current: list[int], candidates: list[int]) -> None:
        nonlocal best
        if len(current) > len(best):
            best = list(current)
        for pos, v in enumerate(candidates):
            if len(current) + len(candidates) - pos <= len(best):
                return
            grow(current + [v], [w for w in candidates[pos + 1:] if adj[v][w]])

    grow([], list(range(k)))
    return best


def rank_by_walls(M: FiniteMedianAlgebra, limit: int | None = None) -> tuple[int, list[Wall]]:
    masks = _wall_masks(M, limit)
    clique = _max_clique(_crossing(masks, M.full_mask))
    return len(clique), [_wall(M, masks[i]) for i in clique]


def _cube_majority_ok(images: list[int], table: np.ndarray, dim: int) -> bool:
    size = 1 << dim
    img = np.array(images)
    s = np.arange(size)
    a, b, c = s[:, None, None], s[None, :, None], s[None, None, :]
    maj = (a & b) | (a & c) | (b & c)
    return np.array_equal(img[maj], table[img[a], img[b], img[c]])


def _cube_images(M: FiniteMedianAlgebra, o: int, top: int, cs: Sequence[int]) -> list[int] | None:
    t = M.table
    dim = len(cs)
    images = [o] * (1 << dim)
    for s in range(1, 1 << dim):
        k = s.bit_length() - 1
        images[s] = int(t[images[s ^ (1 << k)], cs[k], top])
    if len(set(images)) != len(images):
        return None
    return images


def _find_cube(M: FiniteMedianAlgebra, dim: int) -> list[int] | None:
    n = len(M)
    if dim == 0:
        return [0]
    if dim == 1:
        return [0, 1] if n >= 2 else None
    t = M.table
    iv = M.interval_masks
    for o in range(n):
        for top in range(n):
            if top == o:
                continue
            inner = [x for x in _bits(iv[o][top]) if x not in (o, top)]
            inner.sort()
            if len(inner) < dim:
                continue
            # pairs of cube neighbours of o must have median o with o
            compat = {x: {y for y in inner if y != x and t[x, y, o] == o} for x in inner}

            def extend(chosen: list[int], pool: list[int]) -> list[int] | None:
                if len(chosen) == dim:
                    images = _cube_images(M, o, top, chosen)
                    if images is not None and _cube_majority_ok(images, t, dim):
                        return images
                    return None
                for pos, x in enumerate(pool):
                    if len(chosen) + len(pool) - pos < dim:
                        return None
                    found = extend(chosen + [x], [y for y in pool[pos + 1:] if y in compat[x]])
                    if found is not None:
                        return found
                return None

            found = extend([], inner)
            if found is not None:
                return found
    return None


def rank_by_cube(M: FiniteMedianAlgebra, limit: int | None = None) -> tuple[int, list[str]]:
    """Largest ``n`` with an injective median morphism ``{0,1}^n -> M``.

    The witness lists the image of each cube vertex, indexed by the vertex's
    bitmask.  Search is over a bottom ``o``, a top, and the images of the unit
    vectors inside the interval between them.
    """
    _cap(len(M), limit, "rank_by_cube")
    best = _find_cube(M, 0)
    dim = 0
    while (1 << (dim + 1)) <= len(M):
        found = _find_cube(M, dim + 1)
        if found is None:
            break
        best, dim = found, dim + 1
    return dim, [M.elements[i] for i in best]


@dataclass(frozen=True)
class RankReport:
    rank_walls: int
    rank_cube: int
    witness_walls: tuple[Wall, ...]
    witness_cube: tuple[str, ...]

    @property
    def agree(self) -> bool:
        return self.rank_walls == self.rank_cube

    def to_json(self) -> dict:
        dim = self.rank_cube
        return {
            "rank_walls": self.rank_walls,
            "rank_cube": self.rank_cube,
            "witness_walls": [w.to_json() for w in self.witness_walls],
            "witness_cube": {format(s, f"0{dim}b")[::-1] if dim else "": e
                             for s, e in enumerate(self.witness_cube)},
        }


def rank(M: FiniteMedianAlgebra, limit: int | None = None) -> RankReport:
    rw, walls = rank_by_walls(M, limit)
    rc, cube = rank_by_cube(M, limit)
    return RankReport(rw, rc, tuple(walls), tuple(cube))


def verify_rank_report(M: FiniteMedianAlgebra, report: RankReport) -> bool:
    """Re-check both witnesses of a rank report independently of the search."""
    walls = report.witness_walls
    if len(walls) != report.rank_walls:
        return False
    for w in walls:
        if not (w.side_a and w.side_b and is_convex(M, w.side_a) and is_convex(M, w.side_b)):
            return False
        if w.side_a | w.side_b != frozenset(M.elements) or w.side_a & w.side_b:
            return False
    if not all(p.crosses(q) for p, q in itertools.combinations(walls, 2)):
        return False
    cube = [M.idx(e) for e in report.witness_cube]
    if len(cube) != 1 << report.rank_cube or len(set(cube)) != len(cube):
        return False
    return _cube_majority_ok(cube, M.table, report.rank_cube)


# ---------------------------------------------------------------------------
# the diagonal five-point chain


def _premises(M, zero, one, a_plus, a_minus, b) -> list[tuple[str, str, str, str, str]]:
    return [
        ("med(0,1,a+) = a+", zero, one, a_plus, a_plus),
        ("med(0,1,a-) = a-", zero, one, a_minus, a_minus),
        ("med(a+,a-,0) = 0", a_plus, a_minus, zero, zero),
        ("med(a+,a-,1) = 1", a_plus, a_minus, one, one),
        ("med(0,1,b) = b", zero, one, b, b),
        ("med(a+,b,0) = 0", a_plus, b, zero, zero),
        ("med(a+,b,1) = 1", a_plus, b, one, one),
    ]


def diagonal_chain(M: FiniteMedianAlgebra, zero: str, one: str, a_plus: str,
                   a_minus: str, b: str) -> list[str]:
    """Evaluate every intermediate expression of the chain from ``b`` to ``a_minus``.

    Each consecutive pair is equal by a premise or by one use of the
    five-point condition, so in a median algebra all entries coincide.
    """
    for name, x, y, z, want in _premises(M, zero, one, a_plus, a_minus, b):
        if M.med(x, y, z) != want:
            raise PreconditionError(f"premise violated: {name}")
    m = M.med
    return [
        b,
        m(zero, one, b),
        m(m(a_plus, a_minus, zero), m(a_plus, a_minus, one), b),
        m(a_plus, a_minus, m(zero, one, b)),
        m(m(a_plus, a_minus, b), m(a_plus, a_minus, zero), one),
        m(m(a_plus, a_minus, b), zero, one),
        m(m(a_plus, b, a_minus), m(a_plus, b, zero), one),
        m(a_plus, b, m(a_minus, zero, one)),
        m(m(a_plus, b, zero), m(a_plus, b, one), a_minus),
        m(zero, one, a_minus),
        a_minus,
    ]


def five_point_chain_check(M: FiniteMedianAlgebra, zero: str, one: str, a_plus: str,
                           a_minus: str, b: str) -> bool:
    """True iff ``b == a_minus``, with every link of the chain re-evaluated."""
    chain = diagonal_chain(M, zero, one, a_plus, a_minus, b)
    return len(set(chain)) == 1


def diagonal_chain_scan(M: FiniteMedianAlgebra) -> tuple[int, list[tuple[str, ...]]]:
    """Scan every premise-satisfying tuple ``(0, 1, a+, a-, b)``.

    The premises on ``b`` are those on ``a-``, so for fixed ``(0, 1, a+)`` the
    admissible set ``V`` is shared and every pair ``(a-, b)`` from it is a
    tuple.  Returns the number of tuples examined and the counterexamples
    (tuples with ``b != a-``).
    """
    t = M.table
    n = len(M)
    ids = M.elements
    checked = 0
    bad: list[tuple[str, ...]] = []
    for zero in range(n):
        for one in range(n):
            inside = t[zero, one] == np.arange(n)
            valid = (
                inside[:, None] & inside[None, :]
                & (t[:, :, zero] == zero) & (t[:, :, one] == one)
            )
            sizes = valid.sum(axis=1)
            checked += int((sizes * sizes).sum())
            for ap in np.flatnonzero(sizes > 1):
                vs = np.flatnonzero(valid[ap])
                for am, b in itertools.permutations(vs, 2):
                    bad.append((ids[zero], ids[one], ids[ap], ids[am], ids[b]))
    return checked, bad


# ---------------------------------------------------------------------------
# constructors


def _coord_name(coords: Iterable[int]) -> str:
    return "(" + ",".join(str(int(c)) for c in coords) + ")"


def lattice_box(dims: Sequence[int], origin: Sequence[int] | None = None,
                limit: int | None = None) -> FiniteMedianAlgebra:
    """Integer box ``prod(range(origin_i, origin_i + dims_i))`` with coordinatewise median and l1 metric."""
    dims = [int(d) for d in dims]
    if not dims or len(dims) > 10 or any(d < 1 for d in dims):
        raise InputError("dims must be 1 to 10 positive integers")
    origin = [0] * len(dims) if origin is None else [int(o) for o in origin]
    if len(origin) != len(dims):
        raise InputError("origin must match dims in length")
    size = int(np.prod(dims))
    _cap(size, limit, "lattice_box")
    # build the table and metric one coordinate at a time, as iterated products
    table = np.zeros((1, 1, 1), dtype=np.int32)
    dist = np.zeros((1, 1), dtype=np.int64)
    for d in dims:
        r = np.arange(d)
        a, b, c = r[:, None, None], r[None, :, None], r[None, None, :]
        t1 = np.maximum(np.minimum(a, b), np.minimum(np.maximum(a, b), c))
        m = len(dist)
        table = (table[:, None, :, None, :, None] * d + t1[None, :, None, :, None, :]).reshape(m * d, m * d, m * d)
        dist = (dist[:, None, :, None] + np.abs(r[:, None] - r[None, :])[None, :, None, :]).reshape(m * d, m * d)
    coords = np.array(list(itertools.product(*(range(d) for d in dims))), dtype=np.int64)
    names = tuple(_coord_name(row + origin) for row in coords)
    return FiniteMedianAlgebra(names, table, dist.tolist())


def hypercube(n: int, limit: int | None = None) -> FiniteMedianAlgebra:
    if not 1 <= n <= 10:
        raise InputError("hypercube dimension must be between 1 and 10")
    return lattice_box([2] * n, limit=limit)


def product(M: FiniteMedianAlgebra, N: FiniteMedianAlgebra,
            limit: int | None = None) -> FiniteMedianAlgebra:
    """Componentwise median on ``M x N``; the l1 sum metric when both carry one."""
    m, n = len(M), len(N)
    _cap(m * n, limit, "product")
    tm = M.table.astype(np.int32)
    tn = N.table.astype(np.int32)
    table = (tm[:, None, :, None, :, None] * n + tn[None, :, None, :, None, :]).reshape(m * n, m * n, m * n)
    names = tuple(f"({a},{b})" for a in M.elements for b in N.elements)
    metric = None
    if M.metric is not None and N.metric is not None:
        metric = [[M.metric[i][k] + N.metric[j][l] for k in range(m) for l in range(n)]
                  for i in range(m) for j in range(n)]
    return FiniteMedianAlgebra(names, table, metric)


def median_graph(nodes: Sequence[str], edges: Iterable[tuple[str, str]],
                 limit: int | None = None) -> FiniteMedianAlgebra:
    """Median algebra of a median graph, with the graph metric.

    Raises InputError when the graph is disconnected or some triple lacks a
    unique median.
    """
    nodes = [str(v) for v in nodes]
    n = len(nodes)
    if n == 0:
        raise InputError("graph has no vertices")
    _cap(n, limit, "median_graph")
    pos = {v: i for i, v in enumerate(nodes)}
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        if u not in pos or v not in pos:
            raise InputError(f"edge ({u},{v}) uses an unknown vertex")
        adj[pos[u]].append(pos[v])
        adj[pos[v]].append(pos[u])
    D = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        D[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if D[s, v] < 0:
                    D[s, v] = D[s, u] + 1
                    queue.append(v)
    if (D < 0).any():
        raise InputError("graph is not connected")
    table = np.zeros((n, n, n), dtype=np.int32)
    for x in range(n):
        between = (
            (D[x][None, None, :] + D[:, None, :] == D[x][:, None, None])
            & (D[x][None, None, :] + D[None, :, :] == D[x][None, :, None])
            & (D[:, None, :] + D.T[None, :, :] == D[:, :, None])
        )
        counts = between.sum(axis=2)
        hit = _first(counts != 1)
        if hit is not None:
            y, z = hit
            raise InputError(f"no unique median for ({nodes[x]}, {nodes[y]}, {nodes[z]})")
        table[x] = between.argmax(axis=2)
    return FiniteMedianAlgebra(tuple(nodes), table, [[int(v) for v in row] for row in D])


def tree(nodes: Sequence[str], edges: Sequence[tuple[str, str]],
         limit: int | None = None) -> FiniteMedianAlgebra:
    """Median algebra of a finite tree with its path metric."""
    if len(edges) != len(nodes) - 1:
        raise InputError("a tree on k vertices has k - 1 edges")
    return median_graph(nodes, edges, limit=limit)
