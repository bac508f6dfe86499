"""Slow, obviously-correct reference computations used to cross-check the library."""

from __future__ import annotations

import itertools
from fractions import Fraction


def brute_median_violation(elements, med):
    """First failing identity over all tuples, by direct enumeration; None if median."""
    for a, x in itertools.product(elements, repeat=2):
        if med(a, a, x) != a:
            return "absorption"
    for a, b, c in itertools.product(elements, repeat=3):
        m = med(a, b, c)
        if any(med(*p) != m for p in itertools.permutations((a, b, c))):
            return "symmetry"
    for a, b, x, y, z in itertools.product(elements, repeat=5):
        if med(a, b, med(x, y, z)) != med(med(a, b, x), med(a, b, y), z):
            return "five_point"
    return None


def brute_interval(elements, med, a, b):
    return frozenset(x for x in elements if med(a, b, x) == x)


def brute_is_convex(elements, med, subset):
    subset = frozenset(subset)
    return all(brute_interval(elements, med, a, b) <= subset for a in subset for b in subset)


def brute_hull(elements, med, subset):
    """Smallest convex superset: intersection of every convex set containing ``subset``."""
    subset = frozenset(subset)
    hull = frozenset(elements)
    rest = [e for e in elements if e not in subset]
    for r in range(len(rest) + 1):
        for extra in itertools.combinations(rest, r):
            cand = subset | frozenset(extra)
            if cand < hull and brute_is_convex(elements, med, cand):
                hull &= cand
    return hull


def brute_walls(elements, med):
    """All bipartitions into two nonempty convex sides, side containing elements[0] first."""
    first, rest = elements[0], list(elements[1:])
    out = set()
    for r in range(len(rest)):
        for extra in itertools.combinations(rest, r):
            a = frozenset((first, *extra))
            b = frozenset(elements) - a
            if brute_is_convex(elements, med, a) and brute_is_convex(elements, med, b):
                out.add((a, b))
    return out


def crosses(w1, w2):
    return all(x & y for x in w1 for y in w2)


def brute_rank(walls):
    walls = list(walls)
    best = 0
    for r in range(1, len(walls) + 1):
        if any(all(crosses(p, q) for p, q in itertools.combinations(c, 2))
               for c in itertools.combinations(walls, r)):
            best = r
        else:
            break
    return best


def brute_cube_rank(elements, med):
    """Largest n with an injective majority-preserving map {0,1}^n -> M, by search over images."""
    if len(elements) < 2:
        return 0
    best = 1
    n = 2
    while 2 ** n <= len(elements):
        cube = list(itertools.product((0, 1), repeat=n))
        maj = {}
        for u, v, w in itertools.product(cube, repeat=3):
            maj[u, v, w] = tuple(int(a + b + c >= 2) for a, b, c in zip(u, v, w))
        found = False
        # a median morphism from the cube is determined by the images of bottom, top and unit vectors
        units = [tuple(int(i == k) for i in range(n)) for k in range(n)]
        for bottom, top, *imgs in itertools.permutations(elements, n + 2):
            f = {cube[0]: bottom, cube[-1]: top}
            for k, u in enumerate(units):
                f[u] = imgs[k]
            ok = True
            for v in sorted(cube, key=sum):
                if v in f:
                    continue
                ones = [i for i, c in enumerate(v) if c]
                head = tuple(int(i in ones[:-1]) for i in range(n))
                f[v] = med(f[head], f[units[ones[-1]]], top)
            if len(set(f.values())) != len(cube):
                continue
            for u, v, w in itertools.product(cube, repeat=3):
                if f[maj[u, v, w]] != med(f[u], f[v], f[w]):
                    ok = False
                    break
            if ok:
                found = True
                break
        if not found:
            break
        best = n
        n += 1
    return best


def l1(p, q):
    return Fraction(sum(abs(a - b) for a, b in zip(p, q)))


# -- tubular ----------------------------------------------------------------

DIRECTIONS = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1)]
MULTIPLIERS = [1, -1, 2, -2, 3]


def random_tubular(rng, max_vertices=5, max_edges=8):
    """JSON for a random connected tubular spec: a spanning tree plus extra edges."""
    n = rng.randint(1, max_vertices)
    verts = [f"v{i}" for i in range(n)]
    pairs = [(verts[rng.randrange(i)], verts[i]) for i in range(1, n)]
    extra = rng.randint(0 if n > 1 else 1, max_edges - len(pairs))
    pairs += [(rng.choice(verts), rng.choice(verts)) for _ in range(extra)]
    rng.shuffle(pairs)

    def vec():
        d = rng.choice(DIRECTIONS)
        m = rng.choice(MULTIPLIERS)
        return [m * d[0], m * d[1]]

    edges = [{"id": f"e{i}", "from": a, "to": b, "w_from": vec(), "w_to": vec()}
             for i, (a, b) in enumerate(pairs)]
    return {"vertices": verts, "edges": edges}


def simple_cycle_products(tg):
    """Label products of every simple cycle, by enumerating arc subsets.

    A subset is a simple cycle when every touched node has degree 2 and the
    subset is connected (a self-arc alone, or two parallel arcs, count).
    """
    arcs = tg.arcs
    out = []
    for mask in range(1, 1 << len(arcs)):
        chosen = [i for i in range(len(arcs)) if mask >> i & 1]
        deg = {}
        for i in chosen:
            a = arcs[i]
            deg[a.tail] = deg.get(a.tail, 0) + 1
            deg[a.head] = deg.get(a.head, 0) + 1
        if any(d != 2 for d in deg.values()):
            continue
        # walk around the cycle
        start = arcs[chosen[0]].tail
        at, used, prod = start, set(), Fraction(1)
        while True:
            step = next((i for i in chosen if i not in used and at in (arcs[i].tail, arcs[i].head)), None)
            if step is None:
                break
            used.add(step)
            a = arcs[step]
            if a.tail == at:
                prod *= a.label
                at = a.head
            else:
                prod /= a.label
                at = a.tail
        if len(used) == len(chosen) and at == start:
            out.append((tuple(chosen), prod))
    return out


def brute_unbalanced(tg):
    return any(p != 1 for _, p in simple_cycle_products(tg))


def random_gl2z(rng, steps=6):
    m = [[1, 0], [0, 1]]
    gens = [[[1, 1], [0, 1]], [[1, 0], [1, 1]], [[0, 1], [1, 0]], [[-1, 0], [0, 1]],
            [[1, -1], [0, 1]], [[1, 0], [-1, 1]]]
    for _ in range(steps):
        g = rng.choice(gens)
        m = [[sum(m[i][k] * g[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
    return m


def rebase(data, vertex, m):
    """Apply ``m`` to every edge-end vector at ``vertex``."""
    def act(v):
        return [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]

    edges = []
    for e in data["edges"]:
        e = dict(e)
        if e["from"] == vertex:
            e["w_from"] = act(e["w_from"])
        if e["to"] == vertex:
            e["w_to"] = act(e["w_to"])
        edges.append(e)
    return {"vertices": list(data["vertices"]), "edges": edges}


def brute_metric_ok(elements, med, dist):
    """Each median is the unique point between all three pairs of its arguments."""
    for x in elements:
        for y in elements:
            for z in elements:
                between = [p for p in elements
                           if dist(x, p) + dist(p, y) == dist(x, y)
                           and dist(x, p) + dist(p, z) == dist(x, z)
                           and dist(y, p) + dist(p, z) == dist(y, z)]
                if between != [med(x, y, z)]:
                    return False
    return True
