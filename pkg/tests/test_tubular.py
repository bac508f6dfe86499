import json
import random
from fractions import Fraction
from importlib import resources

import pytest

from cubulation import tubular as tb
from cubulation.errors import InputError
from cubulation.rbf import tubular_rbf_directions

from oracles import brute_unbalanced, random_gl2z, random_tubular, rebase, simple_cycle_products


def fixture(name):
    text = (resources.files("cubulation") / "fixtures" / f"{name}.json").read_text()
    return tb.TubularGroupSpec.from_json(json.loads(text))


def spec(vertices, *edges):
    return tb.TubularGroupSpec.from_json({
        "vertices": list(vertices),
        "edges": [{"id": f"e{i}", "from": a, "to": b, "w_from": list(u), "w_to": list(w)}
                  for i, (a, b, u, w) in enumerate(edges)],
    })


def test_normalize_primitive():
    assert tb.normalize_primitive((4, -6)) == ((2, -3), 2)
    assert tb.normalize_primitive((0, -5)) == ((0, 1), -5)
    assert tb.normalize_primitive((1, 0)) == ((1, 0), 1)
    assert tb.normalize_primitive((-3, 6)) == ((1, -2), -3)
    with pytest.raises(InputError):
        tb.normalize_primitive((0, 0))


def test_spec_validation_paths():
    with pytest.raises(InputError, match=r"edges\[0\]\.w_from"):
        spec(["a"], ("a", "a", (0, 0), (1, 0)))
    with pytest.raises(InputError, match=r"edges\[0\]\.to"):
        spec(["a"], ("a", "b", (1, 0), (1, 0)))
    with pytest.raises(InputError, match="not connected"):
        spec(["a", "b"], ("a", "a", (1, 0), (1, 0)))
    with pytest.raises(InputError):
        spec([])


def test_commensurability_classes():
    c6 = fixture("c6_tetrahedron")
    assert len(tb.commensurability_classes(c6, "F1")) == 3
    s = spec(["a", "b"], ("a", "b", (2, 0), (1, 0)), ("a", "b", (-3, 0), (0, 1)))
    assert len(tb.commensurability_classes(s, "a")) == 1
    ck = fixture("croke_kleiner")
    assert max(len(tb.commensurability_classes(ck, v)) for v in ck.vertices) == 2
    with pytest.raises(InputError):
        tb.commensurability_classes(ck, "nowhere")


def test_self_loop_counts_both_ends():
    s = spec(["a"], ("a", "a", (1, 0), (0, 1)))
    classes = tb.commensurability_classes(s, "a")
    assert sorted(c.direction for c in classes) == [(0, 1), (1, 0)]


def test_transport_graph_examples():
    tg = tb.build_transport_graph(fixture("bs12_loop"))
    assert len(tg.nodes) == 1 and [a.label for a in tg.arcs] == [2]
    tg = tb.build_transport_graph(fixture("croke_kleiner"))
    assert len(tg.nodes) == 4 and [a.label for a in tg.arcs] == [1, 1]
    tg = tb.build_transport_graph(fixture("c6_tetrahedron"))
    assert len(tg.nodes) == 12 and all(a.label == 1 for a in tg.arcs) and len(tg.arcs) == 6


def test_detect_unbalance_examples():
    cyc = tb.detect_unbalance(tb.build_transport_graph(fixture("bs12_loop")))
    assert len(cyc.steps) == 1 and cyc.product == 2
    tree = spec(["a", "b", "c"], ("a", "b", (1, 0), (2, 0)), ("b", "c", (1, 0), (3, 0)))
    assert tb.detect_unbalance(tb.build_transport_graph(tree)) is None
    parallel = spec(["a", "b"], ("a", "b", (1, 0), (2, 0)), ("a", "b", (1, 0), (2, 0)))
    assert tb.detect_unbalance(tb.build_transport_graph(parallel)) is None


def test_potentials_along_path():
    s = spec(["a", "b", "c"], ("a", "b", (1, 0), (2, 0)), ("b", "c", (1, 0), (3, 0)))
    tg = tb.build_transport_graph(s)
    pots = tb.undistortion_certificate(tg)
    assert [pots[("a", (1, 0))], pots[("b", (1, 0))], pots[("c", (1, 0))]] == [1, 2, 6]
    assert tb.verify_potentials(tg, pots)
    assert all(v == 1 for v in tb.undistortion_certificate(tb.build_transport_graph(fixture("croke_kleiner"))).values())
    assert tb.undistortion_certificate(tb.build_transport_graph(fixture("bs12_loop"))) is None


def test_tampered_potentials_rejected():
    s = spec(["a", "b"], ("a", "b", (1, 0), (2, 0)))
    tg = tb.build_transport_graph(s)
    pots = tb.undistortion_certificate(tg)
    pots[("b", (1, 0))] += 1
    assert not tb.verify_potentials(tg, pots)


def test_distorted_classes():
    tg = tb.build_transport_graph(fixture("bs12_loop"))
    assert tb.distorted_classes(tg) == {("F", (1, 0))}
    s = spec(["c", "d"], ("c", "c", (1, 0), (2, 0)), ("c", "d", (1, 0), (0, 1)))
    assert tb.distorted_classes(tb.build_transport_graph(s)) == {("c", (1, 0)), ("d", (0, 1))}
    assert tb.distorted_classes(tb.build_transport_graph(fixture("croke_kleiner"))) == frozenset()


def test_dehn_fixtures():
    assert tb.dehn_class(fixture("croke_kleiner")) is tb.Dehn.QUADRATIC
    assert tb.dehn_class(fixture("bs12_loop")) is tb.Dehn.EXPONENTIAL
    assert tb.dehn_class(fixture("double_loop")) is tb.Dehn.SUPER_QUADRATIC


def test_bs_witness():
    w = tb.bs_witness(fixture("bs12_loop"))
    assert (w.m, w.n) == (1, 2)
    assert tb.bs_witness(fixture("croke_kleiner")) is None
    s = spec(["a", "b"], ("a", "b", (4, 0), (6, 0)), ("a", "b", (1, 0), (1, 0)))
    w = tb.bs_witness(s)
    assert {(w.m, w.n), (w.n, w.m)} == {(2, 3), (3, 2)}
    assert Fraction(w.raw_n, w.raw_m) == Fraction(w.n, w.m)


def test_signs_are_balanced():
    # w -> -w is the Klein bottle gluing: m = -n is allowed
    s = spec(["a"], ("a", "a", (1, 0), (-1, 0)))
    assert tb.classify_tubular(s).status is tb.TubularStatus.CUBULATED


def test_classify_fixtures():
    v = tb.classify_tubular(fixture("c6_tetrahedron"))
    assert v.status is tb.TubularStatus.NO_MEDIAN_RBF and v.dehn is tb.Dehn.QUADRATIC
    assert set(v.rbf.directions) == {(1, 0), (0, 1), (1, -1)}
    v = tb.classify_tubular(fixture("croke_kleiner"))
    assert v.status is tb.TubularStatus.CUBULATED and v.max_classes == 2
    v = tb.classify_tubular(fixture("bs12_loop"))
    assert v.status is tb.TubularStatus.NO_MEDIAN_DISTORTION and v.dehn is tb.Dehn.EXPONENTIAL
    for name in ("c6_tetrahedron", "croke_kleiner", "bs12_loop", "double_loop"):
        s = fixture(name)
        assert tb.verify_verdict(s, tb.classify_tubular(s))


def test_every_c6_vertex_has_the_three_directions():
    c6 = fixture("c6_tetrahedron")
    for v in c6.vertices:
        assert set(tubular_rbf_directions(c6, v).directions) == {(1, 0), (0, 1), (1, -1)}


def test_verdict_json_has_certificates():
    v = tb.classify_tubular(fixture("bs12_loop"))
    data = json.loads(json.dumps(v.to_json(witness=True)))
    assert data["bs_witness"] == {"m": 1, "n": 2}
    assert data["certificates"]["unbalanced_cycle"]["product"] == 2
    assert "certificates" not in v.to_json(witness=False)


@pytest.mark.parametrize("seed", range(60))
def test_random_specs_match_cycle_oracle(seed):
    rng = random.Random(1000 + seed)
    s = tb.TubularGroupSpec.from_json(random_tubular(rng))
    tg = tb.build_transport_graph(s)
    cyc = tb.detect_unbalance(tg)
    assert (cyc is not None) == brute_unbalanced(tg)
    assert (cyc is None) == (tb.undistortion_certificate(tg) is not None)
    if cyc is not None:
        assert tb.walk_product(tg, cyc.start, cyc.steps) == cyc.product != 1
        bad_nodes = {tg.arcs[i].tail for c, p in simple_cycle_products(tg) if p != 1 for i in c}
        assert bad_nodes <= tb.distorted_classes(tg)
    v = tb.classify_tubular(s)
    assert tb.verify_verdict(s, v)
    assert (v.dehn is tb.Dehn.QUADRATIC) == (not tb.distorted_classes(tg))


@pytest.mark.parametrize("seed", range(30))
def test_basis_invariance(seed):
    rng = random.Random(seed)
    data = random_tubular(rng)
    base = tb.classify_tubular(tb.TubularGroupSpec.from_json(data))
    for _ in range(5):
        moved = rebase(data, rng.choice(data["vertices"]), random_gl2z(rng))
        v = tb.classify_tubular(tb.TubularGroupSpec.from_json(moved))
        assert (v.status, v.dehn, v.max_classes) == (base.status, base.dehn, base.max_classes)


def test_rbf_status_implies_directions():
    rng = random.Random(5)
    hits = 0
    for _ in range(80):
        s = tb.TubularGroupSpec.from_json(random_tubular(rng))
        v = tb.classify_tubular(s)
        if v.status is tb.TubularStatus.NO_MEDIAN_RBF:
            hits += 1
            assert tubular_rbf_directions(s, v.rbf_vertex) is not None
    assert hits > 0
