import json

import pytest

from cubulation import __version__
from cubulation.cli import main
from cubulation.errors import InputError
from cubulation.report import AnalysisReport, parse_input, run_report
from cubulation.tubular import TubularGroupSpec


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_input_fixture_by_name():
    spec = parse_input("c6_tetrahedron.json", "tubular")
    assert isinstance(spec, TubularGroupSpec)
    assert len(spec.vertices) == 4 and len(spec.edges) == 6


def test_schema_violation_names_field(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"vertices": ["a"], "edges": [
        {"id": "e", "from": "a", "to": "a", "w_from": [1], "w_to": [1, 0]}]}))
    with pytest.raises(InputError, match=r"edges\[0\]\.w_from"):
        parse_input(bad, "tubular")


def test_json_syntax_error_has_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": ["a"],\n  "edges": [}\n')
    with pytest.raises(InputError, match="line 2 column"):
        parse_input(bad, "tubular")


def test_non_utf8_and_missing(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_bytes(b"\xff\xfe{}")
    with pytest.raises(InputError, match="UTF-8"):
        parse_input(bad, "tubular")
    with pytest.raises(InputError, match="no such file"):
        parse_input(tmp_path / "missing.json", "tubular")


def test_unknown_kind():
    with pytest.raises(InputError, match="unknown input kind"):
        parse_input("c6_tetrahedron.json", "graph")


def test_domain_validator_message(tmp_path):
    path = tmp_path / "x.json"
    data = json.loads(json.dumps(parse_input("hyp_rel_gersten", "fbc").to_json()))
    data["strata"][1]["suffix"]["cycle"] = "Z"
    path.write_text(json.dumps(data))
    with pytest.raises(InputError, match="undeclared Nielsen cycle"):
        parse_input(path, "fbc")


def test_median_constructor_inputs(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"box": [3, 2], "origin": [-1, 0]}))
    M = parse_input(path, "median")
    assert len(M) == 6 and "(-1,0)" in M.elements
    path.write_text(json.dumps({"tree": {"nodes": ["a", "b", "c"], "edges": [["a", "b"], ["b", "c"]]}}))
    assert len(parse_input(path, "median")) == 3
    assert len(parse_input("hypercube3", "median")) == 8


def test_run_report_examples():
    rep = run_report(parse_input("c6_tetrahedron", "tubular"), "tubular", witness=True)
    assert rep.verdict["status"] == "NoCoarseMedian_via_RBF"
    assert rep.verdict["rbf"]["directions"] == [[1, 0], [0, 1], [1, -1]]
    rep = run_report(parse_input("bs12_loop", "tubular"), "tubular", witness=True)
    assert rep.verdict["status"] == "NoCoarseMedian_via_Distortion"
    assert rep.verdict["bs_witness"] == {"m": 1, "n": 2} and rep.verdict["dehn"] == "exponential"
    assert rep.certificates["unbalanced_cycle"]["product"] == 2
    rep = run_report(parse_input("hypercube3", "median"), "median", "rank", witness=True)
    assert rep.verdict["rank"] == 3
    assert len(rep.certificates["witness_walls"]) == 3 and len(rep.certificates["witness_cube"]) == 8


@pytest.mark.parametrize("kind,name", [("tubular", "c6_tetrahedron"), ("tubular", "bs12_loop"),
                                       ("fbc", "more_than_gersten"), ("fbc", "atoroidal")])
def test_report_round_trip(kind, name):
    rep = run_report(parse_input(name, kind), kind, witness=True)
    text = rep.dumps()
    back = AnalysisReport.from_json(json.loads(text))
    assert back == rep and back.dumps() == text


def test_cli_tubular_json(capsys):
    code, out, _ = run(capsys, "tubular", "analyze", "c6_tetrahedron", "--json")
    data = json.loads(out)
    assert code == 0 and data["verdict"]["status"] == "NoCoarseMedian_via_RBF"
    assert data["version"] == __version__ and len(data["input_digest"]) == 64


def test_cli_text_shows_reasoning(capsys):
    code, out, _ = run(capsys, "fbc", "analyze", "more_than_gersten")
    assert code == 0
    assert "NoCoarseMedian_RichLinearity" in out and "reasoning:" in out and "2-RBF" in out


def test_cli_deterministic(capsys, tmp_path):
    src = parse_input("bs12_loop", "tubular").to_json()
    path = tmp_path / "in.json"
    path.write_text(json.dumps(src))
    outs = [run(capsys, "tubular", "analyze", str(path), "--json", "--witness")[1] for _ in range(2)]
    assert outs[0] == outs[1]
    # same parsed content, different bytes: same digest
    path.write_text(json.dumps(src, indent=4))
    again = json.loads(run(capsys, "tubular", "analyze", str(path), "--json")[1])
    assert again["input_digest"] == json.loads(outs[0])["input_digest"]


def test_cli_median_commands(capsys):
    code, out, _ = run(capsys, "median", "verify", "--box", "3,3", "--json")
    assert code == 0 and json.loads(out)["verdict"]["ok"] is True
    code, out, _ = run(capsys, "median", "rank", "--hypercube", "3", "--witness", "--json")
    assert code == 0 and json.loads(out)["verdict"]["rank"] == 3
    code, out, _ = run(capsys, "median", "hull", "--box", "3,3", "--subset", "(0,0);(2,1)", "--json")
    assert json.loads(out)["verdict"]["hull"] == ["(0,0)", "(0,1)", "(1,0)", "(1,1)", "(2,0)", "(2,1)"]


def test_cli_rbf_commands(capsys):
    code, out, _ = run(capsys, "rbf", "from-tubular", "c6_tetrahedron", "--vertex", "F2", "--json")
    dirs = json.loads(out)["verdict"]["rbf"]["directions"]
    assert code == 0 and sorted(dirs) == [[0, 1], [1, -1], [1, 0]]
    code, out, _ = run(capsys, "rbf", "from-fbc", "more_than_gersten", "--json")
    assert json.loads(out)["verdict"]["rbf"]["directions"] == [[1, 1], [2, 1], [0, 1]]
    code, out, _ = run(capsys, "rbf", "build", "c6_rbf", "--radius", "2", "--depth", "1", "--json")
    assert code == 0 and json.loads(out)["verdict"]["disjoint_outside_base"] is True


def test_exit_codes(capsys, tmp_path):
    assert run(capsys, "median", "rank", "--hypercube", "6")[0] == 2
    assert run(capsys, "median", "rank", "--hypercube", "6", "--limit", "64")[0] == 0
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "tubular", "analyze", str(tmp_path / "none.json"))[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, err = run(capsys, "tubular", "analyze", str(bad))
    assert code == 1 and "line 1" in err
    assert run(capsys, "median", "rank", "--box", "a,b")[0] == 1
    assert run(capsys)[0] == 1


def test_fixture_listing(capsys):
    code, out, _ = run(capsys, "--fixtures")
    assert code == 0 and "c6_tetrahedron.json" in out and "bs12_loop.json" in out
