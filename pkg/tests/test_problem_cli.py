import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import K2
from gaussvp import cli
from gaussvp.cli import emit_csv, exit_code_for, main, run
from gaussvp.errors import (AllInfinite, CoincidentNodes, DegenerateGram, DomainError, Infeasible, InfeasibleInput,
                            MissingData, NegativeRadicand, NotPositiveDefinite, ParseError, SchemaError,
                            StepInfeasible, ValidationError, ZeroRestrictedMass)
from gaussvp.problem import parse_problem, serialize_problem


def doc_b(**over):
    d = {"schema_version": 1, "kernel": {"family": "custom", "matrix": K2},
         "plates": [{"sign": 1, "nodes": [0, 1], "g": 1.0, "mass": 1.0}],
         "field": {"mode": "tabulated", "values": [[0.0, 10.0]]}}
    d.update(over)
    return d


@pytest.fixture
def b_file(tmp_path):
    p = tmp_path / "b.json"
    p.write_text(json.dumps(doc_b()))
    return p


def test_minimal_problem():
    d = doc_b()
    del d["field"]
    p = parse_problem(d)
    assert p.condenser.plates[0].n == 2 and p.doc["field"] == {"mode": "zero"} and p.field.values is None
    assert p.exhaustion is None and p.solver.variant == "corrective"


def test_inf_values_as_strings():
    p = parse_problem(doc_b(field={"mode": "tabulated", "values": [["inf", 0.0]]}))
    assert p.field.values[0][0] == np.inf
    assert '"inf"' in serialize_problem(p)


@pytest.mark.parametrize("over, loc", [
    (dict(plates=[{"sign": 0, "nodes": [0, 1], "g": 1.0, "mass": 1.0}]), "plates[0].sign"),
    (dict(plates=[{"sign": 1, "nodes": [0, 5], "g": 1.0, "mass": 1.0}]), "plates[0].nodes[1]"),
    (dict(kernel={"family": "yukawa"}), "kernel.family"),
    (dict(schema_version=2), "schema_version"),
    (dict(field={"mode": "tabulated", "values": [[0.0, "nan-ish"]]}), "field.values[0][1]"),
    (dict(solver={"tolerance": 1}), "solver.tolerance"),
    (dict(exhaustion={"steps": 0}), "exhaustion.steps"),
])
def test_schema_errors(over, loc):
    with pytest.raises(SchemaError) as ei:
        parse_problem(doc_b(**over))
    assert ei.value.field == loc


@pytest.mark.parametrize("over", [
    dict(plates=[{"sign": 1, "nodes": [0, 1], "g": [1.0, 2.0, 3.0], "mass": 1.0}]),
    dict(field={"mode": "tabulated", "values": [[0.0]]}),
    dict(field={"mode": "tabulated", "values": [[0.0, 1.0], [0.0]]}),
])
def test_validation_errors(over):
    with pytest.raises(ValidationError):
        parse_problem(doc_b(**over))


def test_parse_error_location(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema_version": 1,\n  "kernel": }\n')
    with pytest.raises(ParseError) as ei:
        parse_problem(p)
    assert ei.value.location == f"{p}:3:13"
    with pytest.raises(ParseError):
        parse_problem(tmp_path / "missing.json")


points = st.lists(st.tuples(*[st.floats(-5, 5, allow_nan=False)] * 2), min_size=1, max_size=4, unique=True)


@st.composite
def problems(draw):
    plates = []
    for i in range(draw(st.integers(1, 3))):
        # disjoint x ranges keep oppositely signed plates apart
        nodes = [[x + 20.0 * i, y] for x, y in draw(points)]
        plates.append({"sign": draw(st.sampled_from([1, -1])), "nodes": nodes,
                       "g": draw(st.lists(st.floats(0.1, 10), min_size=len(nodes), max_size=len(nodes))),
                       "mass": draw(st.floats(0.1, 10))})
    vals = [draw(st.lists(st.one_of(st.floats(-1e3, 1e3), st.just("inf")), min_size=len(p["nodes"]),
                          max_size=len(p["nodes"]))) for p in plates]
    d = {"schema_version": 1, "kernel": {"family": "riesz", "alpha": draw(st.floats(0.5, 1.9)), "dim": 2},
         "plates": plates, "field": {"mode": "tabulated", "values": vals},
         "solver": {"max_iters": draw(st.integers(1, 10 ** 5)), "variant": draw(st.sampled_from(["corrective", "vanilla"]))}}
    if draw(st.booleans()):
        d["exhaustion"] = {"steps": draw(st.integers(1, 5)), "order": draw(st.sampled_from(["index", "centroid"]))}
    return d


@settings(max_examples=60, deadline=None)
@given(d=problems())
def test_round_trip(d):
    p = parse_problem(d)
    q = parse_problem(serialize_problem(p))
    assert p == q and p.digest() == q.digest()
    assert serialize_problem(q) == serialize_problem(p)


def test_reports_deterministic(b_file):
    a, _ = run("solve", b_file, {"seed": 3})
    b, _ = run("solve", b_file, {"seed": 3})
    a.pop("timing"), b.pop("timing")
    assert a == b


@pytest.mark.parametrize("exc, code", [
    (ParseError("x:1:1", "bad"), 2), (SchemaError("a", "bad"), 2), (ValidationError("bad"), 2),
    (Infeasible("bad"), 2), (InfeasibleInput("bad"), 2), (AllInfinite("bad"), 2), (StepInfeasible(0), 2),
    (ZeroRestrictedMass(1), 2), (DomainError("bad"), 2), (NotPositiveDefinite("bad"), 2),
    (DegenerateGram("bad"), 2), (MissingData("bad"), 2),
    (CoincidentNodes("bad"), 3), (NegativeRadicand("bad"), 3), (RuntimeError("boom"), 3),
])
def test_exit_code_table(exc, code):
    assert exit_code_for(exc) == code


def test_internal_error_reported(monkeypatch, b_file):
    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setitem(cli._DISPATCH, "solve", boom)
    rep, code = run("solve", b_file)
    assert code == 3 and rep["status"] == "internal_error"
    assert rep["diagnostics"][0]["error"] == "RuntimeError"


def test_solve_example_b(b_file):
    rep, code = run("solve", b_file)
    assert code == 0 and rep["status"] == "ok"
    assert rep["equilibrium"]["value"] == pytest.approx(2.0)
    assert [r["residual"] for r in rep["potentials"]] == pytest.approx([0.0, 9.0])


def _measure(tmp_path, **m):
    p = tmp_path / "mu.json"
    p.write_text(json.dumps(m))
    return str(p)


def test_certify_perturbed_fails(tmp_path, b_file):
    rep, code = run("certify", b_file, {"measure": _measure(tmp_path, weights=[[0.9, 0.1]])})
    assert code == 1
    w = rep["worst_residual"]
    assert (w["plate"], w["node"]) == (0, 0) and w["residual"] == pytest.approx(1.9 - 2.82)


def test_certify_eta(tmp_path, b_file):
    m = _measure(tmp_path, weights=[[1.0, 0.0]], eta=[2.0], value_bound=2.0)
    rep, code = run("certify", b_file, {"measure": m})
    assert code == 0 and rep["eta_certificate"]["certified"]


def test_certify_bad_measure(tmp_path, b_file):
    rep, code = run("certify", b_file, {"measure": _measure(tmp_path, weights=[[0.5, 0.1]])})
    assert code == 2 and rep["diagnostics"][0]["error"] == "InfeasibleInput"


def test_capacity_and_validate(b_file, tmp_path):
    rep, code = run("capacity", b_file)
    assert code == 0 and rep["capacity"]["capacity"] == pytest.approx(2 / 3)
    rep, code = run("validate", b_file)
    assert code == 0 and rep["checks"]["feasible"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc_b(plates=[{"sign": 0, "nodes": [0, 1], "g": 1.0, "mass": 1.0}])))
    rep, code = run("validate", bad)
    assert code == 2 and rep["diagnostics"][0]["field"] == "plates[0].sign"


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_csv_views(tmp_path, b_file):
    rep, _ = run("solve", b_file)
    emit_csv(rep, "potentials", tmp_path / "p.csv")
    rows = _rows(tmp_path / "p.csv")
    assert rows[0][-1] == "residual" and len(rows) == 3
    assert [float(r[-1]) for r in rows[1:]] == pytest.approx([0.0, 9.0])
    with pytest.raises(MissingData):
        emit_csv(rep, "iterates", tmp_path / "i.csv")
    ex, code = run("exhaust", b_file, {"steps": 2})
    assert code == 0
    emit_csv(ex, "exhaustion_trace", tmp_path / "e.csv")
    assert len(_rows(tmp_path / "e.csv")) == 3


def test_exhaust_three_steps(tmp_path):
    pts = [[float(np.cos(t)), float(np.sin(t))] for t in np.linspace(0, 2 * np.pi, 6, endpoint=False)]
    d = {"schema_version": 1, "kernel": {"family": "riesz", "alpha": 1.0, "dim": 2},
         "plates": [{"sign": 1, "nodes": pts, "g": 1.0, "mass": 1.0}], "exhaustion": {"steps": 3}}
    rep, code = run("exhaust", d)
    assert code == 0 and len(rep["exhaustion"]["trace"]) == 3
    emit_csv(rep, "exhaustion_trace", tmp_path / "e.csv")
    assert len(_rows(tmp_path / "e.csv")) == 4


def test_main_end_to_end(tmp_path, b_file, capsys):
    out = tmp_path / "r.json"
    code = main(["solve", str(b_file), "--trace", "--out", str(out),
                 "--csv", f"iterates={tmp_path / 'it.csv'}", "--csv", f"potentials={tmp_path / 'p.csv'}"])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["command"] == "solve" and rep["iterates"]
    assert len(_rows(tmp_path / "it.csv")) == len(rep["iterates"]) + 1
    code = main(["solve", str(tmp_path / "nope.json")])
    assert code == 2 and "ParseError" in capsys.readouterr().err


def test_main_missing_csv_data(tmp_path, b_file):
    assert main(["solve", str(b_file), "--out", str(tmp_path / "r.json"),
                 "--csv", f"iterates={tmp_path / 'it.csv'}"]) == 2


def test_bad_csv_flag(b_file):
    with pytest.raises(SystemExit):
        main(["solve", str(b_file), "--csv", "nonsense"])
