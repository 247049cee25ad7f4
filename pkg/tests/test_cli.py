import io
import json
import math

import jsonschema
import numpy as np
import pytest
from click.testing import CliRunner

from expstab.cli import main
from expstab.specio import read_csv_column, report_schema


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def spec(tmp_path):
    def write(doc, name="spec.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


def _validate(text):
    doc = json.loads(text)
    jsonschema.validate(doc, report_schema())
    return doc


@pytest.mark.parametrize("c,verdict,code", [(0.0, "UES", 0), (0.1, "SES", 0), (0.2, "ES", 0), (0.5, "none", 3)])
def test_classify_verdict_line_and_exit_code(runner, spec, c, verdict, code):
    res = runner.invoke(main, ["classify", spec({"kind": "paper-example", "c": c})])
    assert res.exit_code == code, res.output
    first = res.output.splitlines()[0]
    assert first.startswith(f"class={verdict} alpha=") and "horizon=400" in first


def test_classify_json_and_csv(runner, spec, tmp_path):
    csv_path = tmp_path / "k.csv"
    res = runner.invoke(main, ["classify", spec({"kind": "paper-example", "c": 0.1}), "--horizon", "200",
                               "--json", "-", "--csv", str(csv_path)])
    assert res.exit_code == 0
    doc = _validate(res.output)
    assert doc["command"] == "classify" and doc["result"]["verdict"] == "SES"
    assert doc["config"]["horizon"] == 200
    logK = read_csv_column(io.StringIO(csv_path.read_text()), "logK")
    assert logK.size > 0 and np.all(np.isfinite(logK))


def test_classify_tolerance_flags_reach_the_estimator(runner, spec):
    res = runner.invoke(main, ["classify", spec({"kind": "paper-example", "c": 0.1}), "--tol-alpha", "5"])
    assert res.exit_code == 3 and res.output.startswith("class=none")


@pytest.mark.parametrize("doc,field", [
    ({"kind": "paper-example", "c": 0.1, "bogus": 1}, "bogus"),
    ({"kind": "paper-example"}, "c"),
    ({"kind": "dense-sequence", "matrices": [[[1, 0], [0, 1]], [[1]]]}, "matrices"),
    ({"kind": "paper-example", "c": 0.1, "norm": "l7"}, "norm"),
])
def test_malformed_spec_exits_2_and_names_the_field(runner, spec, doc, field):
    res = runner.invoke(main, ["classify", spec(doc)])
    assert res.exit_code == 2
    assert f"field '{field}'" in res.output


def test_unreadable_json_exits_2(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert runner.invoke(main, ["classify", str(bad)]).exit_code == 2


def test_horizon_cap_is_enforced(runner, spec):
    assert runner.invoke(main, ["classify", spec({"kind": "constant-scalar", "a": 0.5}),
                                "--horizon", "20001"]).exit_code == 2


def _fields(line):
    return dict(tok.split("=", 1) for tok in line.split() if "=" in tok)


def test_datko_geometric_example(runner, spec):
    path = spec({"kind": "constant-scalar", "a": math.exp(-1)})
    res = runner.invoke(main, ["datko", path, "--d", "0.5", "--envelope", "1,1,0"])
    assert res.exit_code == 0, res.output
    lines = res.output.splitlines()
    constants = _fields(lines[1])
    assert float(constants["empirical_D"]) == pytest.approx(1 / (1 - math.exp(-0.5)), abs=1e-5)
    assert float(constants["derived_D"]) == pytest.approx(3.5415, abs=1e-4)
    assert lines[-1] == "verdict=pass"


def test_datko_uniform_check_flags_divergence(runner, spec):
    res = runner.invoke(main, ["datko", spec({"kind": "paper-example", "c": 0.2}), "--d", "0", "--uniform"])
    assert res.exit_code == 3
    assert "divergent" in res.output and res.output.splitlines()[-1] == "verdict=fail"


def test_datko_without_envelope_is_inconclusive(runner, spec):
    path = spec({"kind": "constant-scalar", "a": 0.5})
    res = runner.invoke(main, ["datko", path, "--envelope", "none", "--D", "3"])
    assert res.exit_code == 4 and "tail_bound=inf" in res.output
    # a partial sum already above the bound fails whatever the tail
    assert runner.invoke(main, ["datko", path, "--envelope", "none", "--D", "1"]).exit_code == 3


def test_datko_json_validates(runner, spec):
    res = runner.invoke(main, ["datko", spec({"kind": "constant-scalar", "a": 0.5}), "--d", "0.2", "--json", "-"])
    assert res.exit_code == 0
    doc = _validate(res.output)
    assert doc["result"]["type"] == "datko" and doc["result"]["verdict"] == "pass"


def test_datko_rejects_bad_vector(runner, spec):
    res = runner.invoke(main, ["datko", spec({"kind": "diagonal", "entries": [0.5, 0.2]}), "--x", "1,2,3"])
    assert res.exit_code == 2 and "field 'x'" in res.output


@pytest.mark.parametrize("doc", [
    {"kind": "paper-example", "c": 0.3},
    {"kind": "random", "seed": 3, "dimension": 3, "radius": 0.7},
    {"kind": "diagonal", "entries": [2.0, 0.1], "norm": "l1"},
])
def test_barbashin_single_term_is_trivial_pass(runner, spec, doc):
    res = runner.invoke(main, ["barbashin", spec(doc), "--b", "0", "--m", "0", "--horizon", "50"])
    assert res.exit_code == 0, res.output
    assert float(_fields(res.output.splitlines()[0])["partial_sum"]) == pytest.approx(1.0)


def test_barbashin_operator_sums_and_json(runner, spec):
    path = spec({"kind": "constant-scalar", "a": 0.5})
    res = runner.invoke(main, ["barbashin", path, "--operator", "--B", "2"])
    assert res.exit_code == 0
    assert float(_fields(res.output.splitlines()[1])["empirical_B"]) == pytest.approx(2.0, abs=1e-6)
    doc = _validate(runner.invoke(main, ["barbashin", path, "--json", "-"]).output)
    assert doc["result"]["type"] == "barbashin"


def test_barbashin_operator_check_fails_on_example(runner, spec):
    res = runner.invoke(main, ["barbashin", spec({"kind": "paper-example", "c": 0.2}), "--operator", "--B", "1e300"])
    assert res.exit_code == 3


def test_evolve_csv(runner, spec, tmp_path):
    out = tmp_path / "t.csv"
    res = runner.invoke(main, ["evolve", spec({"kind": "paper-example", "c": 0.2}), "--horizon", "10",
                               "--csv", str(out)])
    assert res.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "m,n,log_norm" and len(lines) == 1 + 11 * 12 // 2
    m, n, v = lines[1:][3].split(",")  # rows ordered by n, then m
    assert (int(m), int(n)) == (3, 0)
    assert float(v) == pytest.approx(3 * math.log(0.2) + 4)  # a_1 a_2 a_3 = e^{2-2+4}


def _explore_config(tmp_path, n_seeds):
    path = tmp_path / f"cfg{n_seeds}.json"
    path.write_text(json.dumps({"dimension": 2, "n_seeds": n_seeds, "horizon": 64, "top_k": 3}))
    return str(path)


def test_explore_resume_adds_only_new_records(runner, tmp_path):
    out = tmp_path / "run.jsonl"
    first = runner.invoke(main, ["explore", _explore_config(tmp_path, 5), "--out", str(out)])
    assert first.exit_code == 0, first.output
    assert len(out.read_text().splitlines()) == 5
    second = runner.invoke(main, ["explore", _explore_config(tmp_path, 10), "--out", str(out), "--resume"])
    assert second.exit_code == 0 and "skipped=5" in second.output
    specs = [json.loads(line)["spec"]["seed"] for line in out.read_text().splitlines()]
    assert sorted(specs) == list(range(10))


def test_explore_is_deterministic_and_json_validates(runner, tmp_path):
    cfg = _explore_config(tmp_path, 4)
    a = runner.invoke(main, ["explore", cfg, "--out", str(tmp_path / "a.jsonl")])
    b = runner.invoke(main, ["explore", cfg, "--out", str(tmp_path / "b.jsonl")])
    assert a.output == b.output
    assert (tmp_path / "a.jsonl").read_text() == (tmp_path / "b.jsonl").read_text()
    res = runner.invoke(main, ["explore", cfg, "--out", str(tmp_path / "c.jsonl"), "--json", "-"])
    doc = _validate(res.output)
    assert doc["result"]["evaluated"] == 4 and len(doc["result"]["top"]) == 3


def test_explore_config_errors(runner, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"dimension": 7}))
    res = runner.invoke(main, ["explore", str(path), "--out", str(tmp_path / "x.jsonl")])
    assert res.exit_code == 2 and "field 'dimension'" in res.output


def test_version(runner):
    res = runner.invoke(main, ["--version"])
    assert res.exit_code == 0 and "expstab" in res.output
