import csv
import json

import numpy as np
import pytest

from optsample.cli import ConfigError, load_scenario, main, parse_scenario


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def ex1_dict():
    return json.loads(json.dumps(load_scenario("example1").raw))


def test_check_example1(capsys, tmp_path):
    code, out, _ = run(capsys, "check", "example1", "--out", str(tmp_path / "r.json"))
    assert code == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    for k in ("A2", "A3", "A5(i)", "A5(ii)"):
        assert rep["assumptions"][k]["status"] == "pass"
    assert rep["format_version"] == 1


def test_check_flipped_channel_fails(capsys, tmp_path, ex1_dict):
    ex1_dict["observations"]["matrix"] = [[0, 1], [1, 0]]
    path = tmp_path / "flip.json"
    path.write_text(json.dumps(ex1_dict))
    code, out, _ = run(capsys, "check", str(path), "--no-solve")
    assert code == 1 and "A3      fail" in out


def test_malformed_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "check", str(bad))[0] == 2


def test_field_level_errors(ex1_dict):
    ex1_dict["costs"]["f"] = -1
    with pytest.raises(ConfigError) as info:
        parse_scenario(ex1_dict)
    assert info.value.path == "costs"
    d = dict(ex1_dict, intervals=[3, 1])
    with pytest.raises(ConfigError):
        parse_scenario(d)
    with pytest.raises(ConfigError) as info:
        parse_scenario({k: v for k, v in ex1_dict.items() if k != "observations"})
    assert info.value.path == "observations"


def test_unknown_scenario(capsys):
    assert run(capsys, "solve", "no_such_thing")[0] == 2


def test_solve_artifacts_agree(capsys, tmp_path):
    out = tmp_path / "ex1.json"
    code, text, _ = run(capsys, "solve", "example1", "--out", str(out))
    assert code == 0
    data = json.loads(out.read_text())
    th = data["thresholds"]
    assert th["monotone"] and len(th["values"]) == 4 and th["values"] == sorted(th["values"], reverse=True)
    with (tmp_path / "ex1.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["pi_1", "pi_2", "action", "value"]
    assert [int(r["action"]) for r in rows] == data["actions"]
    np.testing.assert_allclose([float(r["value"]) for r in rows], data["values"], rtol=1e-11)
    assert data["final_gap"] < 1e-6


def test_free_stopping_scenario(capsys, tmp_path, ex1_dict):
    ex1_dict["costs"]["f"] = 0
    path = tmp_path / "free.json"
    path.write_text(json.dumps(ex1_dict))
    out = tmp_path / "free_policy.json"
    assert run(capsys, "solve", str(path), "--out", str(out), "--grid", "50")[0] == 0
    assert set(json.loads(out.read_text())["actions"]) == {0}


def test_solve_three_states_with_overlay(capsys, tmp_path):
    out = tmp_path / "ex4.json"
    assert run(capsys, "solve", "example4", "--alpha", "100", "--out", str(out))[0] == 0
    data = json.loads(out.read_text())
    assert data["grid"]["points"] == 8001
    assert len(data["myopic_upper"]["actions"]) == 8001
    assert data["stopping_set"]["convex"]


def test_solve_rejects_bad_alpha(capsys, tmp_path):
    code, _, err = run(capsys, "solve", "example4", "--alpha", "10", "--grid", "20", "--out", str(tmp_path / "x.json"))
    assert code == 1 and "alpha" in err


def test_simulate_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "simulate", "example1", "--runs", "1", "--seed", "1", "--grid", "200", "--out", str(a))
    run(capsys, "simulate", "example1", "--runs", "1", "--seed", "1", "--grid", "200", "--out", str(b))
    assert a.read_text() == b.read_text()


def test_policy_file_round_trip(capsys, tmp_path):
    pol = tmp_path / "p.json"
    run(capsys, "solve", "example1", "--grid", "300", "--out", str(pol))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "simulate", "example1", "--grid", "300", "--runs", "500", "--seed", "4", "--out", str(a))
    run(capsys, "simulate", "example1", "--policy", "file", "--policy-file", str(pol),
        "--runs", "500", "--seed", "4", "--out", str(b))
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert da["mean"] == db["mean"] and da["std_error"] == db["std_error"]


def test_simulate_myopic_lower_costs_more(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(capsys, "simulate", "example1", "--runs", "3000", "--seed", "1", "--out", str(a))
    run(capsys, "simulate", "example1", "--policy", "myopic-lower", "--runs", "3000", "--seed", "1", "--out", str(b))
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    pooled = np.hypot(da["std_error"]["total"], db["std_error"]["total"])
    assert db["mean"]["total"] >= da["mean"]["total"] - 3 * pooled


def test_compare_identical(capsys, tmp_path):
    out = tmp_path / "c.json"
    code, _, _ = run(capsys, "compare", "example1", "example1", "--grid", "200", "--out", str(out))
    data = json.loads(out.read_text())
    assert code == 0 and data["sensitivity"]["norm"] == 0 and data["sensitivity"]["bound"] == 0


def test_compare_geometric_pair(capsys):
    code, out, _ = run(capsys, "compare", "geometric_slow", "geometric_fast", "--grid", "300")
    assert code == 0 and "V(theta) >= V(theta_bar):      True" in out


def test_compare_gaussian_pair_reports_both_forms(capsys, tmp_path):
    out = tmp_path / "g.json"
    code, text, _ = run(capsys, "compare", "example2", "example2_wide", "--grid", "200", "--out", str(out))
    kl = json.loads(out.read_text())["kl"]
    assert kl["gaussian_closed_form"] == pytest.approx(0.0663, abs=5e-5)
    assert kl["gaussian_standard_kl"] == pytest.approx(np.sqrt(1 / 1.21 - np.log(1 / 1.21) - 1))


def test_compare_incompatible(capsys):
    assert run(capsys, "compare", "example1", "example4")[0] == 2


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0 and "example4" in out.split()
