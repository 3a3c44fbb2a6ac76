import json

import numpy as np
import pytest

from fsse import attack_sim, cli
from fsse.scenario import fixture_path


def _main(*args):
    return cli.main([str(a) for a in args])


def test_partition(tmp_path, capsys):
    assert _main("partition", "--scenario", fixture_path("three_inertia"), "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "{S1,S3}" in out and "{S4,S6}" in out and "M_T" in out
    doc = json.loads((tmp_path / "partition.json").read_text())
    assert {tuple(t["members"]) for t in doc["types"]} == {(1, 3), (2,), (4, 6), (5,)}
    assert doc["ranks"] == [6, 4, 6, 4, 2, 4]


def test_run_outputs(tmp_path, capsys):
    rc = _main("run", "--scenario", fixture_path("three_inertia_case2"), "--out", tmp_path, "--seed", 3)
    assert rc == 0
    for name in ("trace.csv", "estimates.csv", "agreement.csv", "summary.json"):
        assert (tmp_path / name).exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["seed"] == 3 and summary["full_search_size"] == 15
    assert summary["estimators"]["fsse"]["mean_search_size"] == 3
    assert summary["constants"]["radius_fsse"] == "inf"


def test_run_mode_override(tmp_path):
    rc = _main("run", "--scenario", fixture_path("three_inertia_case1"), "--out", tmp_path,
               "--mode", "exhaustive", "--agreement", "median")
    assert rc == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert list(summary["estimators"]) == ["exhaustive"]
    assert not (tmp_path / "agreement.csv").exists()


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"A": [[1.0]], "s_max": 0}))
    assert _main("run", "--scenario", bad, "--out", tmp_path) == cli.EXIT_PARSE
    assert "C: missing" in capsys.readouterr().err
    assert _main("partition", "--scenario", tmp_path / "nope.json") == cli.EXIT_PARSE


def test_zero_horizon_is_rejected_before_simulation(tmp_path, monkeypatch):
    doc = json.loads(fixture_path("three_inertia_case1").read_text())
    doc["horizon"] = 0
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(doc))

    def boom(*a, **k):
        raise AssertionError("simulation must not start")

    monkeypatch.setattr(cli, "run_scenario", boom)
    assert _main("run", "--scenario", path, "--out", tmp_path) == cli.EXIT_PARSE


def test_observability_exit_code(tmp_path):
    rc = _main("run", "--scenario", fixture_path("three_inertia_case1"), "--out", tmp_path, "--strict")
    assert rc == cli.EXIT_OBSERVABILITY


def test_exhaustion_exit_code(tmp_path, monkeypatch):
    """Measurement noise far outside its declared envelope leaves no consistent candidate."""
    real = attack_sim.draw_noise

    def loud(rng, bounds, n):
        w, v = real(rng, bounds, n)
        return w, v + rng.uniform(-50, 50, size=v.shape)

    monkeypatch.setattr(attack_sim, "draw_noise", loud)
    rc = _main("run", "--scenario", fixture_path("three_inertia_case1"), "--out", tmp_path)
    assert rc == cli.EXIT_EXHAUSTED
    rows = (tmp_path / "estimates.csv").read_text().splitlines()
    assert any(r.endswith("exhausted" + "," * 6) for r in rows)


@pytest.mark.parametrize("jobs", [1, 2])
def test_bench(tmp_path, capsys, jobs):
    rc = _main("bench", "--scenario", fixture_path("three_inertia_case4"), "--runs", 2,
               "--jobs", jobs, "--out", tmp_path)
    assert rc == 0
    report = json.loads((tmp_path / "bench.json").read_text())
    assert report["runs"] == 2 and report["exhaustive_mean_evaluated"] > report["fsse_mean_evaluated"]
    assert "machine dependent" in capsys.readouterr().out
    assert len((tmp_path / "bench.csv").read_text().splitlines()) == 3


def test_tables(capsys):
    assert _main("table1") == 0
    out = capsys.readouterr().out
    assert out.count("\n") == 14 and "average 5.25 of 15" in out
    assert _main("method-table", "--p-list", 10, 16) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].split()[-1] == "4" and lines[2].split()[-1] == "5"


def test_table1_general():
    assert _main("table1", "--p", 5, "--s", 1) == 0


def test_missing_subcommand():
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 2
