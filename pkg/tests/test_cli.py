import json
import warnings

import pytest
from click.testing import CliRunner

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from gridwelfare.cli import main

from test_experiment import base_config, hand_toy_config
from test_ingest import price_csv, wind_csv


@pytest.fixture()
def runner():
    return CliRunner()


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def test_simulate_writes_artifacts(tmp_path, runner):
    cfg = write_config(tmp_path, hand_toy_config())
    out = tmp_path / "out"
    result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "run_5.csv").exists()
    assert (out / "summary.json").exists()
    assert "welfare=4.8" in result.output


def test_simulate_is_reproducible(tmp_path, runner):
    cfg = write_config(tmp_path, base_config(days=6))
    for d in ("a", "b"):
        assert runner.invoke(
            main, ["simulate", "--config", str(cfg), "--out", str(tmp_path / d)]
        ).exit_code == 0
    for name in ("run_20.csv", "sweep.csv", "distributions.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_eta_days_seed_overrides(tmp_path, runner):
    cfg = write_config(tmp_path, base_config())
    out = tmp_path / "out"
    result = runner.invoke(
        main,
        [
            "sweep", "--config", str(cfg), "--out", str(out),
            "--eta", "5,10", "--days", "3", "--seed", "77",
        ],
    )
    assert result.exit_code == 0, result.output
    sweep = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(sweep) == 3  # header + 2 etas
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 77 and summary["days"] == 3


def test_validate_failure_exits_one(tmp_path, runner):
    cfg_dict = base_config()
    cfg_dict["users"][0]["l_av"] = 0.1
    cfg = write_config(tmp_path, cfg_dict)
    result = runner.invoke(main, ["validate", "--config", str(cfg)])
    assert result.exit_code == 1


def test_validate_ok_prints_report(tmp_path, runner):
    cfg = write_config(tmp_path, base_config())
    result = runner.invoke(main, ["validate", "--config", str(cfg)])
    assert result.exit_code == 0, result.output
    assert "queue_bounds" in result.output


def test_market_mode_mismatch_exits_one(tmp_path, runner):
    cfg = write_config(tmp_path, base_config())
    result = runner.invoke(main, ["simulate", "--config", str(cfg), "--market", "markov"])
    assert result.exit_code == 1
    assert "does not match" in result.output


def test_broken_config_json_exits_one(tmp_path, runner):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    result = runner.invoke(main, ["simulate", "--config", str(path)])
    assert result.exit_code == 1


def test_invalid_model_config_exits_one(tmp_path, runner):
    cfg_dict = base_config()
    cfg_dict["users"][0]["utility"] = [[1, 0], [2, 1]]
    cfg = write_config(tmp_path, cfg_dict)
    result = runner.invoke(main, ["simulate", "--config", str(cfg)])
    assert result.exit_code == 1
    assert "error (validation)" in result.output


def test_invariant_error_exits_two(tmp_path, runner, monkeypatch):
    import importlib

    service_app_module = importlib.import_module("gridwelfare.service.app")
    from gridwelfare.errors import InvariantViolationError

    def boom(config):
        raise InvariantViolationError("bound violated", details={"day": 1})

    monkeypatch.setattr(service_app_module, "run_experiment", boom)
    cfg = write_config(tmp_path, hand_toy_config())
    result = runner.invoke(main, ["simulate", "--config", str(cfg)])
    assert result.exit_code == 2
    assert "error (invariant)" in result.output


def test_oracle_subcommand(tmp_path, runner):
    cfg = write_config(tmp_path, base_config())
    out = tmp_path / "out"
    result = runner.invoke(main, ["oracle", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "oracle.json").read_text())
    assert report["feasible"]


def test_ingest_prices_subcommand(tmp_path, runner):
    paths = []
    for m in range(2):
        p = tmp_path / f"m{m}.csv"
        p.write_text(price_csv(3, base=1.0 + m), encoding="utf-8")
        paths.append(str(p))
    out = tmp_path / "market.json"
    result = runner.invoke(main, ["ingest", "prices", "--t-slots", "3", "--out", str(out), *paths])
    assert result.exit_code == 0, result.output
    snippet = json.loads(out.read_text())
    assert snippet["mode"] == "iid" and len(snippet["states"]) == 2


def test_ingest_wind_subcommand(tmp_path, runner):
    p = tmp_path / "wind.csv"
    p.write_text(wind_csv([(0, 0, 0.4), (1, 0, 0.8)]), encoding="utf-8")
    out = tmp_path / "renewable.json"
    result = runner.invoke(main, ["ingest", "wind", "--t-slots", "1", "--out", str(out), str(p)])
    assert result.exit_code == 0, result.output
    snippet = json.loads(out.read_text())
    assert snippet["atoms_per_slot"] == [[[0.4, 0.5], [0.8, 0.5]]]


def test_trace_references_resolved_end_to_end(tmp_path, runner):
    # config refers to both kinds of trace file; the client inlines them
    (tmp_path / "prices_a.csv").write_text(price_csv(2, base=1.0), encoding="utf-8")
    (tmp_path / "prices_b.csv").write_text(price_csv(2, base=2.0), encoding="utf-8")
    (tmp_path / "wind.csv").write_text(
        wind_csv([(0, 0, 0.2), (0, 1, 0.6), (1, 0, 0.4), (1, 1, 0.6)]), encoding="utf-8"
    )
    cfg_dict = base_config(days=2)
    cfg_dict["market"] = {"mode": "iid", "trace_paths": ["prices_a.csv", "prices_b.csv"]}
    cfg_dict["renewable"] = {"trace_path": "wind.csv"}
    cfg = write_config(tmp_path, cfg_dict)
    out = tmp_path / "out"
    result = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "run_20.csv").exists()


def test_ingest_atoms_round_trip(tmp_path, runner):
    dump = tmp_path / "atoms.csv"
    dump.write_text("slot,value,weight\n0,0.5,0.25\n0,1.5,0.75\n", encoding="utf-8")
    result = runner.invoke(main, ["ingest", "atoms", str(dump)])
    assert result.exit_code == 0, result.output
    assert "2 atoms" in result.output
