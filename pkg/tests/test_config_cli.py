import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from fdmimo.cli import EXIT_CONFIG, EXIT_OK, main
from fdmimo.config import ConfigError, ExperimentConfig, config_from_dict, load_config
from fdmimo.experiments import run_experiment

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_RMSE = {
    "kind": "rmse", "seed": 3, "trials": 2, "mc_samples": 50,
    "scenario": {"users_per_cell": 2, "m1": 4, "m2": 4, "nt": 4, "num_paths": 2},
    "pilots": {"pilot_length": 16, "rho1": 0.1},
    "sweep": {"snr_db": [10, "inf"]},
}


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(json.dumps(data), encoding="utf-8")  # JSON is valid YAML
    return p


def _read_csv(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    rows = list(csv.reader(lines[1:]))
    return meta, rows[0], rows[1:]


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
def test_shipped_configs_validate(path):
    load_config(path).validate()


def test_defaults_follow_reference_setup():
    cfg = ExperimentConfig()
    sc = cfg.scenario
    assert (sc.cells, sc.users_per_cell, sc.nt, sc.num_paths, sc.cell_radius_m) == (7, 10, 8, 4, 1000.0)
    assert cfg.pilots.rho1 == 0.1
    assert cfg.complexity.music_grid == 360


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        config_from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="scenario"):
        config_from_dict({"scenario": {"antennas": 4}})


def test_type_errors():
    with pytest.raises(ConfigError):
        config_from_dict({"trials": "many"})
    with pytest.raises(ConfigError):
        config_from_dict({"precoding": {"strategies": [1, 2]}})
    with pytest.raises(ConfigError):
        config_from_dict({"sweep": {"snr_db": ["loud"]}})


def test_feasibility_problems_listed():
    cfg = config_from_dict({"scenario": {"nt": 8, "users_per_cell": 10}, "pilots": {"rho1": 0.2, "pilot_length": 16}})
    problems = cfg.problems()
    assert any("rho1" in p for p in problems)
    assert any("pilot_length" in p for p in problems)
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    assert len(exc.value.problems) >= 2
    bad_order = config_from_dict({"scenario": {"m1": 2, "m2": 2, "num_paths": 4}, "pilots": {"pilot_length": 80}})
    assert any("geometry 2x2" in p for p in bad_order.problems())


def test_sigma2_conventions():
    cfg = config_from_dict({"kind": "sumrate", "precoding": {"p_t": 2.0}})
    assert cfg.sigma2(10) == pytest.approx(0.2)
    per_user = config_from_dict({"kind": "sumrate", "scenario": {"users_per_cell": 4},
                                 "precoding": {"p_t": 2.0, "snr_definition": "per_user"}})
    assert per_user.sigma2(0) == pytest.approx(0.5)
    assert config_from_dict({}).sigma2(math.inf) == 0.0


def test_round_trip_through_dict():
    cfg = load_config(CONFIGS / "sumrate_16x16.yaml")
    again = config_from_dict(json.loads(cfg.dumps()))
    assert again == cfg


def test_cli_exit_codes(tmp_path, capsys):
    bad = _write(tmp_path, {"bogus": 1})
    assert main(["rmse", "--config", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    infeasible = _write(tmp_path, {"pilots": {"rho1": 0.5}}, "inf.yaml")
    assert main(["rmse", "--config", str(infeasible), "--out", str(tmp_path / "x.csv")]) == EXIT_CONFIG
    assert main(["rmse", "--config", str(tmp_path / "missing.yaml"), "--out", "x.csv"]) == EXIT_CONFIG
    ok = _write(tmp_path, SMALL_RMSE, "ok.yaml")
    assert main(["rmse", "--config", str(ok)]) == EXIT_CONFIG  # no output path
    assert main(["rmse", "--config", str(ok), "--out", "x.csv", "--threads", "0"]) == EXIT_CONFIG


def test_rmse_csv_format(tmp_path):
    cfg_path = _write(tmp_path, SMALL_RMSE)
    out = tmp_path / "r.csv"
    assert main(["rmse", "--config", str(cfg_path), "--out", str(out), "--trials", "3"]) == EXIT_OK
    meta, header, rows = _read_csv(out)
    assert meta["config"]["trials"] == 3
    assert set(header) <= set(meta["columns"])
    assert len(rows) == 2
    assert [r[header.index("snr_db")] for r in rows] == ["10", "inf"]
    for row in rows:
        for cell in row:
            if cell:
                assert math.isfinite(float(cell)) or cell == "inf"


def test_noiseless_single_user_row_is_exact(tmp_path):
    data = dict(SMALL_RMSE, scenario={"cells": 1, "users_per_cell": 1, "m1": 4, "m2": 4, "nt": 4, "num_paths": 2},
                sweep={"snr_db": ["inf"]})
    out = tmp_path / "r.csv"
    assert main(["rmse", "--config", str(_write(tmp_path, data)), "--out", str(out)]) == EXIT_OK
    _, header, rows = _read_csv(out)
    assert float(rows[0][header.index("rmse_theta_deg")]) <= 1e-6
    assert float(rows[0][header.index("rmse_phi_deg")]) <= 1e-6


def test_flops_csv_rows(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["flops", "--config", str(CONFIGS / "flops.yaml"), "--out", str(out)]) == EXIT_OK
    _, header, rows = _read_csv(out)
    by_side = {int(r[0]): dict(zip(header, map(int, r))) for r in rows}
    assert by_side[8]["esprit"] == 494952 and by_side[8]["music"] == 9891784
    assert by_side[16]["bd"] == 6096170880 and by_side[16]["doa_precoder"] == 377556992
    for r in by_side.values():
        assert r["music"] > r["esprit"]


def test_sumrate_result_shape():
    cfg = config_from_dict({
        "kind": "sumrate", "seed": 1, "trials": 2,
        "scenario": {"cells": 1, "users_per_cell": 2, "m1": 4, "m2": 4, "nt": 2, "num_paths": 2},
        "pilots": {"pilot_length": 8},
        "sweep": {"snr_db": [0, 10]},
        "precoding": {"strategies": ["schemeB", "bdzf"], "doa_mode": "perfect"},
    }).validate()
    res = run_experiment(cfg)
    assert res.columns == ["snr_db", "schemeB_mean", "schemeB_halfwidth", "bdzf_mean", "bdzf_halfwidth"]
    assert len(res.rows) == 2
    assert np.all(np.isfinite(np.array(res.rows, dtype=float)))
