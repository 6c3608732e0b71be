import csv
import json
from pathlib import Path

import pytest

from spreadnet.cli import main, parse_delta_grid


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *argv, name="out"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def test_degree_mean_column(tmp_path):
    code, out = run(tmp_path, "degree", "--lambda", "25", "--range-m", "200", "--strand", "intra:1")
    assert code == 0
    rows = read_rows(out / "degree_summary.csv")
    assert float(rows[0]["mean"]) == pytest.approx(3.14, abs=0.005)
    pmf = read_rows(out / "degree_pmf_intra_1.csv")
    assert sum(float(r["pmf"]) for r in pmf) == pytest.approx(1.0, abs=1e-12)
    manifest = json.loads((out / "manifest.json").read_text())
    assert {o["path"] for o in manifest["outputs"]} == {"degree_summary.csv", "degree_pmf_intra_1.csv"}
    assert manifest["command"] == "degree" and "wall_clock_s" in manifest


def test_degree_km_flag_and_empirical(tmp_path):
    code, out = run(tmp_path, "degree", "--lambda", "25", "--range-km", "0.2", "--empirical",
                    "--window-km", "10", "--seed", "4")
    assert code == 0
    row = read_rows(out / "degree_summary.csv")[0]
    assert float(row["tv_distance"]) < 0.05
    assert int(row["nodes"]) > 2000


def test_missing_design_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["degree", "--out", str(tmp_path / "x")])
    assert info.value.code == 2


def test_unknown_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["optimize", "--preset", "intelligence", "--bogus"])
    assert info.value.code == 2


def test_fig10_bound_below_exact(tmp_path):
    code, out = run(tmp_path, "equilibrium", "--fig10")
    assert code == 0
    rows = read_rows(out / "fig10.csv")
    assert len(rows) == 60
    for r in rows:
        assert float(r["theta_approx"]) <= float(r["theta_exact"]) + 1e-12
        if float(r["lambda"]) == 100 and float(r["alpha"]) >= 0.2:
            assert float(r["gap"]) <= 0.02


def test_equilibrium_zero_rate(tmp_path):
    code, out = run(tmp_path, "equilibrium", "--lambda", "25", "50", "--range-m", "200", "100", "--delta", "1")
    assert code == 0
    rows = read_rows(out / "equilibrium.csv")
    assert len(rows) == 5 and all(float(r["theta_exact"]) == 0 for r in rows)


def test_optimize_with_verify(tmp_path):
    code, out = run(tmp_path, "optimize", "--preset", "intelligence", "--delta", "0.2", "--verify")
    assert code == 0
    row = read_rows(out / "optimize.csv")[0]
    assert float(row["r_1_km"]) > float(row["r_2_km"])
    assert float(row["lambda_2"]) > float(row["lambda_1"])
    assert row["feasible"] == "true"
    assert len(read_rows(out / "verify.csv")) == 5
    trace = [float(r["cost"]) for r in read_rows(out / "optimize_trace.csv")]
    assert all(b <= a for a, b in zip(trace, trace[1:]))


def test_optimize_delta_out_of_range(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["optimize", "--preset", "intelligence", "--delta", "2", "--out", str(tmp_path / "x")])
    assert info.value.code == 2


def test_optimize_zero_rate_is_infeasible(tmp_path):
    code, out = run(tmp_path, "optimize", "--preset", "encounter", "--delta", "1")
    assert code == 3
    assert read_rows(out / "optimize.csv")[0]["feasible"] == "false"


def test_sweep_intelligence(tmp_path):
    code, out = run(tmp_path, "sweep", "--preset", "intelligence", "--delta", "0:0.8:0.1")
    assert code == 0
    rows = read_rows(out / "sweep.csv")
    assert len(rows) == 9
    costs = [float(r["cost"]) for r in rows]
    assert all(b >= a for a, b in zip(costs, costs[1:]))
    assert list(rows[0]) == ["delta", "alpha", "lambda_1", "lambda_2", "r_1_km", "r_2_km",
                             "cost", "feasible", "iterations"]


def test_sweep_encounter_pins_commanders(tmp_path):
    code, out = run(tmp_path, "sweep", "--preset", "encounter", "--delta", "0:0.8:0.2", "--jobs", "2")
    assert code == 0
    assert {float(r["lambda_1"]) for r in read_rows(out / "sweep.csv")} == {5.0}


def test_sweep_all_infeasible_exit_code(tmp_path):
    mission = json.loads((Path(__file__).parent / "data" / "intelligence.json").read_text())
    mission["thresholds"]["global"] = 0.99
    path = tmp_path / "hard.json"
    path.write_text(json.dumps(mission))
    code, out = run(tmp_path, "sweep", "--mission", str(path), "--delta", "0.5,0.9")
    assert code == 3
    rows = read_rows(out / "sweep.csv")
    assert [r["feasible"] for r in rows] == ["false", "false"]
    assert rows[0]["lambda_1"] == ""


def test_sweep_rejects_delta_one(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["sweep", "--preset", "intelligence", "--delta", "0.5:1.0:0.5", "--out", str(tmp_path / "x")])
    assert info.value.code == 2


def test_bad_mission_file_exit_code(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"weights": [0.5, 0.6]}')
    code, _ = run(tmp_path, "optimize", "--mission", str(path))
    assert code == 2


def test_simulate_subcritical(tmp_path):
    code, out = run(tmp_path, "simulate", "--lambda", "25", "--range-km", "0.2", "--delta", "0.95",
                    "--slots", "60", "--burn-in", "20", "--trials", "3")
    assert code == 0
    assert float(read_rows(out / "simulate_summary.csv")[0]["mc_mean"]) < 0.01


def test_simulate_supercritical_near_mean_field(tmp_path):
    code, out = run(tmp_path, "simulate", "--lambda", "100", "--range-m", "200", "--delta", "0.5",
                    "--slots", "120", "--burn-in", "40", "--trials", "4")
    assert code == 0
    row = read_rows(out / "simulate_summary.csv")[0]
    assert abs(float(row["mc_mean"]) - float(row["meanfield_avg_informed"])) <= 0.1
    assert len(read_rows(out / "simulate_trajectory.csv")) == 121


def test_manifest_argv_reproduces_outputs(tmp_path):
    code, out = run(tmp_path, "degree", "--lambda", "30", "--range-m", "150", "--empirical",
                    "--window-km", "5", "--seed", "7", name="first")
    manifest = json.loads((out / "manifest.json").read_text())
    argv = list(manifest["argv"])
    argv[argv.index("--out") + 1] = str(tmp_path / "again")
    assert main(argv) == 0
    for entry in manifest["outputs"]:
        assert (tmp_path / "again" / entry["path"]).read_bytes() == (out / entry["path"]).read_bytes()


def test_csv_line_endings(tmp_path):
    _, out = run(tmp_path, "equilibrium", "--lambda", "25", "--range-m", "200", "--delta", "0.3")
    data = (out / "equilibrium.csv").read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")


def test_delta_grid_parsing():
    assert parse_delta_grid("0:0.8:0.1") == [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    assert parse_delta_grid("0.2,0.4") == [0.2, 0.4]
    assert parse_delta_grid("0.3") == [0.3]
