import json

import numpy as np
import pytest

from minefair.cli import main
from minefair.reporting import emit_plot_data, write_table
from minefair.scenario import bundled_scenario_path

BUNDLED = str(bundled_scenario_path())

TOY = """\
n_miners: 2
block_interval_s: 600
tie_break: first_seen
hashrates: [0.6, 0.4]
delays: {model: matrix, values: [[0, D], [D, 0]]}
"""


@pytest.fixture
def toy(tmp_path):
    # fork probability exactly 1/100 between the two miners
    d = -600 * np.log1p(-0.01)
    p = tmp_path / "toy.scenario"
    p.write_text(TOY.replace("D", repr(float(d))))
    return p


def read_csv(path):
    lines = path.read_text().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


def test_analyze_toy_matches_oracle(toy, tmp_path):
    from fractions import Fraction
    from minefair import TieBreak
    from test_engine import two_state_oracle

    out = tmp_path / "out"
    assert main(["analyze", "--scenario", str(toy), "--out", str(out)]) == 0
    rows = read_csv(out / "fairness.csv")
    (p1, p2), (r1, r2) = two_state_oracle(Fraction(3, 5), Fraction(1, 100), TieBreak.FIRST_SEEN)
    assert float(rows[0]["pi"]) == pytest.approx(float(p1), abs=1e-12)
    assert float(rows[1]["reward_share"]) == pytest.approx(float(r2), abs=1e-12)
    assert sorted(p.name for p in out.iterdir()) == [
        "fairness.csv", "fit.csv", "manifest.json", "mpr_theory_vs_alpha.dat", "mpr_vs_alpha.dat", "theory_compare.csv"]


def test_analyze_bundled(tmp_path):
    out = tmp_path / "a"
    assert main(["analyze", "--scenario", BUNDLED, "--out", str(out)]) == 0
    fit = read_csv(out / "fit.csv")[0]
    assert float(fit["correlation"]) >= 0.9999
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "analyze"
    assert len(manifest["scenario_fingerprint"]) == 64
    assert "fairness.csv" in manifest["outputs"]


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["analyze", "--scenario", str(tmp_path / "gone.scenario"), "--out", str(tmp_path / "o")]) == 1
    assert "gone.scenario" in capsys.readouterr().err


def test_invalid_scenario_exit_code(tmp_path):
    p = tmp_path / "bad.scenario"
    p.write_text("block_interval_s: 600\nhashrates: [0.7, 0.4]\ndelays: {model: fixed, d: 6}\n")
    assert main(["analyze", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 1


def test_convergence_failure_exit_code(toy, tmp_path, monkeypatch):
    import minefair.engine as engine
    monkeypatch.setattr(engine, "PI_MAX_ITER", 1)
    assert main(["analyze", "--scenario", str(toy), "--out", str(tmp_path / "o")]) == 2


def test_reproducible_outputs(tmp_path):
    for name in ("x", "y"):
        assert main(["sweep", "--scenario", BUNDLED, "--out", str(tmp_path / name), "--dt-list", "0.01,0.05"]) == 0
    assert (tmp_path / "x" / "sweep.csv").read_bytes() == (tmp_path / "y" / "sweep.csv").read_bytes()
    x = json.loads((tmp_path / "x" / "manifest.json").read_text())
    y = json.loads((tmp_path / "y" / "manifest.json").read_text())
    assert x["scenario_fingerprint"] == y["scenario_fingerprint"]


def test_sweep_table_one(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["sweep", "--scenario", BUNDLED, "--out", str(out), "--dt-list", "0,0.01,0.04,0.07"]) == 0
    rows = read_csv(out / "sweep.csv")
    assert rows[0]["flag"] == "degenerate" and float(rows[0]["slope_theory"]) == 0
    assert float(rows[0]["slope_numeric"]) == pytest.approx(0, abs=1e-12)
    for row, theory in zip(rows[1:], (0.0199003, 0.0784211, 0.135212)):
        assert float(row["slope_theory"]) == pytest.approx(theory, abs=1e-6)
        assert float(row["slope_numeric"]) == pytest.approx(float(row["slope_theory"]), rel=0.01)


def test_sweep_rejects_negative(tmp_path):
    assert main(["sweep", "--scenario", BUNDLED, "--out", str(tmp_path / "s"), "--dt-list", "-0.1"]) == 1
    assert main(["sweep", "--scenario", BUNDLED, "--out", str(tmp_path / "s"), "--dt-list", "abc"]) == 1


def test_theory_compare_json(tmp_path):
    out = tmp_path / "t"
    assert main(["theory-compare", "--scenario", BUNDLED, "--out", str(out), "--format", "json",
                 "--tie-break", "last_generated"]) == 0
    (row,) = json.loads((out / "theory_compare.json").read_text())
    assert set(row) == {"d_over_T", "slope_theory", "slope_numeric", "zero_point_numeric", "sum_alpha_sq",
                        "correlation", "flag"}
    assert row["d_over_T"] == 0.01


def test_simulate_command(toy, tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--scenario", str(toy), "--out", str(out), "--rounds", "200000", "--seed", "3"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("rounds=200000 forks=") and "max_dev_se=" in line
    rows = read_csv(out / "simulation.csv")
    assert sum(int(r["main_chain_blocks"]) for r in rows) == 200000
    summary = read_csv(out / "summary.csv")[0]
    assert float(summary["max_abs_dev_se"]) <= 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seeds"] == {"simulation": 3}


def test_ensemble_command(tmp_path):
    p = tmp_path / "e.scenario"
    p.write_text("block_interval_s: 600\nhashrates: {pools: [[a, 0.4], [b, 0.2]], fill_to: 30}\n"
                 "delays: {model: logistic, mean: 6}\n")
    out = tmp_path / "e"
    assert main(["ensemble", "--scenario", str(p), "--out", str(out), "--draws", "5", "--seed", "1"]) == 0
    rows = read_csv(out / "ensemble.csv")
    assert list(rows[0]) == ["miner_id", "alpha", "mpr_mean", "mpr_std", "mpr_fixed_reference"]
    assert len(rows) == 30
    assert (out / "mpr_std_vs_alpha.dat").exists()


def test_ensemble_rejects_matrix_delays(toy, tmp_path):
    assert main(["ensemble", "--scenario", str(toy), "--out", str(tmp_path / "e"), "--draws", "3"]) == 1


def test_game_command(tmp_path, capsys):
    out = tmp_path / "g"
    assert main(["game", "--scenario", BUNDLED, "--out", str(out)]) == 0
    rows = read_csv(out / "game.csv")
    eq = [(r["intra_large"], r["intra_small"]) for r in rows if r["eq"] == "EQ"]
    assert eq == [("fast", "fast")]
    text = (out / "game.txt").read_text()
    assert text.splitlines()[1].split()[:2] == ["fast", "fast"] and text.splitlines()[1].endswith("EQ")


def test_plot_data(tmp_path):
    (path,) = emit_plot_data({"curve": ([0.3, 0.1, 0.2], [3.0, 1.0, 2.0])}, tmp_path)
    data = np.loadtxt(path)
    assert data[:, 0].tolist() == [0.1, 0.2, 0.3]
    assert data[:, 1].tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        emit_plot_data({}, tmp_path)
    with pytest.raises(ValueError):
        emit_plot_data({"e": ([], [])}, tmp_path)
    with pytest.raises(OSError, match="nowhere"):
        emit_plot_data({"c": ([1.0], [1.0])}, tmp_path / "nowhere")


def test_write_table_formats(tmp_path):
    rows = [{"a": 1, "b": 0.5, "c": float("nan")}]
    assert write_table(rows, tmp_path / "t", "csv").read_text() == "a,b,c\n1,0.5,nan\n"
    assert json.loads(write_table(rows, tmp_path / "t", "json").read_text()) == [{"a": 1, "b": 0.5, "c": None}]
