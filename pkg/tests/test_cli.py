import csv
import io
import json

import numpy as np
import pytest

from qgames.cli import (COLUMNS, DEFAULT_GRID, ConfigError, SweepConfig, cmd_sweep, parse_grid,
                        run)
from qgames.quantum_sim import pseudo_telepathic_solution


def call(argv):
    out = io.StringIO()
    code = run(argv, stdout=out)
    return code, out.getvalue()


def rows_of(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_default_grid():
    assert len(DEFAULT_GRID) == 49 and DEFAULT_GRID[0] == 0.02 and DEFAULT_GRID[-1] == 0.98


def test_parse_grid_forms():
    assert parse_grid("0.1,0.2") == (0.1, 0.2)
    assert parse_grid("0.1:0.3:0.1") == (0.1, 0.2, 0.3)
    with pytest.raises(ConfigError):
        parse_grid("a,b")
    with pytest.raises(ConfigError):
        parse_grid("0.1:0.3:0")


def test_sweep_config_validation():
    with pytest.raises(ConfigError):
        SweepConfig(grid=(0.5, 0.4))
    with pytest.raises(ConfigError):
        SweepConfig(grid=(0.0, 0.5))
    with pytest.raises(ConfigError):
        SweepConfig(curves=("npa", "fancy"))


def test_sweep_symmetric_row():
    code, text = call(["sweep", "--grid", "0.5", "--restarts", "2", "--deterministic"])
    assert code == 0
    (row,) = rows_of(text)
    assert list(row) == list(COLUMNS)
    assert float(row["npa_bound"]) == pytest.approx(1.0, abs=1e-6)
    assert float(row["seesaw_qcorr"]) == pytest.approx(1.0, abs=1e-6)
    assert float(row["pt_sw"]) == pytest.approx(1.0, abs=1e-9)
    assert float(row["classical_lp"]) == pytest.approx(0.75, abs=1e-7)
    assert row["errors"] == ""


def test_sweep_extreme_ratio_classical_is_tight():
    text, rows = cmd_sweep(SweepConfig(grid=(0.98,), curves=("classical", "npa"), deterministic=True))
    (row,) = rows
    assert row["classical_lp"] == pytest.approx(row["npa_bound"], abs=1e-5)


def test_sweep_writes_csv_and_json(tmp_path):
    out = tmp_path / "sweep.csv"
    code, _ = call(["sweep", "--grid", "0.3,0.6", "--curves", "classical,bi_lp,pt",
                    "--out", str(out)])
    assert code == 0
    text = out.read_text()
    assert text.startswith("# generated ")
    assert len(rows_of(text)) == 2
    detail = json.loads(out.with_suffix(".json").read_text())
    assert [p["ratio"] for p in detail["points"]] == [0.3, 0.6]


def test_sweep_deterministic_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--grid", "0.2,0.45", "--restarts", "2", "--seed", "4", "--deterministic"]
    assert call(argv + ["--out", str(a)])[0] == 0
    assert call(argv + ["--out", str(b)])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert not a.read_text().startswith("#")


def test_sweep_config_file(tmp_path):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"grid": "0.5", "curves": ["classical"], "deterministic": True}))
    code, text = call(["sweep", "--config", str(conf)])
    assert code == 0
    (row,) = rows_of(text)
    assert row["npa_bound"] == "" and float(row["classical_lp"]) == pytest.approx(0.75, abs=1e-7)


def test_sweep_bad_grid_is_config_error():
    assert call(["sweep", "--grid", "0.6,0.4"])[0] == 1


def test_verify_pt():
    code, text = call(["verify", "--named", "pt", "--v0", "1", "--v1", "1"])
    report = json.loads(text)
    assert code == 0
    assert report["canonical_nash"]["is_equilibrium"] and report["quantum_equilibrium"]["is_equilibrium"]
    assert report["social_welfare"] == pytest.approx(1.0, abs=1e-12)
    assert report["nonsignalling_residual"] <= 1e-12


def test_verify_deviated():
    code, text = call(["verify", "--named", "deviated", "--theta", "1.7", "--v0", "0.5", "--v1", "1.5"])
    report = json.loads(text)
    assert code == 3
    assert report["canonical_nash"]["is_equilibrium"]
    assert not report["quantum_equilibrium"]["is_equilibrium"]
    assert report["social_welfare"] == pytest.approx(1.0107, abs=1e-3)


def test_verify_solution_file(tmp_path):
    path = tmp_path / "sol.json"
    path.write_text(json.dumps(pseudo_telepathic_solution("NC_C3").to_json()))
    assert call(["verify", str(path)])[0] == 0


def test_verify_corrupted_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"state": {"dims": [2, 2, 2],\n "rho": [[1, 0]\n')
    code, _ = call(["verify", str(path)])
    assert code == 1
    assert "line" in capsys.readouterr().err


def test_verify_wrong_schema(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"state": {"dims": [2]}}))
    assert call(["verify", str(path)])[0] == 1


def test_game_json_file(tmp_path):
    path = tmp_path / "triangle.json"
    path.write_text(json.dumps({"n": 3, "questions": ["100", "010", "001", "111"],
                                "winning": [["100", "111", 0], ["010", "111", 0],
                                            ["001", "111", 0], ["111", "111", 1]],
                                "v0": 1, "v1": 1}))
    code, text = call(["classical", "--game", str(path)])
    assert code == 0
    assert json.loads(text)["classical_lp"] == pytest.approx(0.75, abs=1e-7)


def test_unknown_game_and_bad_payoff():
    assert call(["classical", "--game", "NC_C7"])[0] == 1
    assert call(["classical", "--v0", "0"])[0] == 1
    assert call(["classical", "--ratio", "0.5", "--v0", "1"])[0] == 1


def test_deviated_scan_rows():
    code, text = call(["deviated-scan", "--v0", "0.5", "--v1", "1.5",
                       "--thetas", f"{np.pi / 2},1.7"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert rows[0]["correq"] == rows[0]["canonical_nash"] == rows[0]["quantum_eq"] == "1"
    assert float(rows[0]["sw"]) == pytest.approx(1.0, abs=1e-9)
    assert rows[1]["correq"] == "1" and rows[1]["quantum_eq"] == "0"


def test_deviated_scan_verdicts_agree_on_grid():
    code, text = call(["deviated-scan", "--v0", "0.5", "--v1", "1.5", "--thetas", "0:6.2:0.2"])
    assert code == 0
    for row in csv.DictReader(io.StringIO(text)):
        assert row["correq"] == row["canonical_nash"]


def test_deviated_scan_rejects_five_players():
    assert call(["deviated-scan", "--game", "NC00_C5"])[0] == 1


def test_npa_bound_command():
    code, text = call(["npa-bound", "--ratio", "0.5"])
    assert code == 0
    assert json.loads(text)["value"] == pytest.approx(1.0, abs=1e-6)
    code, text = call(["npa-bound", "--ratio", "0.13", "--level", "1", "--no-nash"])
    assert code == 0 and json.loads(text)["with_nash"] is False


def test_classical_command():
    code, text = call(["classical"])
    out = json.loads(text)
    assert code == 0
    assert out["pure_nash_best"] <= out["classical_lp"] + 1e-7 <= out["nonsignalling_lp"] + 2e-7
    assert out["communication_lp"] == pytest.approx(1.0, abs=1e-7)


def test_export_sdp(tmp_path):
    path = tmp_path / "npa.dat-s"
    assert call(["export-sdp", "--out", str(path)])[0] == 0
    assert path.read_text().strip()
    assert call(["export-sdp"])[0] == 1
