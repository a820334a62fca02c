import csv
import io
import json
import subprocess
import sys

import pytest

from converter_forge import report as rpt
from converter_forge.cli import main
from converter_forge.simulator import read_waveform_csv

from conftest import CHAIN_SPEC_FILE, SCENARIO_FILE, STAGE3_PARASITICS_FILE

rel = pytest.approx


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def stage3_file(tmp_path):
    doc = json.load(open(CHAIN_SPEC_FILE))
    doc["stages"] = doc["stages"][2:]
    p = tmp_path / "stage3.json"
    p.write_text(json.dumps(doc))
    return p


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestDesign:
    def test_json(self, capsys):
        code, out, _ = run(capsys, "design", CHAIN_SPEC_FILE)
        assert code == 0
        doc = json.loads(out)
        assert doc["stages"][0]["duty"] == rel(0.1791, abs=5e-5)
        back = rpt.design_from_dict(doc["stages"][2])
        assert back.inductor("L").l_min == rel(10.38e-6, rel=1e-3)

    def test_pretty(self, capsys):
        code, out, _ = run(capsys, "design", CHAIN_SPEC_FILE, "--pretty")
        assert code == 0
        assert "141.1 µH" in out and "16.66 µF" in out and "Stage 3" in out

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "d.json"
        code, out, _ = run(capsys, "design", CHAIN_SPEC_FILE, "--out", target)
        assert code == 0 and out == ""
        assert json.loads(target.read_text())["stages"][1]["duty"] == rel(5 / 17)

    def test_malformed(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"stages": [\n  {"topology": "sepic",}\n]}')
        code, _, err = run(capsys, "design", bad)
        assert code == 1
        assert "line 2, column" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "design", tmp_path / "nope.json")
        assert code == 1 and "cannot read" in err

    def test_invalid(self, capsys, tmp_path):
        p = tmp_path / "inv.json"
        p.write_text(json.dumps({"stages": [{"topology": "sepic", "vs_volts": 55, "vo_volts": -12,
                                             "io_amperes": 2, "f_hz": 1e5, "output_ripple_frac": 0.01,
                                             "coupling_cap_ripple_frac": 0.005}]}))
        code, _, err = run(capsys, "design", p)
        assert code == 2 and "polarity" in err


class TestSimulate:
    def test_stage3(self, capsys, tmp_path):
        csv_path = tmp_path / "s3.csv"
        code, out, _ = run(capsys, "simulate", CHAIN_SPEC_FILE, "--stage", 3, "--csv", csv_path)
        assert code == 0
        doc = json.loads(out)
        assert doc["converged"] and doc["conduction_mode"] == "CCM"
        m = {r["signal"]: r for r in doc["measurements"]}
        assert m["v_out"]["mean"] == rel(-12.0, rel=0.01)
        assert m["i_out"]["mean"] == rel(0.5, rel=0.01)
        for name in ("i_L", "v_C", "i_sw", "i_D", "p_sw"):
            assert {"mean", "rms", "p2p"} <= set(m[name])
        assert 0 <= doc["switch_power_factor"] <= 1
        t, sig = read_waveform_csv(csv_path)
        assert len(t) == 2001
        assert sig["v_out"].mean() == rel(-12.0, rel=0.01)

    def test_stage_out_of_range(self, capsys):
        code, _, err = run(capsys, "simulate", CHAIN_SPEC_FILE, "--stage", 5)
        assert code == 2 and "out of range" in err

    def test_full_transient(self, capsys, tmp_path):
        csv_path = tmp_path / "ft.csv"
        code, _, _ = run(capsys, "simulate", CHAIN_SPEC_FILE, "--stage", 3, "--full-transient",
                         "--cycles", 3, "--csv", csv_path)
        assert code == 0
        t, sig = read_waveform_csv(csv_path)
        assert t[0] == 0.0 and len(t) == 3 * 2000 + 1
        assert sig["i_L"][0] == 0 and sig["v_C"][0] == 0

    def test_several_steady_cycles(self, capsys, tmp_path):
        csv_path = tmp_path / "c.csv"
        assert run(capsys, "simulate", CHAIN_SPEC_FILE, "--stage", 3, "--cycles", 2, "--csv", csv_path)[0] == 0
        t, sig = read_waveform_csv(csv_path)
        assert len(t) == 4001
        assert sig["v_C"][0] == rel(sig["v_C"][2000], rel=1e-6)

    def test_non_convergence_exit_3(self, capsys, tmp_path):
        doc = json.load(open(CHAIN_SPEC_FILE))
        doc["sim"] = {"max_cycles": 2, "accelerate": False}
        p = tmp_path / "nc.json"
        p.write_text(json.dumps(doc))
        csv_path = tmp_path / "nc.csv"
        code, out, err = run(capsys, "simulate", p, "--csv", csv_path)
        assert code == 3
        assert json.loads(out)["converged"] is False
        assert csv_path.exists() and "steady state" in err


class TestLosses:
    def test_stage3_reference_parasitics(self, capsys):
        code, out, _ = run(capsys, "losses", STAGE3_PARASITICS_FILE)
        assert code == 0
        s = json.loads(out)["stages"][0]
        assert s["inductor_loss_w"] == rel(0.411, rel=5e-3)
        assert s["switch_conduction_loss_w"] == rel(0.204, abs=1e-3)
        assert s["capacitor_loss_w"] == rel(0.412, rel=5e-3)
        assert s["diode_loss_w"] == rel(0.3)

    def test_missing_block_warns_and_defaults(self, capsys):
        code, out, err = run(capsys, "losses", CHAIN_SPEC_FILE, "--stage", 3)
        assert code == 0 and "no parasitics" in err
        s = json.loads(out)["stages"][0]
        assert s["total_w"] == 0 and s["efficiency"] == 1


class TestCascade:
    def test_reference_chain(self, capsys):
        code, out, _ = run(capsys, "cascade", CHAIN_SPEC_FILE)
        assert code == 0
        doc = json.loads(out)
        ratios = [r["ratio"] for r in doc["ratios"]]
        assert ratios[:2] == [rel(0.0436, abs=1e-4), rel(0.208, abs=1e-3)]
        assert [r["feasible"] for r in doc["ratios"]] == [True, True, False]
        assert doc["feasible"] is False

    def test_scenario(self, capsys):
        doc = json.loads(run(capsys, "cascade", SCENARIO_FILE)[1])
        ratios = [r["ratio"] for r in doc["ratios"]]
        assert ratios[:2] == [rel(0.314, abs=1e-3), rel(0.545, abs=1e-3)]
        assert [r["feasible"] for r in doc["ratios"]] == [True, True, False]

    def test_chain_mismatch(self, capsys, tmp_path):
        doc = json.load(open(CHAIN_SPEC_FILE))
        doc["stages"][1]["vs_volts"] = 9
        p = tmp_path / "mm.json"
        p.write_text(json.dumps(doc))
        code, _, err = run(capsys, "cascade", p)
        assert code == 2 and "chain mismatch" in err

    def test_single_stage_equals_simulate_plus_losses(self, capsys, stage3_file):
        cas = json.loads(run(capsys, "cascade", stage3_file)[1])["stages"][0]
        sim = json.loads(run(capsys, "simulate", stage3_file)[1])
        los = json.loads(run(capsys, "losses", stage3_file)[1])["stages"][0]
        assert cas["simulation"]["measurements"] == sim["measurements"]
        assert cas["simulation"]["conduction_mode"] == sim["conduction_mode"]
        for key, val in cas["losses"].items():
            assert los[key] == val


class TestSweep:
    def test_inductance_crosses_bound(self, capsys):
        code, out, _ = run(capsys, "sweep", CHAIN_SPEC_FILE, "--param", "stage3.l_scale",
                           "--from", 0.5, "--to", 2, "--points", 16)
        assert code == 0
        table = rows(out)
        assert len(table) == 16
        modes = [(float(r["stage3.l_scale"]), r["mode"]) for r in table]
        assert all(m == "DCM" for s, m in modes if s < 1)
        assert all(m == "CCM" for s, m in modes if s > 1.05)

    def test_single_point_equals_simulate(self, capsys):
        out = run(capsys, "sweep", CHAIN_SPEC_FILE, "--param", "stage3.vo_volts",
                  "--from", -12, "--to", -12, "--points", 1)[1]
        (row,) = rows(out)
        sim = json.loads(run(capsys, "simulate", CHAIN_SPEC_FILE, "--stage", 3)[1])
        m = {r["signal"]: r for r in sim["measurements"]}
        assert float(row["mean:v_out"]) == m["v_out"]["mean"]
        assert float(row["p2p:v_out"]) == m["v_out"]["p2p"]
        assert row["mode"] == sim["conduction_mode"]

    def test_duty_monotone(self, capsys):
        out = run(capsys, "sweep", CHAIN_SPEC_FILE, "--param", "stage3.duty",
                  "--from", 0.2, "--to", 0.8, "--points", 7)[1]
        mags = [abs(float(r["mean:v_out"])) for r in rows(out)]
        assert all(b > a for a, b in zip(mags, mags[1:]))

    def test_custom_metrics(self, capsys):
        out = run(capsys, "sweep", STAGE3_PARASITICS_FILE, "--param", "stage1.parasitics.r_l_ohms",
                  "--from", 0, "--to", 0.2, "--points", 3, "--metric", "efficiency", "--metric", "rms:i_sw")[1]
        table = rows(out)
        assert list(table[0]) == ["stage1.parasitics.r_l_ohms", "efficiency", "rms:i_sw"]
        eff = [float(r["efficiency"]) for r in table]
        assert eff[0] > eff[1] > eff[2]

    @pytest.mark.parametrize("param", ["stage3.bogus", "stage7.vo_volts", "nothing"])
    def test_unknown_path(self, capsys, param):
        code, _, err = run(capsys, "sweep", CHAIN_SPEC_FILE, "--param", param, "--from", 0, "--to", 1)
        assert code == 2 and "parameter" in err

    def test_bad_metric(self, capsys):
        code, _, err = run(capsys, "sweep", CHAIN_SPEC_FILE, "--param", "stage3.duty", "--from", 0.5,
                           "--to", 0.6, "--metric", "median")
        assert code == 2 and "metric" in err

    def test_metric_for_missing_signal(self, capsys):
        code, _, err = run(capsys, "sweep", CHAIN_SPEC_FILE, "--param", "stage1.duty", "--from", 0.2,
                           "--to", 0.3, "--metric", "mean:i_L")
        assert code == 2 and "i_L1" in err

    def test_parallel_rows_in_order(self, capsys, monkeypatch):
        argv = ("sweep", CHAIN_SPEC_FILE, "--param", "stage3.l_scale", "--from", 0.6, "--to", 1.6, "--points", 6)
        monkeypatch.setenv("CONVERTER_FORGE_THREADS", "1")
        serial = run(capsys, *argv)[1]
        monkeypatch.setenv("CONVERTER_FORGE_THREADS", "3")
        parallel = run(capsys, *argv)[1]
        assert serial == parallel


@pytest.mark.parametrize("argv", [("design",), ("simulate", "--stage", "3"), ("losses",), ("cascade",)])
def test_byte_identical_output(capsys, argv):
    first = run(capsys, argv[0], CHAIN_SPEC_FILE, *argv[1:])[1]
    second = run(capsys, argv[0], CHAIN_SPEC_FILE, *argv[1:])[1]
    assert first == second


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "converter_forge.cli", "design", CHAIN_SPEC_FILE],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["stages"][2]["duty"] == rel(12 / 17)
