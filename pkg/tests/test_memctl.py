import csv
import hashlib
import json

import numpy as np
import pytest

from trapmem import decayfit, memctl, tables
from trapmem.decayfit import DecayParams
from trapmem.photostats import CorrelationPoint

SMALL = """[plan]
delays_us = 0:100:10
trials_per_delay = 20000
seed = 7
"""


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return path


def read_derived(path):
    with open(path) as fh:
        return {row["quantity"]: float(row["value"]) for row in csv.DictReader(fh)}


def test_derive_prints_table(tmp_path, capsys):
    assert memctl.main(["derive", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "trap depth" in out and "1D rms velocity" in out
    rows = read_derived(tmp_path / memctl.DERIVE_FILE)
    assert rows["depth_K"] == pytest.approx(502.04, rel=1e-4)
    manifest = json.loads((tmp_path / "derive.manifest.json").read_text())
    assert manifest["outputs"][memctl.DERIVE_FILE] == sha(tmp_path / memctl.DERIVE_FILE)


def test_derive_rejects_zero_power(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[trap]\npower_w = 0\n")
    assert memctl.main(["derive", "--config", str(cfg)]) == 1
    assert "trap.power" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert memctl.main(["derive", "--config", str(tmp_path / "none.ini")]) == 1


def test_sigma_v_override_doubles_clock_time(tmp_path):
    cfg = tmp_path / "slow.ini"
    cfg.write_text("[dephasing]\nsigma_v_mm_s = 33\n")
    memctl.main(["derive", "--out", str(tmp_path / "a")])
    memctl.main(["derive", "--config", str(cfg), "--out", str(tmp_path / "b")])
    a = read_derived(tmp_path / "a" / memctl.DERIVE_FILE)
    b = read_derived(tmp_path / "b" / memctl.DERIVE_FILE)
    assert b["tau_thermal_s"] == pytest.approx(a["tau_thermal_s"] * a["sigma_v_m_s"] / 33,
                                               rel=1e-9)
    assert b["tau_thermal_s"] == pytest.approx(2 * a["tau_thermal_s"], rel=0.01)


def test_simulate_is_reproducible(tmp_path, small_cfg):
    args = ["simulate", "--config", str(small_cfg), "--trials", "3000"]
    assert memctl.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert memctl.main(args + ["--out", str(tmp_path / "b"), "--workers", "3"]) == 0
    a, b = tmp_path / "a" / memctl.EVENTS_FILE, tmp_path / "b" / memctl.EVENTS_FILE
    assert sha(a) == sha(b)
    lines = a.read_text().splitlines()
    assert lines[0] == ",".join(tables.EVENT_HEADER)
    assert len(lines) == 1 + 11 * 3000
    assert memctl.main(args + ["--out", str(tmp_path / "c"), "--seed", "8"]) == 0
    assert sha(tmp_path / "c" / memctl.EVENTS_FILE) != sha(a)


def test_regenerate_from_manifest(tmp_path, small_cfg):
    memctl.main(["simulate", "--config", str(small_cfg), "--trials", "2000",
                 "--out", str(tmp_path / "a")])
    manifest = json.loads((tmp_path / "a" / "simulate.manifest.json").read_text())
    assert manifest["seed"] == 7
    again = tmp_path / "again.ini"
    again.write_text(manifest["config_ini"])
    memctl.main(["simulate", "--config", str(again), "--out", str(tmp_path / "b")])
    assert sha(tmp_path / "b" / memctl.EVENTS_FILE) == manifest["outputs"][memctl.EVENTS_FILE]


def test_photon_numbers_flag(tmp_path, small_cfg):
    memctl.main(["simulate", "--config", str(small_cfg), "--trials", "500",
                 "--photon-numbers", "--out", str(tmp_path)])
    header = (tmp_path / memctl.EVENTS_FILE).read_text().splitlines()[0]
    assert header.endswith("stokes_n,antistokes_n")
    assert memctl.main(["analyze", "--out", str(tmp_path), "--measured-autocorr"]) == 2


def test_analyze_without_photon_numbers_refuses_measured_autocorr(tmp_path, small_cfg):
    memctl.main(["simulate", "--config", str(small_cfg), "--trials", "500",
                 "--out", str(tmp_path)])
    assert memctl.main(["analyze", "--out", str(tmp_path), "--measured-autocorr"]) == 1


def test_analyze_truncated_row(tmp_path, capsys):
    events = tmp_path / "events.csv"
    events.write_text("trial_index,delay_us,stokes,antistokes\n0,0.000000,1,1\n1,0.000000,1\n")
    assert memctl.main(["analyze", str(events), "--out", str(tmp_path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_analyze_empty_events(tmp_path):
    events = tmp_path / "events.csv"
    events.write_text("trial_index,delay_us,stokes,antistokes\n")
    assert memctl.main(["analyze", str(events), "--out", str(tmp_path)]) == 0
    assert (tmp_path / memctl.RESULTS_FILE).read_text().splitlines() == [
        ",".join(tables.RESULT_HEADER + tables.CS_COLUMNS)]
    # and fitting an empty table is a precondition failure
    assert memctl.main(["fit", "--out", str(tmp_path)]) == 1


def test_analyze_missing_file(tmp_path):
    assert memctl.main(["analyze", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 1


def test_fit_single_point(tmp_path, capsys):
    path = tmp_path / "res.csv"
    tables.write_results([CorrelationPoint(0.0, 5.0, 0.2, 1000, 0.1, 0.1, 0.05)], path)
    assert memctl.main(["fit", str(path), "--out", str(tmp_path)]) == 1
    assert "at least 5 points" in capsys.readouterr().err


def test_fit_noiseless_table(tmp_path):
    truth = DecayParams(3.0, 3.0, 16e-6, 45e-6)
    delays = np.arange(0, 101, 5) * 1e-6
    points = [CorrelationPoint(t, float(decayfit.model_eval(truth, t)), 0.1, 1000, 0.1, 0.1,
                               0.01) for t in delays]
    path = tmp_path / "res.csv"
    tables.write_results(points, path)
    assert memctl.main(["fit", str(path), "--out", str(tmp_path)]) == 0
    rows = tables.read_fit_report(tmp_path / memctl.REPORT_FILE)
    assert float(rows["tau_nc_us"]["value"]) == pytest.approx(16.0, rel=1e-6)
    assert float(rows["tau_c_us"]["value"]) == pytest.approx(45.0, rel=1e-6)
    assert float(rows["field_rms_mG"]["value"]) > 0
    for name in (memctl.CURVE_FILE, memctl.PLOT_DATA_FILE, memctl.FIGURE_FILE):
        assert (tmp_path / name).stat().st_size > 0
    series = {line.split(",")[0] for line in
              (tmp_path / memctl.PLOT_DATA_FILE).read_text().splitlines()[1:]}
    assert series == {"measured", "fit", "classical_bound", "single_tau"}


def test_pipeline_outputs_are_stable(tmp_path, small_cfg):
    for name in ("a", "b"):
        assert memctl.main(["pipeline", "--config", str(small_cfg),
                            "--out", str(tmp_path / name)]) == 0
    for name in (memctl.EVENTS_FILE, memctl.RESULTS_FILE, memctl.REPORT_FILE,
                 memctl.CURVE_FILE, memctl.PLOT_DATA_FILE):
        assert sha(tmp_path / "a" / name) == sha(tmp_path / "b" / name)
    manifest = json.loads((tmp_path / "a" / "pipeline.manifest.json").read_text())
    assert set(manifest["outputs"]) >= {memctl.EVENTS_FILE, memctl.REPORT_FILE}
    assert manifest["derived"]["tau_thermal_s"] == pytest.approx(55.25e-6, rel=1e-3)


def test_pipeline_clock_only_population(tmp_path, capsys):
    cfg = tmp_path / "clock.ini"
    cfg.write_text(SMALL + "[ensemble]\npopulation_m1 = 1\npopulation_0 = 0\n"
                   "population_p1 = 0\n")
    code = memctl.main(["pipeline", "--config", str(cfg), "--out", str(tmp_path)])
    events = tables.read_events(tmp_path / memctl.EVENTS_FILE)
    assert len(events) == 11 * 20000
    # one Gaussian only: the two-component fit has nothing to separate
    assert code == 2
    assert "degenerate Jacobian" in capsys.readouterr().err


def test_bad_workers_flag(tmp_path, small_cfg):
    assert memctl.main(["simulate", "--config", str(small_cfg), "--workers", "0",
                        "--out", str(tmp_path)]) == 1
