import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trapmem import config, tables
from trapmem.decayfit import DecayFitResult, DecayParams
from trapmem.ensemble import EventSet
from trapmem.errors import ConfigError, FormatError
from trapmem.photostats import CauchySchwarzResult, CorrelationPoint


def test_defaults_round_trip():
    cfg = config.parse_config(config.serialize_config(config.RunConfig()))
    assert config.parse_config(config.serialize_config(cfg)) == cfg


def test_empty_text_gives_defaults():
    cfg = config.parse_config("")
    ref = config.RunConfig()
    assert cfg.ensemble.zeeman_populations == pytest.approx(ref.ensemble.zeeman_populations,
                                                           rel=1e-14)
    assert cfg.geometry.stokes_angle == pytest.approx(ref.geometry.stokes_angle, rel=1e-14)
    assert cfg.plan.delays == pytest.approx(ref.plan.delays, rel=1e-14)
    assert cfg.trap == ref.trap and cfg.photon == ref.photon


def test_units_are_converted():
    cfg = config.parse_config("[trap]\nwavelength_nm = 1064\nwaist_um = 50\n"
                              "[dephasing]\nfield_rms_mg = 10\nsigma_v_mm_s = 33\n")
    assert cfg.trap.wavelength == 1064e-9
    assert cfg.trap.waist == 50e-6
    assert cfg.dephasing.field_rms == 1e-6
    assert cfg.dephasing.sigma_v == 0.033
    assert cfg.dephasing.delta_k is None


def test_delay_grammar():
    assert config.parse_delays("0:100:5") == pytest.approx([i * 5e-6 for i in range(21)],
                                                         rel=1e-14)
    assert config.parse_delays("0:100:5")[3] == 15e-6
    assert len(config.parse_delays("0:100:5")) == 21
    assert config.parse_delays("0, 10,20") == (0.0, 1e-5, 2e-5)
    with pytest.raises(ConfigError):
        config.parse_delays("0:10:0")


@pytest.mark.parametrize("text, field", [
    ("[trap]\npower_w = 0\n", "trap.power"),
    ("[trap]\npower_w = lots\n", "trap.power_w"),
    ("[ensemble]\npopulation_0 = 0.5\n", "ensemble.zeeman_populations"),
    ("[photon]\nstokes_det_eff = 1.5\n", "photon.stokes_det_eff"),
    ("[dephasing]\nfield_rms_mg = -1\n", "dephasing.field_rms_mg"),
    ("[plan]\ntrials_per_delay = 1.5\n", "plan.trials_per_delay"),
    ("[plan]\nworkers = 0\n", "plan.workers"),
    ("[geometry]\nstokes_angle_deg = 90\n", "geometry.stokes_angle"),
    ("not an ini file", "config"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        config.parse_config(text)
    assert info.value.field == field


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config.load_config(tmp_path / "nope.ini")


def test_effective_photon_model():
    cfg = config.parse_config("[ensemble]\npopulation_m1 = 1\npopulation_0 = 0\n"
                              "population_p1 = 0\n")
    photon = config.effective_photon_model(cfg)
    assert photon.mean_excitation == {"clock": 0.06, "non_clock": 0.0}
    uniform = config.effective_photon_model(config.RunConfig())
    assert uniform.mean_excitation == pytest.approx({"clock": 0.02, "non_clock": 0.02})


def test_sigma_v_override_doubles_thermal_time():
    base = config.derive_quantities(config.RunConfig())
    half = config.derive_quantities(config.parse_config(
        f"[dephasing]\nsigma_v_mm_s = {base['sigma_v_m_s'] * 500}\n"))
    assert half["tau_thermal_s"] == pytest.approx(2 * base["tau_thermal_s"], rel=1e-12)


def test_zero_field_leaves_only_thermal_channel():
    q = config.derive_quantities(config.parse_config("[dephasing]\nfield_rms_mg = 0\n"))
    assert q["tau_field_nc_s"] == np.inf
    assert q["tau_nc_pred_s"] == pytest.approx(q["tau_c_pred_s"], rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(power=st.floats(0.01, 100), waist=st.floats(1, 500), temp=st.floats(0.1, 1000),
       angle=st.floats(0.1, 80), eff=st.floats(0, 1), chi=st.floats(0, 0.5),
       field=st.floats(0, 50), p0=st.floats(0, 1), seed=st.integers(0, 2 ** 32),
       delays=st.lists(st.floats(0, 1000), min_size=1, max_size=8),
       sigma_v=st.one_of(st.none(), st.floats(0.01, 1000)))
def test_round_trip_property(power, waist, temp, angle, eff, chi, field, p0, seed, delays,
                             sigma_v):
    text = (f"[trap]\npower_w = {power!r}\nwaist_um = {waist!r}\n"
            f"[ensemble]\ntemperature_uk = {temp!r}\npopulation_m1 = {1 - p0!r}\n"
            f"population_0 = {p0!r}\npopulation_p1 = 0\n"
            f"[geometry]\nstokes_angle_deg = {angle!r}\n"
            f"[photon]\nretrieval_eff = {eff!r}\nmean_excitation_clock = {chi!r}\n"
            f"[dephasing]\nfield_rms_mg = {field!r}\n"
            f"sigma_v_mm_s = {'' if sigma_v is None else repr(sigma_v)}\n"
            f"[plan]\nseed = {seed}\ndelays_us = {','.join(map(repr, delays))}\n")
    cfg = config.parse_config(text)
    again = config.parse_config(config.serialize_config(cfg))
    assert again == cfg
    assert config.serialize_config(again) == config.serialize_config(cfg)


def _events(numbers=False):
    rng = np.random.default_rng(0)
    n = 500
    delay = np.repeat([0.0, 5e-6, 12.5e-6, 100e-6, 0.001], n // 5)
    return EventSet(np.arange(n), delay, rng.random(n) < 0.3, rng.random(n) < 0.2,
                    rng.integers(0, 3, n) if numbers else None,
                    rng.integers(0, 3, n) if numbers else None)


@pytest.mark.parametrize("numbers", [False, True])
def test_events_round_trip(tmp_path, numbers):
    ev = _events(numbers)
    path = tmp_path / "events.csv"
    tables.write_events(ev, path)
    back = tables.read_events(path)
    assert np.array_equal(back.trial_index, ev.trial_index)
    np.testing.assert_allclose(back.delay, ev.delay, rtol=1e-12)
    assert np.array_equal(back.stokes, ev.stokes)
    assert np.array_equal(back.antistokes, ev.antistokes)
    assert back.has_photon_numbers is numbers
    if numbers:
        assert np.array_equal(back.stokes_n, ev.stokes_n)
    tables.write_events(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == path.read_bytes()


def test_empty_events_file(tmp_path):
    path = tmp_path / "events.csv"
    tables.write_events(EventSet.empty(), path)
    assert path.read_text() == ",".join(tables.EVENT_HEADER) + "\n"
    assert len(tables.read_events(path)) == 0


@pytest.mark.parametrize("body, line", [
    ("0,0.0,1,0\n1,0.0,1\n", 3),
    ("0,0.0,1,0\n1,abc,1,0\n", 3),
    ("0,0.0,2,0\n", 2),
    ("0,-5,1,0\n", 2),
])
def test_malformed_events_report_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text("trial_index,delay_us,stokes,antistokes\n" + body)
    with pytest.raises(FormatError, match=f"line {line}:") as info:
        tables.read_events(path)
    assert info.value.line == line


def test_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n")
    with pytest.raises(FormatError, match="line 1"):
        tables.read_events(path)
    path.write_text("")
    with pytest.raises(FormatError):
        tables.read_events(path)


def test_results_round_trip(tmp_path):
    points = [CorrelationPoint(i * 5e-6, 1 + 7 / (i + 1), 0.1 * (i + 1), 100000,
                               0.01, 0.02, 0.0004 * (i + 1)) for i in range(5)]
    cs = [CauchySchwarzResult(p.g_value ** 2 / 4, 3.0, True) for p in points]
    path = tmp_path / "res.csv"
    tables.write_results(points, path, cs)
    back = tables.read_results(path)
    for a, b in zip(points, back):
        assert b.delay == pytest.approx(a.delay, rel=1e-12, abs=1e-15)
        assert b.g_value == pytest.approx(a.g_value, rel=1e-9)
        assert b.n_trials == a.n_trials
    assert "cs_violated" in path.read_text().splitlines()[0]


def test_results_bad_row(tmp_path):
    path = tmp_path / "res.csv"
    path.write_text(",".join(tables.RESULT_HEADER) + "\n0,2,0.1,10,0.1,0.1,x\n")
    with pytest.raises(FormatError, match="line 2"):
        tables.read_results(path)


def test_fit_report(tmp_path):
    res = DecayFitResult(DecayParams(3, 3, 16e-6, 45e-6), np.diag([0.01, 0.04, 1e-12, 4e-12]),
                         20.0, 17, True, 9)
    text = tables.fit_report_text(res, field_rms=7e-7, velocity=0.066)
    path = tmp_path / "fit.csv"
    path.write_text(text)
    rows = tables.read_fit_report(path)
    assert float(rows["tau_nc_us"]["value"]) == pytest.approx(16.0)
    assert float(rows["tau_nc_us"]["std_error"]) == pytest.approx(1.0)
    assert float(rows["field_rms_mG"]["value"]) == pytest.approx(7.0)
    assert rows["converged"]["value"] == "1"
