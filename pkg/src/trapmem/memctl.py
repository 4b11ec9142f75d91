"""memctl: derive, simulate, analyze, fit and pipeline commands.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
runtime or fit failures.
"""
import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__, config, decayfit, photostats, plotting, tables
from .ensemble import run_plan
from .errors import (ConfigError, DeconvolutionError, FitPreconditionError,
                     FormatError, SingularFitError, UndefinedEstimateError,
                     UnsupportedInputError)

EVENTS_FILE = "events.csv"
RESULTS_FILE = "correlations.csv"
REPORT_FILE = "fit_report.csv"
CURVE_FILE = "model_curve.csv"
PLOT_DATA_FILE = "decay_plot_data.csv"
FIGURE_FILE = "decay_plot.png"
DERIVE_FILE = "derived.csv"

# (key, label, unit, scale from SI to the unit, reference value in that unit)
DERIVED_ROWS = [
    ("depth_K", "trap depth", "uK", 1e6, 500.0),
    ("radial_freq_rad_s", "radial trap frequency / 2pi", "kHz", 1e-3 / (2 * np.pi), 2.0),
    ("axial_freq_rad_s", "axial trap frequency / 2pi", "Hz", 1 / (2 * np.pi), 10.0),
    ("scattering_rate_per_s", "photon scattering rate", "1/s", 1.0, 4.0),
    ("rayleigh_range_m", "Rayleigh range", "mm", 1e3, None),
    ("sigma_r_m", "radial rms radius", "um", 1e6, 5.5),
    ("sigma_z_m", "axial rms radius", "mm", 1e3, 0.85),
    ("peak_density_per_m3", "peak density", "1/cm^3", 1e-6, 1e12),
    ("sigma_v_m_s", "1D rms velocity", "mm/s", 1e3, 66.0),
    ("delta_k_per_m", "|delta k|", "1/mm", 1e-3, 290.0),
    ("tau_thermal_s", "thermal dephasing time", "us", 1e6, 53.0),
    ("tau_field_nc_s", "non-clock field dephasing time", "us", 1e6, None),
    ("tau_nc_pred_s", "predicted non-clock lifetime", "us", 1e6, 16.0),
    ("tau_c_pred_s", "predicted clock lifetime", "us", 1e6, 45.0),
]


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _prepare_out(out):
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise RuntimeError(f"output directory {out} is not writable")
    return out


def _jsonable(d):
    return {k: (None if v is None or not np.isfinite(v) else float(v)) for k, v in d.items()}


def write_manifest(out, command, outputs, cfg=None, inputs=(), extra=None, started=None):
    manifest = {
        "tool": "trapmem",
        "version": __version__,
        "command": command,
        "started": started or _now(),
        "finished": _now(),
        "inputs": {os.path.basename(p): _sha256(p) for p in inputs},
        "outputs": {name: _sha256(os.path.join(out, name)) for name in outputs},
    }
    if cfg is not None:
        manifest["seed"] = int(cfg.plan.rng_seed)
        manifest["config_ini"] = config.serialize_config(cfg)
        manifest["overrides"] = {
            "sigma_v_m_s": cfg.dephasing.sigma_v,
            "delta_k_per_m": cfg.dephasing.delta_k,
        }
        manifest["derived"] = _jsonable(config.derive_quantities(cfg))
    if extra:
        manifest.update(extra)
    path = os.path.join(out, f"{command}.manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def derived_table(cfg):
    q = config.derive_quantities(cfg)
    rows = []
    for key, label, unit, scale, ref in DERIVED_ROWS:
        value = q[key] * scale
        rows.append((key, label, value, unit, ref))
    return rows


def cmd_derive(cfg, out=None, stream=None):
    stream = stream or sys.stdout
    rows = derived_table(cfg)
    width = max(len(r[1]) for r in rows)
    print(f"{'quantity':<{width}}  {'value':>12}  {'reference':>10}  unit", file=stream)
    for _, label, value, unit, ref in rows:
        ref_text = "" if ref is None else format(ref, ".4g")
        print(f"{label:<{width}}  {value:>12.4g}  {ref_text:>10}  {unit}", file=stream)
    if out is not None:
        started = _now()
        _prepare_out(out)
        with open(os.path.join(out, DERIVE_FILE), "w") as fh:
            fh.write("quantity,value,unit,reference_value\n")
            for key, _, value, unit, ref in rows:
                ref_text = "" if ref is None else tables.fmt(ref)
                fh.write(f"{key},{tables.fmt(value)},{unit},{ref_text}\n")
        write_manifest(out, "derive", [DERIVE_FILE], cfg=cfg, started=started)
    return rows


def cmd_simulate(cfg, out, manifest=True):
    started = _now()
    _prepare_out(out)
    photon = config.effective_photon_model(cfg)
    model = config.dephasing_model(cfg)
    events = run_plan(cfg.plan, photon, model, workers=cfg.workers)
    path = os.path.join(out, EVENTS_FILE)
    tables.write_events(events, path)
    if manifest:
        write_manifest(out, "simulate", [EVENTS_FILE], cfg=cfg, started=started,
                       extra={"workers": cfg.workers})
    return path


def analyze_events(events, significance=2.0, measured_autocorr=False):
    points = photostats.correlation_sweep(events)
    keys = photostats.delay_keys(events.delay)
    cs = []
    for p in points:
        g_ss = g_asas = 2.0
        if measured_autocorr:
            sub = events.select(keys == photostats.delay_keys([p.delay])[0])
            g_ss = photostats.auto_correlation(sub, "stokes")[0]
            g_asas = photostats.auto_correlation(sub, "antistokes")[0]
            if not (g_ss > 0 and g_asas > 0):
                raise UndefinedEstimateError(
                    f"no multi-photon events at delay {p.delay * 1e6:.6g} us; "
                    "measured auto-correlation is zero (record more trials)",
                    {"g_ss": g_ss, "g_asas": g_asas})
        cs.append(photostats.cauchy_schwarz(p, g_ss, g_asas, significance))
    return points, cs


def cmd_analyze(events_path, out, significance=2.0, measured_autocorr=False,
                manifest=True):
    started = _now()
    events = tables.read_events(events_path)
    points, cs = analyze_events(events, significance, measured_autocorr)
    _prepare_out(out)
    path = os.path.join(out, RESULTS_FILE)
    tables.write_results(points, path, cs)
    if manifest:
        write_manifest(out, "analyze", [RESULTS_FILE], inputs=[events_path],
                       started=started,
                       extra={"significance": significance,
                              "measured_autocorr": measured_autocorr})
    return path


def fit_outputs(points, out, geometry=None, delta_k=None):
    """Fit, extract physics and write report, curve, plot data and figure."""
    result = decayfit.fit_decay(points)
    single = decayfit.single_exponent_fit(points, clock_only=False)
    field_rms = velocity = None
    if result.converged:
        try:
            field_rms, velocity = decayfit.extract_physics(result, geometry,
                                                           delta_k=delta_k)
        except DeconvolutionError as exc:
            print(f"warning: {exc}; physical parameters not reported", file=sys.stderr)
    else:
        print("warning: fit did not converge; best-so-far parameters reported",
              file=sys.stderr)
    with open(os.path.join(out, REPORT_FILE), "w", newline="") as fh:
        fh.write(tables.fit_report_text(result, field_rms, velocity, single))
    t_max = max(p.delay for p in points)
    t = np.linspace(0.0, t_max, 201)
    fitted = decayfit.model_eval(result.params, t)
    clock = decayfit.model_eval(decayfit.clock_component(result), t)
    tables.write_curve(os.path.join(out, CURVE_FILE), t, fitted)
    tables.write_plot_data(os.path.join(out, PLOT_DATA_FILE), points, t, fitted, clock)
    plotting.plot_decay(os.path.join(out, FIGURE_FILE), points, t, fitted, clock)
    return result, field_rms, velocity


def cmd_fit(results_path, out, cfg=None, manifest=True):
    started = _now()
    points = tables.read_results(results_path)
    _prepare_out(out)
    geometry = cfg.geometry if cfg is not None else None
    delta_k = cfg.dephasing.delta_k if cfg is not None else None
    result = fit_outputs(points, out, geometry, delta_k)
    if manifest:
        write_manifest(out, "fit", [REPORT_FILE, CURVE_FILE, PLOT_DATA_FILE, FIGURE_FILE],
                       inputs=[results_path], started=started)
    return result


def cmd_pipeline(cfg, out, significance=2.0, measured_autocorr=False):
    started = _now()
    events_path = cmd_simulate(cfg, out, manifest=False)
    results_path = cmd_analyze(events_path, out, significance, measured_autocorr,
                               manifest=False)
    result = cmd_fit(results_path, out, cfg, manifest=False)
    write_manifest(out, "pipeline",
                   [EVENTS_FILE, RESULTS_FILE, REPORT_FILE, CURVE_FILE, PLOT_DATA_FILE,
                    FIGURE_FILE],
                   cfg=cfg, started=started,
                   extra={"significance": significance,
                          "measured_autocorr": measured_autocorr,
                          "workers": cfg.workers})
    return result


def _config_from_args(args):
    cfg = config.load_config(args.config)
    plan_kw = {}
    if getattr(args, "seed", None) is not None:
        plan_kw["rng_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        plan_kw["trials_per_delay"] = args.trials
    if getattr(args, "photon_numbers", False):
        plan_kw["record_photon_numbers"] = True
    if plan_kw:
        cfg = config.with_plan(cfg, **plan_kw)
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("workers", "must be >= 1")
        cfg = replace(cfg, workers=args.workers)
    return cfg


def build_parser():
    parser = argparse.ArgumentParser(prog="memctl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--config", help="run configuration file (defaults: reference apparatus)")
        p.add_argument("--out", help="output directory (default: config output.directory)")
        if seed:
            p.add_argument("--seed", type=int, help="override plan seed (unsigned 64-bit)")
            p.add_argument("--trials", type=int, help="override trials per delay")
            p.add_argument("--workers", type=int, help="worker threads for simulation")
            p.add_argument("--photon-numbers", action="store_true",
                           help="also record detected photon numbers per trial")

    p = sub.add_parser("derive", help="print derived trap and ensemble quantities")
    common(p)
    p = sub.add_parser("simulate", help="run the Monte Carlo and write an EventSet")
    common(p, seed=True)
    p = sub.add_parser("analyze", help="correlation sweep of an EventSet file")
    p.add_argument("events", nargs="?", help=f"EventSet file (default OUT/{EVENTS_FILE})")
    p.add_argument("--out", default=None)
    p.add_argument("--significance", type=float, default=2.0)
    p.add_argument("--measured-autocorr", action="store_true",
                   help="use side-channel auto-correlations instead of 2")
    p = sub.add_parser("fit", help="fit the decay model to a results table")
    p.add_argument("results", nargs="?", help=f"results table (default OUT/{RESULTS_FILE})")
    p.add_argument("--out", default=None)
    p.add_argument("--config", help="configuration supplying the beam geometry")
    p = sub.add_parser("pipeline", help="simulate, analyze and fit in sequence")
    common(p, seed=True)
    p.add_argument("--significance", type=float, default=2.0)
    p.add_argument("--measured-autocorr", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "derive":
            cfg = _config_from_args(args)
            cmd_derive(cfg, args.out)
        elif args.command == "simulate":
            cfg = _config_from_args(args)
            path = cmd_simulate(cfg, args.out or cfg.output)
            print(path)
        elif args.command == "analyze":
            out = args.out or "out"
            path = cmd_analyze(args.events or os.path.join(out, EVENTS_FILE), out,
                               args.significance, args.measured_autocorr)
            print(path)
        elif args.command == "fit":
            out = args.out or "out"
            cfg = config.load_config(args.config) if args.config else None
            result, _, _ = cmd_fit(args.results or os.path.join(out, RESULTS_FILE),
                                   out, cfg)
            _print_fit(result)
        elif args.command == "pipeline":
            cfg = _config_from_args(args)
            result, _, _ = cmd_pipeline(cfg, args.out or cfg.output, args.significance,
                                        args.measured_autocorr)
            _print_fit(result)
    except (ConfigError, FormatError, FitPreconditionError, UnsupportedInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
        return 1
    except (SingularFitError, DeconvolutionError, UndefinedEstimateError,
            RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _print_fit(result):
    p, err = result.params, result.std_errors
    print(f"tau_nc = {p.tau_nc * 1e6:.2f} +/- {err[2] * 1e6:.2f} us, "
          f"tau_c = {p.tau_c * 1e6:.2f} +/- {err[3] * 1e6:.2f} us, "
          f"chi2/dof = {result.reduced_chi_square:.3g}")


if __name__ == "__main__":
    sys.exit(main())
