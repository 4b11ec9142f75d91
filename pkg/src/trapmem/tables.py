"""Delimited-text formats exchanged between simulate, analyze and fit."""
import csv
import io

import numpy as np

from .ensemble import EventSet
from .errors import FormatError
from .photostats import CorrelationPoint

EVENT_HEADER = ["trial_index", "delay_us", "stokes", "antistokes"]
NUMBER_COLUMNS = ["stokes_n", "antistokes_n"]
RESULT_HEADER = ["delay_us", "g", "std_err", "n_trials", "p_s", "p_as", "p_sas"]
CS_COLUMNS = ["cs_ratio", "cs_sigma", "cs_violated"]


def fmt(x):
    return format(float(x), ".10g")


def write_events(events, path):
    """Write an EventSet; delays in microseconds with 6 decimals."""
    header = EVENT_HEADER + (NUMBER_COLUMNS if events.has_photon_numbers else [])
    cols = [events.trial_index.astype(np.int64),
            np.char.mod("%.6f", np.asarray(events.delay) * 1e6),
            events.stokes.astype(np.int8), events.antistokes.astype(np.int8)]
    if events.has_photon_numbers:
        cols += [events.stokes_n, events.antistokes_n]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if len(events):
            strs = [c if c.dtype.kind == "U" else c.astype(str) for c in cols]
            rows = strs[0]
            for c in strs[1:]:
                rows = np.char.add(np.char.add(rows, ","), c)
            fh.write("\n".join(rows.tolist()))
            fh.write("\n")


def _parse_bool(text, line, name):
    if text == "0":
        return False
    if text == "1":
        return True
    raise FormatError(f"{name} must be 0 or 1, got {text!r}", line)


def read_events(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("empty file, missing header", 1)
        if header not in (EVENT_HEADER, EVENT_HEADER + NUMBER_COLUMNS):
            raise FormatError(f"unexpected header {header}", 1)
        width = len(header)
        numbers = width > len(EVENT_HEADER)
        idx, delay, s, a, sn, an = [], [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise FormatError(f"expected {width} fields, got {len(row)}", lineno)
            try:
                idx.append(int(row[0]))
                d = float(row[1])
            except ValueError as exc:
                raise FormatError(str(exc), lineno) from None
            if not d >= 0:
                raise FormatError("delay_us must be >= 0", lineno)
            delay.append(d)
            s.append(_parse_bool(row[2], lineno, "stokes"))
            a.append(_parse_bool(row[3], lineno, "antistokes"))
            if numbers:
                try:
                    sn.append(int(row[4]))
                    an.append(int(row[5]))
                except ValueError as exc:
                    raise FormatError(str(exc), lineno) from None
    return EventSet(
        np.array(idx, dtype=np.int64), np.array(delay) * 1e-6,
        np.array(s, dtype=bool), np.array(a, dtype=bool),
        np.array(sn, dtype=np.int64) if numbers else None,
        np.array(an, dtype=np.int64) if numbers else None)


def write_results(points, path, cs_results=None):
    header = RESULT_HEADER + (CS_COLUMNS if cs_results is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, p in enumerate(points):
            row = [format(p.delay * 1e6, ".6f"), fmt(p.g_value), fmt(p.std_error),
                   p.n_trials, fmt(p.p_s), fmt(p.p_as), fmt(p.p_sas)]
            if cs_results is not None:
                cs = cs_results[i]
                row += [fmt(cs.ratio), fmt(cs.significance), int(cs.violated)]
            w.writerow(row)


def read_results(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(RESULT_HEADER) <= set(reader.fieldnames):
            raise FormatError(f"results header must contain {RESULT_HEADER}", 1)
        points = []
        for lineno, row in enumerate(reader, start=2):
            try:
                points.append(CorrelationPoint(
                    float(row["delay_us"]) * 1e-6, float(row["g"]),
                    float(row["std_err"]), int(row["n_trials"]), float(row["p_s"]),
                    float(row["p_as"]), float(row["p_sas"])))
            except (TypeError, ValueError) as exc:
                raise FormatError(str(exc), lineno) from None
    return points


def fit_report_text(result, field_rms=None, velocity=None, single=None):
    """Fit report rows ``parameter,value,std_error``; times in microseconds."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["parameter", "value", "std_error"])
    err = result.std_errors
    p = result.params
    w.writerow(["amp_nc", fmt(p.amp_nc), fmt(err[0])])
    w.writerow(["amp_c", fmt(p.amp_c), fmt(err[1])])
    w.writerow(["tau_nc_us", fmt(p.tau_nc * 1e6), fmt(err[2] * 1e6)])
    w.writerow(["tau_c_us", fmt(p.tau_c * 1e6), fmt(err[3] * 1e6)])
    w.writerow(["chi_square", fmt(result.chi_square), ""])
    w.writerow(["dof", result.dof, ""])
    w.writerow(["chi_square_per_dof", fmt(result.reduced_chi_square), ""])
    w.writerow(["converged", int(result.converged), ""])
    w.writerow(["iterations", result.iterations, ""])
    if field_rms is not None:
        w.writerow(["field_rms_mG", fmt(field_rms * 1e7), ""])
    if velocity is not None:
        w.writerow(["implied_velocity_mm_s", fmt(velocity * 1e3), ""])
    if single is not None:
        w.writerow(["single_amp_c", fmt(single.params.amp_c), fmt(single.std_errors[1])])
        w.writerow(["single_tau_c_us", fmt(single.params.tau_c * 1e6),
                    fmt(single.std_errors[3] * 1e6)])
        w.writerow(["single_chi_square_per_dof", fmt(single.reduced_chi_square), ""])
    return buf.getvalue()


def read_fit_report(path):
    with open(path, newline="") as fh:
        return {row["parameter"]: row for row in csv.DictReader(fh)}


def write_curve(path, t, g, header=("t_us", "g_model")):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for ti, gi in zip(t, g):
            fh.write(f"{ti * 1e6:.6f},{fmt(gi)}\n")


def write_plot_data(path, points, t, fitted, single_tau):
    """Long-form decay plot data: ``series,t_us,g,std_err``.

    Series: measured points, fitted curve, the classical bound g = 2 and the
    clock-only comparison curve.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "t_us", "g", "std_err"])
        for p in points:
            w.writerow(["measured", format(p.delay * 1e6, ".6f"), fmt(p.g_value),
                        fmt(p.std_error)])
        for name, curve in (("fit", fitted), ("classical_bound", np.full_like(t, 2.0)),
                            ("single_tau", single_tau)):
            for ti, gi in zip(t, curve):
                w.writerow([name, format(ti * 1e6, ".6f"), fmt(gi), ""])
