"""Run configuration: sectioned key-value files with unit-suffixed keys.

Example::

    [trap]
    wavelength_nm = 1030
    power_w = 7
    waist_um = 36

Missing keys take the defaults below, which describe the reference
apparatus. Blank ``sigma_v_mm_s`` / ``delta_k_per_mm`` mean "derive".
"""
import configparser
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import dephase, physcore
from .ensemble import PhotonModel, SimPlan
from .errors import ConfigError

# F=1 source sublevel index (m_F = -1, 0, +1) of each Raman class
SOURCE_SUBLEVEL = {"clock": 0, "non_clock": 1}


@dataclass(frozen=True)
class DephasingOverrides:
    sigma_v: float = None
    delta_k: float = None
    field_rms: float = 7.5e-7


@dataclass(frozen=True)
class RunConfig:
    trap: physcore.TrapConfig = field(default_factory=physcore.TrapConfig)
    ensemble: physcore.EnsembleConfig = field(default_factory=physcore.EnsembleConfig)
    geometry: physcore.BeamGeometry = field(default_factory=physcore.BeamGeometry)
    photon: PhotonModel = field(default_factory=PhotonModel)
    dephasing: DephasingOverrides = field(default_factory=DephasingOverrides)
    plan: SimPlan = field(default_factory=SimPlan)
    workers: int = 1
    output: str = "out"


# (section, key, attribute path, scale to SI)
_KEYS = [
    ("trap", "wavelength_nm", "trap.wavelength", 1e-9),
    ("trap", "power_w", "trap.power", 1.0),
    ("trap", "waist_um", "trap.waist", 1e-6),
    ("trap", "bias_field_g", "trap.bias_field", 1e-4),
    ("ensemble", "atom_count", "ensemble.atom_count", 1.0),
    ("ensemble", "temperature_uk", "ensemble.temperature", 1e-6),
    ("geometry", "write_wavelength_nm", "geometry.write_wavelength", 1e-9),
    ("geometry", "stokes_angle_deg", "geometry.stokes_angle", np.pi / 180),
    ("geometry", "write_detuning_mhz", "geometry.write_detuning", 1e6),
    ("photon", "stokes_det_eff", "photon.stokes_det_eff", 1.0),
    ("photon", "antistokes_det_eff", "photon.antistokes_det_eff", 1.0),
    ("photon", "retrieval_eff", "photon.retrieval_eff", 1.0),
    ("photon", "dark_prob_s", "photon.dark_prob_s", 1.0),
    ("photon", "dark_prob_as", "photon.dark_prob_as", 1.0),
    ("dephasing", "field_rms_mg", "dephasing.field_rms", 1e-7),
    ("dephasing", "sigma_v_mm_s", "dephasing.sigma_v", 1e-3),
    ("dephasing", "delta_k_per_mm", "dephasing.delta_k", 1e3),
]
_POPULATION_KEYS = ("population_m1", "population_0", "population_p1")


def _si(value, scale):
    # SI values are held to 15 significant digits; serialization writes the
    # shortest exact repr in file units, so parse -> serialize -> parse is exact
    return float(format(value * scale, ".15g"))


def _num(text, section, key):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"not a number: {text!r}") from None


def parse_delays(text):
    """``start:stop:step`` (stop inclusive) or a comma list, in microseconds."""
    text = text.strip()
    if ":" in text:
        parts = [_num(p, "plan", "delays_us") for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError("plan.delays_us", "range must be start:stop:step with step > 0")
        start, stop, step = parts
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(_si(start + i * step, 1e-6) for i in range(max(n, 0)))
    return tuple(_si(_num(p, "plan", "delays_us"), 1e-6)
                 for p in text.split(",") if p.strip())


def _fmt(x, scale=1.0):
    return repr(float(x) / scale)


def parse_config(text):
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc)) from None
    base = RunConfig()
    values = {
        "trap": dict(base.trap.__dict__),
        "ensemble": dict(base.ensemble.__dict__),
        "geometry": dict(base.geometry.__dict__),
        "photon": dict(base.photon.__dict__),
        "dephasing": dict(base.dephasing.__dict__),
    }
    values["photon"]["mean_excitation"] = dict(base.photon.mean_excitation)
    for section, key, path, scale in _KEYS:
        target, attr = path.split(".")
        if cp.has_option(section, key):
            raw = cp.get(section, key).strip()
            if raw == "" and target == "dephasing" and attr != "field_rms":
                values[target][attr] = None
            else:
                values[target][attr] = _si(_num(raw, section, key), scale)
        elif values[target][attr] is not None:
            # defaults go through the same rounding as parsed values
            values[target][attr] = _si(values[target][attr] / scale, scale)
    pops = [_si(p, 1.0) for p in base.ensemble.zeeman_populations]
    for i, key in enumerate(_POPULATION_KEYS):
        if cp.has_option("ensemble", key):
            pops[i] = _si(_num(cp.get("ensemble", key), "ensemble", key), 1.0)
    values["ensemble"]["zeeman_populations"] = tuple(pops)
    values["photon"]["mean_excitation"] = {
        k: _si(v, 1.0) for k, v in values["photon"]["mean_excitation"].items()}
    for label in ("clock", "non_clock"):
        key = f"mean_excitation_{label}"
        if cp.has_option("photon", key):
            values["photon"]["mean_excitation"][label] = _si(_num(
                cp.get("photon", key), "photon", key), 1.0)

    plan = base.plan
    plan_kw = {"delays": tuple(_si(d, 1.0) for d in plan.delays)}
    if cp.has_option("plan", "delays_us"):
        plan_kw["delays"] = parse_delays(cp.get("plan", "delays_us"))
    for key, attr in (("trials_per_delay", "trials_per_delay"), ("seed", "rng_seed"),
                      ("atoms_per_excitation", "atoms_per_excitation")):
        if cp.has_option("plan", key):
            try:
                plan_kw[attr] = int(cp.get("plan", key))
            except ValueError:
                raise ConfigError(f"plan.{key}", "not an integer") from None
    if cp.has_option("plan", "record_photon_numbers"):
        try:
            plan_kw["record_photon_numbers"] = cp.getboolean("plan", "record_photon_numbers")
        except ValueError:
            raise ConfigError("plan.record_photon_numbers", "not a boolean") from None
    workers = base.workers
    if cp.has_option("plan", "workers"):
        workers = _num(cp.get("plan", "workers"), "plan", "workers")
        if workers != int(workers) or workers < 1:
            raise ConfigError("plan.workers", "must be a positive integer")
        workers = int(workers)
    output = cp.get("output", "directory", fallback=base.output)

    return RunConfig(
        trap=_build(physcore.TrapConfig, "trap", values["trap"]),
        ensemble=_build(physcore.EnsembleConfig, "ensemble", values["ensemble"]),
        geometry=_build(physcore.BeamGeometry, "geometry", values["geometry"]),
        photon=_build(PhotonModel, "photon", values["photon"]),
        dephasing=_validate_overrides(DephasingOverrides(**values["dephasing"])),
        plan=_build(SimPlan, "plan", {**plan.__dict__, **plan_kw}),
        workers=workers,
        output=output,
    )


def _build(cls, section, kwargs):
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{section}.{exc.field}", str(exc).split(": ", 1)[-1]) from None


def _validate_overrides(ov):
    if not ov.field_rms >= 0:
        raise ConfigError("dephasing.field_rms_mg", "must be >= 0")
    for name in ("sigma_v", "delta_k"):
        value = getattr(ov, name)
        if value is not None and not value > 0:
            raise ConfigError(f"dephasing.{name}", "override must be > 0")
    return ov


def serialize_config(cfg):
    cp = configparser.ConfigParser()
    for section in ("trap", "ensemble", "geometry", "photon", "dephasing", "plan", "output"):
        cp.add_section(section)
    for section, key, path, scale in _KEYS:
        target, attr = path.split(".")
        value = getattr(getattr(cfg, target), attr)
        cp.set(section, key, "" if value is None else _fmt(value, scale))
    for key, p in zip(_POPULATION_KEYS, cfg.ensemble.zeeman_populations):
        cp.set("ensemble", key, _fmt(p))
    for label in ("clock", "non_clock"):
        cp.set("photon", f"mean_excitation_{label}", _fmt(cfg.photon.chi(
            dephase.CLOCK if label == "clock" else dephase.NON_CLOCK)))
    cp.set("plan", "delays_us", ",".join(_fmt(d, 1e-6) for d in cfg.plan.delays))
    cp.set("plan", "trials_per_delay", str(int(cfg.plan.trials_per_delay)))
    cp.set("plan", "seed", str(int(cfg.plan.rng_seed)))
    cp.set("plan", "atoms_per_excitation", str(int(cfg.plan.atoms_per_excitation)))
    cp.set("plan", "record_photon_numbers", str(bool(cfg.plan.record_photon_numbers)).lower())
    cp.set("plan", "workers", str(int(cfg.workers)))
    cp.set("output", "directory", cfg.output)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_config(path=None):
    if path is None:
        return parse_config("")
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None


def with_plan(cfg, **kwargs):
    return replace(cfg, plan=_build(SimPlan, "plan", {**cfg.plan.__dict__, **kwargs}))


def effective_photon_model(cfg):
    """Scale each class's mean excitation by its source-sublevel population.

    ``mean_excitation`` is quoted for a uniform F=1 distribution, so a class
    whose source sublevel holds population p gets chi * 3p.
    """
    pops = cfg.ensemble.zeeman_populations
    chi = {label: cfg.photon.mean_excitation.get(label, 0.0) * 3.0 * pops[i]
           for label, i in SOURCE_SUBLEVEL.items()}
    return replace(cfg.photon, mean_excitation=chi)


def derive_quantities(cfg, consts=physcore.RB87):
    """Every derived trap/ensemble/dephasing quantity, SI units."""
    d = physcore.derive_trap(cfg.trap, consts)
    radii = physcore.cloud_radii(cfg.ensemble, (d.radial_freq, d.axial_freq), consts)
    sigma_v_derived = physcore.thermal_velocity(cfg.ensemble.temperature, consts)
    dk_derived = physcore.momentum_transfer(cfg.geometry, consts)
    ov = cfg.dephasing
    sigma_v = ov.sigma_v if ov.sigma_v is not None else sigma_v_derived
    dk = ov.delta_k if ov.delta_k is not None else dk_derived
    model = dephasing_model(cfg, sigma_v=sigma_v, delta_k=dk)
    return {
        "depth_K": d.depth,
        "radial_freq_rad_s": d.radial_freq,
        "axial_freq_rad_s": d.axial_freq,
        "scattering_rate_per_s": d.scattering_rate,
        "rayleigh_range_m": d.rayleigh_range,
        "sigma_r_m": radii[0],
        "sigma_z_m": radii[1],
        "peak_density_per_m3": physcore.peak_density(cfg.ensemble, radii),
        "sigma_v_m_s": sigma_v,
        "delta_k_per_m": dk,
        "tau_thermal_s": dephase.thermal_dephasing_time(sigma_v, dk),
        "tau_field_nc_s": dephase.field_dephasing_time(ov.field_rms, dephase.NON_CLOCK,
                                                       consts),
        "tau_nc_pred_s": dephase.combined_dephasing_time(model, dephase.NON_CLOCK, consts),
        "tau_c_pred_s": dephase.combined_dephasing_time(model, dephase.CLOCK, consts),
    }


def dephasing_model(cfg, sigma_v=None, delta_k=None):
    if sigma_v is None:
        sigma_v = (cfg.dephasing.sigma_v if cfg.dephasing.sigma_v is not None
                   else physcore.thermal_velocity(cfg.ensemble.temperature))
    if delta_k is None:
        delta_k = (cfg.dephasing.delta_k if cfg.dephasing.delta_k is not None
                   else physcore.momentum_transfer(cfg.geometry))
    photon = effective_photon_model(cfg)
    classes = tuple((cls, photon.chi(cls)) for cls in (dephase.CLOCK, dephase.NON_CLOCK))
    return dephase.DephasingModel(delta_k, sigma_v, cfg.dephasing.field_rms, classes)
