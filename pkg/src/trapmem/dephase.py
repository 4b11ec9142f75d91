"""Dephasing of the stored spin wave and its closed-form coherence envelopes.

Time constants refer to the squared overlap |<exp(i phi)>|^2, which for
Gaussian phase-rate spreads decays as exp(-(t/tau)^2).
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .physcore import RB87


@dataclass(frozen=True)
class TransitionClass:
    label: str
    # differential first-order Zeeman shift per unit field, J/T
    differential_zeeman_slope: float

    def __post_init__(self):
        if self.label not in ("clock", "non_clock"):
            raise ConfigError("label", "must be 'clock' or 'non_clock'")
        if self.label == "clock" and self.differential_zeeman_slope != 0:
            raise ConfigError("differential_zeeman_slope", "clock slope must be 0")


CLOCK = TransitionClass("clock", 0.0)
NON_CLOCK = TransitionClass("non_clock", RB87.bohr_magneton)


@dataclass(frozen=True)
class DephasingModel:
    delta_k: float
    sigma_v: float
    field_rms: float
    classes: tuple = ((CLOCK, 1.0), (NON_CLOCK, 1.0))

    def __post_init__(self):
        for name in ("delta_k", "sigma_v", "field_rms"):
            if not getattr(self, name) >= 0:
                raise ConfigError(name, "must be >= 0")
        classes = tuple((cls, float(w)) for cls, w in self.classes)
        if any(w < 0 for _, w in classes):
            raise ConfigError("classes", "amplitude weights must be nonnegative")
        object.__setattr__(self, "classes", classes)

    def field_rate_rms(self, cls, consts=RB87):
        return cls.differential_zeeman_slope * self.field_rms / consts.reduced_planck


def coherence_envelope(model, cls, t, consts=RB87):
    """Squared ensemble-averaged phase factor at storage time ``t`` (s).

    Velocity and field channels are independent Gaussians, so the envelope
    factorizes into exp(-(dk sigma_v t)^2) * exp(-(dw_rms t)^2).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    velocity = np.exp(-(model.delta_k * model.sigma_v * t) ** 2)
    field = np.exp(-(model.field_rate_rms(cls, consts) * t) ** 2)
    out = velocity * field
    return float(out) if out.ndim == 0 else out


def mixed_envelope(model, t, consts=RB87):
    """Amplitude-weighted mean envelope over the model's transition classes."""
    total = sum(w for _, w in model.classes)
    if total == 0:
        raise ValueError("all class weights are zero")
    return sum(w * coherence_envelope(model, cls, t, consts)
               for cls, w in model.classes) / total


def thermal_dephasing_time(sigma_v, delta_k):
    if not (sigma_v > 0 and delta_k > 0):
        raise ValueError("sigma_v and delta_k must both be > 0")
    return 1.0 / (sigma_v * delta_k)


def field_dephasing_time(field_rms, cls, consts=RB87):
    """hbar / (slope * field_rms); ``inf`` when the class has no first-order shift."""
    if field_rms < 0:
        raise ValueError("field_rms must be >= 0")
    rate = cls.differential_zeeman_slope * field_rms
    if rate == 0:
        return np.inf
    return consts.reduced_planck / rate


def infer_field_inhomogeneity(tau_nc, consts=RB87):
    """Field spread that gives a non-clock dephasing time ``tau_nc``."""
    if not tau_nc > 0:
        raise ValueError("tau_nc must be > 0")
    return consts.reduced_planck / (NON_CLOCK.differential_zeeman_slope * tau_nc)


def combined_dephasing_time(model, cls, consts=RB87):
    """1/e time of the class envelope (inverse-square times add)."""
    rate_sq = (model.delta_k * model.sigma_v) ** 2 + model.field_rate_rms(cls, consts) ** 2
    return np.inf if rate_sq == 0 else 1.0 / np.sqrt(rate_sq)
