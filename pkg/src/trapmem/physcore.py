"""Rb-87 constants, trap/ensemble configuration and closed-form trap physics.

All inputs and outputs are SI. Temperatures (including trap depth) are in
kelvin, angular frequencies in rad/s.
"""
from dataclasses import dataclass

import numpy as np
from scipy import constants as csts

from .errors import ConfigError, UnphysicalTrapError


@dataclass(frozen=True)
class Constants:
    boltzmann_constant: float = csts.k
    reduced_planck: float = csts.hbar
    bohr_magneton: float = csts.physical_constants["Bohr magneton"][0]
    speed_of_light: float = csts.c
    rb87_mass: float = 86.909180527 * csts.atomic_mass
    d1_wavelength: float = 794.978851156e-9
    d2_wavelength: float = 780.241209686e-9
    natural_linewidth_d1: float = 36.129e6
    natural_linewidth_d2: float = 38.117e6
    hyperfine_splitting: float = 6.834682610904e9

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ConfigError(name, "must be strictly positive")
        if not self.d1_wavelength > self.d2_wavelength:
            raise ConfigError("d1_wavelength", "must exceed d2_wavelength")


RB87 = Constants()

# relative line strengths of D1 and D2
LINE_WEIGHTS = (1.0 / 3.0, 2.0 / 3.0)


@dataclass(frozen=True)
class TrapConfig:
    wavelength: float = 1030e-9
    power: float = 7.0
    waist: float = 36e-6
    bias_field: float = 3.23e-4

    def __post_init__(self):
        if not self.power > 0:
            raise ConfigError("power", "must be > 0")
        if not self.waist > 0:
            raise ConfigError("waist", "must be > 0")
        if not self.wavelength > RB87.d1_wavelength:
            raise ConfigError(
                "wavelength", "must be red-detuned (longer than the D1 line)")
        if self.bias_field < 0:
            raise ConfigError("bias_field", "must be >= 0")


@dataclass(frozen=True)
class EnsembleConfig:
    atom_count: float = 2e5
    temperature: float = 45e-6
    # F=1 sublevel populations ordered m_F = -1, 0, +1
    zeeman_populations: tuple = (1 / 3, 1 / 3, 1 / 3)

    def __post_init__(self):
        if not self.atom_count >= 1:
            raise ConfigError("atom_count", "must be >= 1")
        if not self.temperature > 0:
            raise ConfigError("temperature", "must be > 0")
        pops = tuple(float(p) for p in self.zeeman_populations)
        if len(pops) != 3:
            raise ConfigError("zeeman_populations", "need three entries (m_F=-1,0,+1)")
        if any(p < 0 for p in pops):
            raise ConfigError("zeeman_populations", "must be nonnegative")
        if abs(sum(pops) - 1.0) > 1e-12:
            raise ConfigError("zeeman_populations", "must sum to 1 within 1e-12")
        object.__setattr__(self, "zeeman_populations", pops)


@dataclass(frozen=True)
class BeamGeometry:
    write_wavelength: float = 794.978851156e-9
    stokes_angle: float = np.deg2rad(2.0)
    write_detuning: float = 100e6

    def __post_init__(self):
        if not 0 < self.stokes_angle < np.pi / 2:
            raise ConfigError("stokes_angle", "must lie in (0, pi/2)")
        if not self.write_wavelength > 0:
            raise ConfigError("write_wavelength", "must be > 0")


@dataclass(frozen=True)
class TrapDerived:
    depth: float
    radial_freq: float
    axial_freq: float
    scattering_rate: float
    rayleigh_range: float


def peak_intensity(trap):
    return 2 * trap.power / (np.pi * trap.waist ** 2)


def rayleigh_range(trap):
    return np.pi * trap.waist ** 2 / trap.wavelength


def _line_terms(trap, consts):
    """Per-line dipole coefficients ``c_i`` and ratios ``Gamma_i / Delta_i``.

    The rotating-wave potential is ``U = I0 * sum_i c_i * (Gamma_i / Delta_i)``.
    """
    c = consts.speed_of_light
    omega_laser = 2 * np.pi * c / trap.wavelength
    coeffs, ratios = [], []
    lines = (
        (consts.d1_wavelength, consts.natural_linewidth_d1, "D1"),
        (consts.d2_wavelength, consts.natural_linewidth_d2, "D2"),
    )
    for weight, (lam, gamma, name) in zip(LINE_WEIGHTS, lines):
        omega0 = 2 * np.pi * c / lam
        detuning = omega_laser - omega0
        if detuning == 0:
            raise UnphysicalTrapError(
                "wavelength", f"trap laser is resonant with the {name} line")
        coeffs.append(weight * 3 * np.pi * c ** 2 / (2 * omega0 ** 3))
        ratios.append(gamma / detuning)
    return np.array(coeffs), np.array(ratios)


def trap_depth(trap, consts=RB87):
    """Peak trap depth U0/k_B in kelvin (positive for an attractive trap)."""
    coeffs, ratios = _line_terms(trap, consts)
    potential = peak_intensity(trap) * np.sum(coeffs * ratios)
    return -potential / consts.boltzmann_constant


def effective_gamma_over_delta(trap, consts=RB87):
    """Line-weighted Gamma/Delta_eff, consistent with the depth formula."""
    coeffs, ratios = _line_terms(trap, consts)
    return np.sum(coeffs * ratios ** 2) / np.sum(coeffs * ratios)


def trap_frequencies(depth, trap, consts=RB87):
    """Harmonic radial and axial angular frequencies for a Gaussian beam trap."""
    if not depth > 0:
        raise ValueError("depth must be > 0")
    u0 = depth * consts.boltzmann_constant
    m = consts.rb87_mass
    radial = np.sqrt(4 * u0 / (m * trap.waist ** 2))
    axial = np.sqrt(2 * u0 / (m * rayleigh_range(trap) ** 2))
    return radial, axial


def _rate_from_ratio(depth, gamma_over_delta, consts=RB87):
    return depth * consts.boltzmann_constant / consts.reduced_planck * abs(gamma_over_delta)


def scattering_rate(depth, trap, consts=RB87):
    """Photon scattering rate at the trap centre, in 1/s."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    return _rate_from_ratio(depth, effective_gamma_over_delta(trap, consts), consts)


def cloud_radii(ens, freqs, consts=RB87):
    """Thermal rms radii (sigma_r, sigma_z) in a harmonic trap."""
    kt = consts.boltzmann_constant * ens.temperature
    m = consts.rb87_mass
    return tuple(float(np.sqrt(kt / (m * w ** 2))) for w in freqs)


def peak_density(ens, radii):
    """Peak density of a Gaussian cloud in 1/m^3."""
    sigma_r, sigma_z = radii
    if not (sigma_r > 0 and sigma_z > 0):
        raise ValueError("radii must be > 0")
    return ens.atom_count / ((2 * np.pi) ** 1.5 * sigma_r ** 2 * sigma_z)


def thermal_velocity(temperature, consts=RB87):
    """1D rms velocity sqrt(k_B T / m)."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    return float(np.sqrt(consts.boltzmann_constant * temperature / consts.rb87_mass))


def delta_k_magnitude(k_write, k_stokes, angle):
    return float(np.sqrt(k_write ** 2 + k_stokes ** 2
                         - 2 * k_write * k_stokes * np.cos(angle)))


def momentum_transfer(geom, consts=RB87):
    """|k_s - k_w| for a Stokes mode tilted by ``geom.stokes_angle``.

    The write frequency is the ``write_wavelength`` line frequency shifted by
    ``write_detuning``; the Stokes photon is one hyperfine splitting lower.
    """
    c = consts.speed_of_light
    nu_w = c / geom.write_wavelength + geom.write_detuning
    nu_s = nu_w - consts.hyperfine_splitting
    return delta_k_magnitude(2 * np.pi * nu_w / c, 2 * np.pi * nu_s / c, geom.stokes_angle)


def derive_trap(trap, consts=RB87):
    depth = trap_depth(trap, consts)
    radial, axial = trap_frequencies(depth, trap, consts)
    return TrapDerived(
        depth=depth,
        radial_freq=radial,
        axial_freq=axial,
        scattering_rate=scattering_rate(depth, trap, consts),
        rayleigh_range=rayleigh_range(trap),
    )
