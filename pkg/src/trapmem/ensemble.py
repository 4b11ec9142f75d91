"""Seeded Monte Carlo of write/read trials on a dephasing atomic ensemble.

Each write pulse creates, per transition class, a thermally distributed
number of spin-wave excitations together with the same number of Stokes
photons. An excitation is represented by ``M`` sampled atoms carrying phase
rates ``dk * v_j`` (thermal motion) and ``slope * dB_j / hbar`` (field
inhomogeneity); its retrieval probability after a delay ``t`` is the squared
overlap of the atomic phase factors.

Random streams are keyed on ``(seed, delay_index, block_index)`` with a fixed
block size, so an EventSet does not depend on how blocks are scheduled.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ResourceError

BLOCK_SIZE = 8192


@dataclass(frozen=True)
class PhotonModel:
    # thermal mean excitation number per class label
    mean_excitation: dict = field(
        default_factory=lambda: {"clock": 0.02, "non_clock": 0.02})
    stokes_det_eff: float = 0.6
    antistokes_det_eff: float = 0.8
    retrieval_eff: float = 0.6
    dark_prob_s: float = 1e-4
    dark_prob_as: float = 0.04

    def __post_init__(self):
        for name in ("stokes_det_eff", "antistokes_det_eff", "retrieval_eff",
                     "dark_prob_s", "dark_prob_as"):
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(name, "must be a probability in [0, 1]")
        for label, chi in self.mean_excitation.items():
            if not chi >= 0:
                raise ConfigError(f"mean_excitation[{label}]", "must be >= 0")

    def chi(self, cls):
        return float(self.mean_excitation.get(cls.label, 0.0))


@dataclass
class CollectiveExcitation:
    """Phase rates (rad/s) of the atoms sharing one excitation.

    Arrays have shape ``(..., M)``; leading axes index independent excitations.
    """
    cls: object
    velocity_rates: np.ndarray
    field_rates: np.ndarray

    @property
    def atoms(self):
        return self.velocity_rates.shape[-1]


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    delay: float
    stokes_click: bool
    antistokes_click: bool


@dataclass(frozen=True)
class SimPlan:
    delays: tuple = tuple(np.arange(0, 101, 5) * 1e-6)
    trials_per_delay: int = 100_000
    rng_seed: int = 42
    atoms_per_excitation: int = 256
    record_photon_numbers: bool = False

    def __post_init__(self):
        delays = tuple(float(d) for d in self.delays)
        if not delays:
            raise ConfigError("delays", "must be non-empty")
        if any(d < 0 for d in delays):
            raise ConfigError("delays", "must all be >= 0")
        if int(self.trials_per_delay) < 1:
            raise ConfigError("trials_per_delay", "must be >= 1")
        if int(self.atoms_per_excitation) < 1:
            raise ConfigError("atoms_per_excitation", "must be >= 1")
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise ConfigError("rng_seed", "must be an unsigned 64-bit integer")
        object.__setattr__(self, "delays", delays)


@dataclass
class EventSet:
    """Column-oriented trial records. Delays are stored in seconds."""
    trial_index: np.ndarray
    delay: np.ndarray
    stokes: np.ndarray
    antistokes: np.ndarray
    stokes_n: np.ndarray = None
    antistokes_n: np.ndarray = None

    def __len__(self):
        return len(self.trial_index)

    @property
    def has_photon_numbers(self):
        return self.stokes_n is not None and self.antistokes_n is not None

    def select(self, mask):
        def pick(a):
            return None if a is None else a[mask]
        return EventSet(self.trial_index[mask], self.delay[mask], self.stokes[mask],
                        self.antistokes[mask], pick(self.stokes_n),
                        pick(self.antistokes_n))

    def records(self):
        for i, d, s, a in zip(self.trial_index, self.delay, self.stokes, self.antistokes):
            yield TrialRecord(int(i), float(d), bool(s), bool(a))

    @classmethod
    def concatenate(cls, parts):
        parts = list(parts)
        if not parts:
            return cls.empty()
        numbers = all(p.has_photon_numbers for p in parts)
        return cls(
            np.concatenate([p.trial_index for p in parts]),
            np.concatenate([p.delay for p in parts]),
            np.concatenate([p.stokes for p in parts]),
            np.concatenate([p.antistokes for p in parts]),
            np.concatenate([p.stokes_n for p in parts]) if numbers else None,
            np.concatenate([p.antistokes_n for p in parts]) if numbers else None,
        )

    @classmethod
    def empty(cls):
        return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros(0, bool),
                   np.zeros(0, bool))


def sample_excitations(photon, classes, rng, size=None):
    """Thermal excitation numbers, P(n) = chi^n / (1 + chi)^(n+1), per class.

    Returns an integer array of shape ``(size, len(classes))`` (or
    ``(len(classes),)`` when ``size`` is None).
    """
    n = 1 if size is None else size
    out = np.empty((n, len(classes)), dtype=np.int64)
    for k, cls in enumerate(classes):
        chi = photon.chi(cls)
        out[:, k] = rng.geometric(1.0 / (1.0 + chi), n) - 1
    return out[0] if size is None else out


def build_excitation(cls, model, atoms, rng, count=None):
    """Sample phase rates for ``count`` excitations of ``atoms`` atoms each."""
    if atoms < 1:
        raise ValueError("atoms must be >= 1")
    shape = (atoms,) if count is None else (count, atoms)
    velocity = rng.normal(0.0, 1.0, shape) * (model.delta_k * model.sigma_v)
    field_rms_rate = model.field_rate_rms(cls)
    if field_rms_rate == 0:
        field_rates = np.zeros(shape)
    else:
        field_rates = rng.normal(0.0, 1.0, shape) * field_rms_rate
    return CollectiveExcitation(cls, velocity, field_rates)


def squared_overlap(exc, t):
    """|mean_j exp(i phi_j(t))|^2 over the sampled atoms (biased by ~1/M)."""
    phase = (exc.velocity_rates + exc.field_rates) * t
    return (np.cos(phase).mean(axis=-1) ** 2 + np.sin(phase).mean(axis=-1) ** 2)


def unbiased_overlap(exc, t):
    """Unbiased estimate of the squared mean phase factor.

    ``(|avg|^2 - 1/M) * M / (M - 1)``; it can fall slightly below zero when
    the true overlap is near zero. A single atom returns 1.
    """
    raw = squared_overlap(exc, t)
    m = exc.atoms
    if m == 1:
        return raw
    return (raw - 1.0 / m) * m / (m - 1)


def retrieval_probability(exc, t, photon):
    """Retrieval efficiency times the unbiased phase overlap.

    Values below zero act as probability zero when used for a Bernoulli draw.
    """
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be >= 0")
    return photon.retrieval_eff * unbiased_overlap(exc, t)


def _simulate_trials(n, delay, photon, model, atoms, rng, record_numbers=False):
    """Vectorised kernel: returns (stokes, antistokes, stokes_n, antistokes_n)."""
    classes = [cls for cls, _ in model.classes]
    counts = sample_excitations(photon, classes, rng, n)
    stokes_n = rng.binomial(counts, photon.stokes_det_eff).sum(axis=1)
    antistokes_n = np.zeros(n, dtype=np.int64)
    for k, cls in enumerate(classes):
        col = counts[:, k]
        total = int(col.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(n), col)
        exc = build_excitation(cls, model, atoms, rng, count=total)
        p = photon.antistokes_det_eff * retrieval_probability(exc, delay, photon)
        detected = rng.random(total) < p
        antistokes_n += np.bincount(owner[detected], minlength=n)
    dark_s = rng.random(n) < photon.dark_prob_s
    dark_as = rng.random(n) < photon.dark_prob_as
    stokes = dark_s | (stokes_n > 0)
    antistokes = dark_as | (antistokes_n > 0)
    if not record_numbers:
        return stokes, antistokes, None, None
    return stokes, antistokes, stokes_n, antistokes_n


def run_trial(delay, photon, model, atoms, rng, trial_index=0):
    """Single write/read cycle at storage delay ``delay``."""
    if delay < 0:
        raise ValueError("delay must be >= 0")
    s, a, _, _ = _simulate_trials(1, delay, photon, model, atoms, rng)
    return TrialRecord(trial_index, float(delay), bool(s[0]), bool(a[0]))


def block_rng(seed, delay_index, block_index):
    ss = np.random.SeedSequence(int(seed), spawn_key=(delay_index, block_index))
    return np.random.default_rng(ss)


def _check_resources(plan):
    total = len(plan.delays) * int(plan.trials_per_delay)
    # int64 index + float64 delay + two bools (+ two int64 side channels)
    per_trial = 18 + (16 if plan.record_photon_numbers else 0)
    need = total * per_trial * 3  # records, serialisation buffers, slack
    try:
        import os
        avail = os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return
    if need > avail:
        raise ResourceError(
            "trials_per_delay",
            f"{len(plan.delays)} delays x {plan.trials_per_delay} trials needs "
            f"~{need / 2**20:.0f} MiB, only {avail / 2**20:.0f} MiB available")


def run_plan(plan, photon, model, workers=1):
    """Run every trial in ``plan``; output is independent of ``workers``."""
    _check_resources(plan)
    n_per = int(plan.trials_per_delay)
    jobs = []
    for d_idx, delay in enumerate(plan.delays):
        for b_idx, start in enumerate(range(0, n_per, BLOCK_SIZE)):
            jobs.append((d_idx, b_idx, start, min(BLOCK_SIZE, n_per - start), delay))

    def work(job):
        d_idx, b_idx, start, n, delay = job
        rng = block_rng(plan.rng_seed, d_idx, b_idx)
        s, a, sn, an = _simulate_trials(n, delay, photon, model,
                                        int(plan.atoms_per_excitation), rng,
                                        plan.record_photon_numbers)
        idx = d_idx * n_per + start + np.arange(n, dtype=np.int64)
        return EventSet(idx, np.full(n, delay), s, a, sn, an)

    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(work, jobs))
        else:
            parts = [work(job) for job in jobs]
    except MemoryError as exc:
        raise ResourceError(
            "trials_per_delay",
            f"out of memory for {len(plan.delays)} delays x {n_per} trials") from exc
    return EventSet.concatenate(parts)
