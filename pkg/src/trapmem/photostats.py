"""Correlation estimators for gated Stokes/anti-Stokes click records."""
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, UndefinedEstimateError, UnsupportedInputError


@dataclass(frozen=True)
class CorrelationPoint:
    delay: float
    g_value: float
    std_error: float
    n_trials: int
    p_s: float
    p_as: float
    p_sas: float


@dataclass(frozen=True)
class CauchySchwarzResult:
    ratio: float
    violated: bool
    significance: float


def outcome_counts(stokes, antistokes):
    """Counts of the four joint outcomes (n11, n10, n01, n00)."""
    s = np.asarray(stokes, dtype=bool)
    a = np.asarray(antistokes, dtype=bool)
    n11 = int(np.count_nonzero(s & a))
    n10 = int(np.count_nonzero(s & ~a))
    n01 = int(np.count_nonzero(~s & a))
    return n11, n10, n01, len(s) - n11 - n10 - n01


def correlation_from_counts(n11, n10, n01, n00, delay=0.0):
    """g = N n11 / (N_S N_AS) with a multinomial delta-method standard error.

    With q the outcome fractions and d_i = dg/dq_i (q00 eliminated),
    sum_i q_i d_i = -g, so Var(g) = (sum_i q_i d_i^2 - g^2) / N.
    """
    n = n11 + n10 + n01 + n00
    n_s, n_as = n11 + n10, n11 + n01
    if n < 1 or n_s == 0 or n_as == 0:
        raise UndefinedEstimateError(
            "need at least one Stokes and one anti-Stokes click",
            {"n_trials": n, "stokes": n_s, "antistokes": n_as, "coincidences": n11})
    q11, q10, q01 = n11 / n, n10 / n, n01 / n
    p_s, p_as = n_s / n, n_as / n
    g = n11 * n / (n_s * n_as)
    inv = 1.0 / (p_s * p_as)
    d11 = inv * (1.0 - q11 / p_s - q11 / p_as)
    d10 = -g / p_s
    d01 = -g / p_as
    var = (q11 * d11 ** 2 + q10 * d10 ** 2 + q01 * d01 ** 2 - g ** 2) / n
    return CorrelationPoint(float(delay), g, float(np.sqrt(max(var, 0.0))), n,
                            p_s, p_as, q11)


def cross_correlation(events):
    """Normalized cross-correlation of the trials in ``events`` (one delay)."""
    delays = np.unique(np.round(np.asarray(events.delay) * 1e9)) if len(events) else []
    if len(delays) > 1:
        raise FormatError("cross_correlation expects records from a single delay")
    delay = float(delays[0]) * 1e-9 if len(delays) else 0.0
    return correlation_from_counts(*outcome_counts(events.stokes, events.antistokes),
                                   delay=delay)


def bootstrap_std_error(point, n_resamples=1000, seed=0):
    """Nonparametric bootstrap of g, resampling trials with replacement.

    Resampling trials is equivalent to a multinomial draw over the four
    outcome classes, which is what is done here. Resamples with an empty
    marginal are dropped.
    """
    n = point.n_trials
    n11 = round(point.p_sas * n)
    n10 = round(point.p_s * n) - n11
    n01 = round(point.p_as * n) - n11
    q = np.array([n11, n10, n01, n - n11 - n10 - n01], dtype=float) / n
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(n, q, size=n_resamples)
    ns = draws[:, 0] + draws[:, 1]
    nas = draws[:, 0] + draws[:, 2]
    ok = (ns > 0) & (nas > 0)
    g = draws[ok, 0] * n / (ns[ok] * nas[ok])
    return float(np.std(g, ddof=1))


def factorial_moment_g2(numbers):
    """g^(2)(0) = <n(n-1)> / <n>^2 with a delta-method standard error."""
    n = np.asarray(numbers, dtype=float)
    if n.size < 2:
        raise ValueError("need at least two samples")
    x = n * (n - 1)
    m1, m2 = n.mean(), x.mean()
    if m1 == 0:
        raise UndefinedEstimateError("mean photon number is zero", {"samples": n.size})
    g = m2 / m1 ** 2
    cov = np.cov(np.vstack([x, n]), ddof=1) / n.size
    grad = np.array([1.0 / m1 ** 2, -2.0 * m2 / m1 ** 3])
    return float(g), float(np.sqrt(max(grad @ cov @ grad, 0.0)))


def auto_correlation(events, field="stokes"):
    """Auto-correlation of one field from the photon-number side channel."""
    if field not in ("stokes", "antistokes"):
        raise ValueError("field must be 'stokes' or 'antistokes'")
    if not getattr(events, "has_photon_numbers", False):
        raise UnsupportedInputError(
            "binary click records carry no photon-number information; "
            "simulate with photon numbers recorded")
    numbers = events.stokes_n if field == "stokes" else events.antistokes_n
    return factorial_moment_g2(numbers)


def cauchy_schwarz(cross, g_ss=2.0, g_asas=2.0, significance=2.0):
    """Test g_S,AS^2 <= g_SS g_AS,AS against the cross-correlation error bar."""
    if not (g_ss > 0 and g_asas > 0):
        raise ValueError("auto-correlations must be positive")
    g = cross.g_value
    threshold = np.sqrt(g_ss * g_asas)
    excess = g - threshold
    if cross.std_error > 0:
        sigmas = excess / cross.std_error
    else:
        sigmas = np.inf if excess > 0 else 0.0
    return CauchySchwarzResult(float(g ** 2 / (g_ss * g_asas)),
                               bool(sigmas > significance), float(sigmas))


def delay_keys(delays):
    """Integer nanosecond keys used to group floating-point delays."""
    return np.round(np.asarray(delays, dtype=float) * 1e9).astype(np.int64)


def correlation_sweep(events):
    """One CorrelationPoint per distinct delay, in increasing delay order."""
    if len(events) == 0:
        return []
    idx = np.asarray(events.trial_index)
    if np.unique(idx).size != idx.size:
        raise FormatError("duplicate trial_index values; records cannot be grouped")
    keys = delay_keys(events.delay)
    points = []
    for key in np.unique(keys):
        mask = keys == key
        counts = outcome_counts(events.stokes[mask], events.antistokes[mask])
        points.append(correlation_from_counts(*counts, delay=key * 1e-9))
    return points
