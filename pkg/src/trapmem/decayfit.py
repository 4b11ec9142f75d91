"""Two-Gaussian decay model for g(t) and a weighted Levenberg-Marquardt fitter.

    g(t) = 1 + A_nc exp(-(t/tau_nc)^2) + A_c exp(-(t/tau_c)^2)

The asymptote is pinned at 1. All free parameters are fitted as logarithms,
which keeps them positive without a constrained solver.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import dephase
from .errors import (DeconvolutionError, FitPreconditionError, SingularFitError)
from .physcore import RB87, BeamGeometry, momentum_transfer

PARAM_NAMES = ("amp_nc", "amp_c", "tau_nc", "tau_c")
MAX_ITER = 500
XTOL = 1e-10
FTOL = 1e-10


@dataclass(frozen=True)
class DecayParams:
    amp_nc: float
    amp_c: float
    tau_nc: float
    tau_c: float

    def __post_init__(self):
        if self.amp_nc < 0 or self.amp_c < 0:
            raise ValueError("amplitudes must be >= 0")
        if not (self.tau_nc > 0 and self.tau_c > 0):
            raise ValueError("time constants must be > 0")

    def as_array(self):
        return np.array([self.amp_nc, self.amp_c, self.tau_nc, self.tau_c])


@dataclass(frozen=True)
class DecayFitResult:
    params: DecayParams
    covariance: np.ndarray
    chi_square: float
    dof: int
    converged: bool
    iterations: int

    @property
    def std_errors(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    @property
    def reduced_chi_square(self):
        return self.chi_square / self.dof if self.dof > 0 else np.nan


def model_eval(params, t):
    t = np.asarray(t, dtype=float)
    return (1.0 + params.amp_nc * np.exp(-(t / params.tau_nc) ** 2)
            + params.amp_c * np.exp(-(t / params.tau_c) ** 2))


def model_jacobian(params, t):
    """d g / d (amp_nc, amp_c, tau_nc, tau_c), shape (len(t), 4)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    e_nc = np.exp(-(t / params.tau_nc) ** 2)
    e_c = np.exp(-(t / params.tau_c) ** 2)
    return np.column_stack([
        e_nc,
        e_c,
        params.amp_nc * e_nc * 2 * t ** 2 / params.tau_nc ** 3,
        params.amp_c * e_c * 2 * t ** 2 / params.tau_c ** 3,
    ])


def levenberg_marquardt(residuals, jacobian, x0, max_iter=MAX_ITER,
                        xtol=XTOL, ftol=FTOL, log_space=False):
    """Minimise ``sum(residuals(x)**2)``.

    Returns ``(x, cost, converged, iterations)``. Damping is Marquardt's
    diagonal scaling; a step is accepted only if it lowers the cost.
    Converged means an accepted step with relative step and relative cost
    change both below tolerance, or a cost that no damping can lower.
    With ``log_space`` the coordinates are logarithms, so the raw step is
    already relative and is not divided by ``|x|``.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residuals(x)
    cost = float(r @ r)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        jac = jacobian(x)
        jtj = jac.T @ jac
        grad = jac.T @ r
        scale = np.diag(jtj).copy()
        scale[scale == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(scale), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                x_new = x + step
                r_new = residuals(x_new)
                cost_new = float(r_new @ r_new)
                if np.isfinite(cost_new) and cost_new <= cost:
                    break
            lam *= 10.0
            if lam > 1e20:
                # no descent direction left: numerically at the minimum
                return _polish(residuals, jacobian, x, r, log_space) + (True, it)
        rel_step = np.linalg.norm(step)
        if not log_space:
            rel_step /= np.linalg.norm(x) + xtol
        rel_cost = (cost - cost_new) / cost if cost > 0 else 0.0
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / 10.0, 1e-15)
        if (rel_step < xtol and rel_cost < ftol) or cost == 0.0:
            return _polish(residuals, jacobian, x, r, log_space) + (True, it)
    return x, cost, False, max_iter


def _polish(residuals, jacobian, x, r, log_space, steps=4):
    """Undamped Gauss-Newton steps from a converged point.

    Cost comparisons stop resolving the minimum at ~sqrt(eps) in the
    parameters; the gradient does not, so a few tiny steps finish the job.
    """
    limit = 1e-6 * (1.0 if log_space else np.linalg.norm(x) + 1.0)
    for _ in range(steps):
        step = np.linalg.lstsq(jacobian(x), -r, rcond=None)[0]
        size = np.linalg.norm(step)
        if not np.isfinite(size) or size > limit:
            break
        r_new = residuals(x + step)
        if not np.all(np.isfinite(r_new)):
            break
        x, r = x + step, r_new
        if size < 1e-15 * limit:
            break
    return x, float(r @ r)


def _check_points(points):
    if len(points) < 5:
        raise FitPreconditionError(f"need at least 5 points, got {len(points)}")
    t = np.array([p.delay for p in points], dtype=float)
    g = np.array([p.g_value for p in points], dtype=float)
    s = np.array([p.std_error for p in points], dtype=float)
    if np.any(~(s > 0)):
        raise FitPreconditionError("every point needs a positive std_error")
    if np.unique(t).size < 4:
        raise FitPreconditionError("need at least 4 distinct delays")
    return t, g, s


def _crossing(t, y, level):
    """First delay where ``y`` drops to ``level`` (linear interpolation)."""
    below = np.nonzero(y <= level)[0]
    if below.size == 0:
        return None
    i = below[0]
    if i == 0:
        return t[0] if t[0] > 0 else None
    t0, t1, y0, y1 = t[i - 1], t[i], y[i - 1], y[i]
    return t0 + (y0 - level) * (t1 - t0) / (y0 - y1) if y0 != y1 else t1


def initial_guess(points):
    """Amplitudes (g0-1)/2 each; times where g-1 falls to 60% and 20% of g0-1."""
    order = np.argsort([p.delay for p in points])
    t = np.array([points[i].delay for i in order])
    y = np.array([points[i].g_value for i in order]) - 1.0
    y0 = max(y[0], 1e-6)
    span = t[-1] - t[0] if t[-1] > t[0] else 1.0
    tau_nc = _crossing(t, y, 0.6 * y0) or 0.3 * span
    tau_c = _crossing(t, y, 0.2 * y0) or span
    if tau_c <= tau_nc:
        tau_c = 2.0 * tau_nc
    return DecayParams(y0 / 2, y0 / 2, tau_nc, tau_c)


def _fit(points, init, free):
    t, g, s = _check_points(points)
    base = init.as_array()
    free = np.asarray(free)

    def full(x):
        p = base.copy()
        with np.errstate(over="ignore"):
            p[free] = np.exp(x)
        return p

    def residuals(x):
        p = full(x)
        if not np.all(np.isfinite(p)) or np.any(p[2:] <= 0):
            # overflow/underflow in exp: reject the step
            return np.full(t.size, np.inf)
        return (g - model_eval(DecayParams(*p), t)) / s

    def jacobian(x):
        p = full(x)
        jac = model_jacobian(DecayParams(*p), t)[:, free]
        return -(jac * p[free]) / s[:, None]

    x0 = np.log(base[free])
    x, cost, converged, iterations = levenberg_marquardt(residuals, jacobian, x0,
                                                             log_space=True)
    p = full(x)
    jac_nat = model_jacobian(DecayParams(*p), t)[:, free] / s[:, None]
    alpha = jac_nat.T @ jac_nat
    # judge conditioning on the unit-free (correlation) form of alpha
    norm = np.sqrt(np.diag(alpha))
    if np.any(norm == 0):
        raise SingularFitError("degenerate Jacobian: a parameter has no influence on the data")
    corr = alpha / np.outer(norm, norm)
    cond = np.linalg.cond(corr)
    if not cond < 1e15:
        raise SingularFitError(
            f"degenerate Jacobian (condition number {cond:.3g}); "
            "the data do not constrain all parameters")
    cov = np.zeros((4, 4))
    cov[np.ix_(free, free)] = np.linalg.inv(corr) / np.outer(norm, norm)
    cov = 0.5 * (cov + cov.T)
    return p, cov, cost, t.size - free.size, converged, iterations


def _swap_labels(p, cov):
    perm = [1, 0, 3, 2]
    return p[perm], cov[np.ix_(perm, perm)]


def fit_decay(points, init=None):
    """Weighted two-Gaussian fit of a correlation sweep."""
    if init is None:
        _check_points(points)
        init = initial_guess(points)
    p, cov, cost, dof, converged, iterations = _fit(points, init, [0, 1, 2, 3])
    if p[2] > p[3]:
        p, cov = _swap_labels(p, cov)
    return DecayFitResult(DecayParams(*p), cov, cost, dof, converged, iterations)


def _tail(points, fraction=0.5):
    """Points past the first delay where g-1 has dropped to ``fraction`` of g0-1."""
    pts = sorted(points, key=lambda p: p.delay)
    y0 = pts[0].g_value - 1.0
    for i, p in enumerate(pts):
        if p.g_value - 1.0 <= fraction * y0:
            return pts[i:]
    return pts


def single_exponent_fit(points, clock_only=True, init=None):
    """Fit ``1 + A_c exp(-(t/tau_c)^2)`` with the non-clock amplitude fixed at 0.

    With ``clock_only`` False the data are assumed to contain a fast
    component, and only the tail after g-1 has halved is fitted (all points
    if that tail is too short to fit).
    """
    _check_points(points)
    use = list(points)
    if not clock_only:
        tail = _tail(points)
        if len(tail) >= 5 and len({p.delay for p in tail}) >= 4:
            use = tail
    if init is None:
        guess = initial_guess(use)
        init = DecayParams(0.0, 2 * guess.amp_c, guess.tau_c, guess.tau_c)
    start = np.array([0.0, max(init.amp_c, 1e-6), init.tau_c, init.tau_c])
    p, cov, cost, dof, converged, iterations = _fit(use, DecayParams(*start), [1, 3])
    p[0], p[2] = 0.0, p[3]
    return DecayFitResult(DecayParams(*p), cov, cost, dof, converged, iterations)


def deconvolve_field_time(tau_fit, tau_c):
    """Field-only non-clock time from 1/tau_nc^2 = 1/tau_fit^2 - 1/tau_c^2."""
    if not tau_fit < tau_c:
        raise DeconvolutionError(
            f"tau_nc ({tau_fit:.4g} s) must be shorter than tau_c ({tau_c:.4g} s)")
    return 1.0 / np.sqrt(1.0 / tau_fit ** 2 - 1.0 / tau_c ** 2)


def extract_physics(result, geometry=None, consts=RB87, delta_k=None):
    """Field inhomogeneity (T) and implied thermal velocity (m/s) from a fit.

    ``delta_k`` overrides the momentum transfer computed from ``geometry``.
    """
    if not result.converged:
        raise ValueError("fit did not converge")
    if delta_k is None:
        delta_k = momentum_transfer(geometry or BeamGeometry(), consts)
    tau_c = result.params.tau_c
    tau_field = deconvolve_field_time(result.params.tau_nc, tau_c)
    field_rms = dephase.infer_field_inhomogeneity(tau_field, consts)
    velocity = 1.0 / (tau_c * delta_k)
    return field_rms, velocity


def clock_component(result):
    """The fitted curve with the non-clock term removed."""
    return replace(result.params, amp_nc=0.0)
