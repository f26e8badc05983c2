"""Relaxation-law extraction by damped least squares.

Three small fixed-form models cover everything the time series need:

  exponential   y = offset + amplitude * exp(-t / tau_decay)
  gaussian      y = offset + amplitude * exp(-(t / tau_decay)^2)
  half-decay    y = 0.5 * exp(-rate * t)   (off-diagonal coherence law)

The solver is a plain Levenberg-Marquardt loop on the normal equations:
deterministic given the data (fixed initial-guess heuristics, no
randomness), accepted steps never increase the cost, at most 200
iterations, relative step tolerance 1e-10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError

MAX_ITERATIONS = 200
STEP_RTOL = 1e-10


@dataclass(frozen=True)
class ExpFit:
    offset: float
    amplitude: float
    tau_decay: float
    rms_residual: float
    window: tuple[float, float]
    iterations: int
    cost_history: tuple[float, ...]

    def __call__(self, t):
        return self.offset + self.amplitude * np.exp(-np.asarray(t) / self.tau_decay)


@dataclass(frozen=True)
class RateFit:
    """Fit of |rho_23|(t) = 0.5 exp(-rate t); rate is A_K(Omega)."""

    rate: float
    rms_residual: float
    window: tuple[float, float]
    iterations: int

    def __call__(self, t):
        return 0.5 * np.exp(-self.rate * np.asarray(t))


def _window_slice(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitError("series must be matching 1d arrays")
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y = t[keep], y[keep]
    if len(t) < 10:
        raise FitError(f"need at least 10 samples in the fit window, got {len(t)}")
    return t, y


def _levenberg_marquardt(residual_jac, p0):
    """Damped normal equations on r = y - f(p), jac = df/dp.

    Returns (params, cost_history, iterations); accepted steps never
    increase the cost.
    """
    p = np.asarray(p0, dtype=float)
    r, jac = residual_jac(p)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    for it in range(1, MAX_ITERATIONS + 1):
        jtj = jac.T @ jac
        g = jac.T @ r
        accepted = False
        for _ in range(50):
            damp = lam * np.diag(np.maximum(np.diag(jtj), 1e-30))
            try:
                step = np.linalg.solve(jtj + damp, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = p + step
            with np.errstate(over="ignore", invalid="ignore"):
                rc, jc = residual_jac(cand)
                cand_cost = float(rc @ rc)
            if np.isfinite(cand_cost) and cand_cost <= cost and np.all(np.isfinite(jc)):
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            return p, history, it
        rel_step = float(np.max(np.abs(step) / np.maximum(np.abs(p), 1e-30)))
        p, r, jac, cost = cand, rc, jc, cand_cost
        history.append(cost)
        lam = max(lam / 3.0, 1e-12)
        if rel_step < STEP_RTOL:
            return p, history, it
    raise FitError("fit did not converge", iterations=MAX_ITERATIONS, cost=cost)


def _tail_mean(y):
    k = max(3, len(y) // 5)
    return float(np.mean(y[-k:]))


def _log_slope_guess(t, y, offset):
    """Decay-time guess from the log-slope over the first third of the data."""
    k = max(3, len(t) // 3)
    z = y[:k] - offset
    ref = z[0]
    if ref == 0.0:
        return (t[-1] - t[0]) / 3.0 or 1.0
    z = z / ref
    keep = z > 1e-12
    if keep.sum() < 2:
        return (t[-1] - t[0]) / 3.0 or 1.0
    slope = np.polyfit(t[:k][keep], np.log(z[keep]), 1)[0]
    if slope >= -1e-12:
        return (t[-1] - t[0]) / 3.0 or 1.0
    return -1.0 / slope


def fit_exponential(t, y, window=None) -> ExpFit:
    """Least-squares fit of offset + amplitude * exp(-t/tau_decay)."""
    t, y = _window_slice(t, y, window)
    if np.ptp(y) == 0.0:
        raise FitError("series is constant; nothing to fit")
    offset0 = _tail_mean(y)
    amp0 = float(y[0] - offset0)
    if amp0 == 0.0:
        amp0 = float(np.max(np.abs(y - offset0))) or 1e-6
    tau0 = _log_slope_guess(t, y, offset0)

    def residual_jac(p):
        offset, amp, tau = p
        decay = np.exp(-t / tau)
        model = offset + amp * decay
        jac = np.column_stack([np.ones_like(t), decay, amp * decay * t / tau**2])
        return y - model, jac

    p, history, iters = _levenberg_marquardt(residual_jac, [offset0, amp0, tau0])
    offset, amp, tau = p
    if tau <= 0:
        raise FitError(f"decay time came out nonpositive ({tau:g})", iterations=iters)
    resid = y - (offset + amp * np.exp(-t / tau))
    return ExpFit(
        offset=float(offset),
        amplitude=float(amp),
        tau_decay=float(tau),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(t[0]), float(t[-1])),
        iterations=iters,
        cost_history=tuple(history),
    )


def fit_gaussian(t, y, window=None) -> ExpFit:
    """Least-squares fit of offset + amplitude * exp(-(t/tau_decay)^2)."""
    t, y = _window_slice(t, y, window)
    if np.ptp(y) == 0.0:
        raise FitError("series is constant; nothing to fit")
    offset0 = _tail_mean(y)
    amp0 = float(y[0] - offset0) or 1e-6
    tau0 = _log_slope_guess(t, y, offset0)

    def residual_jac(p):
        offset, amp, tau = p
        decay = np.exp(-((t / tau) ** 2))
        model = offset + amp * decay
        jac = np.column_stack(
            [np.ones_like(t), decay, 2.0 * amp * decay * t**2 / tau**3]
        )
        return y - model, jac

    p, history, iters = _levenberg_marquardt(residual_jac, [offset0, amp0, tau0])
    offset, amp, tau = p
    if tau <= 0:
        raise FitError(f"decay time came out nonpositive ({tau:g})", iterations=iters)
    resid = y - (offset + amp * np.exp(-((t / tau) ** 2)))
    return ExpFit(
        offset=float(offset),
        amplitude=float(amp),
        tau_decay=float(abs(tau)),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(t[0]), float(t[-1])),
        iterations=iters,
        cost_history=tuple(history),
    )


def fit_offdiag_exponential(t, y, window=None) -> RateFit:
    """Fit |rho_23|(t) = 0.5 exp(-rate t); amplitude pinned at 1/2."""
    t, y = _window_slice(t, y, window)
    if np.any(y < 0):
        raise FitError("off-diagonal magnitude series must be nonnegative")
    z = y / 0.5
    keep = z > 1e-12
    if keep.sum() >= 2 and np.ptp(t[keep]) > 0:
        rate0 = max(0.0, -np.polyfit(t[keep], np.log(z[keep]), 1)[0])
    else:
        rate0 = 1.0

    def residual_jac(p):
        (rate,) = p
        model = 0.5 * np.exp(-rate * t)
        jac = np.column_stack([-t * model])
        return y - model, jac

    p, _history, iters = _levenberg_marquardt(residual_jac, [rate0])
    rate = float(p[0])
    resid = y - 0.5 * np.exp(-rate * t)
    return RateFit(
        rate=rate,
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        window=(float(t[0]), float(t[-1])),
        iterations=iters,
    )


def melik_curve(t, n_env: int, delta: float, coupling_j: float):
    """Large-bath off-diagonal law for an uncoupled bath.

    Re rho_23(t) = [1/6 + (1 - b t^2)/3 * exp(-c t^2)] cos(w t) with
    b = N Delta^2 / 4, c = b/2, w = J - Delta: Gaussian collapse of the
    initial oscillation followed by a revival at one third of the starting
    amplitude.
    """
    if n_env < 1:
        raise FitError(f"bath size must be >= 1, got {n_env}")
    t = np.asarray(t, dtype=float)
    b = n_env * delta**2 / 4.0
    c = b / 2.0
    omega = coupling_j - delta
    env = 1.0 / 6.0 + (1.0 - b * t**2) / 3.0 * np.exp(-c * t**2)
    out = env * np.cos(omega * t)
    return float(out) if out.ndim == 0 else out
