"""Explicit ODE steppers: fixed-step RK4 and embedded Dormand-Prince RK45.

Both steppers support exact landings on requested sample times, an early-stop
predicate, and (RK45) a state-acceptance hook so callers can reject steps that
leave their domain; rejection backs the step size off, it never projects the
state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainViolation(Exception):
    """Raised by an RHS evaluated outside its domain; triggers step back-off."""


class StepFailure(RuntimeError):
    def __init__(self, reason, t, h):
        super().__init__(f"step failure ({reason}) at t={t:.6g}, h={h:.3g}")
        self.reason = reason
        self.t = t
        self.h = h


# Dormand-Prince 5(4) tableau; the 5th-order solution is propagated.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


@dataclass
class StepStats:
    accepted: int = 0
    rejected_error: int = 0
    rejected_domain: int = 0
    min_h: float = np.inf
    rhs_evals: int = 0


@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    status: str  # "t_end" | "stopped"
    stats: StepStats = field(default_factory=StepStats)


def _merge_sample_times(t0, t_end, sample_times):
    ts = np.asarray(sorted(set(float(t) for t in sample_times)), dtype=float)
    return ts[(ts > t0) & (ts < t_end)]


def integrate_rk45(
    f,
    t0,
    y0,
    t_end,
    *,
    atol=1e-10,
    rtol=1e-8,
    h0=1e-3,
    max_step=np.inf,
    min_step=1e-13,
    accept_state=None,
    on_step=None,
    stop=None,
    sample_times=(),
    max_steps=2_000_000,
):
    """Adaptive Dormand-Prince integration of y' = f(t, y).

    on_step(t, y, h) fires after every accepted step (including forced
    landings); stop(t, y) -> True terminates with status "stopped";
    accept_state(y) -> False rejects the step and halves h. Landings on
    sample_times and t_end are exact.
    """
    t = float(t0)
    y = np.array(y0, dtype=float)
    stats = StepStats()
    landings = list(_merge_sample_times(t0, t_end, sample_times))
    h = min(h0, max_step, t_end - t0) if t_end > t0 else h0

    if stop is not None and stop(t, y):
        return IntegrationResult(t, y, "stopped", stats)

    k = np.empty((7,) + y.shape)
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        if stats.accepted + stats.rejected_error + stats.rejected_domain > max_steps:
            raise StepFailure("max step count", t, h)
        while landings and landings[0] <= t + 1e-12 * max(1.0, abs(t)):
            landings.pop(0)
        next_wall = landings[0] if landings else t_end
        h_try = min(h, max_step, next_wall - t)
        try:
            k[0] = f(t, y)
            for i in range(1, 7):
                yi = y + h_try * (k[:i].T @ _DP_A[i])
                k[i] = f(t + _DP_C[i] * h_try, yi)
            stats.rhs_evals += 7
        except DomainViolation:
            stats.rejected_domain += 1
            h = h_try / 2
            if h < min_step:
                raise StepFailure("domain", t, h) from None
            continue
        y5 = y + h_try * (k.T @ _DP_B5)
        y4 = y + h_try * (k.T @ _DP_B4)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        err = np.sqrt(np.mean(((y5 - y4) / scale) ** 2)) if y.size else 0.0

        if err > 1.0:
            stats.rejected_error += 1
            factor = max(0.2, 0.9 * err ** (-0.2))
            h = h_try * factor
            if h < min_step:
                raise StepFailure("error control", t, h)
            continue
        if accept_state is not None and not accept_state(y5):
            stats.rejected_domain += 1
            h = h_try / 2
            if h < min_step:
                raise StepFailure("state rejection", t, h)
            continue

        t = t + h_try
        # snap to the wall so sample grids are bit-comparable across runs
        if abs(t - next_wall) < 1e-12 * max(1.0, abs(next_wall)):
            t = next_wall
        y = y5
        stats.accepted += 1
        stats.min_h = min(stats.min_h, h_try)
        if landings and abs(t - landings[0]) < 1e-12 * max(1.0, abs(t)):
            landings.pop(0)
        if on_step is not None:
            on_step(t, y, h_try)
        if stop is not None and stop(t, y):
            return IntegrationResult(t, y, "stopped", stats)
        grow = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** (-0.2))
        h = min(h_try * grow, max_step)
    return IntegrationResult(t, y, "t_end", stats)


def integrate_rk4(f, t0, y0, t_end, h, *, on_step=None, stop=None):
    """Classic fixed-step RK4; the final step is shortened to land on t_end."""
    t = float(t0)
    y = np.array(y0, dtype=float)
    stats = StepStats()
    if stop is not None and stop(t, y):
        return IntegrationResult(t, y, "stopped", stats)
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        hs = min(h, t_end - t)
        k1 = f(t, y)
        k2 = f(t + hs / 2, y + hs / 2 * k1)
        k3 = f(t + hs / 2, y + hs / 2 * k2)
        k4 = f(t + hs, y + hs * k3)
        y = y + hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + hs
        stats.accepted += 1
        stats.rhs_evals += 4
        stats.min_h = min(stats.min_h, hs)
        if on_step is not None:
            on_step(t, y, hs)
        if stop is not None and stop(t, y):
            return IntegrationResult(t, y, "stopped", stats)
    return IntegrationResult(t, y, "t_end", stats)
