"""Advanced and retarded times on the light cone and their derivatives.

The delayed times solve the implicit equations

    t1(+/-)(t) = t +/- |a(t1) - b(t)|      (delay into the upper charge a)
    t2(+/-)(t) = t +/- |a(t) - b(t2)|      (delay into the lower charge b)

Because |v| < 1, each equation has exactly one solution: the residual
s - t -/+ |x - source(s)| is strictly increasing in s with slope bounded
away from zero by 1 - sup|v|.  The solver brackets the root with the
sandwich bound (the delayed distance lies between half the simultaneous
distance and the simultaneous distance over 1 - sup|v|) and runs Newton
steps safeguarded by bisection inside that bracket.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DelaySolverError, OrderingError
from .kinematics import Trajectory, TrajectoryPair

__all__ = [
    "delay_time",
    "delay_times",
    "pair_delay",
    "delay_derivative",
    "breakpoint_ladder",
    "LadderResult",
    "MAX_DELAY_SPAN",
]

# Delays are not bounded a priori; beyond this span we refuse to search.
MAX_DELAY_SPAN = 1.0e6

_DIRECTION_SIGN = {"advanced": 1.0, "retarded": -1.0}


def delay_times(source: Trajectory, observer_positions, observer_times, direction,
                tol=1.0e-12, max_iterations=200, max_delay=MAX_DELAY_SPAN):
    """Vectorized delay solve: one root per (position, time) observer sample.

    Returns s with s = t + sign * |x - source(s)| to a residual below
    ``tol * (1 + |t|)`` per element.
    """
    try:
        sign = _DIRECTION_SIGN[direction]
    except KeyError:
        raise ValueError(f"direction must be 'advanced' or 'retarded', got {direction!r}")
    x = np.atleast_1d(np.asarray(observer_positions, dtype=float))
    t = np.atleast_1d(np.asarray(observer_times, dtype=float))
    x, t = np.broadcast_arrays(x, t)
    x = np.ascontiguousarray(x)
    t = np.ascontiguousarray(t)

    v_sup = source.velocity_sup()
    if v_sup >= 1.0:
        raise DelaySolverError("source velocity supremum reaches |v| >= 1")

    d0 = np.abs(x - source.position(t))
    if np.any(d0 <= 0.0):
        raise OrderingError("observer coincides with source; delay undefined")
    far = d0 / (1.0 - v_sup)
    if np.any(far > max_delay):
        raise DelaySolverError(f"delay span exceeds the hard cap {max_delay:g}")

    pad = tol * (1.0 + np.abs(t))
    if sign < 0.0:
        lo = t - far - pad
        hi = t - 0.5 * d0 + pad
    else:
        lo = t + 0.5 * d0 - pad
        hi = t + far + pad

    tol_arr = tol * (1.0 + np.abs(t))
    s = 0.5 * (lo + hi)

    converged = np.zeros(s.shape, dtype=bool)
    for _ in range(max_iterations):
        pos, vel, _ = source.eval(s)
        diff = x - pos
        g = s - t - sign * np.abs(diff)
        converged = np.abs(g) <= tol_arr
        if np.all(converged):
            break
        # monotone residual: shrink the bracket with the sign of g
        above = g > 0.0
        hi = np.where(above & ~converged, s, hi)
        lo = np.where(~above & ~converged, s, lo)
        gp = 1.0 + sign * np.sign(diff) * vel
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / gp
        s_new = s - step
        bad = ~np.isfinite(s_new) | (s_new <= lo) | (s_new >= hi)
        s_new = np.where(bad, 0.5 * (lo + hi), s_new)
        s = np.where(converged, s, s_new)
    else:
        worst = float(np.max(np.abs(s - t - sign * np.abs(x - source.position(s)))))
        raise DelaySolverError(
            f"light-cone solve did not converge (worst residual {worst:.3e}); "
            "this usually signals an invariant violation upstream")
    # polish to roundoff: the returned root must be a smooth function of the
    # observer data, or its stopping noise becomes a floor for the outer
    # fixed-point iteration (the norm weights amplify it by (1+|t|)/h)
    for _ in range(2):
        pos, vel, _ = source.eval(s)
        diff = x - pos
        g = s - t - sign * np.abs(diff)
        gp = 1.0 + sign * np.sign(diff) * vel
        s = np.clip(s - g / gp, lo, hi)
    return s


def delay_time(source: Trajectory, observer_position, observer_time, direction,
               tol=1.0e-12, max_delay=MAX_DELAY_SPAN):
    """Scalar delay solve; see :func:`delay_times`."""
    s = delay_times(source, observer_position, observer_time, direction,
                    tol=tol, max_delay=max_delay)
    return float(s[0])


_WHICH = {
    "t1+": ("upper", "advanced"),
    "t1-": ("upper", "retarded"),
    "t2+": ("lower", "advanced"),
    "t2-": ("lower", "retarded"),
}


def pair_delay(pair: TrajectoryPair, t, which, tol=1.0e-12):
    """Delayed time t1+/- or t2+/- for an observer on the other charge at t."""
    traj_name, direction = _which(which)
    if traj_name == "lower":
        source, observer = pair.lower, pair.upper
    else:
        source, observer = pair.upper, pair.lower
    x = observer.position(t)
    s = delay_times(source, x, t, direction, tol=tol)
    return float(s[0]) if np.ndim(t) == 0 else s


def _which(which):
    try:
        return _WHICH[which]
    except KeyError:
        raise ValueError(f"which must be one of {sorted(_WHICH)}, got {which!r}")


def delay_derivative(pair: TrajectoryPair, t, which, tol=1.0e-12):
    """d/dt of the delayed time, from the implicit light-cone equation.

    For t2+/- this is (1 +/- Xdot(t)) / (1 +/- Ydot(t2+/-)); the formulas
    for t1+/- mirror with the roles of the charges swapped.  Always > 0.
    """
    traj_name, direction = _which(which)
    s = pair_delay(pair, t, which, tol=tol)
    pm = 1.0 if direction == "advanced" else -1.0
    if traj_name == "lower":
        # observer on a, source b; |a - b| = a - b
        num = 1.0 + pm * pair.upper.velocity(t)
        den = 1.0 + pm * pair.lower.velocity(s)
    else:
        # observer on b, source a; |a - b| = a - b flips the inner signs
        num = 1.0 - pm * pair.lower.velocity(t)
        den = 1.0 - pm * pair.upper.velocity(s)
    return num / den


@dataclass(frozen=True)
class LadderResult:
    """Regularity breakpoints: solution smoothness steps up at each rung."""

    sigmas: np.ndarray
    taus: np.ndarray
    truncated: bool

    def __iter__(self):
        return iter((self.sigmas, self.taus))


def breakpoint_ladder(pair: TrajectoryPair, t_plus, count, tol=1.0e-12):
    """Iterated advanced-delay ladder sigma_k, tau_k starting from T+.

    sigma_1 = t1+(T+), tau_1 = t2+(sigma_1), then sigma_{k+1} = t1+(tau_k)
    and tau_{k+1} = t2+(sigma_{k+1}).  Rungs beyond the stored grids are
    still computed through the free extension but flagged as truncated.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    sigmas, taus = [], []
    truncated = False
    prev_tau = float(t_plus)
    for _ in range(count):
        sig = pair_delay(pair, prev_tau, "t1+", tol=tol)
        tau = pair_delay(pair, sig, "t2+", tol=tol)
        truncated = truncated or sig > pair.upper.t_max or tau > pair.lower.t_max
        sigmas.append(sig)
        taus.append(tau)
        prev_tau = tau
    return LadderResult(np.array(sigmas), np.array(taus), truncated)
