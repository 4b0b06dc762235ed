"""Reconstruction of solutions from finite trajectory strips.

The time-symmetric equations of motion can be solved for their most
advanced argument.  Writing the lower charge's equation at the retarded
time of a point (t, x) on the upper world line expresses the upper
velocity there through data that lies entirely on the given strips:

    adot(t) = f(g(t, a(t))),   f(u) = (u - 1) / (u + 1),

with g built from the lower strip at the retarded time and the upper strip
at the doubly retarded time.  Integrating this ordinary differential
equation extends the upper strip forward by one light-cone leg; the
mirrored equation then extends the lower strip, and alternating legs cover
any horizon.  Strips not cut from a true solution can die after finitely
many legs: an implied attractive or zero force drives the velocity into
the light line, and the light-cone domain of the data can be exhausted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConstructionError, DomainExitError, LightLineError,
                     OrderingError, ReconstructionError, StripTooShortError)
from .kinematics import Trajectory, TrajectoryPair, reflect_pair, time_reflect
from .lightcone import delay_time

__all__ = [
    "StripPair",
    "moebius_f",
    "g_field",
    "extend_a",
    "extend_b",
    "reconstruct",
    "cut_strips",
]

_THREAD_TOL = 1.0e-10


def moebius_f(u):
    """The Moebius map (u - 1) / (u + 1), inverse of the Doppler factor rho.

    Maps (0, inf) onto the admissible velocity range (-1, 1); the pole at
    u = -1 is rejected, u = 0 is the light line itself.
    """
    u = float(u)
    if u == -1.0:
        raise LightLineError("Moebius map pole u = -1 (light-line singularity)")
    return (u - 1.0) / (u + 1.0)


@dataclass(frozen=True)
class StripPair:
    """Light-cone threaded strips of both charges.

    With ``threading='future'`` the windows satisfy T2+ = t2+(T1+),
    T2- = t2-(T1+) and T1- = t1-(T2-); with ``threading='past'`` the
    mirrored conditions hold.  ``threading=None`` skips validation (used
    for the intermediate states while legs are appended).
    """

    a_strip: Trajectory
    b_strip: Trajectory
    threading: str | None = "future"

    def __post_init__(self):
        if self.threading is None:
            return
        if self.threading not in ("future", "past"):
            raise ConstructionError("threading must be 'future', 'past' or None")
        a, b = self.a_strip, self.b_strip
        if a.velocity_sup() >= 1.0 or b.velocity_sup() >= 1.0:
            raise ConstructionError("strips must be subluminal")
        t = np.union1d(a.grid, b.grid)
        if float(np.min(a.position(t) - b.position(t))) <= 0.0:
            raise ConstructionError("upper strip must stay above lower strip")
        t1m, t1p = a.t_min, a.t_max
        t2m, t2p = b.t_min, b.t_max
        if self.threading == "future":
            conditions = (
                ("T2+ = t2+(T1+)", t2p - t1p - (a.position(t1p) - b.position(t2p))),
                ("T2- = t2-(T1+)", t2m - t1p + (a.position(t1p) - b.position(t2m))),
                ("T1- = t1-(T2-)", t1m - t2m + (a.position(t1m) - b.position(t2m))),
            )
        else:
            conditions = (
                ("T2- = t2-(T1-)", t2m - t1m + (a.position(t1m) - b.position(t2m))),
                ("T2+ = t2+(T1-)", t2p - t1m - (a.position(t1m) - b.position(t2p))),
                ("T1+ = t1+(T2+)", t1p - t2p - (a.position(t1p) - b.position(t2p))),
            )
        scale = 1.0 + max(abs(t1m), abs(t1p), abs(t2m), abs(t2p))
        for name, defect in conditions:
            if abs(defect) > _THREAD_TOL * scale:
                raise ConstructionError(
                    f"strips are not light-cone compatible: {name} violated "
                    f"by {abs(defect):.3e}")

    def reflected(self):
        new_threading = {"future": "past", "past": "future", None: None}[self.threading]
        return StripPair(time_reflect(self.a_strip), time_reflect(self.b_strip),
                         new_threading)


def _checked_retarded(source: Trajectory, x, t, lo, hi, error_cls, what):
    """Retarded time into ``source``, required to lie in [lo, hi].

    The returned time is clamped into the window: legs start and end
    exactly on light-cone boundaries, and a root a few ulps outside would
    otherwise fall into the free extension where the acceleration is
    exactly zero.
    """
    s = delay_time(source, x, t, "retarded")
    tol = 1.0e-9 * (1.0 + abs(s))
    if s < lo - tol or s > hi + tol:
        raise error_cls(f"{what} time {s:.6g} outside [{lo:.6g}, {hi:.6g}]")
    return min(max(s, lo), hi)


def g_field(t, x, strips: StripPair, kappa_b):
    """Doppler factor of the upper velocity implied by the strip data.

    Solves the lower charge's equation of motion at the retarded time of
    (t, x) for its advanced term; g > 0 on data coming from a true
    solution, and adot(t) = moebius_f(g).
    """
    if kappa_b <= 0.0:
        raise ConstructionError("reconstruction requires kappa_b > 0")
    b = strips.b_strip
    a = strips.a_strip
    s2 = _checked_retarded(b, x, t, b.t_min, b.t_max, DomainExitError,
                           "retarded point leaves the lower strip:")
    b_pos, b_vel, b_acc = b.eval(s2)
    if x - b_pos <= 0.0:
        raise OrderingError("separation vanished between (t, x) and the lower strip")
    s1 = _checked_retarded(a, b_pos, s2, a.t_min, a.t_max, StripTooShortError,
                           "doubly retarded point leaves the upper strip:")
    a_pos, a_vel, _ = a.eval(s1)
    sep1 = a_pos - b_pos
    if sep1 <= 0.0:
        raise OrderingError("separation vanished at the doubly retarded time")
    sigma = (1.0 - a_vel) / (1.0 + a_vel)
    bracket = b_acc / (kappa_b * (1.0 - b_vel * b_vel) ** 1.5) + 0.5 * sigma / (sep1 * sep1)
    return -2.0 * (b_pos - x) ** 2 * bracket


def _g_field_mirror(t, y, strips: StripPair, kappa_a):
    """Doppler factor of the lower velocity: the upper equation solved
    for its advanced term; bdot(t) = -moebius_f(g)."""
    if kappa_a <= 0.0:
        raise ConstructionError("reconstruction requires kappa_a > 0")
    a = strips.a_strip
    b = strips.b_strip
    s1 = _checked_retarded(a, y, t, a.t_min, a.t_max, DomainExitError,
                           "retarded point leaves the upper strip:")
    a_pos, a_vel, a_acc = a.eval(s1)
    if a_pos - y <= 0.0:
        raise OrderingError("separation vanished between (t, y) and the upper strip")
    s2 = _checked_retarded(b, a_pos, s1, b.t_min, b.t_max, StripTooShortError,
                           "doubly retarded point leaves the lower strip:")
    b_pos, b_vel, _ = b.eval(s2)
    sep2 = a_pos - b_pos
    if sep2 <= 0.0:
        raise OrderingError("separation vanished at the doubly retarded time")
    rho = (1.0 + b_vel) / (1.0 - b_vel)
    return 2.0 * (a_pos - y) ** 2 * (
        a_acc / (kappa_a * (1.0 - a_vel * a_vel) ** 1.5) - 0.5 * rho / (sep2 * sep2))


def _leg_velocity(g_value, mirror):
    """Implied subluminal velocity, with the failure modes of dead strips."""
    if g_value <= 0.0:
        raise LightLineError(
            f"implied Doppler factor {g_value:.6g} <= 0: the strips demand an "
            "attractive or zero force and the velocity hits the light line")
    v = moebius_f(g_value)
    if mirror:
        v = -v
    if abs(v) >= 1.0:
        raise LightLineError(f"implied velocity |{v:.6g}| >= 1")
    return v


def _rk4_leg(t0, x0, t_stop_fn, rhs, h):
    """Classical one-step integration with exact termination at the event.

    ``t_stop_fn(t, x)`` is the (strictly increasing) event function; the
    final step is shortened so the last node lands on the event root, which
    keeps every stage evaluation inside the valid strip domain.
    """

    def step(t, x, dt):
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = rhs(t + dt, x + dt * k3)
        return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    times = [t0]
    positions = [x0]
    velocities = [rhs(t0, x0)]
    t, x = t0, x0
    guard = 0
    while True:
        guard += 1
        if guard > 10_000_000:
            raise ReconstructionError("leg did not terminate (guard tripped)")
        x_try = step(t, x, h)
        if t_stop_fn(t + h, x_try) >= 0.0:
            break
        t, x = t + h, x_try
        times.append(t)
        positions.append(x)
        velocities.append(rhs(t, x))

    # locate the event on the dense cubic of the trial step, then redo the
    # step with the shortened width so no stage leaves the domain
    v0 = velocities[-1]
    v1 = rhs(t + h, x_try)
    lo, hi = 0.0, h

    def event_on_dense(dt):
        th = dt / h
        h00 = th * th * (2.0 * th - 3.0) + 1.0
        h10 = th * (th * (th - 2.0) + 1.0)
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        xd = h00 * x + h10 * h * v0 + h01 * x_try + h11 * h * v1
        return t_stop_fn(t + dt, xd)

    if event_on_dense(0.0) >= 0.0:
        h_star = 0.0
    else:
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if event_on_dense(mid) >= 0.0:
                hi = mid
            else:
                lo = mid
        h_star = hi

    for _ in range(4):  # polish: land the actual step on the event root
        if h_star <= 1.0e-13 * (1.0 + abs(t)):
            break
        x_end = step(t, x, h_star)
        e = t_stop_fn(t + h_star, x_end)
        slope = 1.0 - rhs(t + h_star, x_end)
        h_star -= e / slope
        h_star = min(max(h_star, 0.0), h)
    if h_star > 1.0e-13 * (1.0 + abs(t)):
        x_end = step(t, x, h_star)
        t_end = t + h_star
        times.append(t_end)
        positions.append(x_end)
        velocities.append(rhs(t_end, x_end))
    return np.array(times), np.array(positions), np.array(velocities)


def extend_a(strips: StripPair, kappa_b, step) -> Trajectory:
    """Extend the upper strip over one leg, [T1+, t1+(T2+)].

    Integrates adot = f(g(t, a)) with the classical fourth-order one-step
    method and terminates exactly where the backward light cone of the new
    point touches the end of the lower strip.
    """
    a, b = strips.a_strip, strips.b_strip
    t2p = b.t_max
    b_end = float(b.positions[-1])

    def rhs(t, x):
        return _leg_velocity(g_field(t, x, strips, kappa_b), mirror=False)

    def stop(t, x):
        return (t - t2p) - (x - b_end)

    t0 = a.t_max
    x0 = float(a.positions[-1])
    times, pos, vel = _rk4_leg(t0, x0, stop, rhs, step)
    if times.size < 2:
        raise ReconstructionError("upper leg collapsed to a point")
    return Trajectory(times, pos, vel, "a")


def extend_b(strips: StripPair, kappa_a, step) -> Trajectory:
    """Extend the lower strip over one leg, [T2+, t2+(T1+)].

    Mirror of :func:`extend_a`: integrates bdot = -f(g~(t, b)) where g~
    solves the upper charge's equation for its advanced term.
    """
    a, b = strips.a_strip, strips.b_strip
    t1p = a.t_max
    a_end = float(a.positions[-1])

    def rhs(t, y):
        return _leg_velocity(_g_field_mirror(t, y, strips, kappa_a), mirror=True)

    def stop(t, y):
        return (t - t1p) - (a_end - y)

    t0 = b.t_max
    y0 = float(b.positions[-1])
    times, pos, vel = _rk4_leg(t0, y0, stop, rhs, step)
    if times.size < 2:
        raise ReconstructionError("lower leg collapsed to a point")
    return Trajectory(times, pos, vel, "b")


def _append_leg(base: Trajectory, leg: Trajectory) -> Trajectory:
    # joint node keeps the earlier leg's velocity (one-sided derivatives)
    return Trajectory(np.concatenate((base.grid, leg.grid[1:])),
                      np.concatenate((base.positions, leg.positions[1:])),
                      np.concatenate((base.velocities, leg.velocities[1:])),
                      base.label)


def reconstruct(strips: StripPair, kappa_a, kappa_b, horizon,
                direction="future", step=1.0e-3, max_legs=None) -> TrajectoryPair:
    """Alternate legs until both strips cover the horizon.

    ``horizon`` is the extension (in time) demanded beyond each strip's
    end; ``max_legs`` optionally caps the number of legs instead.  The
    past direction time-reflects the strips, runs the future construction
    and reflects back, which is the retarded-term rearrangement of the
    equations.  Any leg failure re-raises with the partial result attached.
    """
    if direction not in ("future", "past"):
        raise ValueError("direction must be 'future' or 'past'")
    if direction == "past":
        mirrored = reconstruct(strips.reflected(), kappa_a, kappa_b, horizon,
                               "future", step, max_legs)
        return reflect_pair(mirrored)
    if strips.threading != "future":
        raise ConstructionError("future reconstruction needs future-threaded strips")

    a, b = strips.a_strip, strips.b_strip
    target_a = a.t_max + horizon
    target_b = b.t_max + horizon
    legs_done = 0
    current = strips
    while True:
        if max_legs is not None and legs_done >= max_legs:
            break
        if current.a_strip.t_max >= target_a and current.b_strip.t_max >= target_b:
            break
        extend_upper = legs_done % 2 == 0
        try:
            if extend_upper:
                leg = extend_a(current, kappa_b, step)
                current = StripPair(_append_leg(current.a_strip, leg),
                                    current.b_strip, threading=None)
            else:
                leg = extend_b(current, kappa_a, step)
                current = StripPair(current.a_strip,
                                    _append_leg(current.b_strip, leg), threading=None)
        except ReconstructionError as exc:
            exc.partial = TrajectoryPair(current.a_strip, current.b_strip)
            exc.leg = (legs_done + 1, "a" if extend_upper else "b")
            raise
        legs_done += 1
    return TrajectoryPair(current.a_strip, current.b_strip)


def _cut_with_exact_ends(traj: Trajectory, t_lo, t_hi, label) -> Trajectory:
    gap = 1.0e-9 * (1.0 + abs(t_lo) + abs(t_hi))
    inner = traj.grid[(traj.grid > t_lo + gap) & (traj.grid < t_hi - gap)]
    grid = np.concatenate(([t_lo], inner, [t_hi]))
    pos, vel, _ = traj.eval(grid)
    return Trajectory(grid, pos, vel, label)


def cut_strips(pair: TrajectoryPair, anchor_time, direction="future") -> StripPair:
    """Cut light-cone threaded strips out of a solution pair.

    For the future direction ``anchor_time`` becomes T1+ (the upper strip's
    end); for the past direction it becomes T1- (the upper strip's start).
    """
    a, b = pair.upper, pair.lower
    if direction == "future":
        t1p = float(anchor_time)
        t2p = delay_time(b, a.position(t1p), t1p, "advanced")
        t2m = delay_time(b, a.position(t1p), t1p, "retarded")
        t1m = delay_time(a, b.position(t2m), t2m, "retarded")
        return StripPair(_cut_with_exact_ends(a, t1m, t1p, "a"),
                         _cut_with_exact_ends(b, t2m, t2p, "b"), "future")
    if direction == "past":
        t1m = float(anchor_time)
        t2p = delay_time(b, a.position(t1m), t1m, "advanced")
        t2m = delay_time(b, a.position(t1m), t1m, "retarded")
        t1p = delay_time(a, b.position(t2p), t2p, "advanced")
        return StripPair(_cut_with_exact_ends(a, t1m, t1p, "a"),
                         _cut_with_exact_ends(b, t2m, t2p, "b"), "past")
    raise ValueError("direction must be 'future' or 'past'")
