"""Homotopy fixed-point solver for the delay equations of motion.

The solver iterates an integral map on trajectory pairs.  Given a pair
(X, Y), the map evaluates the force along the pair, accumulates it into a
momentum profile

    P(lambda, t) = (1 - lambda) * p(v_ref(t)) + lambda * p(v_data)
                   + lambda * integral of force from the anchor to t,

maps momenta to velocities (automatically subluminal) and integrates the
velocities to positions anchored at the initial data.  At lambda = 1 a
fixed point of the map solves the equations of motion with the prescribed
data; at lambda = 0 the map returns the reference pair.  Solutions are
found by damped Picard iteration with lambda continuation.

Two data layouts are supported.  Half-line data (position and velocity of
the upper charge plus a light-cone-compatible strip of the lower charge)
solves the upper charge on [0, t_max] and the lower charge on
[T+, t_max], keeping the strip verbatim.  Newtonian Cauchy data solves
both charges on a window around t = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .errors import AdmissibilityError, ConstructionError, SuperluminalError
from .forces import force_on_a, force_on_b
from .kinematics import (ModelSpec, Trajectory, TrajectoryPair, momentum,
                         pair_increment_norm, velocity_from_momentum)
from .lightcone import delay_time

__all__ = [
    "CauchyData",
    "FstHalfLine",
    "InitialData",
    "ReferencePair",
    "SolverConfig",
    "SolveReport",
    "build_reference",
    "check_reference",
    "apply_H",
    "solve",
    "residual",
    "make_half_line_data",
]

log = logging.getLogger("fstline")

_LIGHTCONE_TOL = 1.0e-10


@dataclass(frozen=True)
class CauchyData:
    """Positions and velocities of both charges at t = 0."""

    a0: float
    a0_dot: float
    b0: float
    b0_dot: float

    def __post_init__(self):
        if not self.a0 > self.b0:
            raise ConstructionError("Cauchy data requires a0 > b0")
        if abs(self.a0_dot) >= 1.0 or abs(self.b0_dot) >= 1.0:
            raise ConstructionError("Cauchy velocities must satisfy |v| < 1")

    @property
    def velocity_bound(self):
        return max(abs(self.a0_dot), abs(self.b0_dot))


@dataclass(frozen=True)
class FstHalfLine:
    """Half-line data: point data for charge a plus a strip of charge b.

    The strip must live on [T-, T+] with T+- = +-(a0 - b_strip(T+-)), the
    intersection times of the light cone through (0, a0) with the strip.
    """

    a0: float
    a0_dot: float
    b_strip: Trajectory

    def __post_init__(self):
        if abs(self.a0_dot) >= 1.0:
            raise ConstructionError("initial velocity must satisfy |v| < 1")
        strip = self.b_strip
        if strip.velocity_sup() >= 1.0:
            raise ConstructionError("strip interpolant reaches |v| >= 1")
        if float(np.max(strip.positions)) >= self.a0:
            raise ConstructionError("strip must stay strictly below a0")
        t_minus, t_plus = strip.t_min, strip.t_max
        for t_end, sgn in ((t_minus, -1.0), (t_plus, 1.0)):
            defect = abs(t_end - sgn * (self.a0 - strip.position(t_end)))
            if defect > _LIGHTCONE_TOL * (1.0 + abs(t_end)):
                raise ConstructionError(
                    f"strip end {t_end:g} violates the light-cone condition "
                    f"T = {sgn:+.0f}(a0 - b(T)) by {defect:.3e}")

    @property
    def t_minus(self):
        return self.b_strip.t_min

    @property
    def t_plus(self):
        return self.b_strip.t_max

    @property
    def velocity_bound(self):
        return max(abs(self.a0_dot), self.b_strip.velocity_sup())


InitialData = CauchyData | FstHalfLine


def make_half_line_data(a0, a0_dot, b_curve: Trajectory, grid_step=None) -> FstHalfLine:
    """Cut a light-cone-compatible strip out of a longer lower-charge curve.

    T+- are found by solving the light-cone equations from (0, a0) into
    ``b_curve``; the strip is resampled at ``grid_step`` if given, else the
    curve's own nodes (plus exact endpoints) are kept.
    """
    t_plus = delay_time(b_curve, a0, 0.0, "advanced")
    t_minus = delay_time(b_curve, a0, 0.0, "retarded")
    if grid_step is not None:
        n = max(2, int(math.ceil((t_plus - t_minus) / grid_step)))
        grid = np.linspace(t_minus, t_plus, n + 1)
    else:
        inner = b_curve.grid[(b_curve.grid > t_minus) & (b_curve.grid < t_plus)]
        grid = np.concatenate(([t_minus], inner, [t_plus]))
    pos, vel, _ = b_curve.eval(grid)
    return FstHalfLine(a0, a0_dot, Trajectory(grid, pos, vel, "b"))


# -- reference pairs -----------------------------------------------------


def _smoothstep(theta):
    """Quintic smoothstep: C^2 ramp from 0 at 0 to 1 at 1 with flat ends."""
    th = np.clip(theta, 0.0, 1.0)
    return th ** 3 * (10.0 + th * (6.0 * th - 15.0))


def _smoothstep_rate(theta):
    th = np.clip(theta, 0.0, 1.0)
    return 30.0 * th ** 2 * (1.0 - th) ** 2


@dataclass(frozen=True)
class ReferencePair:
    """Explicit scattering pair that carries the initial data.

    x0 accelerates (weakly) upward to +outgoing_speed by ``switch_time``
    and moves freely afterwards; y0 mirrors downward.  Positions are
    accumulated from the sampled velocities with the trapezoid rule, so the
    homotopy at lambda = 0 reproduces the pair on the grid exactly.
    """

    x0: Trajectory
    y0: Trajectory
    switch_time: float
    outgoing_speed: float

    def as_pair(self):
        return TrajectoryPair(self.x0, self.y0)


def _ramp_velocity(t, t_start, t_end, v_start, v_end):
    theta = (np.asarray(t, dtype=float) - t_start) / (t_end - t_start)
    return v_start + (v_end - v_start) * _smoothstep(theta)


def build_reference(data: InitialData, outgoing_speed, window=None, grid_step=0.01):
    """Construct the reference pair for the homotopy.

    For Cauchy data the velocities ramp from -+outgoing_speed at t = -1
    through the data at t = 0 to +-outgoing_speed at t = +1 (switch time
    1).  For half-line data x0 ramps from the initial velocity on
    [0, T+ + 1] and y0 continues the strip downward on [T+, T+ + 1]
    (switch time T+ + 1).  Raises ConstructionError when the requested
    outgoing speed cannot bend the data apart.
    """
    u = float(outgoing_speed)
    if not 0.0 < u < 1.0:
        raise ConstructionError("outgoing_speed must lie in (0, 1)")

    if isinstance(data, CauchyData):
        switch = 1.0
        if u <= abs(data.a0_dot) or u <= abs(data.b0_dot):
            raise ConstructionError(
                "outgoing_speed must exceed the data velocities; "
                "choose a larger outgoing_speed")
        if window is None:
            window = (-switch - 1.0, switch + 1.0)
        grid = _cauchy_grid(window, grid_step)
        up = _smoothstep(grid / switch)      # vanishes for t <= 0
        down = _smoothstep(-grid / switch)   # vanishes for t >= 0
        vx = data.a0_dot + (u - data.a0_dot) * up - (data.a0_dot + u) * down
        vy = data.b0_dot - (data.b0_dot + u) * up + (u - data.b0_dot) * down
        i0 = int(np.searchsorted(grid, 0.0))
        x_pos = data.a0 + _anchored_trapezoid(vx, grid, i0)
        y_pos = data.b0 + _anchored_trapezoid(vy, grid, i0)
        x0 = Trajectory(grid, x_pos, vx, "a")
        y0 = Trajectory(grid, y_pos, vy, "b")
    else:
        t_plus = data.t_plus
        switch = t_plus + 1.0
        b_dot_end = float(data.b_strip.velocities[-1])
        if u < data.a0_dot:
            raise ConstructionError(
                "outgoing_speed below the initial velocity of charge a; "
                "choose a larger outgoing_speed")
        if -u > b_dot_end:
            raise ConstructionError(
                "outgoing_speed would force the strip velocity upward; "
                "choose a larger outgoing_speed")
        if window is None:
            window = (0.0, switch + 1.0)
        t_max = window[1]
        if t_max <= switch:
            raise ConstructionError("window must extend beyond the switch time")
        ga = _uniform_grid(0.0, t_max, grid_step)
        vx = _ramp_velocity(ga, 0.0, switch, data.a0_dot, u)
        x_pos = data.a0 + _anchored_trapezoid(vx, ga, 0)
        x0 = Trajectory(ga, x_pos, vx, "a")

        strip = data.b_strip
        gb_tail = _uniform_grid(t_plus, t_max, grid_step)[1:]
        vy_tail = _ramp_velocity(gb_tail, t_plus, switch, b_dot_end, -u)
        grid_b = np.concatenate((strip.grid, gb_tail))
        vy = np.concatenate((strip.velocities, vy_tail))
        y_tail = strip.positions[-1] + _anchored_trapezoid(
            np.concatenate(([b_dot_end], vy_tail)),
            np.concatenate(([t_plus], gb_tail)), 0)[1:]
        y_pos = np.concatenate((strip.positions, y_tail))
        y0 = Trajectory(grid_b, y_pos, vy, "b")

    ref = ReferencePair(x0, y0, switch, u)
    sep_floor = _reference_min_separation(ref, data)
    if sep_floor <= 0.0:
        raise ConstructionError(
            f"reference trajectories cross (min separation {sep_floor:.3e}); "
            "choose a larger outgoing_speed")
    return ref


def _reference_min_separation(ref: ReferencePair, data):
    t_lo = 0.0 if isinstance(data, FstHalfLine) else ref.x0.t_min
    t = np.union1d(ref.x0.dense_times(), ref.y0.dense_times())
    t = t[t >= t_lo]
    return float(np.min(ref.x0.position(t) - ref.y0.position(t)))


def check_reference(ref: ReferencePair, data=None, samples_per_cell=8, slack=1.0e-8):
    """Margins of the five reference-pair conditions, by dense sampling.

    Returns a dict of condition -> margin; all must be positive.  ``slack``
    absorbs the interpolation noise of the sampled acceleration (the
    analytic profiles satisfy the sign conditions exactly, the Hermite
    second derivative only up to a small grid-scale error).
    """
    x0, y0 = ref.x0, ref.y0
    half_line = isinstance(data, FstHalfLine)
    sw = ref.switch_time

    tx = x0.dense_times(samples_per_cell)
    if half_line:
        tx = tx[tx >= 0.0]
    _, _, ax = x0.eval(tx)
    ty = y0.dense_times(samples_per_cell)
    # the lower acceleration condition holds beyond T+ (strip is free data)
    ty_acc = ty[ty > sw - 1.0] if half_line else ty
    ay = y0.acceleration(ty_acc)

    t_sep = np.union1d(tx, ty)
    if half_line:
        t_sep = t_sep[t_sep >= 0.0]
    sep = x0.position(t_sep) - y0.position(t_sep)

    beyond_x = tx[tx >= sw]
    beyond_y = ty[ty >= sw]
    support = 0.0
    if beyond_x.size:
        support = max(support, float(np.max(np.abs(x0.acceleration(beyond_x)))))
    if beyond_y.size:
        support = max(support, float(np.max(np.abs(y0.acceleration(beyond_y)))))

    return {
        "subluminal": 1.0 - max(x0.velocity_sup(), y0.velocity_sup()),
        "separation": float(np.min(sep)),
        "gap_rate_at_switch": float(x0.velocity(sw) - y0.velocity(sw)),
        "accel_signs": float(min(np.min(ax), np.min(-ay)) + slack),
        "accel_support": float(slack - support),
    }


# -- solver configuration ------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """Grid, window, damping and tolerance knobs for the fixed-point solve."""

    window: tuple[float, float]
    grid_step: float = 0.01
    damping: float = 0.5
    lambda_schedule: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    max_iterations: int = 200
    tolerance: float = 1.0e-8
    boundary_buffer: float | None = None
    quadrature: str = "trapezoid"
    outgoing_speed: float | None = None
    acceleration: str = "picard"

    def __post_init__(self):
        t_min, t_max = self.window
        if not t_min < t_max:
            raise ConstructionError("window must satisfy t_min < t_max")
        if self.grid_step <= 0.0 or self.tolerance <= 0.0:
            raise ConstructionError("grid_step and tolerance must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ConstructionError("damping must lie in (0, 1]")
        sched = tuple(float(l) for l in self.lambda_schedule)
        if not sched or any(l2 < l1 for l1, l2 in zip(sched, sched[1:])):
            raise ConstructionError("lambda schedule must be nondecreasing")
        if sched[-1] != 1.0:
            raise ConstructionError("lambda schedule must end at 1")
        object.__setattr__(self, "lambda_schedule", sched)
        if self.quadrature not in ("trapezoid", "simpson"):
            raise ConstructionError("quadrature must be 'trapezoid' or 'simpson'")
        if self.acceleration not in ("picard", "anderson"):
            raise ConstructionError("acceleration must be 'picard' or 'anderson'")
        if self.max_iterations < 1:
            raise ConstructionError("max_iterations must be >= 1")


@dataclass
class SolveReport:
    """Outcome of a fixed-point solve."""

    converged: bool
    iterations: int
    per_stage_iterations: list[int]
    final_increment: float
    interior_residual: float
    residual_time: float
    bound_summary: dict | None = None

    def to_dict(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "per_stage_iterations": list(self.per_stage_iterations),
            "final_increment": self.final_increment,
            "interior_residual": self.interior_residual,
            "residual_time": self.residual_time,
            "bound_summary": self.bound_summary,
        }


# -- grids and quadrature ------------------------------------------------


def _uniform_grid(t_start, t_end, h):
    n = int(math.ceil((t_end - t_start) / h - 1.0e-9))
    return t_start + h * np.arange(n + 1)


def _cauchy_grid(window, h):
    t_min, t_max = window
    if not (t_min < 0.0 < t_max):
        raise ConstructionError("Cauchy window must contain t = 0")
    n_neg = int(round(-t_min / h))
    n_pos = int(round(t_max / h))
    if n_neg < 1 or n_pos < 1:
        raise ConstructionError("window too small for the grid step")
    return h * np.arange(-n_neg, n_pos + 1)


def _anchored_trapezoid(y, x, i0):
    c = cumulative_trapezoid(y, x=x, initial=0.0)
    return c - c[i0]


def _anchored_integral(y, x, i0, scheme):
    if scheme == "simpson" and y.size >= 3:
        c = cumulative_simpson(y, x=x, initial=0.0)
    else:
        c = cumulative_trapezoid(y, x=x, initial=0.0)
    return c - c[i0]


# -- the homotopy map ----------------------------------------------------


def _half_line_split(pair: TrajectoryPair, data: FstHalfLine):
    """Index of T+ in the lower grid (end of the verbatim strip)."""
    gb = pair.lower.grid
    i = int(np.searchsorted(gb, data.t_plus - 1.0e-12))
    if not math.isclose(gb[i], data.t_plus, rel_tol=0.0, abs_tol=1.0e-9):
        raise ConstructionError("lower grid does not contain the strip end T+")
    return i


def apply_H(lam, pair: TrajectoryPair, model: ModelSpec, data: InitialData,
            ref: ReferencePair, config: SolverConfig) -> TrajectoryPair:
    """One application of the homotopy map at parameter ``lam``.

    The input pair, the reference and the output all live on the same
    grids.  Output velocities are subluminal by construction.
    """
    lam = float(lam)
    ga = pair.upper.grid
    if ga.shape != ref.x0.grid.shape or np.any(ga != ref.x0.grid):
        raise ConstructionError("pair and reference grids differ (upper)")
    if pair.lower.grid.shape != ref.y0.grid.shape or np.any(pair.lower.grid != ref.y0.grid):
        raise ConstructionError("pair and reference grids differ (lower)")

    scheme = config.quadrature
    if isinstance(data, FstHalfLine):
        i_plus = _half_line_split(pair, data)
        ia0 = 0
        upper = _map_component(
            lam, ga, ia0, force_on_a(pair, model, ga),
            ref.x0.velocities, data.a0_dot, data.a0, scheme, "a")

        gb = pair.lower.grid
        gbs = gb[i_plus:]
        strip = data.b_strip
        lower_tail = _map_component(
            lam, gbs, 0, force_on_b(pair, model, gbs),
            ref.y0.velocities[i_plus:], float(strip.velocities[-1]),
            float(strip.positions[-1]), scheme, "b")
        lower = Trajectory(
            gb,
            np.concatenate((strip.positions, lower_tail.positions[1:])),
            np.concatenate((strip.velocities, lower_tail.velocities[1:])),
            "b")
    else:
        i0 = int(np.searchsorted(ga, 0.0))
        upper = _map_component(
            lam, ga, i0, force_on_a(pair, model, ga),
            ref.x0.velocities, data.a0_dot, data.a0, scheme, "a")
        lower = _map_component(
            lam, pair.lower.grid, i0, force_on_b(pair, model, pair.lower.grid),
            ref.y0.velocities, data.b0_dot, data.b0, scheme, "b")
    return TrajectoryPair(upper, lower)


def _map_component(lam, grid, i_anchor, force, ref_velocities, v_data, x_data,
                   scheme, label):
    accumulated = _anchored_integral(force, grid, i_anchor, scheme)
    p = (1.0 - lam) * momentum(ref_velocities) + lam * (momentum(v_data) + accumulated)
    v = velocity_from_momentum(p)
    x = x_data + _anchored_trapezoid(v, grid, i_anchor)
    return Trajectory(grid, x, v, label)


# -- the damped iteration ------------------------------------------------


def _damp(old: TrajectoryPair, new: TrajectoryPair, omega) -> TrajectoryPair:
    if omega == 1.0:
        return new
    w0, w1 = 1.0 - omega, omega

    def mix(a: Trajectory, b: Trajectory):
        return Trajectory(a.grid, w0 * a.positions + w1 * b.positions,
                          w0 * a.velocities + w1 * b.velocities, a.label)

    return TrajectoryPair(mix(old.upper, new.upper), mix(old.lower, new.lower))


def _check_admissible(pair: TrajectoryPair, lam, iteration):
    if pair.upper.velocity_sup() >= 1.0 or pair.lower.velocity_sup() >= 1.0:
        raise AdmissibilityError("iterate reached |v| >= 1",
                                 pair=pair, lam=lam, iteration=iteration)
    t = np.union1d(pair.upper.grid, pair.lower.grid)
    sep = pair.upper.position(t) - pair.lower.position(t)
    if np.min(sep) <= 0.0:
        raise AdmissibilityError(
            f"ordering violated at t = {t[int(np.argmin(sep))]:.6g}",
            pair=pair, lam=lam, iteration=iteration)


class _AndersonMixer:
    """Anderson mixing on the stacked node vectors of an iterate.

    Keeps the last few (iterate, image) pairs and combines the images with
    the affine weights minimizing the combined Picard residual.  Affine
    combinations preserve the anchored nodes up to roundoff; the exact data
    values are re-imposed after each combination.  Falls back to the plain
    damped step (and restarts its history) whenever the extrapolated
    candidate is inadmissible.
    """

    def __init__(self, data, memory=5):
        self.data = data
        self.memory = memory
        self.iterates = []
        self.images = []

    @staticmethod
    def _to_vec(pair):
        return np.concatenate([pair.upper.positions, pair.upper.velocities,
                               pair.lower.positions, pair.lower.velocities])

    def _to_pair(self, z, template):
        ga = template.upper.grid
        gb = template.lower.grid
        na = ga.size
        xa = z[:na].copy()
        va = z[na:2 * na].copy()
        xb = z[2 * na:2 * na + gb.size].copy()
        vb = z[2 * na + gb.size:].copy()
        # affine mixing keeps the anchored data only to roundoff; snap it back
        if isinstance(self.data, FstHalfLine):
            strip = self.data.b_strip
            n_strip = strip.grid.size
            xb[:n_strip] = strip.positions
            vb[:n_strip] = strip.velocities
            xa[0], va[0] = self.data.a0, self.data.a0_dot
        else:
            i0 = int(np.searchsorted(ga, 0.0))
            xa[i0], va[i0] = self.data.a0, self.data.a0_dot
            xb[i0], vb[i0] = self.data.b0, self.data.b0_dot
        return TrajectoryPair(Trajectory(ga, xa, va, "a"),
                              Trajectory(gb, xb, vb, "b"))

    def propose(self, pair, image, omega):
        self.iterates.append(self._to_vec(pair))
        self.images.append(self._to_vec(image))
        if len(self.iterates) > self.memory + 1:
            self.iterates.pop(0)
            self.images.pop(0)
        n = len(self.iterates)
        if n == 1:
            return _damp(pair, image, omega)
        residuals = np.stack([g - z for z, g in zip(self.iterates, self.images)],
                             axis=1)
        system = np.zeros((n + 1, n + 1))
        system[:n, :n] = residuals.T @ residuals
        system[:n, n] = 1.0
        system[n, :n] = 1.0
        rhs = np.zeros(n + 1)
        rhs[n] = 1.0
        try:
            alpha = np.linalg.solve(system, rhs)[:n]
            combined = np.stack(self.images, axis=1) @ alpha
            if not np.all(np.isfinite(combined)):
                raise FloatingPointError("non-finite Anderson combination")
            return self._to_pair(combined, pair)
        except (np.linalg.LinAlgError, FloatingPointError, ConstructionError,
                SuperluminalError):
            self.restart()
            return _damp(pair, image, omega)

    def restart(self):
        self.iterates.clear()
        self.images.clear()


def solve(data: InitialData, model: ModelSpec, config: SolverConfig,
          compute_bounds=True):
    """Damped Picard iteration with lambda continuation.

    Returns (pair, report).  Non-convergence is reported, not raised; loss
    of admissibility raises AdmissibilityError carrying the bad iterate.
    With ``config.acceleration == 'anderson'`` the damped steps are replaced
    by Anderson-mixed ones (same fixed points, far fewer iterations).
    """
    u = config.outgoing_speed
    if u is None:
        u = max(0.5, 0.5 * (1.0 + data.velocity_bound))
    ref = build_reference(data, u, window=config.window, grid_step=config.grid_step)
    pair = ref.as_pair()

    omega = config.damping
    total = 0
    per_stage = []
    increment = math.inf
    converged = False
    for lam in config.lambda_schedule:
        stage_iters = 0
        converged = False
        mixer = _AndersonMixer(data) if config.acceleration == "anderson" else None
        for k in range(config.max_iterations):
            image = apply_H(lam, pair, model, data, ref, config)
            if mixer is None:
                new_pair = _damp(pair, image, omega)
            else:
                new_pair = mixer.propose(pair, image, omega)
                try:
                    _check_admissible(new_pair, lam, total)
                except AdmissibilityError:
                    mixer.restart()
                    new_pair = _damp(pair, image, omega)
            _check_admissible(new_pair, lam, total)
            increment = pair_increment_norm(new_pair, pair)
            pair = new_pair
            stage_iters += 1
            total += 1
            if increment < config.tolerance:
                converged = True
                break
        per_stage.append(stage_iters)
        log.debug("lambda=%.3g: %d iterations, increment %.3e", lam, stage_iters, increment)
        if not converged:
            break

    res, res_t = _interior_residual(pair, model, config, data)
    report = SolveReport(converged=converged, iterations=total,
                         per_stage_iterations=per_stage,
                         final_increment=float(increment),
                         interior_residual=res, residual_time=res_t)
    if compute_bounds and converged:
        from . import diagnostics
        try:
            bounds = diagnostics.fit_bounds(pair, model, data, config.window)
            report.bound_summary = diagnostics.check_bounds(
                pair, bounds, config.window).to_dict()
        except Exception as exc:  # diagnostics must not mask the solution
            log.warning("bound check failed: %s", exc)
            report.bound_summary = {"error": str(exc)}
    return pair, report


# -- residual ------------------------------------------------------------


def _auto_buffer(pair: TrajectoryPair, config: SolverConfig):
    """Default exclusion width: twice the largest plausible delay span.

    The span is estimated from the sandwich bound as max separation over
    (1 - sup velocity), and capped at a quarter of the window so the
    default never empties the assessed interior.
    """
    t = np.union1d(pair.upper.grid, pair.lower.grid)
    sep_max = float(np.max(pair.upper.position(t) - pair.lower.position(t)))
    v = max(pair.upper.velocity_sup(), pair.lower.velocity_sup())
    span = sep_max / max(1.0 - v, 1.0e-6)
    t_min, t_max = config.window
    return min(2.0 * span, 0.25 * (t_max - t_min))


def _traj_residual(traj: Trajectory, force_values_fn, t_lo, t_hi):
    g = traj.grid
    p = momentum(traj.velocities)
    mids = g[1:-1]
    mask = (mids >= t_lo) & (mids <= t_hi)
    if not np.any(mask):
        return 0.0, math.nan
    dp = (p[2:] - p[:-2]) / (g[2:] - g[:-2])
    t_sel = mids[mask]
    defect = np.abs(dp[mask] - force_values_fn(t_sel))
    i = int(np.argmax(defect))
    return float(defect[i]), float(t_sel[i])


def residual(pair: TrajectoryPair, model: ModelSpec, config: SolverConfig,
             a_range=None, b_range=None):
    """Maximum defect of the equations of motion over interior grid nodes.

    The momentum rate is a centered finite difference of the node momentum
    sequence (independent of the interpolant's own acceleration) and is
    compared against the force along the pair.  Nodes outside
    ``a_range``/``b_range`` are ignored; by default both window ends are
    trimmed by the boundary buffer.
    """
    value, _ = _residual_located(pair, model, config, a_range, b_range)
    return value


def _residual_located(pair, model, config, a_range=None, b_range=None):
    buf = config.boundary_buffer
    if buf is None:
        buf = _auto_buffer(pair, config)
    t_min, t_max = config.window
    if a_range is None:
        a_range = (t_min + buf, t_max - buf)
    if b_range is None:
        b_range = (t_min + buf, t_max - buf)
    ra, ta = _traj_residual(pair.upper, lambda t: force_on_a(pair, model, t), *a_range)
    rb, tb = _traj_residual(pair.lower, lambda t: force_on_b(pair, model, t), *b_range)
    return (ra, ta) if ra >= rb else (rb, tb)


def _interior_residual(pair, model, config, data):
    if isinstance(data, FstHalfLine):
        buf = config.boundary_buffer
        if buf is None:
            buf = _auto_buffer(pair, config)
        t_end = config.window[1] - buf
        a_range = (0.0, t_end)
        b_range = (np.nextafter(data.t_plus, math.inf), t_end)
        return _residual_located(pair, model, config, a_range, b_range)
    return _residual_located(pair, model, config)
