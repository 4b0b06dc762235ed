"""Trajectories of point charges on a line and the scalar relativistic maps.

A trajectory is a sampled world line: strictly increasing time nodes with a
position and a velocity at each node.  Between nodes the position is the
cubic Hermite interpolant of the (position, velocity) data; outside the
sampled window the charge moves freely (straight line, zero acceleration)
with the boundary node's position and velocity.  Units have c = 1, so
positions and times share one unit and velocities are dimensionless with
|v| < 1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, SuperluminalError

__all__ = [
    "Trajectory",
    "TrajectoryPair",
    "ModelSpec",
    "momentum",
    "velocity_from_momentum",
    "rho",
    "sigma",
    "pair_norm",
    "pair_increment_norm",
    "time_reflect",
    "reflect_pair",
    "trajectory_to_csv",
    "trajectory_from_csv",
    "pair_to_json",
    "pair_from_json",
]


def momentum(v):
    """Relativistic momentum per unit mass, v / sqrt(1 - v**2).

    Strictly increasing and odd.  Raises SuperluminalError for |v| >= 1.
    """
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= 1.0):
        raise SuperluminalError("momentum requires |v| < 1")
    out = v / np.sqrt(1.0 - v * v)
    return float(out) if out.ndim == 0 else out


def velocity_from_momentum(p):
    """Inverse of :func:`momentum`: p / sqrt(1 + p**2), always in (-1, 1)."""
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("velocity_from_momentum requires finite momentum")
    out = p / np.sqrt(1.0 + p * p)
    return float(out) if out.ndim == 0 else out


def rho(v):
    """Doppler factor (1 + v) / (1 - v) weighting retarded Coulomb terms."""
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= 1.0):
        raise SuperluminalError("rho requires |v| < 1")
    out = (1.0 + v) / (1.0 - v)
    return float(out) if out.ndim == 0 else out


def sigma(v):
    """Doppler factor (1 - v) / (1 + v); sigma(v) * rho(v) == 1."""
    v = np.asarray(v, dtype=float)
    if np.any(np.abs(v) >= 1.0):
        raise SuperluminalError("sigma requires |v| < 1")
    out = (1.0 - v) / (1.0 + v)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Trajectory:
    """A sampled world line with Hermite interpolation and free extension.

    Parameters
    ----------
    grid : array
        Strictly increasing sample times, at least two of them.
    positions, velocities : array
        Position and velocity at each node; |velocity| < 1 at the nodes.
    label : str
        Which charge the trajectory belongs to ("a" or "b").
    """

    grid: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    label: str = "a"
    _velocity_sup: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        grid = np.array(self.grid, dtype=float, order="C")
        pos = np.array(self.positions, dtype=float, order="C")
        vel = np.array(self.velocities, dtype=float, order="C")
        if grid.ndim != 1 or grid.size < 2:
            raise ConstructionError("trajectory needs at least 2 grid nodes")
        if pos.shape != grid.shape or vel.shape != grid.shape:
            raise ConstructionError("grid, positions and velocities must have equal length")
        if not np.all(np.isfinite(grid)) or not np.all(np.isfinite(pos)) or not np.all(np.isfinite(vel)):
            raise ConstructionError("trajectory data must be finite")
        if np.any(np.diff(grid) <= 0.0):
            raise ConstructionError("trajectory grid must be strictly increasing")
        if np.any(np.abs(vel) >= 1.0):
            raise SuperluminalError("node velocities must satisfy |v| < 1")
        for name, arr in (("grid", grid), ("positions", pos), ("velocities", vel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_velocity_sup", self._exact_velocity_sup())

    # -- interpolation ---------------------------------------------------

    def _cells(self, t):
        """Cell index for each query time, clipped to the grid."""
        idx = np.searchsorted(self.grid, t, side="right") - 1
        return np.clip(idx, 0, self.grid.size - 2)

    def eval(self, t):
        """Position, velocity and acceleration at time(s) ``t``.

        Inside the grid this is the cubic Hermite interpolant of the node
        data and its first two derivatives; outside it is free motion with
        the boundary node's state and exactly zero acceleration.
        """
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        g, x, v = self.grid, self.positions, self.velocities

        i = self._cells(t)
        dt = g[i + 1] - g[i]
        th = (t - g[i]) / dt
        x0, x1 = x[i], x[i + 1]
        v0, v1 = v[i], v[i + 1]

        h00 = th * th * (2.0 * th - 3.0) + 1.0
        h10 = th * (th * (th - 2.0) + 1.0)
        h01 = th * th * (3.0 - 2.0 * th)
        h11 = th * th * (th - 1.0)
        pos = h00 * x0 + h10 * dt * v0 + h01 * x1 + h11 * dt * v1

        d = (x0 - x1) / dt
        vel = (6.0 * th * (th - 1.0)) * d + (th * (3.0 * th - 4.0) + 1.0) * v0 + th * (3.0 * th - 2.0) * v1
        acc = ((12.0 * th - 6.0) * d + (6.0 * th - 4.0) * v0 + (6.0 * th - 2.0) * v1) / dt

        lo = t < g[0]
        hi = t > g[-1]
        if np.any(lo):
            pos[lo] = x[0] + v[0] * (t[lo] - g[0])
            vel[lo] = v[0]
            acc[lo] = 0.0
        if np.any(hi):
            pos[hi] = x[-1] + v[-1] * (t[hi] - g[-1])
            vel[hi] = v[-1]
            acc[hi] = 0.0

        if scalar:
            return float(pos[0]), float(vel[0]), float(acc[0])
        return pos, vel, acc

    def position(self, t):
        return self.eval(t)[0]

    def velocity(self, t):
        return self.eval(t)[1]

    def acceleration(self, t):
        return self.eval(t)[2]

    # -- derived quantities ----------------------------------------------

    def _exact_velocity_sup(self):
        """Exact supremum of |interpolated velocity| over all of time.

        Per cell the velocity is a quadratic in the cell coordinate, so the
        supremum is attained at a cell endpoint or the quadratic's vertex.
        The free extension contributes only the boundary node velocities.
        """
        g, x, v = self.grid, self.positions, self.velocities
        dt = np.diff(g)
        d = (x[:-1] - x[1:]) / dt
        v0, v1 = v[:-1], v[1:]
        # velocity(th) = A th^2 + B th + C on each cell
        A = 6.0 * d + 3.0 * (v0 + v1)
        B = -6.0 * d - 4.0 * v0 - 2.0 * v1
        C = v0
        sup = max(float(np.max(np.abs(v0))), float(np.max(np.abs(v1))))
        with np.errstate(divide="ignore", invalid="ignore"):
            th_star = -B / (2.0 * A)
        inside = np.isfinite(th_star) & (th_star > 0.0) & (th_star < 1.0)
        if np.any(inside):
            ts = th_star[inside]
            vex = A[inside] * ts * ts + B[inside] * ts + C[inside]
            sup = max(sup, float(np.max(np.abs(vex))))
        return sup

    def velocity_sup(self):
        """Supremum of the interpolant's |velocity| (exact, cached)."""
        return self._velocity_sup

    def dense_times(self, samples_per_cell=8):
        """Sample times covering every cell, ``samples_per_cell`` per cell."""
        g = self.grid
        th = np.arange(samples_per_cell) / samples_per_cell
        t = (g[:-1, None] + np.diff(g)[:, None] * th[None, :]).ravel()
        return np.append(t, g[-1])

    @property
    def t_min(self):
        return float(self.grid[0])

    @property
    def t_max(self):
        return float(self.grid[-1])

    def restricted(self, t_lo, t_hi, label=None):
        """Sub-trajectory on the nodes with t_lo <= t <= t_hi."""
        eps = 1e-12 * (1.0 + abs(t_lo) + abs(t_hi))
        m = (self.grid >= t_lo - eps) & (self.grid <= t_hi + eps)
        if np.count_nonzero(m) < 2:
            raise ConstructionError("restriction keeps fewer than 2 nodes")
        return Trajectory(self.grid[m], self.positions[m], self.velocities[m],
                          label or self.label)


def time_reflect(traj: Trajectory) -> Trajectory:
    """The time-reflected trajectory t -> -t (velocities change sign)."""
    return Trajectory(-traj.grid[::-1], traj.positions[::-1],
                      -traj.velocities[::-1], traj.label)


@dataclass(frozen=True)
class TrajectoryPair:
    """An ordered pair of world lines: ``upper`` (charge a) above ``lower`` (b)."""

    upper: Trajectory
    lower: Trajectory

    def separation(self, t):
        """X(t) - Y(t) at time(s) t."""
        return self.upper.position(t) - self.lower.position(t)

    def min_separation(self, samples_per_cell=8):
        """Minimum separation over dense samples of both grids."""
        t = np.union1d(self.upper.dense_times(samples_per_cell),
                       self.lower.dense_times(samples_per_cell))
        return float(np.min(self.separation(t)))

    def validate(self, samples_per_cell=8):
        """Check the ordering and subluminal invariants; raise if violated."""
        from .errors import OrderingError
        if self.upper.velocity_sup() >= 1.0 or self.lower.velocity_sup() >= 1.0:
            raise SuperluminalError("interpolated velocity reaches |v| >= 1")
        if self.min_separation(samples_per_cell) <= 0.0:
            raise OrderingError("upper trajectory does not stay above lower")
        return self


def reflect_pair(pair: TrajectoryPair) -> TrajectoryPair:
    """Time-reflect both members of a pair."""
    return TrajectoryPair(time_reflect(pair.upper), time_reflect(pair.lower))


@dataclass(frozen=True)
class ModelSpec:
    """Which member of the equation family to solve.

    eps_minus and eps_plus weight the retarded and advanced Coulomb terms;
    kappa_a and kappa_b are the couplings e_a*e_b/m_a and e_a*e_b/m_b.
    With ``velocity_factors`` the delayed Doppler factors rho/sigma multiply
    the Coulomb terms; switching them off gives the toy model.
    """

    eps_plus: float
    eps_minus: float
    kappa_a: float
    kappa_b: float
    velocity_factors: bool = True

    def __post_init__(self):
        if not (0.0 <= self.eps_plus <= 1.0 and 0.0 <= self.eps_minus <= 1.0):
            raise ConstructionError("eps weights must lie in [0, 1]")
        if self.eps_plus + self.eps_minus <= 0.0:
            raise ConstructionError("at least one of eps_plus, eps_minus must be positive")
        # kappa = 0 is admitted for the free-motion limit used in testing.
        if self.kappa_a < 0.0 or self.kappa_b < 0.0:
            raise ConstructionError("couplings must be nonnegative")

    @classmethod
    def fst(cls, kappa_a=1.0, kappa_b=1.0):
        """Time-symmetric equations: both delays at weight 1/2, factors on."""
        return cls(0.5, 0.5, kappa_a, kappa_b, True)

    @classmethod
    def synge(cls, kappa_a=1.0, kappa_b=1.0):
        """Purely retarded equations (advanced term switched off)."""
        return cls(0.0, 1.0, kappa_a, kappa_b, True)

    @classmethod
    def toy(cls, kappa_a=1.0, kappa_b=1.0):
        """Time-symmetric structure with the Doppler factors replaced by 1."""
        return cls(0.5, 0.5, kappa_a, kappa_b, False)

    @property
    def family(self):
        if not self.velocity_factors:
            return "toy"
        if self.eps_plus == 0.0:
            return "synge"
        if self.eps_minus == 0.0:
            return "advanced-only"
        return "fst"


# -- trajectory-pair norm ------------------------------------------------


def _dense_vel_acc(traj, samples_per_cell):
    t = traj.dense_times(samples_per_cell)
    _, v, a = traj.eval(t)
    return t, v, a


def pair_norm(pair: TrajectoryPair, reference_time=0.0, samples_per_cell=8):
    """Discrete trajectory-pair norm.

    max(sup|v_upper|, sup|v_lower|, sup w|acc_upper|, sup w|acc_lower|) with
    weight w = 1 + |t - reference_time|, the suprema taken over a dense
    sampling of the grids (``samples_per_cell`` points per cell).  The
    value is an approximation of the continuum norm from below.
    """
    out = 0.0
    for traj in (pair.upper, pair.lower):
        t, v, a = _dense_vel_acc(traj, samples_per_cell)
        w = 1.0 + np.abs(t - reference_time)
        out = max(out, float(np.max(np.abs(v))), float(np.max(w * np.abs(a))))
    return out


def pair_increment_norm(pair_new: TrajectoryPair, pair_old: TrajectoryPair,
                        reference_time=0.0, samples_per_cell=8):
    """pair_norm of the offset pair (new - old).

    Both pairs must share their grids.  The difference of two Hermite
    interpolants on one grid is the interpolant of the differenced node
    data, so the offset norm can be sampled directly.
    """
    out = 0.0
    for new, old in ((pair_new.upper, pair_old.upper), (pair_new.lower, pair_old.lower)):
        if new.grid.shape != old.grid.shape or np.any(new.grid != old.grid):
            raise ValueError("increment norm requires identical grids")
        t, v1, a1 = _dense_vel_acc(new, samples_per_cell)
        _, v0, a0 = _dense_vel_acc(old, samples_per_cell)
        w = 1.0 + np.abs(t - reference_time)
        out = max(out, float(np.max(np.abs(v1 - v0))), float(np.max(w * np.abs(a1 - a0))))
    return out


# -- serialization -------------------------------------------------------

_CSV_HEADER = "t,x,v"


def trajectory_to_csv(traj: Trajectory, path_or_file, include_acceleration=False):
    """Write ``t,x,v`` rows (optionally ``t,x,v,acc``) at 17 significant digits."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        if include_acceleration:
            fh.write(_CSV_HEADER + ",acc\n")
            acc = node_accelerations(traj)
            for t, x, v, a in zip(traj.grid, traj.positions, traj.velocities, acc):
                fh.write(f"{t:.17g},{x:.17g},{v:.17g},{a:.17g}\n")
        else:
            fh.write(_CSV_HEADER + "\n")
            for t, x, v in zip(traj.grid, traj.positions, traj.velocities):
                fh.write(f"{t:.17g},{x:.17g},{v:.17g}\n")
    finally:
        if own:
            fh.close()


def trajectory_from_csv(path_or_file, label="a") -> Trajectory:
    """Read a trajectory written by :func:`trajectory_to_csv` (extra columns ignored)."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        header = fh.readline().strip()
        if not header.startswith(_CSV_HEADER):
            raise ValueError(f"unexpected CSV header {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    finally:
        if own:
            fh.close()
    return Trajectory(data[:, 0], data[:, 1], data[:, 2], label)


def node_accelerations(traj: Trajectory):
    """Interpolant acceleration at the nodes.

    Interior nodes average the one-sided limits of the piecewise-quadratic
    second derivative; the endpoints use their single one-sided value.
    """
    g, x, v = traj.grid, traj.positions, traj.velocities
    dt = np.diff(g)
    d = (x[:-1] - x[1:]) / dt
    # second derivative of the Hermite cubic at the left/right cell ends
    left = (-6.0 * d - 4.0 * v[:-1] - 2.0 * v[1:]) / dt
    right = (6.0 * d + 2.0 * v[:-1] + 4.0 * v[1:]) / dt
    acc = np.empty_like(g)
    acc[0] = left[0]
    acc[-1] = right[-1]
    acc[1:-1] = 0.5 * (right[:-1] + left[1:])
    return acc


def _traj_dict(traj: Trajectory):
    return {
        "label": traj.label,
        "grid": traj.grid.tolist(),
        "positions": traj.positions.tolist(),
        "velocities": traj.velocities.tolist(),
    }


def pair_to_json(pair: TrajectoryPair, path_or_file=None, metadata=None):
    """Serialize a pair (plus optional metadata) to JSON.

    Floats are written with ``repr`` round-trip precision, so loading the
    file reproduces the arrays bit-exactly.  Returns the document dict; if
    ``path_or_file`` is given the JSON is also written there.
    """
    doc = {
        "format": "fstline-trajectory-pair",
        "version": 1,
        "upper": _traj_dict(pair.upper),
        "lower": _traj_dict(pair.lower),
        "metadata": metadata or {},
    }
    if path_or_file is not None:
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
        try:
            json.dump(doc, fh, indent=1)
        finally:
            if own:
                fh.close()
    return doc


def pair_from_json(source) -> tuple[TrajectoryPair, dict]:
    """Inverse of :func:`pair_to_json`; returns (pair, metadata)."""
    if isinstance(source, dict):
        doc = source
    else:
        own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
        fh = open(source, "r", encoding="utf-8") if own else source
        try:
            doc = json.load(fh)
        finally:
            if own:
                fh.close()
    if doc.get("format") != "fstline-trajectory-pair":
        raise ValueError("not a trajectory-pair document")
    def mk(d):
        return Trajectory(np.array(d["grid"]), np.array(d["positions"]),
                          np.array(d["velocities"]), d.get("label", "a"))
    return TrajectoryPair(mk(doc["upper"]), mk(doc["lower"])), doc.get("metadata", {})
