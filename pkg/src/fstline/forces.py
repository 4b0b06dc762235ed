"""Right-hand sides of the equations of motion for all model families.

The momentum rate of the upper charge a at time t is

    kappa_a * [ eps_minus * rho(bdot(t2-)) / (a(t) - b(t2-))**2
              + eps_plus  * sigma(bdot(t2+)) / (a(t) - b(t2+))**2 ]

and the lower charge feels the mirrored expression with an overall minus
sign.  With the velocity factors switched off both Doppler weights are 1
(the toy model).  Delayed velocities are evaluated through the interpolant
at the exact delayed times, never from cached nodes.
"""

from __future__ import annotations

import numpy as np

from .errors import OrderingError
from .kinematics import ModelSpec, TrajectoryPair
from .lightcone import delay_times

__all__ = ["force_on_a", "force_on_b"]


def _coulomb_term(source, observer_x, t, direction, factors, doppler):
    """One delayed Coulomb term: doppler(v_src(s)) / separation(s)**2."""
    s = delay_times(source, observer_x, t, direction)
    pos, vel, _ = source.eval(s)
    sep = np.abs(observer_x - pos)
    if np.any(sep <= 0.0):
        raise OrderingError("separation vanished at a delayed time")
    if factors:
        weight = doppler(vel)
    else:
        weight = 1.0
    return weight / (sep * sep)


def force_on_a(pair: TrajectoryPair, model: ModelSpec, t):
    """Momentum rate of the upper charge; strictly positive (repulsion)."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = pair.upper.position(t)
    out = np.zeros_like(t)
    if model.eps_minus > 0.0:
        out += model.eps_minus * _coulomb_term(
            pair.lower, x, t, "retarded", model.velocity_factors,
            lambda v: (1.0 + v) / (1.0 - v))
    if model.eps_plus > 0.0:
        out += model.eps_plus * _coulomb_term(
            pair.lower, x, t, "advanced", model.velocity_factors,
            lambda v: (1.0 - v) / (1.0 + v))
    out *= model.kappa_a
    return float(out[0]) if scalar else out


def force_on_b(pair: TrajectoryPair, model: ModelSpec, t):
    """Momentum rate of the lower charge; strictly negative (repulsion)."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    y = pair.lower.position(t)
    out = np.zeros_like(t)
    if model.eps_minus > 0.0:
        out += model.eps_minus * _coulomb_term(
            pair.upper, y, t, "retarded", model.velocity_factors,
            lambda v: (1.0 - v) / (1.0 + v))
    if model.eps_plus > 0.0:
        out += model.eps_plus * _coulomb_term(
            pair.upper, y, t, "advanced", model.velocity_factors,
            lambda v: (1.0 + v) / (1.0 - v))
    out *= -model.kappa_b
    return float(out[0]) if scalar else out
