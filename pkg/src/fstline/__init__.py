"""Solvers for the electrodynamic two-body problem on a straight line.

Two like point charges interacting through delayed (and, in the
time-symmetric case, advanced) Coulomb terms: trajectory representation,
light-cone delay solving, the homotopy fixed-point solver for the
time-symmetric, purely retarded and toy-model equation families, the
leg-by-leg reconstruction of solutions from finite strips, and the
a priori bound diagnostics.
"""

from .diagnostics import (AprioriBounds, BoundCheckReport, DecayFit,
                          EnergySeries, acceleration_decay_fit, check_bounds,
                          energy_series, fit_bounds, velocity_bound_constant)
from .errors import (AdmissibilityError, ConstructionError, DelaySolverError,
                     DomainExitError, FstlineError, LightLineError,
                     OrderingError, ReconstructionError, StripTooShortError,
                     SuperluminalError)
from .fixedpoint import (CauchyData, FstHalfLine, InitialData, ReferencePair,
                         SolveReport, SolverConfig, apply_H, build_reference,
                         check_reference, make_half_line_data, residual, solve)
from .forces import force_on_a, force_on_b
from .kinematics import (ModelSpec, Trajectory, TrajectoryPair, momentum,
                         pair_from_json, pair_increment_norm, pair_norm,
                         pair_to_json, reflect_pair, rho, sigma, time_reflect,
                         trajectory_from_csv, trajectory_to_csv,
                         velocity_from_momentum)
from .lightcone import (LadderResult, breakpoint_ladder, delay_derivative,
                        delay_time, delay_times, pair_delay)
from .stepper import (StripPair, cut_strips, extend_a, extend_b, g_field,
                      moebius_f, reconstruct)

__version__ = "0.1.0"

__all__ = [
    "AprioriBounds", "BoundCheckReport", "DecayFit", "EnergySeries",
    "acceleration_decay_fit", "check_bounds", "energy_series", "fit_bounds",
    "velocity_bound_constant",
    "AdmissibilityError", "ConstructionError", "DelaySolverError",
    "DomainExitError", "FstlineError", "LightLineError", "OrderingError",
    "ReconstructionError", "StripTooShortError", "SuperluminalError",
    "CauchyData", "FstHalfLine", "InitialData", "ReferencePair",
    "SolveReport", "SolverConfig", "apply_H", "build_reference",
    "check_reference", "make_half_line_data", "residual", "solve",
    "force_on_a", "force_on_b",
    "ModelSpec", "Trajectory", "TrajectoryPair", "momentum",
    "pair_from_json", "pair_increment_norm", "pair_norm", "pair_to_json",
    "reflect_pair", "rho", "sigma", "time_reflect", "trajectory_from_csv",
    "trajectory_to_csv", "velocity_from_momentum",
    "LadderResult", "breakpoint_ladder", "delay_derivative", "delay_time",
    "delay_times", "pair_delay",
    "StripPair", "cut_strips", "extend_a", "extend_b", "g_field",
    "moebius_f", "reconstruct",
    "__version__",
]
