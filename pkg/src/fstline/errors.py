"""Exception types shared across the solver suite."""


class FstlineError(Exception):
    """Base class for all errors raised by this package."""


class SuperluminalError(FstlineError, ValueError):
    """A velocity reached or exceeded the speed of light (|v| >= 1)."""


class OrderingError(FstlineError, ValueError):
    """The ordering invariant X > Y was violated (separation <= 0)."""


class DelaySolverError(FstlineError, RuntimeError):
    """The light-cone root finder failed to converge.

    Usually signals an invariant violation upstream (superluminal data,
    crossing trajectories) or a delay beyond the configured hard cap.
    """


class ConstructionError(FstlineError, ValueError):
    """A reference pair or initial-data object could not be built."""


class AdmissibilityError(FstlineError, RuntimeError):
    """An iterate lost admissibility (ordering or subluminal bound).

    Carries the offending iterate so it can be dumped for inspection.
    """

    def __init__(self, message, *, pair=None, lam=None, iteration=None):
        super().__init__(message)
        self.pair = pair
        self.lam = lam
        self.iteration = iteration


class ReconstructionError(FstlineError, RuntimeError):
    """A reconstruction leg failed; carries the partial result."""

    def __init__(self, message, *, partial=None, leg=None, cause=None):
        super().__init__(message)
        self.partial = partial
        self.leg = leg
        self.cause = cause


class LightLineError(ReconstructionError):
    """The reconstruction velocity field hit the light line.

    Raised when the implied Doppler factor is <= 0 (attractive or zero
    force between the charges) or at the pole u = -1 of the Moebius map.
    """


class DomainExitError(ReconstructionError):
    """A space-time point left the light-cone domain of the strips."""


class StripTooShortError(ReconstructionError):
    """A nested delayed time fell outside the supplied strips."""
