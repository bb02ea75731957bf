"""Exception and warning types raised by hsarma."""


class StabilityError(ValueError):
    """Coefficients define a non-stationary or non-invertible model."""


class SeriesLengthError(ValueError):
    """Series too short for the requested lag caps."""


class FitError(RuntimeError):
    """The series cannot be fitted (e.g. zero variance)."""


class SamplingError(RuntimeError):
    """Rejection sampling ran out of draws."""


class ConvergenceWarning(UserWarning):
    """An iterative routine stopped at its iteration cap."""
