"""Error taxonomy shared across the package.

Two failure classes matter to callers: bad inputs (scenario files,
coordinates, flag values) and numerical breakdown during estimation.
The CLI maps them to exit codes 1 and 2 respectively.
"""


class ValidationError(ValueError):
    """Invalid input: scenario content, coordinates, or configuration."""


class EstimationError(RuntimeError):
    """Estimation could not produce a usable state (degenerate geometry,
    ill-conditioned system, nonpositive range estimate, no sphere
    intersection, ...)."""
