"""Error taxonomy shared by every package of the toolkit."""

from typing import Optional


class NoiseToolkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(NoiseToolkitError, ValueError):
    """An argument violates a documented precondition."""


class PulseClippedError(InvalidArgumentError):
    """The pulse does not decay inside the time window."""


class NotApplicableError(InvalidArgumentError):
    """The quantity is undefined for the given regime (e.g. normal dispersion)."""


class InvalidNoiseModelError(InvalidArgumentError):
    """A Fano factor is below one or not finite."""


class UndefinedNormalizationError(InvalidArgumentError):
    """Shot-noise normalization requested for a non-positive mean."""


class InfeasibleTargetError(InvalidArgumentError):
    """No binary mask reaches the requested transmission window."""


class NumericalError(NoiseToolkitError, RuntimeError):
    """Base class for failures of a numerical stage."""


class NumericalBlowupError(NumericalError):
    """Non-finite samples appeared during propagation."""


class SpectralAliasingError(NumericalError):
    """Spectral energy reached the edge of the frequency window."""

    def __init__(self, z: float, edge_fraction: float, tolerance: float):
        self.z = z
        self.edge_fraction = edge_fraction
        self.tolerance = tolerance
        super().__init__(
            f"spectral aliasing at z = {z:.4g} m: edge-band energy fraction "
            f"{edge_fraction:.3e} exceeds {tolerance:.1e}; widen the frequency window "
            f"(smaller time_window / more samples)"
        )


class PropagationError(NumericalError):
    """A propagation failed; the message carries the context it failed in."""

    def __init__(self, message: str, cause: Optional[Exception] = None):
        self.cause = cause
        super().__init__(f"{message}: {cause}" if cause is not None else message)


class OracleFailureError(NumericalError):
    """Too many Monte-Carlo samples failed to propagate."""


class ConfigError(NoiseToolkitError, ValueError):
    """The experiment configuration could not be parsed or is inconsistent."""

    def __init__(self, field: str, constraint: str):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field}: {constraint}")


class ValidationFailure(NoiseToolkitError):
    """One or more acceptance checks failed."""
