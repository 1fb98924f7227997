import logging
from dataclasses import dataclass

import numpy as np
from scipy.constants import pi

from src.exceptions import InvalidArgumentError, PulseClippedError
from src.field.fields import Field
from src.field.grid import Grid

logger = logging.getLogger(__name__)

PULSE_SHAPES = ("sech", "gaussian")

# Relative amplitude allowed at the edges of the time window
EDGE_DECAY = 1e-6

SECH_FWHM_FACTOR = 2 * np.arccosh(np.sqrt(2))
GAUSSIAN_FWHM_FACTOR = 2 * np.sqrt(np.log(2))


@dataclass(frozen=True)
class PulseSpec:
    """A transform-limited input pulse; durations are intensity FWHM."""

    shape: str
    peak_power: float
    duration_fwhm: float
    center_wavelength: float

    def __post_init__(self):
        if self.shape not in PULSE_SHAPES:
            raise InvalidArgumentError(f"pulse shape must be one of {PULSE_SHAPES}, got {self.shape!r}")
        if not self.peak_power >= 0:
            raise InvalidArgumentError(f"peak_power must be >= 0, got {self.peak_power}")
        if not self.duration_fwhm > 0:
            raise InvalidArgumentError(f"duration_fwhm must be positive, got {self.duration_fwhm}")
        if not self.center_wavelength > 0:
            raise InvalidArgumentError(
                f"center_wavelength must be positive, got {self.center_wavelength}"
            )

    @property
    def scale_time(self) -> float:
        """T0: sech(t/T0) or exp(-t^2 / 2T0^2) amplitude scale."""
        if self.shape == "sech":
            return self.duration_fwhm / SECH_FWHM_FACTOR
        return self.duration_fwhm / GAUSSIAN_FWHM_FACTOR

    @property
    def energy(self) -> float:
        """Analytic pulse energy in joules."""
        if self.shape == "sech":
            return 2 * self.peak_power * self.scale_time
        return np.sqrt(pi) * self.peak_power * self.scale_time

    def with_peak_power(self, peak_power: float) -> "PulseSpec":
        return PulseSpec(self.shape, peak_power, self.duration_fwhm, self.center_wavelength)

    def envelope(self, t: np.ndarray) -> np.ndarray:
        """Normalized amplitude profile (1 at t = 0)."""
        x = np.asarray(t) / self.scale_time
        if self.shape == "sech":
            return 1.0 / np.cosh(np.clip(x, -700, 700))
        return np.exp(-0.5 * x**2)


def peak_power_from_average(
    shape: str, average_power: float, repetition_rate: float, duration_fwhm: float
) -> float:
    """Peak power of a pulse train given its average power and repetition rate."""
    if not repetition_rate > 0:
        raise InvalidArgumentError(f"repetition_rate must be positive, got {repetition_rate}")
    if not average_power >= 0:
        raise InvalidArgumentError(f"average_power must be >= 0, got {average_power}")
    unit = PulseSpec(shape, 1.0, duration_fwhm, 1.0)
    return (average_power / repetition_rate) / unit.energy


def average_power_from_peak(spec: PulseSpec, repetition_rate: float) -> float:
    return spec.energy * repetition_rate


def synthesize_pulse(spec: PulseSpec, grid: Grid) -> Field:
    """
    Sample the pulse on the grid in photon-amplitude units.

    The peak sample (t = 0, the window center) carries sqrt(P0 dt / hbar omega0).

    Raises:
        PulseClippedError: if the envelope at the window edges exceeds 1e-6 of its peak
        InvalidArgumentError: if pulse and grid carriers disagree
    """
    if not np.isclose(spec.center_wavelength, grid.center_wavelength, rtol=1e-9, atol=0.0):
        raise InvalidArgumentError(
            f"pulse carrier {spec.center_wavelength:.6e} m differs from grid carrier "
            f"{grid.center_wavelength:.6e} m"
        )

    profile = spec.envelope(grid.times)
    edge = max(profile[0], profile[-1])
    if edge >= EDGE_DECAY:
        raise PulseClippedError(
            f"pulse amplitude at the window edge is {edge:.2e} of peak "
            f"(limit {EDGE_DECAY:.0e}); enlarge time_window"
        )

    amplitude = np.sqrt(spec.peak_power * grid.dt / grid.photon_energy)
    return Field(grid, amplitude * profile)


def focused_intensity(peak_power: float, wavelength: float) -> float:
    """Peak power over the diffraction-limited area pi * lambda^2 / 4, in W/m^2."""
    if peak_power < 0 or not np.isfinite(peak_power):
        raise InvalidArgumentError(f"peak_power must be >= 0, got {peak_power}")
    if not wavelength > 0:
        raise InvalidArgumentError(f"wavelength must be positive, got {wavelength}")
    return peak_power / (pi * wavelength**2 / 4)
