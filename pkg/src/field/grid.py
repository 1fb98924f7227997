import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c, hbar, pi

from src.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Discretized time/frequency axes around an optical carrier.

    Spectral quantities are stored in natural DFT order: bin k sits at detuning
    ``detunings[k]`` from the carrier. Use :meth:`shift` before handing spectra
    to anything user-facing.
    """

    n_samples: int
    time_window: float
    center_wavelength: float
    dt: float = field(init=False)
    carrier_frequency: float = field(init=False)
    times: np.ndarray = field(init=False, repr=False)
    detunings: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dt = self.time_window / self.n_samples
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "carrier_frequency", 2 * pi * c / self.center_wavelength)
        times = (np.arange(self.n_samples) - self.n_samples // 2) * dt
        object.__setattr__(self, "times", _frozen(times))
        detunings = 2 * pi * np.fft.fftfreq(self.n_samples, d=dt)
        object.__setattr__(self, "detunings", _frozen(detunings))

    @property
    def bin_spacing(self) -> float:
        """Angular frequency spacing of the spectral bins (rad/s)."""
        return 2 * pi / self.time_window

    @property
    def angular_frequencies(self) -> np.ndarray:
        """Absolute angular frequency of every bin, natural DFT order."""
        return self.carrier_frequency + self.detunings

    @property
    def wavelengths(self) -> np.ndarray:
        """Vacuum wavelength of every bin (m), natural order; NaN for non-positive frequencies."""
        omega = self.angular_frequencies
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(omega > 0, 2 * pi * c / omega, np.nan)

    @property
    def photon_energy(self) -> float:
        """Carrier photon energy hbar*omega0 (J)."""
        return hbar * self.carrier_frequency

    def shift(self, values: np.ndarray) -> np.ndarray:
        """Reorder a natural-order spectral array from negative to positive detuning."""
        return np.fft.fftshift(values, axes=-1)

    def unshift(self, values: np.ndarray) -> np.ndarray:
        return np.fft.ifftshift(values, axes=-1)


def make_grid(n_samples: int, time_window: float, center_wavelength: float) -> Grid:
    """
    Build a grid of ``n_samples`` points spanning ``time_window`` seconds.

    Args:
        n_samples (int): Number of samples, a power of two >= 2
        time_window (float): Window duration in seconds
        center_wavelength (float): Carrier wavelength in meters

    Returns:
        Grid: The grid, with dt = time_window / n_samples
    """
    if isinstance(n_samples, bool) or int(n_samples) != n_samples:
        raise InvalidArgumentError(f"n_samples must be an integer, got {n_samples!r}")
    n_samples = int(n_samples)
    if n_samples < 2 or n_samples & (n_samples - 1):
        raise InvalidArgumentError(f"n_samples must be a power of two >= 2, got {n_samples}")
    if not time_window > 0:
        raise InvalidArgumentError(f"time_window must be positive, got {time_window}")
    if not center_wavelength > 0:
        raise InvalidArgumentError(f"center_wavelength must be positive, got {center_wavelength}")

    grid = Grid(n_samples, float(time_window), float(center_wavelength))
    logger.debug(
        f"Grid: n={n_samples}, window={time_window:.3e} s, dt={grid.dt:.3e} s, "
        f"span=+/-{abs(grid.detunings).max() / (2 * pi) / 1e12:.1f} THz"
    )
    return grid
