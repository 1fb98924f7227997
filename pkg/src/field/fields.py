import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft

from src.exceptions import InvalidArgumentError
from src.field.grid import Grid

logger = logging.getLogger(__name__)


def _checked_samples(grid: Grid, values, name: str) -> np.ndarray:
    array = np.array(values, dtype=np.complex128)
    if array.shape != (grid.n_samples,):
        raise InvalidArgumentError(
            f"{name} must have shape ({grid.n_samples},), got {array.shape}"
        )
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Field:
    """Complex envelope in photon-amplitude units: sum(|a_j|^2) is the photon number."""

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "samples", _checked_samples(self.grid, self.samples, "samples"))

    @property
    def total_photons(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))

    @property
    def power(self) -> np.ndarray:
        """Instantaneous power |A(t)|^2 in watts."""
        return np.abs(self.samples) ** 2 * self.grid.photon_energy / self.grid.dt


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Photon amplitudes per frequency bin, natural DFT order."""

    grid: Grid
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "amplitudes", _checked_samples(self.grid, self.amplitudes, "amplitudes")
        )

    @property
    def total_photons(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


def to_spectrum(field: Field) -> SpectralField:
    """Unitary transform to the frequency basis (bin k at detuning grid.detunings[k])."""
    return SpectralField(field.grid, scipy.fft.ifft(field.samples, norm="ortho"))


def from_spectrum(sf: SpectralField) -> Field:
    """Inverse of :func:`to_spectrum`."""
    return Field(sf.grid, scipy.fft.fft(sf.amplitudes, norm="ortho"))


def photon_numbers(sf: SpectralField) -> np.ndarray:
    """Per-bin photon numbers n_k = |a_k|^2 (carrier photon-energy normalization)."""
    return np.abs(sf.amplitudes) ** 2


def photon_count(sf: SpectralField, frequency_resolved: bool = False) -> float:
    """
    Total photon number of a spectral field.

    With ``frequency_resolved`` every bin is weighted by omega0 / omega, giving
    the photon number the self-steepened GNLSE conserves; otherwise the carrier
    normalization is used and the result equals ``sf.total_photons``.
    """
    numbers = photon_numbers(sf)
    if not frequency_resolved:
        return float(np.sum(numbers))
    omega = sf.grid.angular_frequencies
    if np.any(omega <= 0):
        raise InvalidArgumentError("grid reaches non-positive optical frequencies")
    return float(np.sum(numbers * sf.grid.carrier_frequency / omega))
