import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.exceptions import InvalidArgumentError
from src.field import Field, Grid, SpectralField, photon_numbers, to_spectrum

logger = logging.getLogger(__name__)

OBSERVABLE_KINDS = ("filtered_photon_number", "single_bin", "pair")


@dataclass(frozen=True, eq=False)
class Observable:
    """
    A photon-number observable of the output spectrum.

    All kinds are linear in the per-bin photon numbers, so each one reduces to
    a weight vector over the output bins.
    """

    kind: str
    mask: Optional[np.ndarray] = None
    bins: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise InvalidArgumentError(f"unknown observable kind {self.kind!r}")
        if self.kind == "filtered_photon_number":
            mask = np.asarray(self.mask, dtype=float)
            if mask.ndim != 1 or np.any(mask < 0) or np.any(mask > 1):
                raise InvalidArgumentError("filter mask entries must lie in [0, 1]")
            mask.setflags(write=False)
            object.__setattr__(self, "mask", mask)
        elif self.kind == "single_bin" and len(self.bins) != 1:
            raise InvalidArgumentError("single_bin observable needs exactly one bin")
        elif self.kind == "pair" and len(self.bins) != 2:
            raise InvalidArgumentError("pair observable needs exactly two bins")

    @classmethod
    def filtered(cls, mask) -> "Observable":
        return cls("filtered_photon_number", mask=np.asarray(mask, dtype=float))

    @classmethod
    def single_bin(cls, k: int) -> "Observable":
        return cls("single_bin", bins=(int(k),))

    @classmethod
    def pair(cls, k: int, k_prime: int) -> "Observable":
        return cls("pair", bins=(int(k), int(k_prime)))

    def weights(self, n_bins: int) -> np.ndarray:
        if self.kind == "filtered_photon_number":
            if self.mask.size != n_bins:
                raise InvalidArgumentError(
                    f"mask has {self.mask.size} entries, spectrum has {n_bins} bins"
                )
            return self.mask.copy()
        w = np.zeros(n_bins)
        for k in self.bins:
            if not 0 <= k < n_bins:
                raise InvalidArgumentError(f"bin {k} outside 0..{n_bins - 1}")
            w[k] += 1.0
        return w

    def evaluate(self, output) -> float:
        """Value of the observable on an output Field or SpectralField."""
        sf = to_spectrum(output) if isinstance(output, Field) else output
        numbers = photon_numbers(sf)
        return float(self.weights(numbers.size) @ numbers)


def observable_matrix(observables: Sequence[Observable], n_bins: int) -> np.ndarray:
    """Stack observable weights into a (n_observables, n_bins) matrix."""
    return np.array([o.weights(n_bins) for o in observables])


@dataclass(frozen=True, eq=False)
class SpectralBinning:
    """
    Contiguous groups of DFT bins (coarse output channels).

    ``groups[b]`` holds natural-order bin indices; channels are ordered from
    negative to positive detuning.
    """

    grid: Grid
    groups: Tuple[np.ndarray, ...]

    @property
    def n_bins(self) -> int:
        return len(self.groups)

    def matrix(self) -> np.ndarray:
        """0/1 aggregation matrix of shape (n_bins, n_samples)."""
        m = np.zeros((self.n_bins, self.grid.n_samples))
        for b, idx in enumerate(self.groups):
            m[b, idx] = 1.0
        return m

    def aggregate(self, numbers: np.ndarray) -> np.ndarray:
        return np.array([numbers[idx].sum() for idx in self.groups])

    def expand(self, channel_values: np.ndarray) -> np.ndarray:
        """Spread per-channel values (e.g. a mask) back onto DFT bins; bins outside the band get 0."""
        out = np.zeros(self.grid.n_samples)
        for b, idx in enumerate(self.groups):
            out[idx] = channel_values[b]
        return out

    @property
    def detunings(self) -> np.ndarray:
        return np.array([self.grid.detunings[idx].mean() for idx in self.groups])

    @property
    def wavelengths(self) -> np.ndarray:
        return np.array([np.nanmean(self.grid.wavelengths[idx]) for idx in self.groups])

    def observables(self) -> List[Observable]:
        return [Observable.filtered(row) for row in self.matrix()]


def band_from_spectrum(numbers: np.ndarray, grid: Grid, floor_db: float = -40.0) -> Tuple[float, float]:
    """Detuning range where the spectrum is within ``floor_db`` of its peak."""
    peak = numbers.max()
    if peak <= 0:
        raise InvalidArgumentError("cannot select a band from an empty spectrum")
    above = numbers >= peak * 10 ** (floor_db / 10)
    detunings = grid.detunings[above]
    return float(detunings.min()), float(detunings.max())


def spectral_bins(grid: Grid, n_bins: int, band: Optional[Tuple[float, float]] = None) -> SpectralBinning:
    """
    Split the DFT bins inside ``band`` (detuning limits, rad/s) into ``n_bins``
    contiguous channels of near-equal width.
    """
    order = np.argsort(grid.detunings, kind="stable")
    if band is not None:
        lo, hi = band
        inside = (grid.detunings[order] >= lo) & (grid.detunings[order] <= hi)
        order = order[inside]
    if not 1 <= n_bins <= order.size:
        raise InvalidArgumentError(f"n_bins must lie in 1..{order.size}, got {n_bins}")
    groups = tuple(chunk.copy() for chunk in np.array_split(order, n_bins))
    logger.debug(f"Binned {order.size} DFT bins into {n_bins} channels")
    return SpectralBinning(grid, groups)
