import logging
from dataclasses import dataclass

import numpy as np

from src.exceptions import (
    InvalidArgumentError,
    InvalidNoiseModelError,
    UndefinedNormalizationError,
)
from src.field import SpectralField, photon_numbers

logger = logging.getLogger(__name__)

# Input bins brighter than this fraction of the spectral peak carry the pump noise
PUMP_THRESHOLD = 1e-4


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Uncorrelated, phase-insensitive input noise: one Fano factor per input bin."""

    fano: np.ndarray

    def __post_init__(self):
        fano = np.array(self.fano, dtype=float)
        if fano.ndim != 1:
            raise InvalidNoiseModelError("fano must be a 1-D array")
        if not np.all(np.isfinite(fano)):
            raise InvalidNoiseModelError("fano factors must be finite")
        if np.any(fano < 1):
            worst = int(np.argmin(fano))
            raise InvalidNoiseModelError(
                f"fano factor {fano[worst]:.4g} < 1 at bin {worst}; phase-insensitive noise cannot beat vacuum"
            )
        fano.setflags(write=False)
        object.__setattr__(self, "fano", fano)

    @property
    def n_modes(self) -> int:
        return self.fano.size

    @classmethod
    def coherent(cls, n_modes: int) -> "NoiseModel":
        return cls(np.ones(n_modes))

    @classmethod
    def amplified_pump(
        cls, input_spectrum: SpectralField, pump_fano: float, threshold: float = PUMP_THRESHOLD
    ) -> "NoiseModel":
        """F = pump_fano on bins above ``threshold`` of the input spectral peak, 1 elsewhere."""
        numbers = photon_numbers(input_spectrum)
        fano = np.ones(numbers.size)
        if numbers.max() > 0:
            fano[numbers > threshold * numbers.max()] = pump_fano
        return cls(fano)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Output intensity correlations cov(n_l, n_l') in photons^2 plus mean photon numbers."""

    matrix: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        mean = np.array(self.mean, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidArgumentError(f"covariance must be square, got shape {matrix.shape}")
        if mean.shape != (matrix.shape[0],):
            raise InvalidArgumentError("mean vector does not match covariance size")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "mean", mean)

    @property
    def size(self) -> int:
        return self.mean.size

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        scale = max(np.abs(self.matrix).max(), np.finfo(float).tiny)
        return bool(np.abs(self.matrix - self.matrix.T).max() <= rtol * scale)

    def min_eigenvalue_ratio(self) -> float:
        """Smallest eigenvalue over the trace (>= -1e-8 for a valid covariance)."""
        trace = np.trace(self.matrix)
        if trace <= 0:
            return 0.0
        eigenvalues = np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))
        return float(eigenvalues.min() / trace)

    def is_valid(self, psd_tolerance: float = 1e-8) -> bool:
        return (
            self.is_symmetric()
            and bool(np.all(np.diag(self.matrix) >= 0))
            and self.min_eigenvalue_ratio() >= -psd_tolerance
        )


def _check_modes(row: np.ndarray, noise: NoiseModel):
    if row.shape[-1] != noise.n_modes:
        raise InvalidArgumentError(
            f"sensitivity covers {row.shape[-1]} input modes, noise model {noise.n_modes}"
        )


def variance_eq1(row: np.ndarray, noise: NoiseModel) -> float:
    """Linearized output variance sum_i F_i |dX/d alpha_i|^2."""
    row = np.asarray(row)
    _check_modes(row, noise)
    return float(np.sum(noise.fano * np.abs(row) ** 2))


def vacuum_floor(row: np.ndarray, noise: NoiseModel) -> float:
    """Contribution of the vacuum (F_i = 1) input bins alone."""
    row = np.asarray(row)
    _check_modes(row, noise)
    vacuum = noise.fano == 1
    return float(np.sum(np.abs(row[..., vacuum]) ** 2))


def covariance_eq1(rows: np.ndarray, noise: NoiseModel, mean: np.ndarray) -> CovarianceMatrix:
    """
    C_ll' = sum_i F_i Re[J_li conj(J_l'i)] for the photon-number rows of a Jacobian.

    The diagonal equals :func:`variance_eq1` row by row and T.(CT) equals the
    variance of the summed observable sum_l T_l n_l.
    """
    rows = np.asarray(rows)
    _check_modes(rows, noise)
    weighted = rows * noise.fano
    matrix = (weighted @ rows.conj().T).real
    return CovarianceMatrix(0.5 * (matrix + matrix.T), np.asarray(mean, dtype=float))


def fano_out(variance: float, mean: float) -> float:
    """Output Fano factor variance / mean (F < 1 is squeezed)."""
    if not mean > 0:
        raise UndefinedNormalizationError(f"shot-noise normalization needs mean > 0, got {mean}")
    return variance / mean


def to_decibels(fano: float) -> float:
    """10 log10(F); 0 dB is the shot-noise level."""
    return float(10 * np.log10(fano))
