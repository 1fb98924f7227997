from src.sensitivity.jacobian import SensitivityMatrix, default_probe_step, wirtinger_jacobian
from src.sensitivity.noise import (
    CovarianceMatrix,
    NoiseModel,
    covariance_eq1,
    fano_out,
    to_decibels,
    vacuum_floor,
    variance_eq1,
)
from src.sensitivity.observables import (
    Observable,
    SpectralBinning,
    band_from_spectrum,
    observable_matrix,
    spectral_bins,
)

__all__ = [
    "CovarianceMatrix",
    "NoiseModel",
    "Observable",
    "SensitivityMatrix",
    "SpectralBinning",
    "band_from_spectrum",
    "covariance_eq1",
    "default_probe_step",
    "fano_out",
    "observable_matrix",
    "spectral_bins",
    "to_decibels",
    "vacuum_floor",
    "variance_eq1",
    "wirtinger_jacobian",
]
