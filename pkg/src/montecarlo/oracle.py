"""
Brute-force check of the linearized noise predictions.

Noisy inputs are drawn around the mean field, each one is pushed through the
full nonlinear system and the observables are measured directly. Samples are
symmetrized (Wigner-like): every spectral bin gets an independent complex
Gaussian kick with variance F_i/4 per quadrature, which reproduces the
linearized variance exactly for linear systems.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from src.exceptions import InvalidArgumentError, NoiseToolkitError, OracleFailureError
from src.field import Field, SpectralField, from_spectrum, photon_numbers, to_spectrum
from src.parallel import parallel_map
from src.sensitivity import NoiseModel, Observable, observable_matrix

logger = logging.getLogger(__name__)

# Largest share of samples allowed to fail before the run is rejected
MAX_FAILURE_FRACTION = 1e-3

_STATE = {}


@dataclass(frozen=True, eq=False)
class McConfig:
    n_samples: int
    rng_seed: int
    noise: NoiseModel
    base: Field
    noise_scale: float = 1.0
    max_covariance_errors: int = 32

    def __post_init__(self):
        if self.n_samples < 3:
            raise InvalidArgumentError(f"n_samples must be >= 3, got {self.n_samples}")
        if self.noise.n_modes != self.base.grid.n_samples:
            raise InvalidArgumentError(
                f"noise model covers {self.noise.n_modes} modes, field has {self.base.grid.n_samples}"
            )
        if self.noise_scale < 0:
            raise InvalidArgumentError(f"noise_scale must be >= 0, got {self.noise_scale}")


@dataclass(frozen=True, eq=False)
class McStatistics:
    """Sample estimators and jackknife standard errors, one entry per observable."""

    mean: np.ndarray
    variance: np.ndarray
    covariance: np.ndarray
    mean_se: np.ndarray
    variance_se: np.ndarray
    covariance_se: Optional[np.ndarray]
    n_samples: int
    n_failed: int

    @property
    def fano(self) -> np.ndarray:
        return self.variance / self.mean

    @property
    def fano_se(self) -> np.ndarray:
        return self.variance_se / self.mean

    def agrees_with(self, k: int, predicted_variance: float, sigmas: float = 3.0, rel: float = 0.05) -> bool:
        """True if ``predicted_variance`` lies within max(sigmas * SE, rel * value) of observable k."""
        allowed = max(sigmas * self.variance_se[k], rel * abs(predicted_variance))
        return bool(abs(self.variance[k] - predicted_variance) <= allowed)


def sample_input(
    base: Field, noise: NoiseModel, rng: np.random.Generator, scale: float = 1.0
) -> Field:
    """One noisy realization of ``base``; per-quadrature variance scale^2 * F_i / 4 in every bin."""
    spectrum = to_spectrum(base)
    sigma = scale * np.sqrt(noise.fano / 4)
    n = spectrum.amplitudes.size
    kick = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return from_spectrum(SpectralField(base.grid, spectrum.amplitudes + kick))


def _install_state(system: Callable, base: Field, noise: NoiseModel, weights: np.ndarray, scale: float):
    _STATE["system"] = system
    _STATE["base"] = base
    _STATE["noise"] = noise
    _STATE["weights"] = weights
    _STATE["scale"] = scale


def _run_sample(seed_sequence) -> Optional[np.ndarray]:
    rng = np.random.default_rng(seed_sequence)
    field = sample_input(_STATE["base"], _STATE["noise"], rng, _STATE["scale"])
    try:
        output = _STATE["system"](field)
    except NoiseToolkitError as e:
        logger.debug(f"Sample failed: {e}")
        return None
    return _STATE["weights"] @ photon_numbers(to_spectrum(output))


def _jackknife(values: np.ndarray, with_covariance: bool):
    """Unbiased moments of a (m, k) sample array with closed-form leave-one-out errors."""
    m = values.shape[0]
    mean = values.mean(axis=0)
    d = values - mean
    D = d.T @ d
    covariance = D / (m - 1)
    covariance = 0.5 * (covariance + covariance.T)

    mean_se = d.std(axis=0, ddof=1) / np.sqrt(m)

    # leave-one-out covariances differ from their average by -m/((m-1)(m-2)) (d_i d_i^T - D/m)
    scale = m / ((m - 1) * (m - 2)) * np.sqrt((m - 1) / m) if m > 2 else np.nan
    squares = d**2
    variance_spread = np.sum(squares**2, axis=0) - np.diag(D) ** 2 / m
    variance_se = scale * np.sqrt(np.maximum(variance_spread, 0.0))

    covariance_se = None
    if with_covariance:
        spread = squares.T @ squares - D**2 / m
        covariance_se = scale * np.sqrt(np.maximum(spread, 0.0))
    return mean, covariance, mean_se, variance_se, covariance_se


def mc_statistics(
    mc: McConfig,
    system: Callable[[Field], Field],
    observables: Union[Sequence[Observable], np.ndarray],
    threads: int = 1,
) -> McStatistics:
    """
    Sample means, variances and covariances of the observables under input noise.

    Sample i draws from the i-th child of SeedSequence(rng_seed), so results
    are identical for identical seeds whatever the worker count.

    Raises:
        OracleFailureError: more than 0.1 % of the samples failed to propagate
    """
    n = mc.base.grid.n_samples
    if isinstance(observables, np.ndarray):
        weights = np.atleast_2d(np.asarray(observables, dtype=float))
    else:
        weights = observable_matrix(observables, n)
    if weights.shape[1] != n:
        raise InvalidArgumentError(f"observable weights must cover {n} output bins")

    streams = np.random.SeedSequence(mc.rng_seed).spawn(mc.n_samples)
    logger.info(f"Monte-Carlo: {mc.n_samples} samples, {weights.shape[0]} observables, seed {mc.rng_seed}")
    outcomes = parallel_map(
        _run_sample,
        streams,
        threads,
        _install_state,
        (system, mc.base, mc.noise, weights, mc.noise_scale),
        desc="monte-carlo",
    )

    good = [o for o in outcomes if o is not None]
    n_failed = len(outcomes) - len(good)
    if n_failed:
        logger.warning(f"{n_failed}/{mc.n_samples} Monte-Carlo samples failed to propagate")
    if n_failed > MAX_FAILURE_FRACTION * mc.n_samples or len(good) < 3:
        raise OracleFailureError(
            f"{n_failed} of {mc.n_samples} samples failed (limit {MAX_FAILURE_FRACTION:.1%})"
        )

    values = np.array(good)
    with_cov = weights.shape[0] <= mc.max_covariance_errors
    mean, covariance, mean_se, variance_se, covariance_se = _jackknife(values, with_cov)
    return McStatistics(
        mean=mean,
        variance=np.diag(covariance).copy(),
        covariance=covariance,
        mean_se=mean_se,
        variance_se=variance_se,
        covariance_se=covariance_se,
        n_samples=len(good),
        n_failed=n_failed,
    )
