"""
Shared stages of the noise experiments: classical mean-field propagation,
output band selection, the (cached) Jacobian and the covariance build.
"""

import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.database.models import RunManifest
from src.experiments.schema import ExperimentConfig
from src.field import Field, Grid, PulseSpec, SpectralField, photon_numbers, synthesize_pulse, to_spectrum
from src.propagation import FiberSystem
from src.sensitivity import (
    CovarianceMatrix,
    NoiseModel,
    SensitivityMatrix,
    SpectralBinning,
    band_from_spectrum,
    covariance_eq1,
    spectral_bins,
    wirtinger_jacobian,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MeanField:
    """The classical run every noise experiment linearizes around."""

    grid: Grid
    pulse: PulseSpec
    system: FiberSystem
    input_field: Field
    output_field: Field
    binning: SpectralBinning

    @property
    def input_spectrum(self) -> SpectralField:
        return to_spectrum(self.input_field)

    @property
    def output_numbers(self) -> np.ndarray:
        return photon_numbers(to_spectrum(self.output_field))

    @property
    def channel_mean(self) -> np.ndarray:
        """Mean photon number per output channel."""
        return self.binning.aggregate(self.output_numbers)

    def pump_noise(self, pump_fano: float, threshold: float) -> NoiseModel:
        return NoiseModel.amplified_pump(self.input_spectrum, pump_fano, threshold)


def mean_field(config: ExperimentConfig, manifest: RunManifest) -> MeanField:
    """Propagate the mean input pulse and bin the output band into channels."""
    grid = config.grid()
    pulse = config.pulse_spec()
    system = FiberSystem(config.fiber(), config.solver())

    with manifest.stage("propagate"):
        logger.info(f"Propagating mean field: P0 = {pulse.peak_power:.4g} W over {system.fiber.length:g} m")
        input_field = synthesize_pulse(pulse, grid)
        output_field = system(input_field)

    sens = config["sensitivity"]
    numbers = photon_numbers(to_spectrum(output_field))
    band = band_from_spectrum(numbers, grid, sens["band_floor"])
    binning = spectral_bins(grid, sens["n_bins"], band)
    logger.info(
        f"Output band {band[0] / 2e12 / np.pi:+.2f} .. {band[1] / 2e12 / np.pi:+.2f} THz "
        f"split into {binning.n_bins} channels"
    )
    return MeanField(grid, pulse, system, input_field, output_field, binning)


def _cache_path(out_dir: str, config: ExperimentConfig, wirtinger_factor: float) -> str:
    suffix = "" if wirtinger_factor == 0.5 else f"_w{wirtinger_factor:g}"
    return os.path.join(out_dir, f"jacobian_{config.physics_hash}{suffix}.npz")


def channel_jacobian(
    config: ExperimentConfig,
    base: MeanField,
    out_dir: str,
    threads: int,
    manifest: RunManifest,
    wirtinger_factor: float = 0.5,
) -> SensitivityMatrix:
    """
    Jacobian of every output channel's photon number, loaded from
    ``jacobian_<physics-hash>.npz`` in ``out_dir`` when present.
    """
    path = _cache_path(out_dir, config, wirtinger_factor)
    if os.path.exists(path):
        with manifest.stage("jacobian_cache"), np.load(path) as cached:
            logger.info(f"Loaded cached Jacobian {path}")
            return SensitivityMatrix(
                values=cached["values"],
                base=base.input_field,
                probe_step=float(cached["probe_step"]),
                computed=cached["computed"],
                flags=cached["flags"],
                verified_columns=cached["verified_columns"],
            )

    sens = config["sensitivity"]
    with manifest.stage("jacobian"):
        jacobian = wirtinger_jacobian(
            base.system,
            base.input_field,
            base.binning.matrix(),
            probe_step=sens["probe_step"],
            threads=threads,
            prescan_stride=sens["prescan_stride"],
            prune_threshold=sens["prune_threshold"],
            verify_stride=sens["verify_stride"],
            wirtinger_factor=wirtinger_factor,
        )

    os.makedirs(out_dir, exist_ok=True)
    np.savez_compressed(
        path,
        values=jacobian.values,
        probe_step=jacobian.probe_step,
        computed=jacobian.computed,
        flags=jacobian.flags,
        verified_columns=jacobian.verified_columns,
    )
    logger.info(f"Cached Jacobian in {path} ({jacobian.n_flagged} flagged entries)")
    return jacobian


def channel_covariance(
    jacobian: SensitivityMatrix, base: MeanField, noise: NoiseModel, manifest: Optional[RunManifest] = None
) -> CovarianceMatrix:
    if manifest is None:
        return covariance_eq1(jacobian.values, noise, base.channel_mean)
    with manifest.stage("covariance"):
        return covariance_eq1(jacobian.values, noise, base.channel_mean)
