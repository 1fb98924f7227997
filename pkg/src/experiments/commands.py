import logging
import os
from typing import Callable, Dict, List

import numpy as np
import pandas as pd

import config as settings
from src.analytics import (
    FilterMask,
    filter_noise,
    filtered_peak_power,
    linear_loss_fano,
    min_noise_curve,
    noise_immunity_scan,
    pair_noise_map,
    random_filter_sweep,
)
from src.database.models import RunManifest
from src.database.operations import record_run
from src.exceptions import InvalidArgumentError, ValidationFailure
from src.experiments import validation
from src.experiments.pipeline import (
    MeanField,
    channel_covariance,
    channel_jacobian,
    mean_field,
)
from src.experiments.report import ValidationReport
from src.experiments.schema import ExperimentConfig
from src.experiments.writers import write_matrix, write_table
from src.field import focused_intensity
from src.propagation import spectrum_vs_power
from src.sensitivity import CovarianceMatrix, to_decibels

logger = logging.getLogger(__name__)

COMMANDS = ("spectrum", "min-noise", "random-filters", "pair-map", "immunity", "validate")

# W/m^2 -> TW/cm^2
TW_PER_CM2 = 1e-16


def _channel_axis(base: MeanField) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "channel": np.arange(base.binning.n_bins),
            "detuning_thz": base.binning.detunings / (2 * np.pi * 1e12),
            "wavelength_nm": base.binning.wavelengths * 1e9,
        }
    )


def _db(values) -> np.ndarray:
    return 10 * np.log10(np.asarray(values, dtype=float))


class ExperimentRunner:
    """Runs one subcommand against a parsed config and records its provenance."""

    def __init__(self, experiment: ExperimentConfig, out_dir: str = None, threads: int = None):
        self.config = experiment
        self.out_dir = out_dir or settings.OUTPUT_DIR
        self.threads = settings.DEFAULT_THREADS if threads is None else max(1, int(threads))
        self.handlers: Dict[str, Callable[[RunManifest], List[str]]] = {
            "spectrum": self.cmd_spectrum,
            "min-noise": self.cmd_min_noise,
            "random-filters": self.cmd_random_filters,
            "pair-map": self.cmd_pair_map,
            "immunity": self.cmd_immunity,
            "validate": self.cmd_validate,
        }

    def run(self, command: str) -> RunManifest:
        """
        Execute a subcommand, then write its manifest and record it in the run registry.

        Args:
            command (str): One of COMMANDS

        Returns:
            RunManifest: Provenance of the finished run
        """
        if command not in self.handlers:
            raise InvalidArgumentError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")

        manifest = RunManifest(
            command=command,
            config_hash=self.config.config_hash,
            toolkit_version=settings.TOOLKIT_VERSION,
            seeds=self.config.seeds,
            config_path=self.config.source,
        )
        os.makedirs(self.out_dir, exist_ok=True)
        logger.info(f"Running {command} (config {manifest.config_hash}, {self.threads} worker(s))")
        try:
            manifest.outputs = self.handlers[command](manifest)
            manifest.finish("ok")
        except ValidationFailure:
            manifest.finish("validation_failed")
            raise
        except Exception:
            manifest.finish("failed")
            raise
        finally:
            self._write_manifest(manifest)
            record_run(manifest)
        logger.info(f"{command} finished in {manifest.wall_clock_s:.1f} s")
        return manifest

    def _write_manifest(self, manifest: RunManifest):
        with open(os.path.join(self.out_dir, manifest.filename), "w", encoding="utf-8") as handle:
            handle.write(manifest.to_json())

    def _path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _meta(self, manifest: RunManifest, **extra) -> Dict[str, object]:
        meta = {
            "command": manifest.command,
            "config_hash": manifest.config_hash,
            "toolkit_version": manifest.toolkit_version,
            "manifest": manifest.filename,
        }
        meta.update(extra)
        return meta

    def _noise_stages(self, manifest: RunManifest):
        base = mean_field(self.config, manifest)
        jacobian = channel_jacobian(self.config, base, self.out_dir, self.threads, manifest)
        noise = base.pump_noise(self.config["noise"]["pump_fano"], self.config["noise"]["occupied_threshold"])
        C = channel_covariance(jacobian, base, noise, manifest)
        return base, jacobian, noise, C

    def _min_noise_curve(self, C: CovarianceMatrix):
        filters = self.config["filters"]
        return min_noise_curve(
            C,
            filters["transmissions"],
            restarts=filters["restarts"],
            seed=filters["seed"],
            threads=self.threads,
            perturbations=filters["perturbations"],
        )

    def cmd_spectrum(self, manifest: RunManifest) -> List[str]:
        """Output photon-number spectrum versus input power."""
        cfg = self.config
        grid = cfg.grid()
        peak_powers = cfg.peak_powers()
        with manifest.stage("power_sweep"):
            spectra = spectrum_vs_power(cfg.pulse_spec(), grid, cfg.fiber(), peak_powers, cfg.solver())

        rows = pd.DataFrame(
            {
                "average_power_mw": np.array(cfg["spectrum"]["average_powers"]) * 1e3,
                "peak_power_w": peak_powers,
            }
        )
        detunings = grid.shift(grid.detunings)
        cols = pd.DataFrame(
            {
                "detuning_thz": detunings / (2 * np.pi * 1e12),
                "wavelength_nm": grid.shift(grid.wavelengths) * 1e9,
            }
        )
        shifted = np.array([grid.shift(row) for row in spectra])
        return write_matrix(
            self._path("spectrum.tsv"),
            shifted,
            self._meta(manifest, values="photons per spectral bin", row_quantity="input power", column_quantity="detuning"),
            rows,
            cols,
        )

    def cmd_min_noise(self, manifest: RunManifest) -> List[str]:
        """Lowest filtered noise per transmission, with the linear-loss baseline."""
        base, _, _, C = self._noise_stages(manifest)
        filters = self.config["filters"]
        pump_fano = self.config["noise"]["pump_fano"]
        with manifest.stage("optimize"):
            curve = self._min_noise_curve(C)

        records, masks = [], []
        for eta, result in curve:
            baseline = linear_loss_fano(pump_fano, eta)
            if result is None:
                records.append({"target_transmission": eta, "linear_loss_db": to_decibels(baseline)})
                masks.append(np.full(C.size, np.nan))
                continue
            peak = filtered_peak_power(base.output_field, result.mask, base.binning)
            records.append(
                {
                    "target_transmission": eta,
                    "transmission": result.transmission_fraction,
                    "fano": result.fano,
                    "fano_db": result.fano_db,
                    "linear_loss_db": to_decibels(baseline),
                    "gap_db": to_decibels(baseline) - result.fano_db,
                    "converged": int(result.converged),
                    "peak_power_w": peak,
                    "focused_intensity_tw_cm2": focused_intensity(peak, base.grid.center_wavelength) * TW_PER_CM2,
                }
            )
            masks.append(result.mask.t)

        columns = [
            "target_transmission", "transmission", "fano", "fano_db", "linear_loss_db",
            "gap_db", "converged", "peak_power_w", "focused_intensity_tw_cm2",
        ]
        unfiltered = filter_noise(C, FilterMask.all_pass(C.size))
        meta = self._meta(manifest, pump_fano=pump_fano, unfiltered_fano_db=f"{unfiltered.fano_db:.6f}")
        outputs = [write_table(self._path("min_noise.tsv"), pd.DataFrame(records, columns=columns), meta)]
        outputs += write_matrix(
            self._path("min_noise_masks.tsv"),
            np.array(masks),
            self._meta(manifest, values="binary transmission per channel", row_quantity="target transmission"),
            pd.DataFrame({"target_transmission": [eta for eta, _ in curve]}),
            _channel_axis(base),
        )
        return outputs

    def cmd_random_filters(self, manifest: RunManifest) -> List[str]:
        """Noise of seeded random block filters."""
        base, _, _, C = self._noise_stages(manifest)
        filters = self.config["filters"]
        with manifest.stage("random_sweep"):
            results = random_filter_sweep(C, filters["n_random"], filters["seed"], filters["max_block"])

        frame = pd.DataFrame(
            {
                "mask_id": np.arange(len(results)),
                "transmission": [r.transmission_fraction for r in results],
                "fano": [r.fano for r in results],
                "fano_db": [r.fano_db for r in results],
                "linear_loss_db": _db([r.linear_loss_reference for r in results]),
            }
        )
        meta = self._meta(manifest, seed=filters["seed"])
        outputs = [write_table(self._path("random_filters.tsv"), frame, meta)]
        outputs += write_matrix(
            self._path("random_masks.tsv"),
            np.array([r.mask.t for r in results]),
            self._meta(manifest, values="binary transmission per channel", row_quantity="mask_id"),
            None,
            _channel_axis(base),
        )
        return outputs

    def cmd_pair_map(self, manifest: RunManifest) -> List[str]:
        """Pair variance and relative noise over all channel pairs, plus sensitivity spectra of two pairs."""
        base, jacobian, _, C = self._noise_stages(manifest)
        with manifest.stage("pair_map"):
            pairs = pair_noise_map(C)

        axis = _channel_axis(base)
        outputs = write_matrix(
            self._path("pair_variance.tsv"), pairs.variance, self._meta(manifest, values="photons^2"), axis, axis
        )
        outputs += write_matrix(
            self._path("pair_relative.tsv"),
            pairs.relative,
            self._meta(manifest, values="V / min(single-channel variances)", undefined_pairs=len(pairs.undefined)),
            axis,
            axis,
        )

        lowest = pairs.lowest_pairs(self.config["pairs"]["n_report"])
        for i, j, r in lowest:
            logger.info(f"Pair ({i}, {j}): R = {r:.3g} ({to_decibels(r):+.1f} dB)")
        outputs.append(
            write_table(
                self._path("pair_lowest.tsv"),
                pd.DataFrame(lowest, columns=["channel_a", "channel_b", "relative"]),
                self._meta(manifest),
            )
        )

        finite = np.triu(np.isfinite(pairs.relative), k=1)
        if finite.any():
            a, b = np.nonzero(finite)
            values = pairs.relative[a, b]
            typical = int(np.argsort(values, kind="stable")[values.size // 2])
            best = int(np.argmin(values))
            grid = base.grid
            columns = {
                "detuning_thz": grid.shift(grid.detunings) / (2 * np.pi * 1e12),
                "wavelength_nm": grid.shift(grid.wavelengths) * 1e9,
            }
            for label, k in (("best", best), ("typical", typical)):
                weights = np.zeros(C.size)
                weights[[a[k], b[k]]] = 1.0
                columns[f"{label}_sensitivity"] = grid.shift(np.abs(jacobian.combine(weights)) ** 2)
            outputs.append(
                write_table(
                    self._path("pair_sensitivity.tsv"),
                    pd.DataFrame(columns),
                    self._meta(
                        manifest,
                        values="|dX/d alpha_i|^2 per input bin",
                        best_pair=f"{a[best]},{b[best]}",
                        typical_pair=f"{a[typical]},{b[typical]}",
                    ),
                )
            )
        return outputs

    def cmd_immunity(self, manifest: RunManifest) -> List[str]:
        """Optimized noise at fixed transmission for increasing pump noise, Jacobian held fixed."""
        base, jacobian, _, _ = self._noise_stages(manifest)
        immunity = self.config["immunity"]
        filters = self.config["filters"]
        with manifest.stage("immunity_scan"):
            points = noise_immunity_scan(
                jacobian,
                base.input_spectrum,
                base.channel_mean,
                immunity["fano_levels"],
                immunity["transmission"],
                restarts=filters["restarts"],
                seed=filters["seed"],
                threads=self.threads,
                occupied_threshold=self.config["noise"]["occupied_threshold"],
                perturbations=filters["perturbations"],
            )

        frame = pd.DataFrame(
            {
                "pump_fano": [p.pump_fano for p in points],
                "pump_fano_db": _db([p.pump_fano for p in points]),
                "transmission": [p.result.transmission_fraction for p in points],
                "fano": [p.result.fano for p in points],
                "fano_db": [p.result.fano_db for p in points],
                "vacuum_floor_fano": [p.vacuum_floor / p.result.transmitted_mean for p in points],
                "linear_loss_db": [
                    to_decibels(linear_loss_fano(p.pump_fano, p.result.transmission_fraction)) for p in points
                ],
            }
        )
        meta = self._meta(manifest, target_transmission=immunity["transmission"])
        return [write_table(self._path("immunity.tsv"), frame, meta)]

    def cmd_validate(self, manifest: RunManifest) -> List[str]:
        """
        Run every acceptance check and write text and JSON reports.

        Raises:
            ValidationFailure: after the reports are written, if any check failed
        """
        cfg = self.config
        fault = cfg["validate"]["inject_fault"]
        filters, oracle, noise_cfg = cfg["filters"], cfg["oracle"], cfg["noise"]
        report = ValidationReport(cfg.config_hash, fault)

        base, jacobian, noise, C = self._noise_stages(manifest)
        if fault == "covariance_asymmetry":
            skew = np.triu(np.full((C.size, C.size), 1e-3 * np.abs(C.matrix).max()), k=1)
            C_checked = CovarianceMatrix(C.matrix + skew, C.mean)
        else:
            C_checked = C
        factor = 1.0 if fault == "wirtinger_factor" else 0.5

        with manifest.stage("checks"):
            report.add(validation.check_shot_noise(base.input_field, factor))
            report.add(validation.check_covariance(C_checked))
            report.add(validation.check_jacobian_convergence(jacobian))
            report.add(validation.check_bilinearity(jacobian, noise, C, filters["seed"]))
            report.add(validation.check_linear_loss_law(base.channel_mean, noise_cfg["pump_fano"]))
            report.add(validation.check_soliton(cfg["validate"]["soliton_samples"]))
            report.add(validation.check_conservation(base.input_field, base.output_field, cfg.fiber().is_lossless))

            curve = self._min_noise_curve(C)
            report.add(validation.check_squeezing(curve, noise_cfg["pump_fano"]))
            report.add(
                validation.check_immunity(
                    jacobian,
                    base.input_spectrum,
                    base.channel_mean,
                    cfg["immunity"]["transmission"],
                    cfg["validate"]["immunity_tolerance"],
                    filters["restarts"],
                    filters["seed"],
                    self.threads,
                    occupied_threshold=noise_cfg["occupied_threshold"],
                    perturbations=filters["perturbations"],
                )
            )
            report.add(validation.check_pair_immunity(C))
            report.add(validation.check_random_filters(C, filters["n_random"], filters["seed"], filters["max_block"]))
            report.add(validation.check_determinism(C, filters["seed"], cfg["immunity"]["transmission"]))

        if cfg["validate"]["run_oracle"]:
            with manifest.stage("oracle"):
                report.add(
                    validation.check_linear_loss_oracle(
                        noise_cfg["pump_fano"], oracle["n_samples"], oracle["seed"], self.threads
                    )
                )
                masks = self._oracle_masks(curve, C, oracle["n_masks"], filters["seed"])
                report.add(
                    validation.check_oracle_agreement(
                        base.system,
                        base.input_field,
                        noise,
                        jacobian,
                        masks,
                        base.binning.expand,
                        oracle["n_samples"],
                        oracle["seed"],
                        self.threads,
                    )
                )

        outputs = []
        for name, text in (("validation_report.txt", report.to_text()), ("validation_report.json", report.to_json())):
            path = self._path(name)
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(text)
            outputs.append(path)
        logger.info(f"Wrote validation reports to {self.out_dir}")
        manifest.outputs = outputs

        if not report.passed:
            names = ", ".join(check.name for check in report.failures)
            raise ValidationFailure(f"{len(report.failures)} check(s) failed: {names}")
        return outputs

    @staticmethod
    def _oracle_masks(curve, C: CovarianceMatrix, count: int, seed: int) -> List[np.ndarray]:
        """Optimized masks spread over the transmission grid, topped up with random ones."""
        optimized = [r.mask.t for _, r in curve if r is not None]
        if optimized:
            picks = np.unique(np.linspace(0, len(optimized) - 1, min(count, len(optimized))).round().astype(int))
            masks = [optimized[k] for k in picks]
        else:
            masks = []
        if len(masks) < count:
            masks += [r.mask.t for r in random_filter_sweep(C, count - len(masks), seed)]
        return masks
