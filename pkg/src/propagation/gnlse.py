import logging
from typing import List, Sequence

import numpy as np
import scipy.fft
from tqdm import tqdm

import config
from src.exceptions import (
    NoiseToolkitError,
    NumericalBlowupError,
    PropagationError,
    SpectralAliasingError,
)
from src.field import Field, Grid, PulseSpec, photon_numbers, synthesize_pulse, to_spectrum
from src.propagation.fiber import FiberParams, SolverOptions, raman_response

logger = logging.getLogger(__name__)


class _Operators:
    """Step-independent arrays for one (grid, fiber, step) combination."""

    def __init__(self, grid: Grid, fiber: FiberParams, dz: float):
        omega = grid.detunings
        linear = 1j * (fiber.beta2 / 2 * omega**2 + fiber.beta3 / 6 * omega**3) - fiber.loss_alpha / 2
        self.half_step = np.exp(linear * dz / 2)
        self.full_step = np.exp(linear * dz)
        self.dz = dz
        self.gamma = fiber.gamma
        self.raman_fraction = fiber.raman_fraction

        if fiber.self_steepening:
            self.shock = 1.0 + omega / grid.carrier_frequency
        else:
            self.shock = None

        if fiber.raman_fraction > 0:
            # causal sampling: t = m dt for the first half of the buffer, zero afterwards
            lags = np.arange(grid.n_samples) * grid.dt
            h = raman_response(lags, fiber)
            h[grid.n_samples // 2:] = 0.0
            h /= h.sum() * grid.dt
            self.raman_kernel = scipy.fft.fft(h) * grid.dt
        else:
            self.raman_kernel = None

        self.kerr_only = self.raman_kernel is None and self.shock is None

    def nonlinear_rhs(self, spectrum: np.ndarray) -> np.ndarray:
        envelope = scipy.fft.fft(spectrum, norm="ortho")
        intensity = np.abs(envelope) ** 2
        if self.raman_kernel is not None:
            delayed = scipy.fft.ifft(scipy.fft.fft(intensity) * self.raman_kernel).real
            response = (1 - self.raman_fraction) * intensity + self.raman_fraction * delayed
        else:
            response = intensity
        term = scipy.fft.ifft(envelope * response, norm="ortho")
        if self.shock is not None:
            term = term * self.shock
        return 1j * self.gamma * term

    def nonlinear_step(self, spectrum: np.ndarray) -> np.ndarray:
        if self.kerr_only:
            # pure SPM is solved exactly in the time domain
            envelope = scipy.fft.fft(spectrum, norm="ortho")
            envelope = envelope * np.exp(1j * self.gamma * np.abs(envelope) ** 2 * self.dz)
            return scipy.fft.ifft(envelope, norm="ortho")

        h = self.dz
        k1 = self.nonlinear_rhs(spectrum)
        k2 = self.nonlinear_rhs(spectrum + 0.5 * h * k1)
        k3 = self.nonlinear_rhs(spectrum + 0.5 * h * k2)
        k4 = self.nonlinear_rhs(spectrum + h * k3)
        return spectrum + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def edge_energy_fraction(spectrum: np.ndarray, grid: Grid, edge_fraction: float) -> float:
    """Share of spectral energy in the outer ``edge_fraction`` of the frequency window."""
    energy = np.abs(spectrum) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    limit = (1 - 2 * edge_fraction) * np.abs(grid.detunings).max()
    return float(energy[np.abs(grid.detunings) >= limit].sum() / total)


def _monitor(spectrum: np.ndarray, grid: Grid, opts: SolverOptions, z: float):
    if not np.all(np.isfinite(spectrum)):
        raise NumericalBlowupError(f"non-finite field at z = {z:.4g} m")
    fraction = edge_energy_fraction(spectrum, grid, opts.edge_fraction)
    if fraction > opts.edge_tolerance:
        raise SpectralAliasingError(z, fraction, opts.edge_tolerance)
    return fraction


def propagate(field: Field, fiber: FiberParams, opts: SolverOptions = SolverOptions()) -> Field:
    """
    Integrate the GNLSE over the fiber length with symmetric split-step.

    The field is converted from photon amplitudes to sqrt(W), stepped in the
    frequency domain (exact dispersion/loss half-steps around an RK4 nonlinear
    step, or exact SPM when neither Raman nor shock is active) and converted back.

    Raises:
        SpectralAliasingError: spectral energy reached the window edge
        NumericalBlowupError: the field stopped being finite
    """
    grid = field.grid
    n_steps = opts.steps_for(fiber.length)
    dz = fiber.length / n_steps
    ops = _Operators(grid, fiber, dz)

    scale = np.sqrt(grid.photon_energy / grid.dt)
    spectrum = scipy.fft.ifft(field.samples * scale, norm="ortho")
    _monitor(spectrum, grid, opts, 0.0)

    spectrum = ops.half_step * spectrum
    for step in range(n_steps):
        spectrum = ops.nonlinear_step(spectrum)
        last = step == n_steps - 1
        spectrum = (ops.half_step if last else ops.full_step) * spectrum
        if last or (step + 1) % opts.monitor_every == 0:
            fraction = _monitor(spectrum, grid, opts, (step + 1) * dz)
            logger.debug(f"z = {(step + 1) * dz:.4g} m, edge fraction {fraction:.2e}")

    return Field(grid, scipy.fft.fft(spectrum, norm="ortho") / scale)


def check_step_convergence(field: Field, fiber: FiberParams, opts: SolverOptions) -> dict:
    """
    Step-halving study: propagate with n, 2n and 4n steps plus a 16n reference.

    Returns the L2 errors of the n and 2n runs against the reference, their
    ratio (about 4 for a second-order scheme) and whether the 2n error meets
    ``opts.tolerance`` relative to the field norm.
    """
    reference = propagate(field, fiber, opts.refined(16)).samples
    coarse = propagate(field, fiber, opts).samples
    fine = propagate(field, fiber, opts.refined(2)).samples
    norm = np.linalg.norm(reference)
    err_coarse = np.linalg.norm(coarse - reference) / norm
    err_fine = np.linalg.norm(fine - reference) / norm
    ratio = err_coarse / err_fine if err_fine > 0 else np.inf
    logger.info(f"Step halving: error {err_coarse:.3e} -> {err_fine:.3e} (ratio {ratio:.2f})")
    return {
        "error_coarse": float(err_coarse),
        "error_fine": float(err_fine),
        "ratio": float(ratio),
        "converged": bool(err_fine <= opts.tolerance),
    }


def spectrum_vs_power(
    spec: PulseSpec,
    grid: Grid,
    fiber: FiberParams,
    peak_powers: Sequence[float],
    opts: SolverOptions = SolverOptions(),
) -> np.ndarray:
    """
    Output photon-number spectra for a list of input peak powers.

    Returns:
        np.ndarray: shape (len(peak_powers), n_samples), natural DFT order
    """
    spectra: List[np.ndarray] = []
    for power in tqdm(peak_powers, desc="power sweep", disable=not config.SHOW_PROGRESS):
        pulse = synthesize_pulse(spec.with_peak_power(power), grid)
        if power == 0:
            spectra.append(photon_numbers(to_spectrum(pulse)))
            continue
        try:
            output = propagate(pulse, fiber, opts)
        except NoiseToolkitError as e:
            logger.error(f"Propagation failed at peak power {power:.4g} W: {e}")
            raise PropagationError(f"propagation failed at peak power {power:.4g} W", e) from e
        spectra.append(photon_numbers(to_spectrum(output)))
    return np.array(spectra)
