import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.constants import hbar, pi

from src.exceptions import InvalidArgumentError, PulseClippedError
from src.field import (
    Field,
    PulseSpec,
    SpectralField,
    average_power_from_peak,
    focused_intensity,
    from_spectrum,
    make_grid,
    peak_power_from_average,
    photon_count,
    photon_numbers,
    synthesize_pulse,
    to_spectrum,
)


def test_grid_spacing():
    grid = make_grid(4096, 10e-12, 1560e-9)
    assert grid.dt == pytest.approx(2.441e-15, rel=1e-3)
    assert grid.bin_spacing == pytest.approx(2 * pi * 0.1e12)
    assert grid.times[grid.n_samples // 2] == 0.0
    assert grid.detunings[0] == 0.0


@pytest.mark.parametrize(
    "n, window, wavelength",
    [(1000, 1e-12, 1560e-9), (1, 1e-12, 1560e-9), (256, 0.0, 1560e-9), (256, 1e-12, -1.0)],
)
def test_grid_rejects_bad_arguments(n, window, wavelength):
    with pytest.raises(InvalidArgumentError):
        make_grid(n, window, wavelength)


def test_grid_axes_are_read_only(grid):
    with pytest.raises(ValueError):
        grid.detunings[0] = 1.0


def test_wavelengths_track_detuning(grid):
    order = np.argsort(grid.detunings)
    wavelengths = grid.wavelengths[order]
    assert np.all(np.diff(wavelengths) < 0)
    assert grid.wavelengths[0] == pytest.approx(1560e-9)


def test_sech_pulse_photon_number_matches_energy():
    grid = make_grid(4096, 10e-12, 1560e-9)
    spec = PulseSpec("sech", 1000.0, 100e-15, 1560e-9)
    field = synthesize_pulse(spec, grid)
    expected = 2 * spec.peak_power * spec.scale_time / (hbar * grid.carrier_frequency)
    assert field.total_photons == pytest.approx(expected, rel=1e-3)


def test_gaussian_energy():
    spec = PulseSpec("gaussian", 500.0, 150e-15, 1560e-9)
    assert spec.energy == pytest.approx(np.sqrt(pi) * 500.0 * spec.scale_time)


def test_pulse_peak_power(pulse, pulse_spec):
    assert pulse.power.max() == pytest.approx(pulse_spec.peak_power, rel=1e-9)


def test_pulse_clipped_by_short_window(pulse_spec):
    grid = make_grid(256, 1e-12, 1560e-9)
    with pytest.raises(PulseClippedError):
        synthesize_pulse(pulse_spec, grid)


def test_pulse_carrier_must_match_grid(grid):
    spec = PulseSpec("sech", 100.0, 200e-15, 1550e-9)
    with pytest.raises(InvalidArgumentError):
        synthesize_pulse(spec, grid)


def test_unknown_pulse_shape():
    with pytest.raises(InvalidArgumentError):
        PulseSpec("square", 1.0, 100e-15, 1560e-9)


def test_single_bin_photon_numbers(grid):
    amplitudes = np.zeros(grid.n_samples, dtype=complex)
    amplitudes[5] = 2.0
    numbers = photon_numbers(SpectralField(grid, amplitudes))
    assert numbers[5] == pytest.approx(4.0)
    assert numbers.sum() == pytest.approx(4.0)


def test_spectrum_is_unitary(pulse):
    spectrum = to_spectrum(pulse)
    assert spectrum.total_photons == pytest.approx(pulse.total_photons, rel=1e-12)
    assert_allclose(from_spectrum(spectrum).samples, pulse.samples, atol=1e-9 * np.abs(pulse.samples).max())


def test_field_rejects_wrong_shape(grid):
    with pytest.raises(InvalidArgumentError):
        Field(grid, np.zeros(grid.n_samples + 1))


def test_field_rejects_non_finite(grid):
    samples = np.zeros(grid.n_samples, dtype=complex)
    samples[0] = np.nan
    with pytest.raises(InvalidArgumentError):
        Field(grid, samples)


def test_frequency_resolved_count_weights_blue_bins_down(grid):
    amplitudes = np.zeros(grid.n_samples, dtype=complex)
    amplitudes[10] = 1.0
    sf = SpectralField(grid, amplitudes)
    assert photon_count(sf) == pytest.approx(1.0)
    assert photon_count(sf, frequency_resolved=True) < 1.0


def test_average_and_peak_power_round_trip():
    peak = peak_power_from_average("sech", 0.1, 50e6, 200e-15)
    spec = PulseSpec("sech", peak, 200e-15, 1560e-9)
    assert average_power_from_peak(spec, 50e6) == pytest.approx(0.1)


def test_peak_power_from_average_rejects_bad_rate():
    with pytest.raises(InvalidArgumentError):
        peak_power_from_average("sech", 0.1, 0.0, 200e-15)


def test_focused_intensity():
    intensity = focused_intensity(1e3, 1560e-9)
    assert intensity == pytest.approx(1e3 / (pi * (1560e-9) ** 2 / 4))
    # about 0.05 TW/cm^2 for a kilowatt at 1560 nm
    assert intensity * 1e-16 == pytest.approx(0.0523, rel=1e-2)


def test_focused_intensity_rejects_negative_power():
    with pytest.raises(InvalidArgumentError):
        focused_intensity(-1.0, 1560e-9)
