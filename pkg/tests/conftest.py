import numpy as np
import pytest

import config
from src.field import PulseSpec, SpectralField, from_spectrum, make_grid, synthesize_pulse
from src.propagation import FiberParams
from src.sensitivity import CovarianceMatrix


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Keep the run registry and outputs inside the test's tmp_path."""
    monkeypatch.setattr(config, "DATABASE_PATH", str(tmp_path / "registry.db"))
    monkeypatch.setattr(config, "OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setattr(config, "SHOW_PROGRESS", False)


@pytest.fixture
def grid():
    return make_grid(256, 4e-12, 1560e-9)


@pytest.fixture
def pulse_spec():
    return PulseSpec("sech", 1000.0, 200e-15, 1560e-9)


@pytest.fixture
def pulse(pulse_spec, grid):
    return synthesize_pulse(pulse_spec, grid)


@pytest.fixture
def short_fiber():
    return FiberParams(length=0.01)


@pytest.fixture
def single_bin_field():
    """All photons (10^6) in spectral bin 3 of a 64-sample grid."""
    g = make_grid(64, 1e-12, 1560e-9)
    amplitudes = np.zeros(64, dtype=complex)
    amplitudes[3] = 1e3
    return from_spectrum(SpectralField(g, amplitudes))


@pytest.fixture
def coherent_covariance():
    mean = np.array([100.0, 250.0, 50.0, 400.0, 200.0, 0.0, 75.0, 125.0])
    return CovarianceMatrix(np.diag(mean), mean)


@pytest.fixture
def random_covariance():
    """A valid covariance with strong anticorrelations, built as rows of a random Jacobian."""
    rng = np.random.default_rng(12)
    rows = rng.normal(size=(24, 60)) + 1j * rng.normal(size=(24, 60))
    rows[1::2] -= 0.9 * rows[0::2]
    matrix = (rows @ rows.conj().T).real
    mean = np.abs(rng.normal(loc=400.0, scale=50.0, size=24))
    return CovarianceMatrix(0.5 * (matrix + matrix.T), mean)
