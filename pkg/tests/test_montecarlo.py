import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.exceptions import InvalidArgumentError, NumericalBlowupError, OracleFailureError
from src.field import PulseSpec, SpectralField, from_spectrum, make_grid, synthesize_pulse, to_spectrum
from src.montecarlo import McConfig, McStatistics, mc_statistics, sample_input
from src.montecarlo.oracle import _jackknife
from src.propagation import BeamSplitterSystem, FiberParams, FiberSystem, IdentitySystem, SolverOptions
from src.sensitivity import NoiseModel, Observable, variance_eq1, wirtinger_jacobian


class _BrokenSystem:
    def __call__(self, field):
        raise NumericalBlowupError("non-finite field")


def _bin_field(k, photons, n=64):
    grid = make_grid(n, 1e-12, 1560e-9)
    amplitudes = np.zeros(n, dtype=complex)
    amplitudes[k] = np.sqrt(photons)
    return from_spectrum(SpectralField(grid, amplitudes))


def test_coherent_single_bin_is_shot_noise_limited(single_bin_field):
    mc = McConfig(n_samples=4000, rng_seed=1, noise=NoiseModel.coherent(64), base=single_bin_field)
    stats = mc_statistics(mc, IdentitySystem(), [Observable.single_bin(3)])
    assert stats.n_samples == 4000 and stats.n_failed == 0
    assert stats.agrees_with(0, 1e6)
    # symmetric ordering adds half a photon to the mean
    assert stats.mean[0] == pytest.approx(1e6 + 0.5, abs=5 * stats.mean_se[0])


def test_beam_splitter_reproduces_linear_loss_law():
    base = _bin_field(1, 1e6)
    fano = np.ones(64)
    fano[1] = 10.0
    mc = McConfig(n_samples=4000, rng_seed=2, noise=NoiseModel(fano), base=base)
    stats = mc_statistics(mc, BeamSplitterSystem(0.5), [Observable.single_bin(1)])
    assert stats.fano[0] == pytest.approx(5.5, rel=0.1)
    assert stats.fano_se[0] == pytest.approx(stats.variance_se[0] / stats.mean[0])


def test_statistics_are_deterministic_per_seed(single_bin_field):
    mc = McConfig(n_samples=60, rng_seed=9, noise=NoiseModel.coherent(64), base=single_bin_field)
    observables = [Observable.single_bin(3), Observable.single_bin(4)]
    first = mc_statistics(mc, IdentitySystem(), observables)
    second = mc_statistics(mc, IdentitySystem(), observables)
    pooled = mc_statistics(mc, IdentitySystem(), observables, threads=2)
    assert_allclose(first.covariance, second.covariance)
    assert_allclose(first.covariance, pooled.covariance)
    assert first.covariance_se is not None


def test_covariance_errors_skipped_for_many_observables(single_bin_field):
    mc = McConfig(
        n_samples=20, rng_seed=3, noise=NoiseModel.coherent(64), base=single_bin_field, max_covariance_errors=4
    )
    stats = mc_statistics(mc, IdentitySystem(), np.eye(64)[:8])
    assert stats.covariance.shape == (8, 8)
    assert stats.covariance_se is None


def test_failing_system_is_reported(single_bin_field):
    mc = McConfig(n_samples=10, rng_seed=0, noise=NoiseModel.coherent(64), base=single_bin_field)
    with pytest.raises(OracleFailureError):
        mc_statistics(mc, _BrokenSystem(), [Observable.single_bin(3)])


def test_mc_config_validation(single_bin_field):
    with pytest.raises(InvalidArgumentError):
        McConfig(n_samples=2, rng_seed=0, noise=NoiseModel.coherent(64), base=single_bin_field)
    with pytest.raises(InvalidArgumentError):
        McConfig(n_samples=10, rng_seed=0, noise=NoiseModel.coherent(32), base=single_bin_field)
    with pytest.raises(InvalidArgumentError):
        McConfig(n_samples=10, rng_seed=0, noise=NoiseModel.coherent(64), base=single_bin_field, noise_scale=-1.0)


def test_smallest_accepted_sample_count_has_finite_errors(single_bin_field):
    mc = McConfig(n_samples=3, rng_seed=5, noise=NoiseModel.coherent(64), base=single_bin_field)
    stats = mc_statistics(mc, IdentitySystem(), [Observable.single_bin(3)])
    assert stats.n_samples == 3
    assert np.all(np.isfinite(stats.mean_se))
    assert np.all(np.isfinite(stats.variance_se))
    assert np.all(np.isfinite(stats.covariance_se))


def test_mc_rejects_mismatched_weights(single_bin_field):
    mc = McConfig(n_samples=10, rng_seed=0, noise=NoiseModel.coherent(64), base=single_bin_field)
    with pytest.raises(InvalidArgumentError):
        mc_statistics(mc, IdentitySystem(), np.ones((1, 10)))


def test_sample_input_kicks(single_bin_field):
    rng = np.random.default_rng(4)
    noise = NoiseModel.coherent(64)
    quiet = sample_input(single_bin_field, noise, rng, scale=0.0)
    assert_allclose(quiet.samples, single_bin_field.samples)

    kicks = np.array(
        [to_spectrum(sample_input(single_bin_field, noise, rng)).amplitudes[10] for _ in range(4000)]
    )
    assert np.var(kicks.real) == pytest.approx(0.25, rel=0.1)
    assert np.var(kicks.imag) == pytest.approx(0.25, rel=0.1)


def test_jackknife_matches_leave_one_out():
    rng = np.random.default_rng(6)
    values = rng.normal(size=(40, 3)) @ np.array([[1.0, 0.3, 0.0], [0.0, 1.0, -0.5], [0.0, 0.0, 2.0]])
    mean, covariance, mean_se, variance_se, covariance_se = _jackknife(values, with_covariance=True)
    assert_allclose(covariance, np.cov(values, rowvar=False))

    m = values.shape[0]
    loo = np.array([np.cov(np.delete(values, i, axis=0), rowvar=False) for i in range(m)])
    spread = np.sqrt((m - 1) / m * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    assert_allclose(covariance_se, spread, rtol=1e-8)
    assert_allclose(variance_se, np.diag(spread), rtol=1e-8)

    loo_mean = np.array([np.delete(values, i, axis=0).mean(axis=0) for i in range(m)])
    assert_allclose(mean_se, np.sqrt((m - 1) / m * np.sum((loo_mean - loo_mean.mean(axis=0)) ** 2, axis=0)))


def test_agreement_window():
    stats = McStatistics(
        mean=np.array([100.0]),
        variance=np.array([110.0]),
        covariance=np.array([[110.0]]),
        mean_se=np.array([0.1]),
        variance_se=np.array([2.0]),
        covariance_se=None,
        n_samples=100,
        n_failed=0,
    )
    assert stats.agrees_with(0, 105.0)
    assert not stats.agrees_with(0, 100.0)
    assert stats.agrees_with(0, 100.0, rel=0.1)
    assert stats.fano[0] == pytest.approx(1.1)


@pytest.mark.slow
def test_linearized_variance_matches_ensemble_through_fiber():
    grid = make_grid(256, 4e-12, 1560e-9)
    base = synthesize_pulse(PulseSpec("sech", 3000.0, 200e-15, 1560e-9), grid)
    system = FiberSystem(FiberParams(length=0.3), SolverOptions(n_steps=300))
    red = grid.detunings < 0
    observables = [Observable.filtered(red), Observable.filtered(~red)]
    noise = NoiseModel.coherent(256)

    jacobian = wirtinger_jacobian(system, base, observables)
    mc = McConfig(n_samples=2000, rng_seed=3, noise=noise, base=base)
    stats = mc_statistics(mc, system, observables)
    assert stats.n_failed == 0
    for k in range(len(observables)):
        assert stats.agrees_with(k, variance_eq1(jacobian.row(k), noise))
