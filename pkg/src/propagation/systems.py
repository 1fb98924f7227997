"""
Deterministic input -> output maps handed to the Jacobian engine and the oracle.

Every system is a small picklable object with ``__call__(Field) -> Field`` so it
can be shipped to worker processes.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from src.exceptions import InvalidArgumentError
from src.field import Field, SpectralField, from_spectrum, to_spectrum
from src.propagation.fiber import FiberParams, SolverOptions
from src.propagation.gnlse import propagate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IdentitySystem:
    def __call__(self, field: Field) -> Field:
        return field


@dataclass(frozen=True)
class FiberSystem:
    """Nonlinear fiber propagation."""

    fiber: FiberParams
    options: SolverOptions = field(default_factory=SolverOptions)

    def __call__(self, field: Field) -> Field:
        return propagate(field, self.fiber, self.options)


@dataclass(frozen=True)
class BeamSplitterSystem:
    """
    Frequency-independent linear loss as a unitary two-port.

    Spectral bins 0..n/2-1 are the signal modes, bins n/2..n-1 the loss port;
    signal bin k mixes with port bin k + n/2 with intensity transmission eta.
    Observables should only read the signal half.
    """

    eta: float

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise InvalidArgumentError(f"eta must lie in [0, 1], got {self.eta}")

    def __call__(self, field: Field) -> Field:
        amplitudes = to_spectrum(field).amplitudes
        half = amplitudes.size // 2
        signal, port = amplitudes[:half], amplitudes[half:]
        t, r = np.sqrt(self.eta), np.sqrt(1 - self.eta)
        mixed = np.concatenate([t * signal + r * port, -r * signal + t * port])
        return from_spectrum(SpectralField(field.grid, mixed))
