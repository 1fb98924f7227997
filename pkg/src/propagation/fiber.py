import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.exceptions import InvalidArgumentError, NotApplicableError
from src.field.pulses import PulseSpec

logger = logging.getLogger(__name__)

# Standard fused-silica values around 1560 nm
SILICA_BETA2 = -22e-27  # s^2/m  (-22 ps^2/km)
SILICA_BETA3 = 0.1e-39  # s^3/m  (0.1 ps^3/km)
SILICA_GAMMA = 1.8e-3  # 1/(W m)  (1.8 /W/km)
SILICA_RAMAN_FRACTION = 0.18
SILICA_RAMAN_TAU1 = 12.2e-15
SILICA_RAMAN_TAU2 = 32e-15


@dataclass(frozen=True)
class FiberParams:
    """Parameters of the GNLSE, all in SI units."""

    length: float
    beta2: float = SILICA_BETA2
    beta3: float = SILICA_BETA3
    gamma: float = SILICA_GAMMA
    raman_fraction: float = SILICA_RAMAN_FRACTION
    raman_tau1: float = SILICA_RAMAN_TAU1
    raman_tau2: float = SILICA_RAMAN_TAU2
    self_steepening: bool = True
    loss_alpha: float = 0.0

    def __post_init__(self):
        if not self.length > 0:
            raise InvalidArgumentError(f"fiber length must be positive, got {self.length}")
        if not self.gamma >= 0:
            raise InvalidArgumentError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 <= self.raman_fraction < 1:
            raise InvalidArgumentError(f"raman_fraction must lie in [0, 1), got {self.raman_fraction}")
        if self.raman_fraction > 0 and not (self.raman_tau1 > 0 and self.raman_tau2 > 0):
            raise InvalidArgumentError("raman_tau1 and raman_tau2 must be positive")
        if not self.loss_alpha >= 0:
            raise InvalidArgumentError(f"loss_alpha must be >= 0, got {self.loss_alpha}")

    @property
    def is_lossless(self) -> bool:
        return self.loss_alpha == 0

    def dispersion_length(self, scale_time: float) -> float:
        return scale_time**2 / abs(self.beta2)

    def soliton_period(self, scale_time: float) -> float:
        return math.pi / 2 * self.dispersion_length(scale_time)


@dataclass(frozen=True)
class SolverOptions:
    """
    Split-step controls.

    ``n_steps`` fixes the step count; ``max_step`` (m) raises it when the fiber
    would otherwise be crossed in longer steps. ``tolerance`` is the relative
    L2 target used by :func:`check_step_convergence`.
    """

    n_steps: int = 1000
    max_step: Optional[float] = None
    tolerance: float = 1e-6
    monitor_every: int = 50
    edge_fraction: float = 1 / 16
    edge_tolerance: float = 1e-6

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidArgumentError(f"n_steps must be a positive integer, got {self.n_steps}")
        if self.max_step is not None and not self.max_step > 0:
            raise InvalidArgumentError(f"max_step must be positive, got {self.max_step}")
        if not self.tolerance > 0:
            raise InvalidArgumentError(f"tolerance must be positive, got {self.tolerance}")
        if self.monitor_every < 1:
            raise InvalidArgumentError("monitor_every must be >= 1")
        if not 0 < self.edge_fraction < 0.5:
            raise InvalidArgumentError("edge_fraction must lie in (0, 0.5)")
        if not self.edge_tolerance > 0:
            raise InvalidArgumentError("edge_tolerance must be positive")

    def steps_for(self, length: float) -> int:
        steps = int(self.n_steps)
        if self.max_step is not None:
            steps = max(steps, int(math.ceil(length / self.max_step)))
        return steps

    def refined(self, factor: int = 2) -> "SolverOptions":
        return SolverOptions(
            n_steps=int(self.n_steps) * factor,
            max_step=None if self.max_step is None else self.max_step / factor,
            tolerance=self.tolerance,
            monitor_every=self.monitor_every * factor,
            edge_fraction=self.edge_fraction,
            edge_tolerance=self.edge_tolerance,
        )


def raman_response(t, params: FiberParams):
    """
    Causal two-timescale Raman response h_R(t) in 1/s.

    h_R(t) = (tau1^2 + tau2^2) / (tau1 tau2^2) exp(-t/tau2) sin(t/tau1) for t >= 0,
    zero before. Integrates to one over [0, inf).
    """
    tau1, tau2 = params.raman_tau1, params.raman_tau2
    t = np.asarray(t, dtype=float)
    prefactor = (tau1**2 + tau2**2) / (tau1 * tau2**2)
    positive = np.clip(t, 0.0, None)
    h = prefactor * np.exp(-positive / tau2) * np.sin(positive / tau1)
    return np.where(t >= 0, h, 0.0)


def soliton_number(pulse: PulseSpec, fiber: FiberParams) -> float:
    """N = sqrt(gamma P0 T0^2 / |beta2|) for anomalous dispersion."""
    if fiber.beta2 >= 0:
        raise NotApplicableError(
            f"soliton number needs anomalous dispersion (beta2 < 0), got beta2 = {fiber.beta2:.3e}"
        )
    return math.sqrt(fiber.gamma * pulse.peak_power * pulse.scale_time**2 / abs(fiber.beta2))


def fundamental_soliton_power(scale_time: float, fiber: FiberParams) -> float:
    """Peak power of the N = 1 soliton of scale time T0."""
    if fiber.beta2 >= 0 or fiber.gamma <= 0:
        raise NotApplicableError("fundamental solitons need beta2 < 0 and gamma > 0")
    return abs(fiber.beta2) / (fiber.gamma * scale_time**2)
