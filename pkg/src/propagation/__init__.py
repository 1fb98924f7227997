from src.propagation.fiber import (
    FiberParams,
    SolverOptions,
    fundamental_soliton_power,
    raman_response,
    soliton_number,
)
from src.propagation.gnlse import (
    check_step_convergence,
    edge_energy_fraction,
    propagate,
    spectrum_vs_power,
)
from src.propagation.systems import BeamSplitterSystem, FiberSystem, IdentitySystem

__all__ = [
    "BeamSplitterSystem",
    "FiberParams",
    "FiberSystem",
    "IdentitySystem",
    "SolverOptions",
    "check_step_convergence",
    "edge_energy_fraction",
    "fundamental_soliton_power",
    "propagate",
    "raman_response",
    "soliton_number",
    "spectrum_vs_power",
]
