from src.field.fields import (
    Field,
    SpectralField,
    from_spectrum,
    photon_count,
    photon_numbers,
    to_spectrum,
)
from src.field.grid import Grid, make_grid
from src.field.pulses import (
    PulseSpec,
    average_power_from_peak,
    focused_intensity,
    peak_power_from_average,
    synthesize_pulse,
)

__all__ = [
    "Field",
    "Grid",
    "PulseSpec",
    "SpectralField",
    "average_power_from_peak",
    "focused_intensity",
    "from_spectrum",
    "make_grid",
    "peak_power_from_average",
    "photon_count",
    "photon_numbers",
    "synthesize_pulse",
    "to_spectrum",
]
