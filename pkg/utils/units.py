import logging
import math
import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Unit:
    dimension: str
    to_si: Callable[[float], float]


def _scale(factor: float) -> Callable[[float], float]:
    return lambda value: value * factor


def _db_per_km(value: float) -> float:
    # dB/km -> power attenuation coefficient in 1/m
    return value * math.log(10) / 10 / 1e3


# Key suffix -> unit; longer suffixes are tried first
UNITS: Dict[str, Unit] = {
    "fs": Unit("time", _scale(1e-15)),
    "ps": Unit("time", _scale(1e-12)),
    "ns": Unit("time", _scale(1e-9)),
    "s": Unit("time", _scale(1.0)),
    "nm": Unit("length", _scale(1e-9)),
    "um": Unit("length", _scale(1e-6)),
    "mm": Unit("length", _scale(1e-3)),
    "m": Unit("length", _scale(1.0)),
    "km": Unit("length", _scale(1e3)),
    "w": Unit("power", _scale(1.0)),
    "mw": Unit("power", _scale(1e-3)),
    "kw": Unit("power", _scale(1e3)),
    "hz": Unit("frequency", _scale(1.0)),
    "mhz": Unit("frequency", _scale(1e6)),
    "ghz": Unit("frequency", _scale(1e9)),
    "ps2_per_km": Unit("gvd", _scale(1e-27)),
    "fs2_per_mm": Unit("gvd", _scale(1e-27)),
    "ps3_per_km": Unit("tod", _scale(1e-39)),
    "per_w_km": Unit("nonlinearity", _scale(1e-3)),
    "per_w_m": Unit("nonlinearity", _scale(1.0)),
    "per_m": Unit("loss", _scale(1.0)),
    "db_per_km": Unit("loss", _db_per_km),
    "db": Unit("decibel", _scale(1.0)),
}

_SUFFIX_PATTERN = re.compile(
    r"^(?P<name>[a-z][a-z0-9_]*?)_(?P<unit>" + "|".join(sorted(UNITS, key=len, reverse=True)) + r")$"
)


def split_unit(key: str) -> Tuple[str, Optional[str]]:
    """
    Split a config key into its quantity name and unit suffix.

    Args:
        key (str): e.g. "duration_fwhm_fs" or "n_samples"

    Returns:
        tuple: ("duration_fwhm", "fs"), or (key, None) when no known suffix is present
    """
    match = _SUFFIX_PATTERN.match(key.lower())
    if match:
        return match.group("name"), match.group("unit")
    return key.lower(), None


def convert(value: Any, unit: str) -> Any:
    """Convert a scalar or a list of scalars from ``unit`` to SI."""
    converter = UNITS[unit].to_si
    if isinstance(value, (list, tuple)):
        return [converter(float(v)) for v in value]
    return converter(float(value))


def dimension_of(unit: Optional[str]) -> Optional[str]:
    return UNITS[unit].dimension if unit is not None else None
