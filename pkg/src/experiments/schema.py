"""
Experiment configuration: YAML sections of unit-suffixed keys, converted to
SI and checked against the toolkit's own constructors at load time.
"""

import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import yaml

from src.exceptions import ConfigError, InvalidArgumentError
from src.field import Grid, PulseSpec, make_grid, peak_power_from_average
from src.propagation import FiberParams, SolverOptions
from utils.units import convert, dimension_of, split_unit

logger = logging.getLogger(__name__)

FAULTS = ("none", "wirtinger_factor", "covariance_asymmetry")

# section -> quantity -> (dimension or None, default in SI, python type)
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "grid": {
        "n_samples": (None, 2048, int),
        "time_window": ("time", 8e-12, float),
        "center_wavelength": ("length", 1560e-9, float),
    },
    "pulse": {
        "shape": (None, "sech", str),
        "duration_fwhm": ("time", 200e-15, float),
        "peak_power": ("power", None, float),
        "average_power": ("power", 0.1, float),
        "repetition_rate": ("frequency", 50e6, float),
    },
    "fiber": {
        "length": ("length", 1.0, float),
        "beta2": ("gvd", -22e-27, float),
        "beta3": ("tod", 0.1e-39, float),
        "gamma": ("nonlinearity", 1.8e-3, float),
        "raman_fraction": (None, 0.18, float),
        "raman_tau1": ("time", 12.2e-15, float),
        "raman_tau2": ("time", 32e-15, float),
        "self_steepening": (None, True, bool),
        "loss": ("loss", 0.0, float),
    },
    "solver": {
        "n_steps": (None, 1000, int),
        "max_step": ("length", None, float),
        "tolerance": (None, 1e-6, float),
        "monitor_every": (None, 50, int),
        "edge_fraction": (None, 1 / 16, float),
        "edge_tolerance": (None, 1e-6, float),
    },
    "noise": {
        "pump_fano": (None, 10.0, float),
        "occupied_threshold": (None, 1e-4, float),
    },
    "sensitivity": {
        "n_bins": (None, 128, int),
        "band_floor": ("decibel", -40.0, float),
        "probe_step": (None, None, float),
        "prescan_stride": (None, 4, int),
        "prune_threshold": (None, 1e-6, float),
        "verify_stride": (None, 8, int),
    },
    "spectrum": {
        "average_powers": ("power", [0.0, 0.02, 0.04, 0.06, 0.08, 0.1, 0.12], list),
    },
    "filters": {
        "seed": (None, 1, int),
        "n_random": (None, 2000, int),
        "max_block": (None, None, int),
        "transmissions": (None, [round(0.05 * k, 2) for k in range(1, 21)], list),
        "restarts": (None, 32, int),
        "perturbations": (None, 8, int),
    },
    "pairs": {
        "n_report": (None, 10, int),
    },
    "immunity": {
        "fano_levels": (None, [1.0, 10.0, 100.0, 316.0], list),
        "transmission": (None, 0.5, float),
    },
    "oracle": {
        "seed": (None, 7, int),
        "n_samples": (None, 10000, int),
        "n_masks": (None, 5, int),
        "noise_scale": (None, 1.0, float),
    },
    "validate": {
        "inject_fault": (None, "none", str),
        "run_oracle": (None, True, bool),
        "soliton_samples": (None, 1024, int),
        "immunity_tolerance": ("decibel", 1.0, float),
    },
}


def _coerce(field: str, value: Any, kind: type) -> Any:
    if value is None:
        return None
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError(field, f"expected true/false, got {value!r}")
        return value
    if kind is int:
        try:
            integral = not isinstance(value, bool) and float(value).is_integer()
        except (TypeError, ValueError):
            integral = False
        if not integral:
            raise ConfigError(field, f"expected an integer, got {value!r}")
        return int(value)
    if kind is float:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(field, f"expected a number, got {value!r}")
    if kind is list:
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(field, "expected a non-empty list")
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError(field, f"expected a list of numbers, got {value!r}")
    return str(value)


def _parse_section(section: str, raw: Dict[str, Any]) -> Dict[str, Any]:
    schema = SCHEMA[section]
    values = {name: copy.deepcopy(spec[1]) for name, spec in schema.items()}
    seen = {}
    for key, value in (raw or {}).items():
        field = f"{section}.{key}"
        name, unit = split_unit(str(key))
        if name not in schema:
            raise ConfigError(field, "unknown key")
        dimension, _, kind = schema[name]
        if dimension_of(unit) != dimension:
            expected = "no unit suffix" if dimension is None else f"a {dimension} unit suffix"
            raise ConfigError(field, f"expected {expected}")
        if name in seen:
            raise ConfigError(field, f"duplicates {section}.{seen[name]}")
        seen[name] = key
        if unit is not None and value is not None:
            value = convert(value, unit)
        values[name] = _coerce(field, value, kind)
    return values


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Parsed experiment configuration; every value is in SI units."""

    sections: Dict[str, Dict[str, Any]]
    source: Optional[str] = None

    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.sections[section]

    def grid(self) -> Grid:
        g = self["grid"]
        return make_grid(g["n_samples"], g["time_window"], g["center_wavelength"])

    def pulse_spec(self) -> PulseSpec:
        p = self["pulse"]
        peak = p["peak_power"]
        if peak is None:
            peak = peak_power_from_average(p["shape"], p["average_power"], p["repetition_rate"], p["duration_fwhm"])
        return PulseSpec(p["shape"], peak, p["duration_fwhm"], self["grid"]["center_wavelength"])

    def peak_powers(self) -> list:
        """Peak powers (W) for the configured average-power sweep."""
        p = self["pulse"]
        return [
            peak_power_from_average(p["shape"], avg, p["repetition_rate"], p["duration_fwhm"])
            for avg in self["spectrum"]["average_powers"]
        ]

    def fiber(self) -> FiberParams:
        f = self["fiber"]
        return FiberParams(
            length=f["length"],
            beta2=f["beta2"],
            beta3=f["beta3"],
            gamma=f["gamma"],
            raman_fraction=f["raman_fraction"],
            raman_tau1=f["raman_tau1"],
            raman_tau2=f["raman_tau2"],
            self_steepening=f["self_steepening"],
            loss_alpha=f["loss"],
        )

    def solver(self) -> SolverOptions:
        s = self["solver"]
        return SolverOptions(
            n_steps=s["n_steps"],
            max_step=s["max_step"],
            tolerance=s["tolerance"],
            monitor_every=s["monitor_every"],
            edge_fraction=s["edge_fraction"],
            edge_tolerance=s["edge_tolerance"],
        )

    def _digest(self, sections) -> str:
        canonical = json.dumps({k: self.sections[k] for k in sections}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @property
    def config_hash(self) -> str:
        return self._digest(sorted(self.sections))

    @property
    def physics_hash(self) -> str:
        """Hash of everything the classical mean field and the Jacobian depend on."""
        return self._digest(["grid", "pulse", "fiber", "solver", "sensitivity"])

    @property
    def seeds(self) -> Dict[str, int]:
        return {section: values["seed"] for section, values in self.sections.items() if "seed" in values}


def _check(config: ExperimentConfig):
    """Build every physical object once so constraint violations surface as ConfigErrors."""
    builders = (
        ("grid", config.grid),
        ("pulse", config.pulse_spec),
        ("fiber", config.fiber),
        ("solver", config.solver),
    )
    for section, build in builders:
        try:
            build()
        except InvalidArgumentError as e:
            raise ConfigError(section, str(e)) from e

    noise = config["noise"]
    if noise["pump_fano"] < 1:
        raise ConfigError("noise.pump_fano", "must be >= 1")
    if not 0 < noise["occupied_threshold"] < 1:
        raise ConfigError("noise.occupied_threshold", "must lie in (0, 1)")

    sens = config["sensitivity"]
    if not 1 <= sens["n_bins"] <= config["grid"]["n_samples"]:
        raise ConfigError("sensitivity.n_bins", "must lie in 1..grid.n_samples")
    if sens["band_floor"] >= 0:
        raise ConfigError("sensitivity.band_floor_db", "must be negative")
    if sens["prescan_stride"] < 1 or sens["verify_stride"] < 0:
        raise ConfigError("sensitivity", "prescan_stride must be >= 1 and verify_stride >= 0")
    if sens["probe_step"] is not None and sens["probe_step"] <= 0:
        raise ConfigError("sensitivity.probe_step", "must be positive")

    if any(p < 0 for p in config["spectrum"]["average_powers"]):
        raise ConfigError("spectrum.average_powers_mw", "powers must be >= 0")

    filters = config["filters"]
    if filters["n_random"] < 1:
        raise ConfigError("filters.n_random", "must be >= 1")
    if filters["restarts"] < 0:
        raise ConfigError("filters.restarts", "must be >= 0")
    if filters["perturbations"] < 0:
        raise ConfigError("filters.perturbations", "must be >= 0")
    if not all(0 < t <= 1 for t in filters["transmissions"]):
        raise ConfigError("filters.transmissions", "entries must lie in (0, 1]")

    immunity = config["immunity"]
    if any(level < 1 for level in immunity["fano_levels"]):
        raise ConfigError("immunity.fano_levels", "levels must be >= 1")
    if not 0 < immunity["transmission"] <= 1:
        raise ConfigError("immunity.transmission", "must lie in (0, 1]")

    oracle = config["oracle"]
    if oracle["n_samples"] < 3:
        raise ConfigError("oracle.n_samples", "must be >= 3")
    if oracle["n_masks"] < 1:
        raise ConfigError("oracle.n_masks", "must be >= 1")

    validate = config["validate"]
    if validate["inject_fault"] not in FAULTS:
        raise ConfigError("validate.inject_fault", f"must be one of {FAULTS}")
    soliton = validate["soliton_samples"]
    if soliton < 2 or soliton & (soliton - 1):
        raise ConfigError("validate.soliton_samples", "must be a power of two >= 2")


def parse_config(
    raw: Optional[Dict[str, Any]],
    overrides: Optional[Dict[str, Any]] = None,
    source: Optional[str] = None,
) -> ExperimentConfig:
    """
    Convert a raw section mapping to an ExperimentConfig.

    ``overrides`` accepts ``seed`` (every ``*.seed``), ``n_bins`` and any
    ``section.key`` already in SI units.
    """
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(source or "config", "top level must be a mapping of sections")
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(str(section), "unknown section")
        if body is not None and not isinstance(body, dict):
            raise ConfigError(str(section), "section must be a mapping of key: value pairs")

    sections = {section: _parse_section(section, raw.get(section)) for section in SCHEMA}

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            for body in sections.values():
                if "seed" in body:
                    body["seed"] = int(value)
        elif key == "n_bins":
            sections["sensitivity"]["n_bins"] = int(value)
        else:
            section, _, name = key.partition(".")
            if section not in SCHEMA or name not in SCHEMA[section]:
                raise ConfigError(key, "unknown override")
            sections[section][name] = _coerce(key, value, SCHEMA[section][name][2])

    config = ExperimentConfig(sections, source)
    _check(config)
    return config


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Read a YAML experiment config.

    Raises:
        ConfigError: unreadable file, YAML syntax error (with line), unknown
            key or unit, or a violated constraint
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except OSError as e:
        raise ConfigError(path, f"cannot read config: {e.strerror}") from e
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark is not None else path
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(where, f"YAML syntax error: {problem}") from e

    config = parse_config(raw, overrides, source=path)
    logger.info(f"Loaded config {path} (hash {config.config_hash})")
    return config
