from src.experiments.commands import COMMANDS, ExperimentRunner
from src.experiments.schema import ExperimentConfig, load_config, parse_config

__all__ = ["COMMANDS", "ExperimentConfig", "ExperimentRunner", "load_config", "parse_config"]
