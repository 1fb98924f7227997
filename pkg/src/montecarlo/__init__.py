from src.montecarlo.oracle import McConfig, McStatistics, mc_statistics, sample_input

__all__ = ["McConfig", "McStatistics", "mc_statistics", "sample_input"]
