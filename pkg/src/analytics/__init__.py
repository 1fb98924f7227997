from src.analytics.filter_analyzer import (
    FilterMask,
    FilterResult,
    ImmunityPoint,
    PairNoiseMap,
    filter_noise,
    filtered_peak_power,
    linear_loss_fano,
    min_noise_curve,
    noise_immunity_scan,
    optimize_filter,
    pair_noise_map,
    random_filter_sweep,
    relaxed_transmission,
)

__all__ = [
    "FilterMask",
    "FilterResult",
    "ImmunityPoint",
    "PairNoiseMap",
    "filter_noise",
    "filtered_peak_power",
    "linear_loss_fano",
    "min_noise_curve",
    "noise_immunity_scan",
    "optimize_filter",
    "pair_noise_map",
    "random_filter_sweep",
    "relaxed_transmission",
]
