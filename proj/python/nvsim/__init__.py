"""Python access to the nvsim noise, envelope and planning models."""

from ._core import (
    ConfigError,
    RegimeError,
    __version__,
    classify,
    crossover_exponent,
    default_config,
    echo_filter_bracket,
    ensemble_rate,
    envelopes,
    ffl_rate,
    optimize_tau,
    population,
    sources,
    temporal_resolution,
    theta,
    validate,
)

__all__ = [
    "ConfigError",
    "RegimeError",
    "__version__",
    "classify",
    "crossover_exponent",
    "default_config",
    "echo_filter_bracket",
    "ensemble_rate",
    "envelopes",
    "ffl_rate",
    "optimize_tau",
    "population",
    "sources",
    "temporal_resolution",
    "theta",
    "validate",
]
