"""Complier average causal effects in cluster-randomized trials."""

from ._crtiv import (
    ClusterSummary,
    CrtivError,
    Region,
    estimate,
    estimate_csv,
    identified_value,
    method_weights,
    permutation_region,
    quadratic_region,
    run_cli,
    simulate,
    summarize,
    true_cace,
    __version__,
)

__all__ = [
    "ClusterSummary",
    "CrtivError",
    "Region",
    "estimate",
    "estimate_csv",
    "identified_value",
    "method_weights",
    "permutation_region",
    "quadratic_region",
    "run_cli",
    "simulate",
    "summarize",
    "true_cace",
    "__version__",
]
