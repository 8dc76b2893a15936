"""Posterior summaries and cohort-level statistics."""

from .clustering import hierarchical_cluster, linkage_merges, rand_index
from .groups import (
    DISEASE,
    HEALTHY,
    PathologyResult,
    TestReport,
    boxplot_table,
    classify_pathology,
    confusion_metrics,
    group_tests,
    pathology_test,
)
from .kde import DEFAULT_BANDWIDTH, MapEstimate, WhitenedKDE, kde_log_density, map_estimate
from .stats import (
    DegenerateTiesError,
    average_ranks,
    bh_adjust,
    boxplot_stats,
    chi2_sf,
    energy_score,
    energy_scores_by_observable,
    kruskal_wallis,
    quantile,
)

__all__ = [
    "DEFAULT_BANDWIDTH", "DISEASE", "HEALTHY", "DegenerateTiesError", "MapEstimate", "PathologyResult",
    "TestReport", "WhitenedKDE", "average_ranks", "bh_adjust", "boxplot_stats", "boxplot_table",
    "chi2_sf", "classify_pathology", "confusion_metrics", "energy_score", "energy_scores_by_observable",
    "group_tests", "hierarchical_cluster", "kde_log_density", "kruskal_wallis", "linkage_merges",
    "map_estimate", "pathology_test", "quantile", "rand_index",
]
