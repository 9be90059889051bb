"""Python bindings for the metaul clustering toolkit.

Partitions are passed as per-item integer label lists; point sets as 2-D
float arrays with one row per point.
"""

from ._metaul import (
    DataError,
    IoError,
    adjusted_rand_index,
    agglomerative,
    algo_select_experiment,
    cli,
    clustering_loss,
    fit_meta_scale,
    fit_threshold,
    generalization_bound,
    kmeans,
    meta_k_experiment,
    outlier_indices,
    rand_index,
    silhouette_score,
    single_linkage_threshold,
    synthetic_repository,
)

__all__ = [
    "DataError",
    "IoError",
    "adjusted_rand_index",
    "agglomerative",
    "algo_select_experiment",
    "cli",
    "clustering_loss",
    "fit_meta_scale",
    "fit_threshold",
    "generalization_bound",
    "kmeans",
    "meta_k_experiment",
    "outlier_indices",
    "rand_index",
    "silhouette_score",
    "single_linkage_threshold",
    "synthetic_repository",
]
