"""Directed link prediction benchmark: splits, models, training, analysis."""

from .analysis import check_expressiveness, degree_histograms, reconstruct_topm
from .graph import DataError, DirectedGraph, graph_stats, load_edge_list, preprocess
from .metrics import MetricsReport
from .splits import DEFAULT_SEEDS, FeatureInit, SplitBundle, init_features, split_edges
from .training import TrainConfig, TrainingError, evaluate, grid_run, train

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DEFAULT_SEEDS",
    "DirectedGraph",
    "FeatureInit",
    "MetricsReport",
    "SplitBundle",
    "TrainConfig",
    "TrainingError",
    "check_expressiveness",
    "degree_histograms",
    "evaluate",
    "graph_stats",
    "grid_run",
    "init_features",
    "load_edge_list",
    "preprocess",
    "reconstruct_topm",
    "split_edges",
    "train",
]
