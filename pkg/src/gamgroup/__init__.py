"""Additive-model training with post-hoc grouped feature importance."""

from gamgroup.binning import BinMap, apply_bins, fit_bins
from gamgroup.data import Dataset, FeatureGroup, load_csv, load_groups
from gamgroup.importance import (
    ImportanceReport,
    feature_importance,
    group_importance,
    importance_report,
    naive_sum_importance,
)
from gamgroup.model import GamModel, PairShape, ShapeFunction
from gamgroup.purify import purify_pairs
from gamgroup.train import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "BinMap",
    "Dataset",
    "FeatureGroup",
    "GamModel",
    "ImportanceReport",
    "PairShape",
    "ShapeFunction",
    "TrainConfig",
    "apply_bins",
    "feature_importance",
    "fit_bins",
    "group_importance",
    "importance_report",
    "load_csv",
    "load_groups",
    "naive_sum_importance",
    "purify_pairs",
    "train",
]
