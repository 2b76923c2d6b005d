"""Range-filtered approximate nearest neighbor search over hierarchical window graphs."""

from .attr_tree import AttributeTree, Cardinality, Window
from .bench import Ablation, BenchRecord, emit_csv, run_sweep
from .core import DistanceCounter, HybridDataset, Metric, RangeFilter, distance
from .index import IndexFormatError, IndexParams, SearchStats, WindowGraphIndex, fraction_bounds, landing_layer, top_for
from .oracle import GoldResult, brute_knn, ground_truth, recall
from .workload import RangeWorkload, gen_mixed, gen_ranges, gen_workload, lid_at_k

__all__ = [
    "Ablation", "AttributeTree", "BenchRecord", "Cardinality", "DistanceCounter", "GoldResult",
    "HybridDataset", "IndexFormatError", "IndexParams", "Metric", "RangeFilter", "RangeWorkload",
    "SearchStats", "Window", "WindowGraphIndex", "brute_knn", "distance", "emit_csv",
    "fraction_bounds", "gen_mixed", "gen_ranges", "gen_workload", "ground_truth", "landing_layer",
    "lid_at_k", "recall", "run_sweep", "top_for",
]
