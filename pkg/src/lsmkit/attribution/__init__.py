"""Local explanations (Shapley, LIME, DeepLIFT) and their aggregation."""
from .aggregate import ConsistencyReport, GlobalImportance, consistency_report, global_importance, rank_correlation
from .core import ATTRIBUTION_COLUMNS, METHODS, Attribution, background_sample, write_attributions
from .deeplift import deeplift
from .lime import LimeConfig, lime_explain, snap_to_codes, weighted_ridge
from .shapley import MAX_EXACT_FACTORS, coalition_values, shapley_exact, shapley_from_values, shapley_sampled

__all__ = [
    "Attribution", "ATTRIBUTION_COLUMNS", "METHODS", "background_sample", "write_attributions",
    "shapley_exact", "shapley_sampled", "coalition_values", "shapley_from_values", "MAX_EXACT_FACTORS",
    "LimeConfig", "lime_explain", "snap_to_codes", "weighted_ridge", "deeplift",
    "GlobalImportance", "ConsistencyReport", "global_importance", "consistency_report", "rank_correlation",
]
