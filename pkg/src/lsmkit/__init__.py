"""Landslide susceptibility modelling: class-weight indices, learners, explanations and maps."""
from .data import FactorTable, load_factor_table, split_train_test, standardize
from .factors import FACTOR_SETS, TGRA_FACTORS, resolve_factor_set
from .grid import RasterGrid, read_ascii_grid, write_ascii_grid
from .learners import TrainedModel, load_model, predict, save_model
from .pipeline import PipelineConfig, PipelineError, run_pipeline, validate_config

__version__ = "0.1.0"

__all__ = [
    "FactorTable", "load_factor_table", "split_train_test", "standardize",
    "FACTOR_SETS", "TGRA_FACTORS", "resolve_factor_set",
    "RasterGrid", "read_ascii_grid", "write_ascii_grid",
    "TrainedModel", "load_model", "predict", "save_model",
    "PipelineConfig", "PipelineError", "run_pipeline", "validate_config",
]
