from .base import TrainedModel, load_model, predict, save_model, sigmoid
from .gbt import TreeEnsemble, train_gbt
from .lsi import LsiModel, fit_binnings, train_lsi
from .logistic import LogisticModel, train_logistic
from .search import REPORTED_BEST, SEARCH_SPACES, GridResult, expand_grid, grid_search
from .svm import SvmModel, kernel_matrix, train_svm

__all__ = [
    "TrainedModel", "load_model", "predict", "save_model", "sigmoid",
    "TreeEnsemble", "train_gbt", "LogisticModel", "train_logistic", "LsiModel", "fit_binnings", "train_lsi",
    "SvmModel", "kernel_matrix", "train_svm",
    "REPORTED_BEST", "SEARCH_SPACES", "GridResult", "expand_grid", "grid_search",
]
