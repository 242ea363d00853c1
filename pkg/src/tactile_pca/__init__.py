"""Two-stage PCA for tactile where/what perception.

Synthetic tactile grids, a temporal-then-spatial PCA manifold, nearest
neighbour and histogram likelihood classifiers, per-datum sensitivity
and fixation-point selection.
"""

from .classify import Classifiers, HistModel, KnnModel, hist_fit, knn_predict, log_likelihood, map_what
from .data_model import (
    ClassLabel,
    DatasetError,
    DatasetGrid,
    GridMetadata,
    SchemaError,
    TactileSegment,
    center_segment,
    filter_abnormal_taps,
    preprocess,
)
from .evaluation import PredictionRecord, regression_gradient, what_rmse
from .pca import PcaError, PcaModel, PcVector, fit, project, project_grid, scree_cut, symmetric_eig
from .sensitivity import AlgParams, compute_distance, fixation_point, sensitivity_map

__version__ = "0.1.0"

__all__ = [
    "AlgParams", "ClassLabel", "Classifiers", "DatasetError", "DatasetGrid", "GridMetadata",
    "HistModel", "KnnModel", "PcVector", "PcaError", "PcaModel", "PredictionRecord",
    "SchemaError", "TactileSegment", "center_segment", "compute_distance", "filter_abnormal_taps",
    "fit", "fixation_point", "hist_fit", "knn_predict", "log_likelihood", "map_what",
    "preprocess", "project", "project_grid", "regression_gradient", "scree_cut",
    "sensitivity_map", "symmetric_eig", "what_rmse",
]
