from .knn import knn_predict
from .registry import (
    FAMILIES,
    FAMILY_DEFAULTS,
    UNIMPLEMENTED_FAMILIES,
    FittedModel,
    RegressorSpec,
    fit,
    fit_adaboost_r2,
    fit_cart,
    fit_forest,
    fit_gbm,
    fit_hgbm,
    fit_linear_family,
    fit_ordered_gbm,
    fit_regularized_gbm,
    predict,
)
from .serialize import load_model, model_info, save_model
from .tree import Tree, TreeNode

__all__ = [
    "FAMILIES",
    "FAMILY_DEFAULTS",
    "UNIMPLEMENTED_FAMILIES",
    "FittedModel",
    "RegressorSpec",
    "Tree",
    "TreeNode",
    "fit",
    "fit_adaboost_r2",
    "fit_cart",
    "fit_forest",
    "fit_gbm",
    "fit_hgbm",
    "fit_linear_family",
    "fit_ordered_gbm",
    "fit_regularized_gbm",
    "knn_predict",
    "load_model",
    "model_info",
    "predict",
    "save_model",
]
