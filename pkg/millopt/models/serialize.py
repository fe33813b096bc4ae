"""JSON model documents.

    {
      "format": "millopt-model",
      "version": 1,
      "family": "...",
      "hyperparameters": {...},
      "seed": 0,
      "feature_names": [...],
      "warnings": [...],
      "state": {...}          # family-specific: coefficients or flattened tree arrays
    }

Floats are written with repr precision, so a reloaded model predicts
bit-for-bit like the original.
"""
import json
import logging
from pathlib import Path

from ..errors import SpecError
from .boosting import AdaBoostEnsemble, BoostedTrees
from .forest import Forest, SingleTree
from .knn import KnnModel
from .linear import LinearModel
from .ordered import OrderedEnsemble
from .registry import FittedModel, RegressorSpec

log = logging.getLogger(__name__)

FORMAT_TAG = "millopt-model"
FORMAT_VERSION = 1

_STATE_TYPES = {
    "ols": LinearModel,
    "lasso": LinearModel,
    "elastic_net": LinearModel,
    "sgd": LinearModel,
    "knn": KnnModel,
    "cart": SingleTree,
    "random_forest": Forest,
    "extra_trees": Forest,
    "adaboost_r2": AdaBoostEnsemble,
    "gbm": BoostedTrees,
    "regularized_gbm": BoostedTrees,
    "hgbm": BoostedTrees,
    "ordered_gbm": OrderedEnsemble,
}


def model_to_dict(model: FittedModel) -> dict:
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "family": model.spec.family,
        "hyperparameters": dict(model.spec.hyperparameters),
        "seed": model.spec.seed,
        "feature_names": list(model.feature_names),
        "warnings": list(model.warnings),
        "state": model.estimator.to_state(),
    }


def model_from_dict(doc: dict) -> FittedModel:
    if doc.get("format") != FORMAT_TAG:
        raise SpecError(str(doc.get("family")), f"not a {FORMAT_TAG} document")
    if doc.get("version") != FORMAT_VERSION:
        raise SpecError(doc["family"], f"unsupported model format version {doc.get('version')}")
    family = doc["family"]
    if family not in _STATE_TYPES:
        raise SpecError(family, "no state loader for this family")
    spec = RegressorSpec(family, doc.get("hyperparameters", {}), int(doc.get("seed", 0)))
    estimator = _STATE_TYPES[family].from_state(doc["state"])
    return FittedModel(spec=spec, feature_names=tuple(doc["feature_names"]),
                       estimator=estimator, warnings=tuple(doc.get("warnings", ())))


def save_model(model: FittedModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model)))
    log.info("Saved %s model to %s", model.spec.family, path)
    return path


def load_model(path) -> FittedModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def model_info(model: FittedModel) -> str:
    """Human-readable structure summary (the `model-info` subcommand)."""
    lines = [f"family: {model.spec.family}", f"seed: {model.spec.seed}"]
    params = model.spec.params()
    if params:
        lines.append("hyperparameters:")
        lines.extend(f"  {k}: {v}" for k, v in sorted(params.items()) if k != "permutations")
    lines.append(f"features ({len(model.feature_names)}): {', '.join(model.feature_names)}")
    for key, value in model.estimator.describe().items():
        lines.append(f"{key}: {value}")
    for message in model.warnings:
        lines.append(f"warning: {message}")
    return "\n".join(lines)
