import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .tree import FeatureBinner, Tree, TreeParams, grow_tree

log = logging.getLogger(__name__)

# Weight given to a learner that fits the training set exactly
PERFECT_LEARNER_WEIGHT = math.log(1.0 / 1e-12)

StageCallback = Callable[[int, np.ndarray, Tree], None]


@dataclass(frozen=True)
class BoostedTrees:
    """F(x) = init + sum_m weights[m] * trees[m](x)."""

    init: float
    trees: tuple
    weights: tuple
    train_loss: tuple = ()

    @property
    def n_stages(self) -> int:
        return len(self.trees)

    def predict(self, X: np.ndarray, n_stages: Optional[int] = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.init)
        stop = self.n_stages if n_stages is None else min(n_stages, self.n_stages)
        for tree, weight in zip(self.trees[:stop], self.weights[:stop]):
            out += weight * tree.predict(X)
        return out

    def to_state(self) -> dict:
        return {
            "init": self.init,
            "trees": [t.to_state() for t in self.trees],
            "weights": list(self.weights),
            "train_loss": list(self.train_loss),
        }

    @classmethod
    def from_state(cls, state: dict) -> "BoostedTrees":
        return cls(
            init=float(state["init"]),
            trees=tuple(Tree.from_state(t) for t in state["trees"]),
            weights=tuple(float(w) for w in state["weights"]),
            train_loss=tuple(float(v) for v in state.get("train_loss", ())),
        )

    def describe(self) -> dict:
        return {
            "n_stages": self.n_stages,
            "init": self.init,
            "total_leaves": int(sum(t.n_leaves for t in self.trees)),
            "max_depth": int(max((t.depth for t in self.trees), default=0)),
            "final_train_mse": self.train_loss[-1] if self.train_loss else None,
        }


def boost_squared_loss(X, y, n_stages: int, learning_rate: float, params: TreeParams,
                       binner: Optional[FeatureBinner] = None, line_search: bool = True,
                       callback: Optional[StageCallback] = None) -> BoostedTrees:
    """Stagewise boosting on squared loss.

    F0 is mean(y). Stage m grows a tree h on the pseudo-residuals y - F and
    updates F += learning_rate * rho * h, with rho = sum(r h) / sum(h^2)
    (1 when the tree predicts zero everywhere) or rho = 1 without line search.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if binner is None:
        binner = FeatureBinner(X)
    init = float(y.mean())
    F = np.full(y.shape[0], init)
    trees = []
    weights = []
    losses = [float(np.mean((y - F) ** 2))]
    for stage in range(n_stages):
        residual = y - F
        tree = grow_tree(X, residual, params, binner=binner)
        h = tree.predict(X)
        rho = 1.0
        if line_search:
            hh = float(h @ h)
            rho = float(residual @ h) / hh if hh > 0 else 1.0
        if callback is not None:
            callback(stage, residual, tree)
        weight = learning_rate * rho
        F = F + weight * h
        trees.append(tree)
        weights.append(weight)
        losses.append(float(np.mean((y - F) ** 2)))
        log.debug("Boosting stage %d: rho=%.6g train mse=%.6g", stage + 1, rho, losses[-1])
    return BoostedTrees(init=init, trees=tuple(trees), weights=tuple(weights),
                        train_loss=tuple(losses))


def fit_gbm_trees(X, y, n_stages, learning_rate, max_depth, min_samples_leaf=1,
                  callback=None) -> BoostedTrees:
    params = TreeParams(max_depth=max_depth, min_samples_leaf=min_samples_leaf)
    return boost_squared_loss(X, y, n_stages, learning_rate, params, callback=callback)


def fit_regularized_trees(X, y, n_stages, learning_rate, max_depth, gamma, alpha, lam,
                          min_samples_leaf=1, callback=None) -> BoostedTrees:
    """Second-order boosting with leaf penalties; the Newton step replaces the line search."""
    params = TreeParams(max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                        reg_lambda=lam, reg_alpha=alpha, gamma=gamma)
    return boost_squared_loss(X, y, n_stages, learning_rate, params, line_search=False,
                              callback=callback)


def fit_histogram_trees(X, y, n_stages, learning_rate, max_depth, n_bins,
                        min_samples_leaf=1, callback=None) -> BoostedTrees:
    """GBM with split search restricted to equal-frequency bin boundaries computed once."""
    binner = FeatureBinner(X, n_bins=n_bins)
    params = TreeParams(max_depth=max_depth, min_samples_leaf=min_samples_leaf)
    return boost_squared_loss(X, y, n_stages, learning_rate, params, binner=binner,
                              callback=callback)


# -------------------------------------------------------------------------
# AdaBoost.R2
# -------------------------------------------------------------------------

@dataclass(frozen=True)
class AdaBoostEnsemble:
    """Weighted median over learners."""

    trees: tuple
    learner_weights: tuple

    def member_predictions(self, X: np.ndarray) -> np.ndarray:
        return np.vstack([t.predict(X) for t in self.trees])

    def predict(self, X: np.ndarray) -> np.ndarray:
        preds = self.member_predictions(X).T  # rows x learners
        weights = np.asarray(self.learner_weights)
        order = np.argsort(preds, axis=1, kind="stable")
        sorted_preds = np.take_along_axis(preds, order, axis=1)
        cum = np.cumsum(weights[order], axis=1)
        half = 0.5 * weights.sum()
        pick = np.argmax(cum >= half, axis=1)
        return sorted_preds[np.arange(preds.shape[0]), pick]

    def to_state(self) -> dict:
        return {"trees": [t.to_state() for t in self.trees],
                "learner_weights": list(self.learner_weights)}

    @classmethod
    def from_state(cls, state: dict) -> "AdaBoostEnsemble":
        return cls(trees=tuple(Tree.from_state(t) for t in state["trees"]),
                   learner_weights=tuple(float(w) for w in state["learner_weights"]))

    def describe(self) -> dict:
        return {"n_learners": len(self.trees),
                "total_leaves": int(sum(t.n_leaves for t in self.trees))}


def fit_adaboost(X, y, n_estimators: int, base_depth: int, seed: int,
                 callback: Optional[Callable[[int, np.ndarray, Tree], None]] = None):
    """AdaBoost.R2 with linear loss. Returns (ensemble, warnings).

    `callback(round, sample_weights, tree)` sees the weights each learner was
    trained with.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    binner = FeatureBinner(X)
    params = TreeParams(max_depth=base_depth)
    w = np.full(n, 1.0 / n)
    trees = []
    learner_weights = []
    warnings = []
    for rnd in range(n_estimators):
        sample = rng.choice(n, size=n, replace=True, p=w)
        tree = grow_tree(X, y, params, binner=binner, sample_idx=sample)
        if callback is not None:
            callback(rnd, w.copy(), tree)
        err = np.abs(y - tree.predict(X))
        largest = float(err.max())
        if largest == 0:
            trees.append(tree)
            learner_weights.append(PERFECT_LEARNER_WEIGHT)
            log.debug("AdaBoost round %d fits exactly; stopping", rnd + 1)
            break
        loss = err / largest
        avg_loss = float(np.sum(w * loss))
        if avg_loss >= 0.5:
            if rnd == 0:
                trees.append(tree)
                learner_weights.append(1.0)
                message = (f"first learner has average loss {avg_loss:.3f} >= 0.5; "
                           "ensemble reduced to that learner")
            else:
                message = f"round {rnd + 1} average loss {avg_loss:.3f} >= 0.5; boosting stopped"
            log.warning(message)
            warnings.append(message)
            break
        beta = avg_loss / (1.0 - avg_loss)
        if beta == 0:
            trees.append(tree)
            learner_weights.append(PERFECT_LEARNER_WEIGHT)
            break
        trees.append(tree)
        learner_weights.append(math.log(1.0 / beta))
        w = w * np.power(beta, 1.0 - loss)
        w = w / w.sum()
    return AdaBoostEnsemble(tuple(trees), tuple(learner_weights)), warnings
