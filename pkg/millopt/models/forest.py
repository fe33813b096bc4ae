import logging
from dataclasses import dataclass

import numpy as np

from .tree import FeatureBinner, Tree, TreeParams, grow_tree, prune_tree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SingleTree:
    tree: Tree

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict(X)

    def to_state(self) -> dict:
        return {"tree": self.tree.to_state()}

    @classmethod
    def from_state(cls, state: dict) -> "SingleTree":
        return cls(tree=Tree.from_state(state["tree"]))

    def describe(self) -> dict:
        return {"n_nodes": self.tree.n_nodes, "n_leaves": self.tree.n_leaves,
                "depth": self.tree.depth}


@dataclass(frozen=True)
class Forest:
    trees: tuple

    def member_predictions(self, X: np.ndarray) -> np.ndarray:
        return np.vstack([t.predict(X) for t in self.trees])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.member_predictions(X).mean(axis=0)

    def to_state(self) -> dict:
        return {"trees": [t.to_state() for t in self.trees]}

    @classmethod
    def from_state(cls, state: dict) -> "Forest":
        return cls(trees=tuple(Tree.from_state(t) for t in state["trees"]))

    def describe(self) -> dict:
        return {
            "n_trees": len(self.trees),
            "total_nodes": int(sum(t.n_nodes for t in self.trees)),
            "total_leaves": int(sum(t.n_leaves for t in self.trees)),
            "max_depth": int(max(t.depth for t in self.trees)),
        }


def fit_cart_tree(X, y, max_depth=None, min_samples_leaf: int = 1,
                  ccp_alpha: float = 0.0) -> SingleTree:
    params = TreeParams(max_depth=max_depth, min_samples_leaf=min_samples_leaf)
    tree = grow_tree(X, y, params)
    return SingleTree(prune_tree(tree, ccp_alpha))


def resolve_max_features(max_features, d: int) -> int:
    """None -> all features, a float in (0, 1] -> that share of d (at least one)."""
    if max_features is None:
        return d
    if isinstance(max_features, float):
        return max(1, int(max_features * d))
    return int(max_features)


def fit_random_forest(X, y, n_trees: int, max_features, max_depth, min_samples_leaf: int,
                      bootstrap: bool, seed: int) -> Forest:
    """Bootstrapped exhaustive-split trees with per-node feature sampling.

    Tree t draws from default_rng([seed, t]).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    params = TreeParams(max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                        max_features=resolve_max_features(max_features, d))
    binner = FeatureBinner(X)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        sample = rng.integers(0, n, size=n) if bootstrap else None
        trees.append(grow_tree(X, y, params, binner=binner, rng=rng, sample_idx=sample))
    log.debug("Grew %d random forest trees", n_trees)
    return Forest(tuple(trees))


def fit_extra_trees(X, y, n_trees: int, max_features, max_depth, min_samples_leaf: int,
                    seed: int) -> Forest:
    """All rows per tree; one uniform threshold per sampled feature within the node's range."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = X.shape[1]
    params = TreeParams(max_depth=max_depth, min_samples_leaf=min_samples_leaf,
                        max_features=resolve_max_features(max_features, d), splitter="random")
    trees = tuple(
        grow_tree(X, y, params, rng=np.random.default_rng([seed, t]))
        for t in range(n_trees)
    )
    log.debug("Grew %d extra trees", n_trees)
    return Forest(trees)
