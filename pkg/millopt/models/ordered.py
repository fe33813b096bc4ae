"""Ordered boosting.

Each permutation sigma runs its own chain. Per chain two prediction vectors
are kept:

* the supporting vector S, where S[sigma[j]] only ever uses rows
  sigma[0..j-1]; it starts as the running prefix mean of y (0 for the first
  sample, which has no predecessors), and
* the inference model F over all rows, starting at mean(y).

At every stage the ordered residuals r = y - S are computed. The inference
tree is grown on all of r and its leaf values are the mean plain residual
y - F over each leaf.

S is moved by support trees grown on prefixes of sigma whose lengths are
powers of two. The sample at position j, with L <= j < 2L, is routed through
the tree grown on sigma[0..L-1] and moves by the learning rate times the mean
ordered residual of the samples before it that share its leaf (0 when none
do). Neither the support tree nor those residuals involve sample j or any
later sample, so S[sigma[j]] is unchanged when y[sigma[j]] changes.

Prediction averages the inference models of all chains.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .boosting import BoostedTrees
from .tree import FeatureBinner, TreeParams, grow_tree

log = logging.getLogger(__name__)

OrderedCallback = Callable[[int, int, np.ndarray, np.ndarray], None]


@dataclass(frozen=True)
class OrderedEnsemble:
    chains: tuple
    permutations: tuple

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.mean([chain.predict(X) for chain in self.chains], axis=0)

    def to_state(self) -> dict:
        return {"chains": [c.to_state() for c in self.chains],
                "permutations": [list(map(int, p)) for p in self.permutations]}

    @classmethod
    def from_state(cls, state: dict) -> "OrderedEnsemble":
        return cls(chains=tuple(BoostedTrees.from_state(c) for c in state["chains"]),
                   permutations=tuple(tuple(p) for p in state["permutations"]))

    def describe(self) -> dict:
        return {
            "n_permutations": len(self.chains),
            "n_stages": self.chains[0].n_stages if self.chains else 0,
            "total_leaves": int(sum(t.n_leaves for c in self.chains for t in c.trees)),
        }


def prefix_means(values: np.ndarray, perm: np.ndarray, prior: float) -> np.ndarray:
    """out[perm[j]] = mean(values[perm[:j]]); the empty prefix gets `prior`."""
    ordered = values[perm]
    cum = np.concatenate(([0.0], np.cumsum(ordered)[:-1]))
    counts = np.arange(ordered.size)
    means = np.where(counts > 0, cum / np.maximum(counts, 1), prior)
    out = np.empty_like(means)
    out[perm] = means
    return out


def exclusive_leaf_means(values: np.ndarray, leaves: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Mean of `values` over earlier samples (in perm order) sharing each sample's leaf; 0 if none."""
    ordered_values = values[perm]
    ordered_leaves = leaves[perm]
    result = np.zeros(perm.size)
    for leaf in np.unique(ordered_leaves):
        pos = np.flatnonzero(ordered_leaves == leaf)
        v = ordered_values[pos]
        cum = np.concatenate(([0.0], np.cumsum(v)[:-1]))
        counts = np.arange(pos.size)
        result[pos] = np.where(counts > 0, cum / np.maximum(counts, 1), 0.0)
    out = np.empty_like(result)
    out[perm] = result
    return out


def support_step(X: np.ndarray, residual: np.ndarray, perm: np.ndarray,
                 params: TreeParams) -> np.ndarray:
    """Per-row supporting-model increment (before the learning rate) for one stage.

    The block of positions [L, 2L) in `perm` shares a tree grown on the first
    L rows with their own exact binning; position 0 gets 0.
    """
    n = perm.size
    step = np.zeros(n)
    length = 1
    while length < n:
        end = min(2 * length, n)
        rows = perm[:end]
        prefix = perm[:length]
        tree = grow_tree(X[prefix], residual[prefix], params)
        leaves = tree.apply(X[rows])
        means = exclusive_leaf_means(residual[rows], leaves, np.arange(end))
        step[perm[length:end]] = means[length:end]
        length = end
    return step


def _run_chain(X, y, perm, n_stages, learning_rate, params, binner, chain_index,
               callback: Optional[OrderedCallback]) -> BoostedTrees:
    init = float(y.mean())
    F = np.full(y.shape[0], init)
    S = prefix_means(y, perm, 0.0)
    trees = []
    losses = [float(np.mean((y - F) ** 2))]
    for stage in range(n_stages):
        ordered_residual = y - S
        if callback is not None:
            callback(chain_index, stage, ordered_residual.copy(), S.copy())
        structure = grow_tree(X, ordered_residual, params, binner=binner)
        leaves = structure.apply(X)
        plain = y - F
        values = np.zeros(structure.n_nodes)
        sums = np.bincount(leaves, weights=plain, minlength=structure.n_nodes)
        counts = np.bincount(leaves, minlength=structure.n_nodes)
        occupied = counts > 0
        values[occupied] = sums[occupied] / counts[occupied]
        tree = structure.with_values(values)
        F = F + learning_rate * values[leaves]
        S = S + learning_rate * support_step(X, ordered_residual, perm, params)
        trees.append(tree)
        losses.append(float(np.mean((y - F) ** 2)))
    return BoostedTrees(init=init, trees=tuple(trees),
                        weights=tuple([learning_rate] * len(trees)), train_loss=tuple(losses))


def fit_ordered_boosting(X, y, n_stages: int, learning_rate: float, max_depth: int,
                         n_permutations: int, seed: int, min_samples_leaf: int = 1,
                         permutations: Optional[Sequence[Sequence[int]]] = None,
                         callback: Optional[OrderedCallback] = None) -> OrderedEnsemble:
    """Permutation p is drawn from default_rng([seed, p]) unless given explicitly."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if permutations is not None:
        perms = [np.asarray(p, dtype=np.int64) for p in permutations]
        for p in perms:
            if sorted(p.tolist()) != list(range(n)):
                raise ValueError("Each explicit permutation must cover every training row once")
    else:
        perms = [np.random.default_rng([seed, p]).permutation(n) for p in range(n_permutations)]
    binner = FeatureBinner(X)
    params = TreeParams(max_depth=max_depth, min_samples_leaf=min_samples_leaf)
    chains = tuple(
        _run_chain(X, y, perm, n_stages, learning_rate, params, binner, i, callback)
        for i, perm in enumerate(perms)
    )
    log.debug("Ordered boosting: %d chains of %d stages", len(chains), n_stages)
    return OrderedEnsemble(chains=chains, permutations=tuple(tuple(int(v) for v in p) for p in perms))
