"""Regression tree growing shared by CART, the forests and every boosting family.

Trees are grown on residual targets r with squared loss, i.e. gradients
g = -r and unit hessians. For a node holding gradient sum G over H samples
the leaf weight and split score are

    T(G)   = sign(G) * max(|G| - alpha / 2, 0)
    weight = -T(G) / (H + lambda)
    score  = T(G)^2 / (H + lambda)
    gain   = (score_left + score_right - score_parent) / 2

With lambda = alpha = 0 the weight is the mean residual and the gain is the
variance reduction, which is plain CART. A split is made only when its gain
exceeds gamma.

Split search works on integer codes per feature (`FeatureBinner`). Exact
mode codes every distinct value, so the candidate thresholds are the
midpoints between consecutive sorted values; binned mode codes
equal-frequency bins and only bin boundaries are candidates.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: Optional[int] = None
    min_samples_leaf: int = 1
    reg_lambda: float = 0.0
    reg_alpha: float = 0.0
    gamma: float = 0.0
    max_features: Optional[int] = None
    splitter: str = "best"


class FeatureBinner:
    """Per-feature integer codes plus the value range each code covers."""

    def __init__(self, X: np.ndarray, n_bins: Optional[int] = None):
        X = np.asarray(X, dtype=float)
        n, d = X.shape
        self.n_bins = n_bins
        self.codes = np.empty((n, d), dtype=np.int64)
        self.bin_min = []
        self.bin_max = []
        self.lossless = []
        for j in range(d):
            col = X[:, j]
            uniq, inverse = np.unique(col, return_inverse=True)
            if n_bins is None or uniq.size <= n_bins:
                self.codes[:, j] = inverse.reshape(-1)
                self.bin_min.append(uniq)
                self.bin_max.append(uniq)
                self.lossless.append(True)
                continue
            quantiles = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
            edges = np.unique(np.quantile(col, quantiles))
            codes = np.searchsorted(edges, col, side="left")
            lo = np.full(edges.size + 1, np.inf)
            hi = np.full(edges.size + 1, -np.inf)
            np.minimum.at(lo, codes, col)
            np.maximum.at(hi, codes, col)
            self.codes[:, j] = codes
            self.bin_min.append(lo)
            self.bin_max.append(hi)
            self.lossless.append(False)

    def threshold(self, feature: int, left_code: int, right_code: int) -> float:
        lo = self.bin_max[feature][left_code]
        hi = self.bin_min[feature][right_code]
        mid = (lo + hi) / 2.0
        # adjacent floats can round the midpoint onto the right-hand value
        if mid >= hi:
            mid = lo
        return float(mid)


@dataclass(frozen=True)
class TreeNode:
    """Recursive view of one node; leaves have feature_index None."""

    value: float
    n_samples: int
    feature_index: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature_index is None


@dataclass(frozen=True)
class Tree:
    """Flattened binary tree; node 0 is the root, x <= threshold goes left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row."""
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            current = node[rows]
            go_left = X[rows, self.feature[current]] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def with_values(self, value: np.ndarray) -> "Tree":
        return Tree(self.feature, self.threshold, self.left, self.right,
                    np.asarray(value, dtype=float), self.n_samples, self.impurity)

    def root(self) -> TreeNode:
        def build(i: int) -> TreeNode:
            if self.feature[i] == LEAF:
                return TreeNode(value=float(self.value[i]), n_samples=int(self.n_samples[i]))
            return TreeNode(
                value=float(self.value[i]),
                n_samples=int(self.n_samples[i]),
                feature_index=int(self.feature[i]),
                threshold=float(self.threshold[i]),
                left=build(int(self.left[i])),
                right=build(int(self.right[i])),
            )
        return build(0)

    def to_state(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity": self.impurity.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "Tree":
        return cls(
            feature=np.asarray(state["feature"], dtype=np.int64),
            threshold=np.asarray(state["threshold"], dtype=float),
            left=np.asarray(state["left"], dtype=np.int64),
            right=np.asarray(state["right"], dtype=np.int64),
            value=np.asarray(state["value"], dtype=float),
            n_samples=np.asarray(state["n_samples"], dtype=np.int64),
            impurity=np.asarray(state["impurity"], dtype=float),
        )


# -------------------------------------------------------------------------
# Growing
# -------------------------------------------------------------------------

class _Grower:
    def __init__(self, X, r, binner: FeatureBinner, params: TreeParams, rng):
        self.X = X
        self.r = r
        self.binner = binner
        self.params = params
        self.rng = rng
        self.d = X.shape[1]
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []
        self.n_samples = []
        self.impurity = []

    def _soft(self, G):
        half = self.params.reg_alpha / 2.0
        return np.sign(G) * np.maximum(np.abs(G) - half, 0.0)

    def _score(self, G, H):
        return self._soft(G) ** 2 / (H + self.params.reg_lambda)

    def _weight(self, G, H) -> float:
        denom = H + self.params.reg_lambda
        return float(-self._soft(G) / denom) if denom > 0 else 0.0

    def _candidates(self) -> np.ndarray:
        k = self.params.max_features
        if k is None or k >= self.d:
            return np.arange(self.d)
        return np.sort(self.rng.choice(self.d, size=k, replace=False))

    def _best_exhaustive(self, idx, feats, G, parent):
        m = idx.size
        msl = self.params.min_samples_leaf
        codes = self.binner.codes[np.ix_(idx, feats)]
        order = np.argsort(codes, axis=0, kind="stable")
        sorted_codes = np.take_along_axis(codes, order, axis=0)
        cum = np.cumsum(self.r[idx][order], axis=0)
        GL = -cum[:-1]
        GR = -cum[-1] - GL
        HL = np.arange(1, m, dtype=float)[:, None]
        HR = m - HL
        valid = (sorted_codes[:-1] != sorted_codes[1:]) & (HL >= msl) & (HR >= msl)
        if not valid.any():
            return None
        gain = 0.5 * (self._score(GL, HL) + self._score(GR, HR) - parent)
        gain = np.where(valid, gain, -np.inf)
        # feature-major flattening: first maximum is the lowest feature, then lowest threshold
        flat = int(np.argmax(gain.T))
        fi, pos = divmod(flat, m - 1)
        j = int(feats[fi])
        thr = self.binner.threshold(j, sorted_codes[pos, fi], sorted_codes[pos + 1, fi])
        mask = self.binner.codes[idx, j] <= sorted_codes[pos, fi]
        return float(gain[pos, fi]), j, thr, mask

    def _best_random(self, idx, feats, G, parent):
        m = idx.size
        msl = self.params.min_samples_leaf
        r = self.r[idx]
        best = None
        for j in feats:
            x = self.X[idx, j]
            lo, hi = x.min(), x.max()
            if lo == hi:
                continue
            thr = float(self.rng.uniform(lo, hi))
            mask = x <= thr
            nl = int(np.count_nonzero(mask))
            if nl < msl or m - nl < msl:
                continue
            GL = -float(r[mask].sum())
            GR = -float(r[~mask].sum())
            gain = 0.5 * (self._score(GL, nl) + self._score(GR, m - nl) - parent)
            if best is None or gain > best[0]:
                best = (float(gain), int(j), thr, mask)
        return best

    def grow(self, idx: np.ndarray, depth: int) -> int:
        node = len(self.feature)
        r = self.r[idx]
        m = idx.size
        G = -float(r.sum())
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(self._weight(G, m))
        self.n_samples.append(m)
        self.impurity.append(float(np.var(r)))

        params = self.params
        if params.max_depth is not None and depth >= params.max_depth:
            return node
        if m < 2 * params.min_samples_leaf:
            return node

        parent = float(self._score(G, m))
        feats = self._candidates()
        if params.splitter == "random":
            best = self._best_random(idx, feats, G, parent)
        else:
            best = self._best_exhaustive(idx, feats, G, parent)
        if best is None:
            return node
        gain, j, thr, mask = best
        if not gain > params.gamma + 1e-12 * max(1.0, abs(parent)):
            return node

        self.feature[node] = j
        self.threshold[node] = thr
        self.left[node] = self.grow(idx[mask], depth + 1)
        self.right[node] = self.grow(idx[~mask], depth + 1)
        return node

    def tree(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=float),
            n_samples=np.asarray(self.n_samples, dtype=np.int64),
            impurity=np.asarray(self.impurity, dtype=float),
        )


def grow_tree(X, r, params: TreeParams, binner: Optional[FeatureBinner] = None,
              rng: Optional[np.random.Generator] = None,
              sample_idx: Optional[np.ndarray] = None) -> Tree:
    """Grow one tree on residual targets `r`.

    `binner` must have been built on the same rows as `X`; it defaults to an
    exact binner. `sample_idx` (possibly with repeats) restricts growing to a
    bootstrap of those rows.
    """
    X = np.asarray(X, dtype=float)
    r = np.asarray(r, dtype=float)
    if binner is None and params.splitter != "random":
        binner = FeatureBinner(X)
    if rng is None:
        rng = np.random.default_rng(0)
    if sample_idx is None:
        sample_idx = np.arange(X.shape[0])
    grower = _Grower(X, r, binner, params, rng)
    grower.grow(np.asarray(sample_idx, dtype=np.int64), 0)
    return grower.tree()


# -------------------------------------------------------------------------
# Cost-complexity pruning
# -------------------------------------------------------------------------

def _subtree_stats(tree: Tree, alive: np.ndarray, n_root: int):
    """Per node: leaves below it and summed leaf risk, over the live structure."""
    n = tree.n_nodes
    leaves = np.zeros(n, dtype=int)
    risk = np.zeros(n)
    node_risk = tree.impurity * tree.n_samples / n_root
    for i in range(n - 1, -1, -1):
        if alive[i]:
            leaves[i] = 1
            risk[i] = node_risk[i]
        else:
            leaves[i] = leaves[tree.left[i]] + leaves[tree.right[i]]
            risk[i] = risk[tree.left[i]] + risk[tree.right[i]]
    return leaves, risk, node_risk


def prune_tree(tree: Tree, ccp_alpha: float) -> Tree:
    """Minimal cost-complexity pruning: collapse weakest links while their alpha <= ccp_alpha."""
    if ccp_alpha <= 0 or tree.n_nodes == 1:
        return tree
    n_root = int(tree.n_samples[0])
    # children always follow their parent in preorder, so reverse order is bottom-up
    is_leaf = tree.feature == LEAF
    while True:
        leaves, risk, node_risk = _subtree_stats(tree, is_leaf, n_root)
        reachable = np.zeros(tree.n_nodes, dtype=bool)
        reachable[0] = True
        for i in range(tree.n_nodes):
            if reachable[i] and not is_leaf[i]:
                reachable[tree.left[i]] = True
                reachable[tree.right[i]] = True
        internal = np.flatnonzero(reachable & ~is_leaf)
        if internal.size == 0:
            break
        alphas = (node_risk[internal] - risk[internal]) / (leaves[internal] - 1)
        weakest = int(np.argmin(alphas))
        if alphas[weakest] > ccp_alpha:
            break
        is_leaf[internal[weakest]] = True

    # compact the surviving nodes in preorder
    remap = {}
    order = []
    stack = [0]
    while stack:
        i = stack.pop()
        remap[i] = len(order)
        order.append(i)
        if not is_leaf[i]:
            stack.append(int(tree.right[i]))
            stack.append(int(tree.left[i]))
    order = np.asarray(order)
    feature = np.where(is_leaf[order], LEAF, tree.feature[order])
    left = np.array([remap[int(tree.left[i])] if not is_leaf[i] else LEAF for i in order],
                    dtype=np.int64)
    right = np.array([remap[int(tree.right[i])] if not is_leaf[i] else LEAF for i in order],
                     dtype=np.int64)
    log.debug("Pruned tree from %d to %d nodes (ccp_alpha=%s)", tree.n_nodes, order.size, ccp_alpha)
    return Tree(
        feature=feature.astype(np.int64),
        threshold=np.where(is_leaf[order], 0.0, tree.threshold[order]),
        left=left,
        right=right,
        value=tree.value[order],
        n_samples=tree.n_samples[order],
        impurity=tree.impurity[order],
    )
