"""Random forests: Gini classification trees and two-output regression trees.

Classification trees bootstrap, draw sqrt(D) candidate features per split and
grow to purity (min-leaf 1); leaves hold normalized class histograms and the
forest prediction averages them. Regression trees split on the summed
per-output variance reduction with D/3 candidate features and min-leaf 5;
leaves hold the mean target pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError

DEFAULT_TREES = 200


@dataclass
class Tree:
    feature: np.ndarray  # int, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs): class histogram or target means

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index per row."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                return node
            rows = np.flatnonzero(active)
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


class _TreeBuilder:
    def __init__(self, X, y_mat, n_candidates, min_leaf, max_depth, rng, is_gini):
        self.X = X
        self.y = y_mat  # one-hot counts (cls) or raw targets (reg)
        self.n_candidates = n_candidates
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.rng = rng
        self.is_gini = is_gini
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []

    def _leaf_and_purity(self, idx) -> tuple[np.ndarray, bool]:
        ys = self.y[idx]
        agg = ys.sum(axis=0)
        if self.is_gini:
            return agg / agg.sum(), bool(np.count_nonzero(agg) <= 1)
        return agg / len(idx), bool(np.all(ys == ys[0]))

    def _best_split(self, idx):
        """Exhaustive threshold search over the candidate features, batched.

        Sorting, prefix sums, and the impurity costs run over all candidates
        at once; ties keep the first candidate in draw order.
        """
        n = len(idx)
        n_feat = self.X.shape[1]
        cand = self.rng.choice(n_feat, size=min(self.n_candidates, n_feat), replace=False)
        xs = self.X[np.ix_(idx, cand)]  # (n, m)
        # equal values are never split points, so sort stability is immaterial
        order = np.argsort(xs, axis=0)
        xs_sorted = np.take_along_axis(xs, order, axis=0)
        ys = self.y[idx]  # (n, k)
        ys_sorted = ys[order]  # (n, m, k)
        cum = np.cumsum(ys_sorted, axis=0)
        total = cum[-1]  # (m, k)

        splits = np.arange(1, n, dtype=np.float64)
        valid = xs_sorted[1:] > xs_sorted[:-1]  # (n-1, m)
        size_ok = (splits >= self.min_leaf) & (n - splits >= self.min_leaf)
        valid &= size_ok[:, None]
        if not valid.any():
            return np.inf, -1, 0.0
        nl = splits[:, None]
        nr = n - nl
        cl = cum[:-1]  # (n-1, m, k)
        cr = total[None] - cl
        if self.is_gini:
            gini_l = 1.0 - np.sum(cl * cl, axis=2) / (nl * nl)
            gini_r = 1.0 - np.sum(cr * cr, axis=2) / (nr * nr)
            cost = (nl * gini_l + nr * gini_r) / n
        else:
            cum_sq = np.cumsum(ys_sorted * ys_sorted, axis=0)
            sl = cum_sq[:-1]
            sr = cum_sq[-1][None] - sl
            cost = np.sum(sl - cl * cl / nl[..., None], axis=2)
            cost += np.sum(sr - cr * cr / nr[..., None], axis=2)
        cost = np.where(valid, cost, np.inf)
        flat = np.argmin(cost.T)  # feature-major so earlier candidates win ties
        f_pos, pos = divmod(int(flat), n - 1)
        pos += 1
        if not np.isfinite(cost[pos - 1, f_pos]):
            return np.inf, -1, 0.0
        lo, hi = xs_sorted[pos - 1, f_pos], xs_sorted[pos, f_pos]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:  # midpoint of ulp-adjacent values can round onto hi
            thr = lo
        return float(cost[pos - 1, f_pos]), int(cand[f_pos]), float(thr)

    def build(self, root_idx) -> None:
        # explicit preorder stack; recursion would overflow on skewed trees
        stack = [(root_idx, 0, -1, False)]
        while stack:
            idx, depth, parent, is_left = stack.pop()
            node = len(self.feature)
            self.feature.append(-1)
            self.threshold.append(0.0)
            self.left.append(-1)
            self.right.append(-1)
            value, pure = self._leaf_and_purity(idx)
            self.value.append(value)
            if parent >= 0:
                if is_left:
                    self.left[parent] = node
                else:
                    self.right[parent] = node
            n = len(idx)
            if (
                n < 2 * self.min_leaf
                or pure
                or (self.max_depth is not None and depth >= self.max_depth)
            ):
                continue
            _, f, thr = self._best_split(idx)
            if f < 0:
                continue
            mask = self.X[idx, f] <= thr
            if not mask.any() or mask.all():
                continue
            self.feature[node] = f
            self.threshold[node] = thr
            # push right first so the left child is processed (and numbered) next
            stack.append((idx[~mask], depth + 1, node, False))
            stack.append((idx[mask], depth + 1, node, True))

    def tree(self) -> Tree:
        return Tree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.vstack(self.value),
        )


@dataclass
class ForestCls:
    classes: list[str]
    trees: list[Tree] = field(default_factory=list)

    def predict_proba(self, X) -> np.ndarray:
        """Average of leaf class histograms; rows sum to 1."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros((len(X), len(self.classes)))
        for tree in self.trees:
            out += tree.predict_value(X)
        return out / len(self.trees)

    def predict(self, X) -> list[str]:
        proba = self.predict_proba(X)
        return [self.classes[k] for k in np.argmax(proba, axis=1)]


@dataclass
class ForestReg:
    trees: list[Tree] = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        """(n, 2) mean of leaf mean (d_onset, d_offset) pairs."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.zeros((len(X), 2))
        for tree in self.trees:
            out += tree.predict_value(X)
        return out / len(self.trees)


def _tree_rngs(seed: int, n_trees: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_trees)]


def rf_train_cls(
    X,
    y,
    n_trees: int = DEFAULT_TREES,
    seed: int = 0,
    max_depth: int | None = None,
    bootstrap: bool = True,
) -> ForestCls:
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray([str(v) for v in y])
    if len(X) == 0:
        raise DataError("empty training set")
    classes = sorted(set(labels.tolist()))
    onehot = np.zeros((len(X), len(classes)))
    for k, c in enumerate(classes):
        onehot[labels == c, k] = 1.0
    n_cand = max(1, int(np.sqrt(X.shape[1])))
    forest = ForestCls(classes=classes)
    for rng in _tree_rngs(seed, n_trees):
        idx = rng.integers(0, len(X), size=len(X)) if bootstrap else np.arange(len(X))
        builder = _TreeBuilder(X, onehot, n_cand, 1, max_depth, rng, is_gini=True)
        builder.build(np.asarray(idx, dtype=np.int64))
        forest.trees.append(builder.tree())
    return forest


def rf_train_reg(
    X,
    targets,
    n_trees: int = DEFAULT_TREES,
    seed: int = 0,
    min_leaf: int = 5,
    bootstrap: bool = True,
) -> ForestReg:
    X = np.asarray(X, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if len(X) == 0:
        raise DataError("empty training set")
    if t.ndim != 2 or t.shape[1] != 2:
        raise DataError("targets must be (n, 2) (d_onset, d_offset) pairs")
    if np.any(t < 0):
        raise DataError("regression targets must be nonnegative")
    n_cand = max(1, X.shape[1] // 3)
    forest = ForestReg()
    for rng in _tree_rngs(seed, n_trees):
        idx = rng.integers(0, len(X), size=len(X)) if bootstrap else np.arange(len(X))
        builder = _TreeBuilder(X, t, n_cand, min_leaf, None, rng, is_gini=False)
        builder.build(np.asarray(idx, dtype=np.int64))
        forest.trees.append(builder.tree())
    return forest


def rf_predict_proba(forest: ForestCls, x) -> np.ndarray:
    return forest.predict_proba(x)


def rf_predict_reg(forest: ForestReg, x) -> np.ndarray:
    return forest.predict(x)
