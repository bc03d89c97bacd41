"""
Classification trees: Gini-grown CART with cost-complexity pruning.

Trees are grown with scikit-learn and then held as flat preorder arrays.
Pruning is weakest-link on those arrays; the pruning level is chosen by
stratified k-fold cross-validation on the held-out Brier score with the
one-standard-error rule.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import StratifiedKFold
from sklearn.tree import DecisionTreeClassifier

from ..config import settings
from ..exceptions import DegenerateDataError, InputFormatError, ParameterError
from ..logging_setup import logger
from .interaction_store import text_lines

TREE_HEADER = "# tie-tree v1"
LEAF = -1


@dataclass(frozen=True)
class DecisionTree:
    """Preorder node arrays; leaves have feature == -1 and carry the friend probability."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    prob: np.ndarray
    n: np.ndarray
    features: Tuple[str, ...] = field(default=())

    @property
    def node_count(self) -> int:
        return int(self.feature.size)

    @property
    def leaf_count(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    @property
    def root_feature(self) -> Optional[str]:
        f = int(self.feature[0])
        if f == LEAF:
            return None
        return self.features[f] if self.features else str(f)

    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=np.int64)
        for t in range(self.node_count):
            if self.feature[t] != LEAF:
                depth[self.left[t]] = depth[self.right[t]] = depth[t] + 1
        return int(depth.max())

    def leaf_of(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return _descend(self.feature, self.threshold, self.left, self.right, self.feature == LEAF, X)

    def predict_proba(self, X) -> np.ndarray:
        return self.prob[self.leaf_of(X)]

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)


def _descend(feature, threshold, left, right, is_leaf, X) -> np.ndarray:
    # Thresholds were learned on float32 inputs
    X = np.asarray(X, dtype=np.float32)
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = ~is_leaf[node]
    while np.any(active):
        idx = rows[active]
        cur = node[idx]
        go_left = X[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        active = ~is_leaf[node]
    return node


def _from_sklearn(clf: DecisionTreeClassifier, names: Sequence[str]) -> DecisionTree:
    t = clf.tree_
    value = t.value[:, 0, :]
    pos_col = int(np.flatnonzero(clf.classes_ == 1)[0])
    prob = value[:, pos_col] / value.sum(axis=1)
    is_leaf = t.children_left == -1
    return _compact(
        np.where(is_leaf, LEAF, t.feature).astype(np.int64),
        np.where(is_leaf, 0.0, t.threshold).astype(np.float64),
        t.children_left.astype(np.int64),
        t.children_right.astype(np.int64),
        prob.astype(np.float64),
        t.n_node_samples.astype(np.int64),
        is_leaf,
        tuple(names),
    )


def _compact(feature, threshold, left, right, prob, n, is_leaf, names) -> DecisionTree:
    """Renumber the subtree reachable under `is_leaf` into dense preorder."""
    order: List[int] = []
    stack = [0]
    while stack:
        t = stack.pop()
        order.append(t)
        if not is_leaf[t]:
            stack.append(int(right[t]))
            stack.append(int(left[t]))
    order_arr = np.asarray(order, dtype=np.int64)
    new_id = np.full(feature.size, LEAF, dtype=np.int64)
    new_id[order_arr] = np.arange(order_arr.size)
    leaf = is_leaf[order_arr]
    return DecisionTree(
        feature=np.where(leaf, LEAF, feature[order_arr]),
        threshold=np.where(leaf, 0.0, threshold[order_arr]),
        left=np.where(leaf, LEAF, new_id[np.where(leaf, 0, left[order_arr])]),
        right=np.where(leaf, LEAF, new_id[np.where(leaf, 0, right[order_arr])]),
        prob=prob[order_arr],
        n=n[order_arr],
        features=names,
    )


def root_only(y, names: Sequence[str] = ()) -> DecisionTree:
    y = np.asarray(y)
    return DecisionTree(
        feature=np.array([LEAF]), threshold=np.array([0.0]), left=np.array([LEAF]), right=np.array([LEAF]),
        prob=np.array([float(y.mean())]), n=np.array([y.size]), features=tuple(names),
    )


def grow_tree(X, y, min_leaf: int, max_depth: int, seed: int, names: Sequence[str] = ()) -> DecisionTree:
    """Unpruned Gini tree, grown to purity or the size limits."""
    clf = DecisionTreeClassifier(
        criterion="gini", min_samples_leaf=min_leaf, max_depth=max_depth, random_state=seed,
    )
    clf.fit(np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64))
    return _from_sklearn(clf, names)


# ============================================================================
# Weakest-link pruning
# ============================================================================

def pruning_path(tree: DecisionTree) -> List[Tuple[float, np.ndarray]]:
    """
    Nested subtrees T_0 (full) > T_1 > ... > root, as (alpha, leaf mask).

    Node risk is R(t) = n_t / N * gini_t; each step collapses every internal
    node whose link strength g(t) = (R(t) - R(T_t)) / (|leaves(T_t)| - 1)
    is minimal.
    """
    m = tree.node_count
    total = float(tree.n[0])
    risk = tree.n / total * 2.0 * tree.prob * (1.0 - tree.prob)
    leaf = tree.feature == LEAF

    depth = np.zeros(m, dtype=np.int64)
    for t in range(m):
        if not leaf[t]:
            depth[tree.left[t]] = depth[tree.right[t]] = depth[t] + 1
    levels = [np.flatnonzero(depth == d) for d in range(int(depth.max()) + 1)]

    path = [(0.0, leaf.copy())]
    while not leaf[0]:
        reachable = np.zeros(m, dtype=bool)
        reachable[0] = True
        for nodes in levels:
            open_nodes = nodes[reachable[nodes] & ~leaf[nodes]]
            reachable[tree.left[open_nodes]] = True
            reachable[tree.right[open_nodes]] = True
        sub_risk = np.where(leaf, risk, 0.0)
        sub_leaves = leaf.astype(np.int64)
        for nodes in reversed(levels):
            inner = nodes[~leaf[nodes]]
            sub_risk[inner] = sub_risk[tree.left[inner]] + sub_risk[tree.right[inner]]
            sub_leaves[inner] = sub_leaves[tree.left[inner]] + sub_leaves[tree.right[inner]]
        internal = reachable & ~leaf
        g = np.full(m, np.inf)
        g[internal] = (risk[internal] - sub_risk[internal]) / (sub_leaves[internal] - 1)
        alpha = float(g.min())
        leaf = leaf | (internal & (g <= alpha + 1e-15))
        path.append((max(alpha, 0.0), leaf.copy()))
    return path


def subtree_at(path: List[Tuple[float, np.ndarray]], alpha: float) -> np.ndarray:
    """Leaf mask of the smallest subtree optimal at complexity alpha."""
    chosen = path[0][1]
    for a, mask in path:
        if a <= alpha:
            chosen = mask
        else:
            break
    return chosen


def prune(tree: DecisionTree, leaf_mask: np.ndarray) -> DecisionTree:
    return _compact(tree.feature, tree.threshold, tree.left, tree.right, tree.prob, tree.n, leaf_mask, tree.features)


def _brier_losses(tree: DecisionTree, mask: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    leaf = _descend(tree.feature, tree.threshold, tree.left, tree.right, mask, X)
    return (tree.prob[leaf] - y) ** 2


def fit_tree(
    X,
    y,
    folds: Optional[int] = None,
    seed: Optional[int] = None,
    min_leaf: Optional[int] = None,
    max_depth: Optional[int] = None,
    names: Sequence[str] = (),
) -> DecisionTree:
    """
    Grow a Gini tree and prune it to the cross-validated complexity.

    Args:
        X: (n, d) feature matrix
        y: 0/1 labels
        folds: Number of CV folds (>= 2)
        seed: Fold assignment and tie-breaking seed
        min_leaf: Minimum examples per leaf
        max_depth: Maximum depth of the grown tree
        names: Feature names, used for reporting the root split

    Returns:
        Pruned DecisionTree
    """
    folds = settings.FOLDS if folds is None else folds
    seed = settings.SEED if seed is None else seed
    min_leaf = min_leaf or settings.MIN_LEAF
    max_depth = max_depth or settings.MAX_DEPTH
    if folds < 2:
        raise ParameterError(f"folds must be >= 2, got {folds}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise DegenerateDataError("tree fit on an empty training set")
    if np.all(y == y[0]):
        return root_only(y, names)

    full = grow_tree(X, y, min_leaf, max_depth, seed, names)
    full_path = pruning_path(full)
    if len(full_path) == 1:
        return full

    minority = int(min(y.sum(), y.size - y.sum()))
    k = min(folds, minority)
    if k < 2:
        logger.warning("tree_pruning_skipped", reason="minority class smaller than two", minority=minority)
        return full

    alphas = [a for a, _ in full_path]
    # Geometric midpoints between consecutive critical alphas; the last one keeps the root
    betas = [float(np.sqrt(alphas[i] * alphas[i + 1])) for i in range(len(alphas) - 1)] + [np.inf]

    loss_sum = np.zeros(len(betas))
    loss_sq = np.zeros(len(betas))
    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    for train_idx, test_idx in splitter.split(X, y):
        fold_tree = grow_tree(X[train_idx], y[train_idx], min_leaf, max_depth, seed, names)
        fold_path = pruning_path(fold_tree)
        for j, beta in enumerate(betas):
            mask = subtree_at(fold_path, beta)
            losses = _brier_losses(fold_tree, mask, X[test_idx], y[test_idx])
            loss_sum[j] += losses.sum()
            loss_sq[j] += np.square(losses).sum()

    n = y.size
    mean = loss_sum / n
    var = np.maximum(loss_sq / n - mean ** 2, 0.0) * n / (n - 1)
    se = np.sqrt(var / n)
    best = int(np.argmin(mean))
    # One-standard-error rule: the simplest subtree within one SE of the best
    within = np.flatnonzero(mean <= mean[best] + se[best])
    chosen = int(within.max())
    pruned = prune(full, full_path[chosen][1])
    logger.debug(
        "tree_pruned", grown_nodes=full.node_count, pruned_nodes=pruned.node_count,
        alpha=alphas[chosen], cv_error=float(mean[chosen]), folds=k,
    )
    return pruned


# ============================================================================
# Serialization
# ============================================================================

def save_tree(path, tree: DecisionTree) -> None:
    lines = [TREE_HEADER, "features\t" + ",".join(tree.features), "# feature\tthreshold\tleft\tright\tprob\tn"]
    for t in range(tree.node_count):
        lines.append(
            f"{int(tree.feature[t])}\t{float(tree.threshold[t])!r}\t{int(tree.left[t])}\t"
            f"{int(tree.right[t])}\t{float(tree.prob[t])!r}\t{int(tree.n[t])}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_tree(path) -> DecisionTree:
    path = str(path)
    lines = [text for _, text in text_lines(path)]
    if not lines or lines[0].strip() != TREE_HEADER:
        raise InputFormatError(f"missing header '{TREE_HEADER}'", path=path, line=1)
    if len(lines) < 2 or not lines[1].startswith("features\t"):
        raise InputFormatError("expected 'features<TAB>names' line", path=path, line=2)
    names = tuple(n for n in lines[1].split("\t", 1)[1].split(",") if n)
    rows = []
    for line_no, text in enumerate(lines[2:], start=3):
        if not text.strip() or text.startswith("#"):
            continue
        tokens = text.split("\t")
        if len(tokens) != 6:
            raise InputFormatError(f"expected 6 fields, found {len(tokens)}", path=path, line=line_no)
        try:
            rows.append((int(tokens[0]), float(tokens[1]), int(tokens[2]), int(tokens[3]),
                         float(tokens[4]), int(tokens[5])))
        except ValueError as e:
            raise InputFormatError(f"bad node: {e}", path=path, line=line_no)
    if not rows:
        raise InputFormatError("tree has no nodes", path=path)
    cols = list(zip(*rows))
    return DecisionTree(
        feature=np.asarray(cols[0], dtype=np.int64),
        threshold=np.asarray(cols[1], dtype=np.float64),
        left=np.asarray(cols[2], dtype=np.int64),
        right=np.asarray(cols[3], dtype=np.int64),
        prob=np.asarray(cols[4], dtype=np.float64),
        n=np.asarray(cols[5], dtype=np.int64),
        features=names,
    )
