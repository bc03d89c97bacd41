import numpy as np
import pytest

from app.exceptions import DegenerateDataError, InputFormatError, ParameterError
from app.services.decision_tree import (
    LEAF,
    fit_tree,
    grow_tree,
    load_tree,
    prune,
    pruning_path,
    save_tree,
    subtree_at,
)


def _step_data(rng, n=600):
    """Label depends on feature 0 only; feature 1 is noise."""
    X = rng.normal(size=(n, 2))
    p = np.where(X[:, 0] > 0.3, 0.9, 0.1)
    y = (rng.random(n) < p).astype(np.int64)
    return X, y


def test_grown_tree_matches_sklearn_predictions():
    from sklearn.tree import DecisionTreeClassifier

    X, y = _step_data(np.random.default_rng(0))
    tree = grow_tree(X, y, min_leaf=5, max_depth=6, seed=1, names=("a", "b"))
    clf = DecisionTreeClassifier(criterion="gini", min_samples_leaf=5, max_depth=6, random_state=1).fit(X, y)
    np.testing.assert_allclose(tree.predict_proba(X), clf.predict_proba(X)[:, 1])


def test_preorder_layout():
    X, y = _step_data(np.random.default_rng(1))
    tree = grow_tree(X, y, min_leaf=5, max_depth=4, seed=1)
    internal = np.flatnonzero(tree.feature != LEAF)
    assert np.all(tree.left[internal] == internal + 1)
    assert np.all(tree.right[internal] > tree.left[internal])
    assert np.all(tree.n[internal] == tree.n[tree.left[internal]] + tree.n[tree.right[internal]])
    assert tree.depth() <= 4


def test_pruning_path_is_nested_and_ends_at_root():
    X, y = _step_data(np.random.default_rng(2))
    tree = grow_tree(X, y, min_leaf=3, max_depth=8, seed=1)
    path = pruning_path(tree)
    alphas = [a for a, _ in path]
    assert alphas == sorted(alphas)
    for (_, before), (_, after) in zip(path, path[1:]):
        assert np.all(after[before])
    assert prune(tree, path[-1][1]).node_count == 1
    assert subtree_at(path, -1.0) is path[0][1]
    assert subtree_at(path, np.inf) is path[-1][1]


def test_fit_tree_finds_the_informative_split():
    X, y = _step_data(np.random.default_rng(3))
    tree = fit_tree(X, y, folds=10, seed=4, names=("signal", "noise"))
    assert tree.root_feature == "signal"
    assert abs(tree.threshold[0] - 0.3) < 0.2
    # Pruning removes the noise splits
    assert tree.leaf_count <= 6
    acc = np.mean(tree.predict(X) == y)
    assert acc > 0.8


def test_fit_tree_is_deterministic():
    X, y = _step_data(np.random.default_rng(5))
    a = fit_tree(X, y, folds=5, seed=9)
    b = fit_tree(X, y, folds=5, seed=9)
    np.testing.assert_array_equal(a.feature, b.feature)
    np.testing.assert_array_equal(a.threshold, b.threshold)


def test_single_class_gives_root_leaf():
    tree = fit_tree(np.arange(10).reshape(-1, 1), np.zeros(10), names=("ac",))
    assert tree.node_count == 1
    assert tree.root_feature is None
    assert tree.prob[0] == 0.0


def test_bad_inputs():
    with pytest.raises(ParameterError):
        fit_tree(np.zeros((4, 1)), [0, 1, 0, 1], folds=1)
    with pytest.raises(DegenerateDataError):
        fit_tree(np.zeros((0, 1)), np.zeros(0))


def test_tree_file_round_trip(tmp_path):
    X, y = _step_data(np.random.default_rng(6))
    tree = fit_tree(X, y, folds=5, seed=2, names=("ac", "n_xy"))
    path = tmp_path / "tree.txt"
    save_tree(path, tree)
    back = load_tree(path)
    assert back.features == ("ac", "n_xy")
    np.testing.assert_array_equal(back.threshold, tree.threshold)
    np.testing.assert_array_equal(back.predict_proba(X), tree.predict_proba(X))


def test_tree_file_errors(tmp_path):
    path = tmp_path / "tree.txt"
    path.write_text("not a tree\n", encoding="utf-8")
    with pytest.raises(InputFormatError) as exc:
        load_tree(path)
    assert exc.value.line == 1
    path.write_text("# tie-tree v1\nfeatures\tac\n-1\t0.0\t-1\n", encoding="utf-8")
    with pytest.raises(InputFormatError) as exc:
        load_tree(path)
    assert exc.value.line == 3
