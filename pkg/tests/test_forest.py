import numpy as np
import pytest

from fetalctg import forest


def brute_force_split(x, y, features, eps=forest.GAIN_EPS):
    """Every feature/midpoint pair scored with plain Python counting."""
    def gini(labels):
        n = len(labels)
        return 1.0 - sum((labels.count(c) / n) ** 2 for c in set(labels))

    labels = list(map(int, y))
    parent = gini(labels)
    best = None
    for f in sorted(features):
        values = sorted(set(x[:, f].tolist()))
        for lo, hi in zip(values, values[1:]):
            thr = 0.5 * (lo + hi)
            left = [lab for v, lab in zip(x[:, f], labels) if v <= thr]
            right = [lab for v, lab in zip(x[:, f], labels) if v > thr]
            gain = parent - (len(left) * gini(left) + len(right) * gini(right)) / len(labels)
            if gain > eps and (best is None or gain > best[2] + eps):
                best = (f, thr, gain)
    return best


def random_fixture(rng):
    n = int(rng.integers(2, 51))
    d = int(rng.integers(1, 6))
    if rng.uniform() < 0.5:
        x = rng.integers(0, 6, size=(n, d)).astype(float)  # plenty of ties
    else:
        x = rng.normal(size=(n, d))
    y = rng.integers(0, 3, size=n)
    return x, y


def test_gini_examples():
    assert forest.gini_impurity([10, 0, 0]) == 0.0
    assert forest.gini_impurity([5, 5, 0]) == 0.5
    assert forest.gini_impurity([1, 1, 1]) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        forest.gini_impurity([0, 0, 0])


def test_best_split_examples():
    x = np.array([[0.0], [1.0], [10.0], [11.0]])
    f, thr, gain = forest.best_split(x, np.array([0, 0, 1, 1]), [0])
    assert (f, thr) == (0, 5.5) and gain == pytest.approx(0.5)
    assert forest.best_split(x, np.array([1, 1, 1, 1]), [0]) is None


def test_best_split_six_sample_fixture(rng):
    x = rng.normal(size=(6, 3))
    y = np.array([0, 1, 2, 0, 1, 1])
    assert forest.best_split(x, y, [0, 1, 2], 3) == pytest.approx(brute_force_split(x, y, [0, 1, 2]))


def test_best_split_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        x, y = random_fixture(rng)
        feats = list(range(x.shape[1]))
        got = forest.best_split(x, y, feats, 3)
        want = brute_force_split(x, y, feats)
        if want is None:
            assert got is None
        else:
            assert got[0] == want[0] and got[1] == want[1]
            assert got[2] == pytest.approx(want[2], abs=1e-12)


def brute_force_tree(x, y, idx=None):
    idx = np.arange(len(y)) if idx is None else idx
    if len(set(y[idx].tolist())) <= 1 or idx.size < 2:
        return ("leaf", np.bincount(y[idx], minlength=3).tolist())
    split = brute_force_split(x[idx], y[idx], range(x.shape[1]))
    if split is None:
        return ("leaf", np.bincount(y[idx], minlength=3).tolist())
    f, thr, _ = split
    mask = x[idx, f] <= thr
    return ("node", f, thr, brute_force_tree(x, y, idx[mask]), brute_force_tree(x, y, idx[~mask]))


def as_nested(tree, node=0):
    if tree.feature[node] < 0:
        return ("leaf", tree.counts[node].tolist())
    return ("node", int(tree.feature[node]), float(tree.threshold[node]),
            as_nested(tree, tree.left[node]), as_nested(tree, tree.right[node]))


def test_single_tree_equals_brute_force_cart(rng):
    x = rng.normal(size=(40, 3))
    y = rng.integers(0, 3, size=40)
    model = forest.forest_fit(x, y + 1, trees=1, max_features=3, seed=0, bootstrap=False)
    assert as_nested(model.trees[0]) == brute_force_tree(x, y)


def test_single_tree_fits_duplicate_free_data(rng):
    x = rng.normal(size=(60, 4))
    y = rng.integers(1, 4, size=60)
    model = forest.forest_fit(x, y, trees=1, max_features=4, bootstrap=False)
    np.testing.assert_array_equal(model.predict(x), y)


def test_same_seed_same_forest(rng):
    x = rng.normal(size=(80, 5))
    y = rng.integers(1, 4, size=80)
    a = forest.forest_fit(x, y, trees=7, seed=11)
    b = forest.forest_fit(x, y, trees=7, seed=11)
    probe = rng.normal(size=(30, 5))
    np.testing.assert_array_equal(a.tree_votes(probe), b.tree_votes(probe))


def test_forest_prefix_property(rng):
    x = rng.normal(size=(80, 5))
    y = rng.integers(1, 4, size=80)
    small = forest.forest_fit(x, y, trees=3, seed=5)
    big = forest.forest_fit(x, y, trees=6, seed=5)
    probe = rng.normal(size=(30, 5))
    np.testing.assert_array_equal(small.tree_votes(probe), big.tree_votes(probe)[:3])


def test_out_of_bag_sets_nonempty():
    n, trees = 60, 20
    oob_sizes = [n - np.unique(np.random.default_rng(t).integers(0, n, size=n)).size for t in range(trees)]
    assert min(oob_sizes) > 0


def leaf_tree(cls, n_classes=3):
    counts = np.zeros((1, n_classes), dtype=int)
    counts[0, cls] = 1
    return forest.Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), counts)


@pytest.mark.parametrize("votes,expected", [((0, 0, 0), 1), ((1, 1, 0), 2), ((0, 1, 2), 1)])
def test_majority_vote_and_ties(votes, expected):
    model = forest.ForestModel((1, 2, 3), tuple(leaf_tree(v) for v in votes), 1, 0)
    assert model.predict(np.zeros((1, 2)))[0] == expected


def test_argument_errors(rng):
    x = rng.normal(size=(10, 3))
    y = rng.integers(1, 3, size=10)
    with pytest.raises(ValueError):
        forest.forest_fit(x, y, trees=0)
    with pytest.raises(ValueError):
        forest.forest_fit(x, y, max_features=4)


def test_default_max_features():
    assert forest.default_max_features(21) == 5
