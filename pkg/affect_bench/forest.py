# Copyright the affect-bench contributors.
# All Rights Reserved.
#
# This program is Free Software; you can redistribute it and/or
# modify it under the terms of the GNU General Public License
# as published by the Free Software Foundation; either version 2
# of the License, or (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program; if not, write to the Free Software
# Foundation, Inc., 59 Temple Place - Suite 330, Boston, MA  02111-1307, USA.

"""Random forest of CART regression trees.

Trees are stored as flat arrays, node 0 being the root. Leaves have a
feature index of -1.
"""

import numpy as np

from . import LengthMismatch, logger

LEAF = -1

TREE_FIELDS = ("feature", "threshold", "left", "right", "value")


class RegressionTree:

    """ Binary tree of axis-aligned splits, ``x[feature] <= threshold`` going left. """

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)

    def __len__(self):
        return self.feature.size

    @property
    def n_leaves(self):
        return int(np.count_nonzero(self.feature == LEAF))

    def depth(self):
        depths = np.zeros(len(self), dtype=int)
        for node in range(len(self)):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[nodes] != LEAF
        while active.any():
            current = nodes[active]
            go_left = (
                X[rows[active], self.feature[current]] <= self.threshold[current]
            )
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[nodes] != LEAF
        return self.value[nodes]

    def to_dict(self):
        return {field: getattr(self, field) for field in TREE_FIELDS}

    @classmethod
    def from_dict(cls, data):
        return cls(**{field: data[field] for field in TREE_FIELDS})


def best_split(X, y, features, min_samples_leaf):
    """Split minimizing the children's summed squared errors.

    Features are tried in the given order. Thresholds sit at the midpoint
    between consecutive distinct values. Returns ``(feature, threshold)``,
    or ``None`` if no split leaves ``min_samples_leaf`` rows on both sides.
    """
    n_rows = y.size
    left_sizes = np.arange(1, n_rows)
    best, best_sse = None, np.inf
    for feature in features:
        order = np.argsort(X[:, feature], kind="stable")
        values = X[order, feature]
        targets = y[order]
        valid = (
            (values[1:] > values[:-1])
            & (left_sizes >= min_samples_leaf)
            & (n_rows - left_sizes >= min_samples_leaf)
        )
        if not valid.any():
            continue
        sums = np.cumsum(targets)
        squares = np.cumsum(targets**2)
        left_sum, left_sq = sums[:-1], squares[:-1]
        right_sum, right_sq = sums[-1] - left_sum, squares[-1] - left_sq
        sse = (left_sq - left_sum**2 / left_sizes) + (
            right_sq - right_sum**2 / (n_rows - left_sizes)
        )
        sse = np.where(valid, sse, np.inf)
        cut = int(np.argmin(sse))
        if sse[cut] < best_sse:
            threshold = (values[cut] + values[cut + 1]) / 2
            # Adjacent floats have no midpoint in between.
            if threshold >= values[cut + 1]:
                threshold = values[cut]
            best, best_sse = (int(feature), float(threshold)), sse[cut]
    return best


def _leaf_value(y):
    if np.all(y == y[0]):
        return float(y[0])
    return float(y.mean())


def resolve_max_features(max_features, n_features):
    if max_features == "sqrt":
        return max(1, int(np.sqrt(n_features)))
    if max_features == "all" or max_features is None:
        return n_features
    if isinstance(max_features, int) and max_features >= 1:
        return min(max_features, n_features)
    raise ValueError(f"Invalid {max_features!r} max features.")


def build_tree(
    X,
    y,
    max_depth=None,
    min_samples_split=2,
    min_samples_leaf=1,
    max_features="all",
    rng=None,
):
    """Grow a regression tree depth-first.

    A node becomes a leaf when it is pure, holds fewer than
    ``min_samples_split`` rows, reaches ``max_depth``, or has no valid split.
    Each split considers ``max_features`` random features, and more if none
    of them can split the node.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.size:
        raise LengthMismatch(f"{X.shape[0]} rows but {y.size} targets.")
    if not y.size:
        raise ValueError("Can't grow a tree on zero rows.")
    if min_samples_split < 2 or min_samples_leaf < 1:
        raise ValueError("Minimal split size must be 2 or more, leaf size 1 or more.")
    if max_depth is not None and max_depth < 0:
        raise ValueError(f"Invalid {max_depth!r} max depth.")
    n_features = X.shape[1]
    n_candidates = resolve_max_features(max_features, n_features)
    rng = rng if rng is not None else np.random.default_rng(0)

    feature, threshold, left, right, value = [], [], [], [], []
    # Pending nodes as (node ID, row indexes, depth).
    stack = [(0, np.arange(y.size), 0)]
    for array in (feature, threshold, left, right, value):
        array.append(None)

    while stack:
        node, rows, depth = stack.pop()
        targets = y[rows]
        split = None
        if (
            rows.size >= min_samples_split
            and (max_depth is None or depth < max_depth)
            and not np.all(targets == targets[0])
        ):
            order = (
                rng.permutation(n_features)
                if n_candidates < n_features
                else np.arange(n_features)
            )
            split = best_split(X[rows], targets, order[:n_candidates], min_samples_leaf)
            if split is None and n_candidates < n_features:
                split = best_split(
                    X[rows], targets, order[n_candidates:], min_samples_leaf
                )

        if split is None:
            feature[node], threshold[node] = LEAF, 0.0
            left[node], right[node] = LEAF, LEAF
            value[node] = _leaf_value(targets)
            continue

        goes_left = X[rows, split[0]] <= split[1]
        left_id, right_id = len(feature), len(feature) + 1
        for array in (feature, threshold, left, right, value):
            array.extend((None, None))
        feature[node], threshold[node] = split
        left[node], right[node] = left_id, right_id
        value[node] = float(targets.mean())
        # Right first, so the left subtree is grown first.
        stack.append((right_id, rows[~goes_left], depth + 1))
        stack.append((left_id, rows[goes_left], depth + 1))

    return RegressionTree(feature, threshold, left, right, value)


def grow_forest(
    X,
    y,
    n_estimators=100,
    max_depth=None,
    min_samples_split=2,
    min_samples_leaf=1,
    max_features="all",
    bootstrap=True,
    seed=0,
):
    """Grow ``n_estimators`` trees, tree ``t`` being seeded with ``seed + t``.

    Each tree is grown on a bootstrap resample of the rows, unless
    ``bootstrap`` is off.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if n_estimators < 1:
        raise ValueError(f"Forest needs at least one tree, not {n_estimators}.")
    trees = []
    for index in range(n_estimators):
        rng = np.random.default_rng(seed + index)
        rows = rng.integers(0, y.size, y.size) if bootstrap else np.arange(y.size)
        trees.append(
            build_tree(
                X[rows],
                y[rows],
                max_depth,
                min_samples_split,
                min_samples_leaf,
                max_features,
                rng,
            )
        )
    logger.debug(
        f"Grew {n_estimators} trees, {sum(len(t) for t in trees)} nodes in total."
    )
    return trees


def forest_predict(trees, X):
    """ Average of the trees' predictions. """
    return np.mean([tree.predict(X) for tree in trees], axis=0)
