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

"""Standardization, principal components, univariate selection and correlation.

All fits are deterministic. Fitted models serialize to plain dicts of arrays.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import special

from . import (
    FEATURE_SET_PATTERN,
    BadK,
    ConstantInput,
    ConstantTarget,
    DegenerateMatrix,
    DimensionMismatch,
    LengthMismatch,
    logger,
)

# Relative tolerance under which a column's deviation counts as zero.
ZERO_STD_RTOL = 1e-12

# Cap of the F statistic of perfectly correlated columns.
F_CAP = 1e12

# Slack on the explained-variance target, absorbing rounding of the ratios.
VARIANCE_TARGET_SLACK = 1e-12


def _as_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got {X.ndim} dimensions.")
    return X


def parse_feature_set(set_id):
    """Decode a feature set name into its reduction.

    Returns ``("all", None)``, ``("pca", variance_fraction)`` or
    ``("kbest", k)``.
    """
    match = FEATURE_SET_PATTERN.match(set_id)
    if not match:
        raise ValueError(f"Unknown {set_id} feature set.")
    if match.group("pca"):
        percent = int(match.group("pca"))
        if not 0 < percent <= 100:
            raise ValueError(f"{set_id} must keep between 1 and 100% of variance.")
        return "pca", percent / 100
    if match.group("kbest"):
        return "kbest", int(match.group("kbest"))
    return "all", None


class Scaler:

    """ Per-column standardization learned on training rows. """

    def __init__(self, means, stds):
        self.means = np.asarray(means, dtype=np.float64)
        self.stds = np.asarray(stds, dtype=np.float64)
        assert self.means.shape == self.stds.shape
        assert np.all(self.stds > 0)

    def __len__(self):
        return self.means.size

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != len(self):
            raise DimensionMismatch(
                f"Scaler expects {len(self)} columns, got {X.shape[-1]}."
            )
        return (X - self.means) / self.stds

    def inverse_transform(self, X):
        return np.asarray(X, dtype=np.float64) * self.stds + self.means

    def to_dict(self):
        return {"means": self.means, "stds": self.stds}

    @classmethod
    def from_dict(cls, data):
        return cls(data["means"], data["stds"])


def fit_scaler(X):
    """Learn column means and sample standard deviations.

    Constant columns get a unit deviation, so they transform to zero instead
    of dividing by zero.
    """
    X = _as_matrix(X)
    if X.shape[0] < 2:
        raise ValueError("Standardization needs at least 2 rows.")
    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=1)
    constant = stds <= ZERO_STD_RTOL * np.maximum(1.0, np.abs(means))
    stds[constant] = 1.0
    return Scaler(means, stds)


class PcaModel:

    """Principal axes of a centered matrix.

    ``components`` holds one unit-norm axis per row, by decreasing variance.
    """

    def __init__(
        self, components, explained_variance, explained_variance_ratio, center
    ):
        self.components = np.asarray(components, dtype=np.float64)
        self.explained_variance = np.asarray(explained_variance, dtype=np.float64)
        self.explained_variance_ratio = np.asarray(
            explained_variance_ratio, dtype=np.float64
        )
        self.center = np.asarray(center, dtype=np.float64)

    @property
    def n_components(self):
        return self.components.shape[0]

    def __repr__(self):
        return (
            f"<{self.__class__.__name__} {self.center.size} -> {self.n_components} "
            f"({self.explained_variance_ratio.sum():.1%} variance)>"
        )

    def to_dict(self):
        return {
            "components": self.components,
            "explained_variance": self.explained_variance,
            "explained_variance_ratio": self.explained_variance_ratio,
            "center": self.center,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["components"],
            data["explained_variance"],
            data["explained_variance_ratio"],
            data["center"],
        )


def pca_fit(X, variance_target):
    """Fit the smallest PCA reaching ``variance_target`` explained variance.

    Axes come from the SVD of the centered matrix. Each axis is oriented so
    its largest-magnitude loading is positive.
    """
    X = _as_matrix(X)
    if not 0 < variance_target <= 1:
        raise ValueError(f"Variance target {variance_target!r} not within ]0, 1].")
    n_rows = X.shape[0]
    if n_rows < 2:
        raise ValueError("PCA needs at least 2 rows.")

    center = X.mean(axis=0)
    _, singular_values, axes = np.linalg.svd(X - center, full_matrices=False)
    tolerance = max(X.shape) * np.finfo(np.float64).eps * max(1.0, np.abs(X).max())
    if not singular_values.size or singular_values[0] <= tolerance:
        raise DegenerateMatrix("Centered matrix has rank zero.")

    variance = singular_values**2 / (n_rows - 1)
    ratio = variance / variance.sum()
    cumulative = np.cumsum(ratio)
    n_components = int(
        np.searchsorted(cumulative, variance_target - VARIANCE_TARGET_SLACK) + 1
    )
    n_components = min(n_components, ratio.size)

    components = axes[:n_components].copy()
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(n_components), pivots])
    components *= signs[:, None]

    model = PcaModel(
        components, variance[:n_components], ratio[:n_components], center
    )
    logger.debug(f"Fitted {model!r}")
    return model


def pca_transform(model, X):
    """ Project rows onto the principal axes. """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.center.size:
        raise DimensionMismatch(
            f"PCA expects {model.center.size} columns, got {X.shape[-1]}."
        )
    return (X - model.center) @ model.components.T


@dataclass(frozen=True)
class SelectionScores:

    """F statistics and p-values of each column against a target.

    ``selected_indices`` lists the retained columns in ascending order, once a
    selection has been made.
    """

    f_stats: np.ndarray
    p_values: np.ndarray
    selected_indices: Optional[Tuple[int, ...]] = None

    def __len__(self):
        return self.f_stats.size

    def ranking(self):
        """ Column indexes by decreasing F statistic, ties by lower index. """
        return np.lexsort((np.arange(len(self)), -self.f_stats))


def f_regression_scores(X, y):
    """Univariate linear regression F-test of each column against ``y``.

    F is ``r^2 / (1 - r^2) * (n - 2)``, with ``r`` the Pearson correlation.
    Constant columns score F = 0 and p = 1. Perfect correlations are capped
    to ``F_CAP`` with p = 0.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] != y.size:
        raise LengthMismatch(f"{X.shape[0]} rows but {y.size} targets.")
    n_rows = y.size
    if n_rows < 3:
        raise ValueError("F-test needs at least 3 rows.")
    if np.ptp(y) == 0:
        raise ConstantTarget("Target is constant.")

    y_centered = y - y.mean()
    X_centered = X - X.mean(axis=0)
    constant = np.ptp(X, axis=0) == 0
    norms = np.sqrt(np.sum(X_centered**2, axis=0) * np.sum(y_centered**2))
    correlation = np.divide(
        X_centered.T @ y_centered,
        norms,
        out=np.zeros(X.shape[1]),
        where=~constant & (norms > 0),
    )
    correlation = np.clip(correlation, -1, 1)

    dof = n_rows - 2
    r_squared = correlation**2
    with np.errstate(divide="ignore"):
        f_stats = np.where(
            r_squared < 1, r_squared / (1 - r_squared) * dof, np.inf
        )
    capped = ~(f_stats < F_CAP)
    f_stats[capped] = F_CAP
    p_values = special.fdtrc(1, dof, f_stats)
    p_values[capped] = 0.0
    return SelectionScores(f_stats, p_values)


def select_k_best(scores, k):
    """ Retain the ``k`` columns of highest F statistic. """
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise BadK(f"k must be an integer, not {k!r}.")
    if not 1 <= k <= len(scores):
        raise BadK(f"Can't select {k} columns out of {len(scores)}.")
    selected = np.sort(scores.ranking()[:k])
    return SelectionScores(
        scores.f_stats, scores.p_values, tuple(int(i) for i in selected)
    )


def pearson(x, y):
    """ Pearson correlation and its two-sided p-value under the t distribution. """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"Vectors have {x.size} and {y.size} values.")
    if x.size < 3:
        raise ValueError("Correlation test needs at least 3 pairs.")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ConstantInput("Can't correlate a constant vector.")
    x_centered = x - x.mean()
    y_centered = y - y.mean()
    r = np.sum(x_centered * y_centered) / np.sqrt(
        np.sum(x_centered**2) * np.sum(y_centered**2)
    )
    r = float(np.clip(r, -1, 1))
    if abs(r) == 1:
        return r, 0.0
    dof = x.size - 2
    t = r * np.sqrt(dof / (1 - r**2))
    return r, float(2 * special.stdtr(dof, -abs(t)))


def correlation_matrix(X):
    """Symmetric matrix of Pearson correlations between columns.

    Constant columns correlate to 0 with every other column. The diagonal is
    exactly 1.
    """
    X = _as_matrix(X)
    if X.shape[0] < 3:
        raise ValueError("Correlation matrix needs at least 3 rows.")
    X_centered = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(X_centered**2, axis=0))
    constant = (np.ptp(X, axis=0) == 0) | (norms == 0)
    normalized = np.divide(
        X_centered, norms, out=np.zeros_like(X_centered), where=~constant
    )
    matrix = normalized.T @ normalized
    matrix = np.clip((matrix + matrix.T) / 2, -1, 1)
    np.fill_diagonal(matrix, 1.0)
    return matrix


@dataclass(frozen=True)
class CorrelationReport:

    feature_corr: np.ndarray
    names: Tuple[str, ...]
    av_pearson_r: Optional[float] = None
    av_p_value: Optional[float] = None


def variance_filter(X, threshold):
    """Indexes of the columns whose population variance reaches ``threshold``.

    Raises ``DegenerateMatrix`` if no column passes.
    """
    X = _as_matrix(X)
    kept = np.flatnonzero(X.var(axis=0) >= threshold)
    if not kept.size:
        raise DegenerateMatrix(f"No column has a variance of at least {threshold}.")
    logger.debug(f"{kept.size} of {X.shape[1]} columns pass the variance filter.")
    return tuple(int(i) for i in kept)
