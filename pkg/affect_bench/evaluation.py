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

"""Train/test protocol: split, metrics and the model-by-feature-set matrix."""

import math
import time
import warnings
from collections import namedtuple
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import arrow
import numpy as np
from tabulate import tabulate

from . import (
    SCHEMA_VERSION,
    TARGETS,
    AffectBenchError,
    ConstantTarget,
    LengthMismatch,
    SchemaMismatch,
    logger,
)
from .artifact import EstimatorSpec
from .colorize import format_metric
from .export import write_csv, write_json
from .features import FEATURE_NAMES
from .reduction import CorrelationReport, correlation_matrix, pearson
from .regressors import fit_estimator, predict

# Absorbs rounding of ``n * fraction`` before taking its ceiling.
SPLIT_SLACK = 1e-9


@dataclass(frozen=True)
class SplitIndices:

    """Disjoint, sorted row indexes of the training and test parts."""

    train_idx: Tuple[int, ...]
    test_idx: Tuple[int, ...]
    seed: int
    test_fraction: float


def train_test_split(n, test_fraction, seed):
    """Seeded shuffle of ``n`` rows, the first ``ceil(n * fraction)`` going to test."""
    if n < 2:
        raise ValueError(f"Can't split {n} rows in two parts.")
    if not 0 < test_fraction < 1:
        raise ValueError(f"Test fraction {test_fraction!r} not within ]0, 1[.")
    permutation = np.random.default_rng(seed).permutation(n)
    n_test = math.ceil(n * test_fraction - SPLIT_SLACK)
    n_test = min(max(n_test, 1), n - 1)
    return SplitIndices(
        train_idx=tuple(int(i) for i in np.sort(permutation[n_test:])),
        test_idx=tuple(int(i) for i in np.sort(permutation[:n_test])),
        seed=seed,
        test_fraction=test_fraction,
    )


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or not y.size:
        raise LengthMismatch(f"Can't compare {y.size} values to {yhat.size}.")
    return y, yhat


def rmse(y, yhat):
    y, yhat = _pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def r2(y, yhat):
    """ Coefficient of determination. Negative when worse than the mean. """
    y, yhat = _pair(y, yhat)
    if np.ptp(y) == 0:
        raise ConstantTarget("R² is undefined for a constant target.")
    residual = np.sum((y - yhat) ** 2)
    total = np.sum((y - y.mean()) ** 2)
    return float(1 - residual / total)


@dataclass
class CellResult:

    """ Metrics of one (feature set, family, target) cell. """

    feature_set: str
    family: str
    target: str
    status: str = "ok"
    train_rmse: Optional[float] = None
    test_rmse: Optional[float] = None
    train_r2: Optional[float] = None
    test_r2: Optional[float] = None
    n_inputs: Optional[int] = None
    converged: Optional[bool] = None
    error: Optional[str] = None

    @property
    def key(self):
        return self.feature_set, self.family, self.target


CELL_COLUMNS = tuple(CellResult.__dataclass_fields__)

REPORT_HEADER = (
    "Feature set",
    "Model",
    "Train RMSE",
    "Test RMSE",
    "Train R²",
    "Test R²",
)


class EvalReport:

    """Results of a full evaluation matrix, in run order.

    Timings are kept apart from the cells, so the canonical report of two
    identical runs is byte-identical.
    """

    def __init__(self, config=None, started_at=None):
        self.cells = {}
        self.config = config
        self.timings = {}
        self.started_at = started_at or arrow.utcnow()

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells.values())

    def add(self, cell, seconds=None):
        self.cells[cell.key] = cell
        if seconds is not None:
            self.timings["/".join(cell.key)] = round(seconds, 6)

    def cell(self, feature_set, family, target):
        return self.cells[feature_set, family, target]

    @property
    def failed(self):
        return [cell for cell in self if cell.status != "ok"]

    def to_document(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "cells": [asdict(cell) for cell in self],
        }

    def to_json(self, path):
        write_json(path, self.to_document())

    def to_csv(self, path):
        rows = ([getattr(cell, col) for col in CELL_COLUMNS] for cell in self)
        write_csv(path, CELL_COLUMNS, rows, config=self.config)

    def timings_document(self):
        return {
            "started_at": self.started_at.isoformat(),
            "cells": self.timings,
        }

    def report(self):
        """ Returns one text table per target. """
        output = ""
        for target in TARGETS:
            table = [list(REPORT_HEADER)]
            for cell in self:
                if cell.target != target:
                    continue
                metrics = (cell.train_rmse, cell.test_rmse, cell.train_r2, cell.test_r2)
                if cell.status != "ok":
                    metrics = (cell.status, "", "", "")
                else:
                    metrics = tuple(map(format_metric, metrics))
                table.append([cell.feature_set, cell.family, *metrics])
            if len(table) > 1:
                output += f"{target.title()}\n"
                output += tabulate(table, tablefmt="fancy_grid", headers="firstrow")
                output += "\n"
        return output


def fit_cell(features, y, split, feature_set, spec, conf, target=None):
    """Fit a cell's pipeline and estimator on the training rows only."""
    train = list(split.train_idx)
    variance_threshold = (
        conf.variance_threshold if conf.variance_threshold_flag else None
    )
    return fit_estimator(
        spec,
        features.rows[train],
        y[train],
        feature_set=feature_set,
        target_name=target,
        seed=conf.seed,
        variance_threshold=variance_threshold,
        input_names=features.names,
    )


def evaluate_cell(features, y, split, feature_set, spec, conf, target):
    """ Fit a cell and measure it on both parts. Failures are recorded. """
    cell = CellResult(feature_set, spec.family, target)
    train, test = list(split.train_idx), list(split.test_idx)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            artifact = fit_cell(features, y, split, feature_set, spec, conf, target)
            train_pred = predict(artifact, features.rows[train])
            test_pred = predict(artifact, features.rows[test])
        for warning in caught:
            logger.warning(f"{'/'.join(cell.key)}: {warning.message}")
        if not (np.all(np.isfinite(train_pred)) and np.all(np.isfinite(test_pred))):
            raise ArithmeticError("non-finite predictions")
        cell.train_rmse = rmse(y[train], train_pred)
        cell.test_rmse = rmse(y[test], test_pred)
        cell.train_r2 = r2(y[train], train_pred)
        cell.test_r2 = r2(y[test], test_pred)
        cell.n_inputs = artifact.pipeline.n_outputs
        cell.converged = artifact.diagnostics.get("converged")
    except (AffectBenchError, ValueError, ArithmeticError, np.linalg.LinAlgError) as ex:
        logger.warning(f"Skip {'/'.join(cell.key)} cell: {ex}")
        cell.status = "failed"
        cell.error = f"{ex.__class__.__name__}: {ex}"
        cell.train_rmse = cell.test_rmse = cell.train_r2 = cell.test_r2 = None
    return cell


def run_matrix(features, labels, conf, on_cell=None):
    """Evaluate every feature set and family, for each target.

    ``labels`` are the ``AffectLabel`` of each feature row. Each target is
    split once, the same split serving all its cells. ``on_cell`` is called
    with each finished cell.
    """
    if len(labels) != len(features):
        raise LengthMismatch(f"{len(features)} feature rows but {len(labels)} labels.")
    report = EvalReport(config=conf.snapshot())
    for target in conf.targets:
        y = np.array([getattr(label, target) for label in labels], dtype=np.float64)
        split = train_test_split(len(features), conf.test_fraction, conf.seed)
        logger.info(
            f"{target.title()}: {len(split.train_idx)} training and "
            f"{len(split.test_idx)} test clips."
        )
        for feature_set in conf.feature_sets:
            for family in conf.families:
                spec = EstimatorSpec(family, conf.hyperparameters(family))
                start = time.perf_counter()
                cell = evaluate_cell(
                    features, y, split, feature_set, spec, conf, target
                )
                report.add(cell, time.perf_counter() - start)
                if on_cell:
                    on_cell(cell)
    return report


CommonFeatures = namedtuple("CommonFeatures", "common arousal_only valence_only")


def common_features_report(arousal_sel, valence_sel, names=FEATURE_NAMES):
    """Split two K-best selections into shared and target-specific names.

    Each list is sorted by name.
    """
    for selection in (arousal_sel, valence_sel):
        if len(selection) != len(names):
            raise SchemaMismatch(
                f"Selection scores {len(selection)} columns, schema has {len(names)}."
            )
        if selection.selected_indices is None:
            raise ValueError("Scores carry no selection.")
    arousal = {names[i] for i in arousal_sel.selected_indices}
    valence = {names[i] for i in valence_sel.selected_indices}
    return CommonFeatures(
        sorted(arousal & valence), sorted(arousal - valence), sorted(valence - arousal)
    )


def common_features_rows(common):
    """ ``(name, arousal, valence)`` membership rows of all selected names. """
    arousal = set(common.common) | set(common.arousal_only)
    valence = set(common.common) | set(common.valence_only)
    return [
        (name, int(name in arousal), int(name in valence))
        for name in sorted(arousal | valence)
    ]


def correlation_report(features, labels):
    """Correlation between features, and between arousal and valence."""
    arousal = [label.arousal for label in labels]
    valence = [label.valence for label in labels]
    r, p_value = pearson(arousal, valence)
    return CorrelationReport(
        feature_corr=correlation_matrix(features.rows),
        names=features.names,
        av_pearson_r=r,
        av_p_value=p_value,
    )
