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

"""Exhaustive random forest hyperparameter search.

Every configuration of the grid is fitted on the same training split, with
its own seed derived from its position, so results don't depend on how the
work is scheduled. Progress is saved in a checkpoint file an interrupted
search can resume from.
"""

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import timedelta
from itertools import product, repeat
from pathlib import Path
from typing import Optional, Tuple

import arrow
import numpy as np
from boltons.iterutils import chunked
from tabulate import tabulate

from . import (
    DEFAULT_CHECKPOINT_EVERY,
    DEFAULT_GRID,
    SCHEMA_VERSION,
    CheckpointMismatch,
    ConstantTarget,
    logger,
)
from .colorize import format_metric
from .evaluation import r2, rmse, train_test_split
from .export import write_csv, write_json
from .forest import forest_predict, grow_forest
from .reduction import f_regression_scores, select_k_best

# Axes of the grid, in iteration order: the last axis varies fastest.
GRID_AXES = ("k", "n_estimators", "max_depth", "min_samples_split", "min_samples_leaf")

METRIC_COLUMNS = ("train_rmse", "test_rmse", "train_r2", "test_r2")

TABLE_COLUMNS = ("index",) + GRID_AXES + METRIC_COLUMNS


@dataclass(frozen=True)
class GridSpec:

    """ Candidate values of each random forest hyperparameter. """

    k: Tuple[int, ...] = DEFAULT_GRID["k"]
    n_estimators: Tuple[int, ...] = DEFAULT_GRID["n_estimators"]
    max_depth: Tuple[Optional[int], ...] = DEFAULT_GRID["max_depth"]
    min_samples_split: Tuple[int, ...] = DEFAULT_GRID["min_samples_split"]
    min_samples_leaf: Tuple[int, ...] = DEFAULT_GRID["min_samples_leaf"]

    def __post_init__(self):
        for axis in GRID_AXES:
            values = tuple(getattr(self, axis))
            if not values:
                raise ValueError(f"Grid axis {axis} has no value.")
            object.__setattr__(self, axis, values)

    @classmethod
    def from_config(cls, conf):
        return cls(**conf.grid)

    def __len__(self):
        return int(np.prod([len(getattr(self, axis)) for axis in GRID_AXES]))

    def configurations(self):
        """ Yield ``(index, params)`` over the cartesian product of all axes. """
        axes = [getattr(self, axis) for axis in GRID_AXES]
        for index, values in enumerate(product(*axes)):
            yield index, dict(zip(GRID_AXES, values))

    def to_dict(self):
        return {axis: list(getattr(self, axis)) for axis in GRID_AXES}


@dataclass(frozen=True)
class GridTask:

    """ Everything a worker needs to evaluate configurations. """

    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    scores: object
    seed: int


def evaluate_configuration(index, params, task):
    """ Fit and measure one configuration. Module-level for worker processes. """
    columns = list(select_k_best(task.scores, params["k"]).selected_indices)
    trees = grow_forest(
        task.X_train[:, columns],
        task.y_train,
        n_estimators=params["n_estimators"],
        max_depth=params["max_depth"],
        min_samples_split=params["min_samples_split"],
        min_samples_leaf=params["min_samples_leaf"],
        seed=task.seed ^ index,
    )
    train_pred = forest_predict(trees, task.X_train[:, columns])
    test_pred = forest_predict(trees, task.X_test[:, columns])
    row = {"index": index, **params}
    row["train_rmse"] = rmse(task.y_train, train_pred)
    row["test_rmse"] = rmse(task.y_test, test_pred)
    row["train_r2"] = r2(task.y_train, train_pred)
    row["test_r2"] = r2(task.y_test, test_pred)
    logger.debug(f"Configuration #{index}: test RMSE {row['test_rmse']:.4f}")
    return row


def _evaluate_batch(batch, task):
    return [evaluate_configuration(index, params, task) for index, params in batch]


def ranking_key(row):
    """Lowest test RMSE first, ties going to smaller k, fewer trees, then order."""
    return row["test_rmse"], row["k"], row["n_estimators"], row["index"]


def best_row(rows):
    return min(rows, key=ranking_key)


def search_fingerprint(grid, target, seed, test_fraction, X, y):
    """ Digest identifying a search, checked before resuming it. """
    digest = hashlib.sha256()
    settings = {
        "grid": grid.to_dict(),
        "target": target,
        "seed": seed,
        "test_fraction": test_fraction,
        "shape": list(X.shape),
    }
    digest.update(json.dumps(settings, sort_keys=True).encode("utf-8"))
    digest.update(np.ascontiguousarray(X, dtype=np.float64).tobytes())
    digest.update(np.ascontiguousarray(y, dtype=np.float64).tobytes())
    return digest.hexdigest()


def save_checkpoint(path, fingerprint, rows):
    """ Atomically write the rows evaluated so far. """
    rows = sorted(rows, key=lambda row: row["index"])
    write_json(
        path,
        {
            "schema_version": SCHEMA_VERSION,
            "fingerprint": fingerprint,
            "completed": [row["index"] for row in rows],
            "rows": rows,
        },
    )


def load_checkpoint(path, fingerprint):
    """Read the rows of a checkpoint, indexed by configuration.

    Raises ``CheckpointMismatch`` if the file is unusable or belongs to
    another search.
    """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
        version = document["schema_version"]
        stored_fingerprint = document["fingerprint"]
        rows = {row["index"]: row for row in document["rows"]}
        completed = set(document["completed"])
    except FileNotFoundError as ex:
        raise CheckpointMismatch(f"No checkpoint at {path}.") from ex
    except (ValueError, KeyError, TypeError) as ex:
        raise CheckpointMismatch(f"{path} is not a grid checkpoint: {ex!r}") from ex
    if version != SCHEMA_VERSION:
        raise CheckpointMismatch(f"{path} has schema version {version!r}.")
    if stored_fingerprint != fingerprint:
        raise CheckpointMismatch(f"{path} was saved by a different search.")
    if completed != set(rows):
        raise CheckpointMismatch(f"{path} rows don't match its completed list.")
    return rows


class GridResult:

    """ Full table of a grid search and its best configuration. """

    def __init__(self, rows, target, selected_names, started_at, wall_clock):
        self.rows = sorted(rows, key=lambda row: row["index"])
        self.target = target
        self.best = best_row(self.rows)
        self.selected_names = tuple(selected_names)
        self.started_at = started_at
        self.wall_clock = wall_clock

    def __len__(self):
        return len(self.rows)

    @property
    def best_params(self):
        return {axis: self.best[axis] for axis in GRID_AXES}

    @property
    def elapsed(self):
        """ Wall-clock duration as ``H:MM:SS``. """
        return str(timedelta(seconds=round(self.wall_clock)))

    def to_csv(self, path, config=None):
        rows = ([row[col] for col in TABLE_COLUMNS] for row in self.rows)
        write_csv(path, TABLE_COLUMNS, rows, config=config)

    def timings_document(self):
        return {
            "started_at": self.started_at.isoformat(),
            "wall_clock": self.elapsed,
            "configurations": len(self),
        }

    def report(self, top=10):
        ranked = sorted(self.rows, key=ranking_key)
        table = [list(TABLE_COLUMNS)]
        for row in ranked[:top]:
            table.append(
                [row[col] for col in ("index",) + GRID_AXES]
                + [format_metric(row[col]) for col in METRIC_COLUMNS]
            )
        output = tabulate(table, tablefmt="fancy_grid", headers="firstrow")
        output += (
            f"\n{len(self)} configurations evaluated for {self.target} "
            f"in {self.elapsed}.\n"
        )
        return output


def grid_search_rf(
    features,
    labels,
    target,
    grid=None,
    seed=42,
    test_fraction=0.2,
    jobs=1,
    checkpoint=None,
    resume=False,
    checkpoint_every=DEFAULT_CHECKPOINT_EVERY,
    on_progress=None,
):
    """Evaluate every configuration of ``grid`` on a single train/test split.

    K-best scores are computed once on the training rows. With a
    ``checkpoint`` path, progress is saved every ``checkpoint_every``
    configurations. With ``resume``, already evaluated configurations are
    read back from it instead of being refitted. ``on_progress`` is called
    with the number of configurations evaluated by each batch.
    """
    grid = grid or GridSpec()
    if len(labels) != len(features):
        raise ValueError(f"{len(features)} feature rows but {len(labels)} labels.")
    if checkpoint_every < 1:
        raise ValueError(f"Invalid {checkpoint_every!r} checkpoint interval.")
    started_at = arrow.utcnow()
    start = time.perf_counter()

    X = features.rows
    y = np.array([getattr(label, target) for label in labels], dtype=np.float64)
    split = train_test_split(len(features), test_fraction, seed)
    train, test = list(split.train_idx), list(split.test_idx)
    if np.ptp(y[test]) == 0:
        raise ConstantTarget(
            f"{target.title()} is constant over the {len(test)} test clips, R² is "
            "undefined for every configuration."
        )
    task = GridTask(
        X_train=X[train],
        y_train=y[train],
        X_test=X[test],
        y_test=y[test],
        scores=f_regression_scores(X[train], y[train]),
        seed=seed,
    )

    fingerprint = search_fingerprint(grid, target, seed, test_fraction, X, y)
    rows = {}
    if resume:
        rows = load_checkpoint(checkpoint, fingerprint)
        logger.info(f"Resume search from {len(rows)} evaluated configurations.")
        if on_progress:
            on_progress(len(rows))

    pending = [config for config in grid.configurations() if config[0] not in rows]
    logger.info(f"{len(pending)} of {len(grid)} configurations to evaluate.")
    batches = chunked(pending, checkpoint_every)

    def record(batch_rows):
        rows.update((row["index"], row) for row in batch_rows)
        if checkpoint:
            save_checkpoint(checkpoint, fingerprint, rows.values())
        if on_progress:
            on_progress(len(batch_rows))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            for batch in batches:
                slices = chunked(batch, max(1, -(-len(batch) // jobs)))
                results = executor.map(_evaluate_batch, slices, repeat(task))
                record([row for result in results for row in result])
    else:
        for batch in batches:
            record(_evaluate_batch(batch, task))

    best_k = best_row(rows.values())["k"]
    best_columns = select_k_best(task.scores, best_k).selected_indices
    return GridResult(
        rows.values(),
        target,
        [features.names[i] for i in best_columns],
        started_at,
        time.perf_counter() - start,
    )
