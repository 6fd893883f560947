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

"""Registry of estimator families, and the fit and predict entry points.

Every family is a pair of functions: ``fit(X, y, hyperparameters, seed)``
returning learned parameters and diagnostics, and ``predict(parameters, X)``.
"""

import numpy as np
from boltons.dictutils import FrozenDict

from . import (
    ELASTICNET,
    LASSO,
    MLP2,
    OLS,
    RANDOM_FOREST,
    SCHEMA_VERSION,
    SVR_LINEAR,
    SVR_POLY,
    SVR_RBF,
    LengthMismatch,
    SchemaVersionMismatch,
    logger,
)
from .artifact import EstimatorSpec, ModelArtifact, Pipeline
from .forest import RegressionTree, forest_predict, grow_forest
from .linear import coordinate_descent, least_squares, linear_predict
from .mlp import mlp_predict, train_mlp
from .svr import fit_svr_params, svr_predict


def _fit_ols(X, y, hyperparameters, seed):
    return least_squares(X, y), {}


def _fit_lasso(X, y, hyperparameters, seed):
    return coordinate_descent(X, y, l1_ratio=1.0, **hyperparameters)


def _fit_elasticnet(X, y, hyperparameters, seed):
    return coordinate_descent(X, y, **hyperparameters)


def _svr_fitter(kernel):
    def fit(X, y, hyperparameters, seed):
        return fit_svr_params(X, y, kernel=kernel, **hyperparameters)

    fit.__name__ = f"_fit_svr_{kernel}"
    return fit


def _fit_mlp2(X, y, hyperparameters, seed):
    return train_mlp(X, y, seed=seed, **hyperparameters)


def _fit_random_forest(X, y, hyperparameters, seed):
    trees = grow_forest(X, y, seed=seed, **hyperparameters)
    diagnostics = {
        "n_nodes": sum(len(tree) for tree in trees),
        "max_depth": max(tree.depth() for tree in trees),
    }
    return {"trees": [tree.to_dict() for tree in trees]}, diagnostics


def _predict_random_forest(params, X):
    return forest_predict([RegressionTree.from_dict(t) for t in params["trees"]], X)


# Fit and predict functions of each family.
FAMILIES = FrozenDict(
    {
        OLS: (_fit_ols, linear_predict),
        LASSO: (_fit_lasso, linear_predict),
        ELASTICNET: (_fit_elasticnet, linear_predict),
        SVR_LINEAR: (_svr_fitter("linear"), svr_predict),
        SVR_RBF: (_svr_fitter("rbf"), svr_predict),
        SVR_POLY: (_svr_fitter("poly"), svr_predict),
        MLP2: (_fit_mlp2, mlp_predict),
        RANDOM_FOREST: (_fit_random_forest, _predict_random_forest),
    }
)


def fit_estimator(
    spec,
    X,
    y,
    feature_set="all",
    target_name=None,
    seed=0,
    standardize=None,
    variance_threshold=None,
    input_names=None,
):
    """Fit a reduction pipeline and an estimator on training rows.

    ``standardize`` defaults to the family's own preference. A
    ``variance_threshold`` enables the low-variance filter.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got {X.ndim} dimensions.")
    if X.shape[0] != y.size:
        raise LengthMismatch(f"{X.shape[0]} rows but {y.size} targets.")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("Training data must be finite.")
    if standardize is None:
        standardize = spec.scaled

    pipeline = Pipeline.fit(
        X,
        y,
        feature_set=feature_set,
        standardize=standardize,
        variance_threshold=variance_threshold,
        input_names=input_names,
    )
    fit, _ = FAMILIES[spec.family]
    logger.debug(f"Fit {spec!r} on {X.shape[0]} rows, {pipeline.n_outputs} inputs.")
    parameters, diagnostics = fit(pipeline.transform(X), y, spec.hyperparameters, seed)
    return ModelArtifact(
        spec,
        parameters,
        pipeline,
        target_name=target_name,
        seed=seed,
        diagnostics=diagnostics,
    )


def predict(artifact, X):
    """ Predict targets from raw feature rows. """
    if artifact.schema_version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"Model has schema version {artifact.schema_version}, "
            f"expected {SCHEMA_VERSION}."
        )
    _, predict_function = FAMILIES[artifact.family]
    return np.asarray(
        predict_function(artifact.parameters, artifact.pipeline.transform(X)),
        dtype=np.float64,
    )


def fit_ols(X, y):
    return fit_estimator(EstimatorSpec(OLS), X, y, standardize=False)


def fit_lasso(X, y, alpha=1.0, **hyperparameters):
    """ Lasso on inputs the caller has already standardized. """
    spec = EstimatorSpec(LASSO, {"alpha": alpha, **hyperparameters})
    return fit_estimator(spec, X, y, standardize=False)


def fit_elasticnet(X, y, alpha=1.0, l1_ratio=0.5, **hyperparameters):
    """ Elastic net on inputs the caller has already standardized. """
    spec = EstimatorSpec(
        ELASTICNET, {"alpha": alpha, "l1_ratio": l1_ratio, **hyperparameters}
    )
    return fit_estimator(spec, X, y, standardize=False)


def fit_svr(X, y, kernel="rbf", C=1.0, epsilon=0.1, **hyperparameters):
    """SVR with a ``linear``, ``rbf`` or ``poly`` kernel.

    Extra hyperparameters are ``gamma``, ``degree``, ``tol`` and
    ``max_iter``, as the kernel allows.
    """
    family = f"svr_{kernel}"
    if family not in FAMILIES:
        raise ValueError(f"Unknown {kernel} kernel.")
    spec = EstimatorSpec(family, {"C": C, "epsilon": epsilon, **hyperparameters})
    return fit_estimator(spec, X, y, standardize=False)


def fit_mlp2(X, y, hidden_units=100, epochs=200, learning_rate=1e-3, seed=0):
    spec = EstimatorSpec(
        MLP2,
        {
            "hidden_units": hidden_units,
            "epochs": epochs,
            "learning_rate": learning_rate,
        },
    )
    return fit_estimator(spec, X, y, seed=seed, standardize=False)


def fit_random_forest(
    X,
    y,
    n_estimators=100,
    max_depth=None,
    min_samples_split=2,
    min_samples_leaf=1,
    seed=0,
    max_features="all",
    bootstrap=True,
):
    spec = EstimatorSpec(
        RANDOM_FOREST,
        {
            "n_estimators": n_estimators,
            "max_depth": max_depth,
            "min_samples_split": min_samples_split,
            "min_samples_leaf": min_samples_leaf,
            "max_features": max_features,
            "bootstrap": bootstrap,
        },
    )
    return fit_estimator(spec, X, y, seed=seed, standardize=False)
