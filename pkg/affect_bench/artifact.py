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

"""Fitted models and their JSON documents.

A model document holds everything needed to predict from raw feature
vectors: the estimator family and hyperparameters, the fitted reduction
pipeline and the learned parameters. Arrays are stored as
``{"__ndarray__": dtype, "shape": [...], "data": [...]}`` objects.
"""

import json
from copy import deepcopy
from pathlib import Path

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
    CorruptDocument,
    DimensionMismatch,
    SchemaVersionMismatch,
    logger,
)
from .export import write_json
from .reduction import (
    PcaModel,
    Scaler,
    f_regression_scores,
    fit_scaler,
    parse_feature_set,
    pca_fit,
    pca_transform,
    select_k_best,
    variance_filter,
)

# Hyperparameters of each family and their default values.
DEFAULT_HYPERPARAMETERS = FrozenDict(
    {
        OLS: FrozenDict(),
        LASSO: FrozenDict({"alpha": 1.0, "tol": 1e-7, "max_iter": 10000}),
        ELASTICNET: FrozenDict(
            {"alpha": 1.0, "l1_ratio": 0.5, "tol": 1e-7, "max_iter": 10000}
        ),
        SVR_LINEAR: FrozenDict(
            {"C": 1.0, "epsilon": 0.1, "tol": 1e-3, "max_iter": 100000}
        ),
        SVR_RBF: FrozenDict(
            {
                "C": 1.0,
                "epsilon": 0.1,
                "gamma": "scale",
                "tol": 1e-3,
                "max_iter": 100000,
            }
        ),
        SVR_POLY: FrozenDict(
            {
                "C": 1.0,
                "epsilon": 0.1,
                "gamma": "scale",
                "degree": 3,
                "tol": 1e-3,
                "max_iter": 100000,
            }
        ),
        MLP2: FrozenDict({"hidden_units": 100, "epochs": 200, "learning_rate": 1e-3}),
        RANDOM_FOREST: FrozenDict(
            {
                "n_estimators": 100,
                "max_depth": None,
                "min_samples_split": 2,
                "min_samples_leaf": 1,
                "max_features": "all",
                "bootstrap": True,
            }
        ),
    }
)

# Families learning on standardized inputs.
SCALED_FAMILIES = frozenset({LASSO, ELASTICNET, SVR_LINEAR, SVR_RBF, SVR_POLY, MLP2})

_SVR_PARAMETERS = ("kernel", "gamma", "degree", "support_vectors", "dual_coef", "bias")

# Learned parameters each family's document must carry.
FAMILY_PARAMETERS = FrozenDict(
    {
        OLS: ("coef", "intercept"),
        LASSO: ("coef", "intercept"),
        ELASTICNET: ("coef", "intercept"),
        SVR_LINEAR: _SVR_PARAMETERS,
        SVR_RBF: _SVR_PARAMETERS,
        SVR_POLY: _SVR_PARAMETERS,
        MLP2: ("W1", "b1", "W2", "b2"),
        RANDOM_FOREST: ("trees",),
    }
)

DOCUMENT_KEYS = (
    "schema_version",
    "family",
    "hyperparameters",
    "pipeline",
    "parameters",
    "target_name",
    "seed",
)

ARRAY_TAG = "__ndarray__"


class EstimatorSpec:

    """ An estimator family and its full set of hyperparameters. """

    def __init__(self, family, hyperparameters=None):
        if family not in DEFAULT_HYPERPARAMETERS:
            raise ValueError(f"Unknown {family} estimator family.")
        hyperparameters = dict(hyperparameters or {})
        unrecognized = set(hyperparameters) - set(DEFAULT_HYPERPARAMETERS[family])
        if unrecognized:
            raise ValueError(
                f"Unrecognized {unrecognized} hyperparameters for {family}."
            )
        self.family = family
        self.hyperparameters = {**DEFAULT_HYPERPARAMETERS[family], **hyperparameters}

    def __repr__(self):
        return f"<{self.__class__.__name__} {self.family} {self.hyperparameters}>"

    def __eq__(self, other):
        return (
            isinstance(other, EstimatorSpec)
            and self.family == other.family
            and self.hyperparameters == other.hyperparameters
        )

    @property
    def scaled(self):
        return self.family in SCALED_FAMILIES


class Pipeline:

    """Fitted chain of transforms from the raw feature columns to model inputs.

    Stages, each optional: low-variance filter, then K-best selection or
    standardized PCA, then standardization.
    """

    def __init__(
        self,
        input_names,
        feature_set="all",
        variance_indices=None,
        selected_indices=None,
        pca_scaler=None,
        pca=None,
        scaler=None,
    ):
        self.input_names = tuple(input_names)
        self.feature_set = feature_set
        self.variance_indices = (
            None if variance_indices is None else tuple(map(int, variance_indices))
        )
        self.selected_indices = (
            None if selected_indices is None else tuple(map(int, selected_indices))
        )
        self.pca_scaler = pca_scaler
        self.pca = pca
        self.scaler = scaler

    @classmethod
    def fit(
        cls,
        X,
        y,
        feature_set="all",
        standardize=False,
        variance_threshold=None,
        input_names=None,
    ):
        """Fit all stages on training rows.

        Standardization is skipped after PCA, whose scores are already
        centered and decorrelated.
        """
        X = np.asarray(X, dtype=np.float64)
        if input_names is None:
            input_names = tuple(f"x{i}" for i in range(X.shape[1]))
        if len(input_names) != X.shape[1]:
            raise DimensionMismatch(
                f"{len(input_names)} column names for {X.shape[1]} columns."
            )
        kind, argument = parse_feature_set(feature_set)
        pipeline = cls(input_names, feature_set)

        if variance_threshold is not None:
            pipeline.variance_indices = variance_filter(X, variance_threshold)
            X = X[:, pipeline.variance_indices]
        if kind == "kbest":
            scores = select_k_best(f_regression_scores(X, y), argument)
            pipeline.selected_indices = scores.selected_indices
            X = X[:, pipeline.selected_indices]
        elif kind == "pca":
            pipeline.pca_scaler = fit_scaler(X)
            pipeline.pca = pca_fit(pipeline.pca_scaler.transform(X), argument)
        if standardize and kind != "pca":
            pipeline.scaler = fit_scaler(X)
        return pipeline

    @property
    def selected_names(self):
        """ Names of the raw columns feeding the model, or its PCA. """
        names = self.input_names
        if self.variance_indices is not None:
            names = tuple(names[i] for i in self.variance_indices)
        if self.selected_indices is not None:
            names = tuple(names[i] for i in self.selected_indices)
        return names

    @property
    def n_outputs(self):
        if self.pca is not None:
            return self.pca.n_components
        return len(self.selected_names)

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.input_names):
            raise DimensionMismatch(
                f"Model expects {len(self.input_names)} features, got {X.shape[1]}."
            )
        if self.variance_indices is not None:
            X = X[:, self.variance_indices]
        if self.selected_indices is not None:
            X = X[:, self.selected_indices]
        if self.pca is not None:
            X = pca_transform(self.pca, self.pca_scaler.transform(X))
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return X

    def to_dict(self):
        return {
            "input_names": list(self.input_names),
            "feature_set": self.feature_set,
            "variance_indices": self.variance_indices,
            "selected_indices": self.selected_indices,
            "pca_scaler": self.pca_scaler.to_dict() if self.pca_scaler else None,
            "pca": self.pca.to_dict() if self.pca else None,
            "scaler": self.scaler.to_dict() if self.scaler else None,
        }

    @classmethod
    def from_dict(cls, data):
        def optional(loader, key):
            return loader(data[key]) if data[key] else None

        return cls(
            data["input_names"],
            data["feature_set"],
            variance_indices=data["variance_indices"],
            selected_indices=data["selected_indices"],
            pca_scaler=optional(Scaler.from_dict, "pca_scaler"),
            pca=optional(PcaModel.from_dict, "pca"),
            scaler=optional(Scaler.from_dict, "scaler"),
        )


def encode(value):
    """ Recursively turn arrays and numpy scalars into JSON-compatible values. """
    if isinstance(value, np.ndarray):
        return {
            ARRAY_TAG: value.dtype.name,
            "shape": list(value.shape),
            "data": value.ravel().tolist(),
        }
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(key): encode(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(item) for item in value]
    return value


def decode(value):
    """ Inverse of ``encode``. Tuples come back as lists. """
    if isinstance(value, dict):
        if ARRAY_TAG in value:
            array = np.array(value["data"], dtype=value[ARRAY_TAG])
            return array.reshape(value["shape"])
        return {key: decode(item) for key, item in value.items()}
    if isinstance(value, list):
        return [decode(item) for item in value]
    return value


class ModelArtifact:

    """ A fitted estimator, ready to predict from raw feature vectors. """

    def __init__(
        self,
        spec,
        parameters,
        pipeline,
        target_name=None,
        seed=0,
        diagnostics=None,
        config=None,
        schema_version=SCHEMA_VERSION,
    ):
        self.spec = spec
        self.parameters = parameters
        self.pipeline = pipeline
        self.target_name = target_name
        self.seed = seed
        self.diagnostics = diagnostics or {}
        self.config = config
        self.schema_version = schema_version

    @property
    def family(self):
        return self.spec.family

    def __repr__(self):
        return (
            f"<{self.__class__.__name__} {self.family} on {self.pipeline.feature_set} "
            f"for {self.target_name}>"
        )

    def to_document(self):
        return encode(
            {
                "schema_version": self.schema_version,
                "family": self.family,
                "hyperparameters": self.spec.hyperparameters,
                "pipeline": self.pipeline.to_dict(),
                "parameters": self.parameters,
                "target_name": self.target_name,
                "seed": self.seed,
                "diagnostics": self.diagnostics,
                "config": self.config,
            }
        )

    @classmethod
    def from_document(cls, document):
        """Rebuild an artifact from its decoded JSON document.

        Raises ``SchemaVersionMismatch`` or ``CorruptDocument``.
        """
        if not isinstance(document, dict) or "schema_version" not in document:
            raise CorruptDocument("Model document has no schema version.")
        if document["schema_version"] != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"Model has schema version {document['schema_version']!r}, "
                f"expected {SCHEMA_VERSION}."
            )
        missing = [key for key in DOCUMENT_KEYS if key not in document]
        if missing:
            raise CorruptDocument(f"Model document misses {missing}.")
        family = document["family"]
        if family not in FAMILY_PARAMETERS:
            raise CorruptDocument(f"Unknown {family!r} estimator family.")
        try:
            parameters = decode(document["parameters"])
            absent = [key for key in FAMILY_PARAMETERS[family] if key not in parameters]
            if absent:
                raise CorruptDocument(f"{family} model misses {absent} parameters.")
            return cls(
                EstimatorSpec(family, document["hyperparameters"]),
                parameters,
                Pipeline.from_dict(decode(document["pipeline"])),
                target_name=document["target_name"],
                seed=document["seed"],
                diagnostics=decode(document.get("diagnostics")),
                config=deepcopy(document.get("config")),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as ex:
            raise CorruptDocument(f"Malformed model document: {ex!r}") from ex


def save_model(artifact, path):
    """ Write a model as canonical JSON. Same artifact, same bytes. """
    write_json(path, artifact.to_document())
    logger.info(f"{artifact!r} saved to {path}")


def load_model(path):
    """ Read a model document. ``OSError`` is left to the caller. """
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as ex:
        raise CorruptDocument(f"{path} is not valid JSON: {ex}") from ex
    return ModelArtifact.from_document(document)
