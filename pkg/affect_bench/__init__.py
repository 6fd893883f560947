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

""" Expose package-wide elements. """

import json
import logging
import re
from copy import deepcopy
from pathlib import Path

import tomlkit
from boltons.ecoutils import get_profile

# Canonical name of the CLI.
CLI_NAME = "affect-bench"

__version__ = "1.0.0"


# Environment data.
env_data = get_profile(scrub=True)


# Initialize global logger.
logger = logging.getLogger(CLI_NAME)


# Environment variable pointing to a TOML configuration file, used when no
# --config option is given.
CONFIG_ENV_VAR = "AFFECT_BENCH_CONFIG"


# Version of every document we write: feature CSV, model files, reports and
# grid checkpoints. Readers reject any other value.
SCHEMA_VERSION = 1


# Affect dimensions we know how to predict.
AROUSAL = "arousal"
VALENCE = "valence"
TARGETS = (AROUSAL, VALENCE)


# Internal sample rate all clips are resampled to. Keeps Nyquist above every
# feature band in use.
DEFAULT_SAMPLE_RATE = 22050  # Hz


# Low-level frames, used by all spectral and timbral descriptors.
DEFAULT_FRAME_MS = 50.0
DEFAULT_OVERLAP = 0.5


# Medium-level windows, used by rhythm, tonal and low-energy descriptors.
DEFAULT_MEDIUM_WINDOW_S = 2.0


# Mel filterbank feeding the MFCCs.
DEFAULT_N_MELS = 40
DEFAULT_F_MIN = 20.0  # Hz


# Peaks below this fraction of a frame's maximum magnitude are ignored by the
# roughness and chroma analysis.
DEFAULT_PEAK_THRESHOLD = 0.01


# Optional low-variance filter applied before any reduction.
DEFAULT_VARIANCE_THRESHOLD = 0.02


# Estimator families, in the order reports list them.
OLS = "ols"
LASSO = "lasso"
ELASTICNET = "elasticnet"
SVR_LINEAR = "svr_linear"
SVR_RBF = "svr_rbf"
SVR_POLY = "svr_poly"
MLP2 = "mlp2"
RANDOM_FOREST = "random_forest"
ESTIMATOR_FAMILIES = (
    OLS,
    LASSO,
    ELASTICNET,
    SVR_LINEAR,
    SVR_RBF,
    SVR_POLY,
    MLP2,
    RANDOM_FOREST,
)


# Feature sets are named after their reduction: all 68 columns, PCA keeping
# a percentage of explained variance, or the K best columns by F statistic.
FEATURE_SET_PATTERN = re.compile(r"^(?:all|pca(?P<pca>\d{1,3})|kbest(?P<kbest>\d+))$")

# Reductions a feature set name can stand for.
SELECTIONS = ("all", "pca", "kbest")


# Random forest hyperparameter grid explored by the tuner. The product has
# 20 * 6 * 5 * 6 * 4 = 14400 configurations.
DEFAULT_GRID = {
    "k": tuple(range(10, 30)),
    "n_estimators": (50, 100, 150, 200, 250, 300),
    "max_depth": (5, 10, 20, 30, 50),
    "min_samples_split": (2, 3, 4, 5, 6, 7),
    "min_samples_leaf": (1, 2, 3, 5),
}


# A checkpoint of the grid search is saved every that many configurations.
DEFAULT_CHECKPOINT_EVERY = 200


class AffectBenchError(Exception):

    """ Base of all errors raised by the package. """

    exit_code = 1


class InputError(AffectBenchError):

    """ Audio input can't be read or analyzed. """

    exit_code = 2


class MalformedContainer(InputError):

    """ RIFF/WAVE container is truncated or has bad magic or chunk sizes. """


class UnsupportedEncoding(InputError):

    """ WAV payload is encoded with a codec we do not decode. """


class SilentClip(InputError):

    """ All samples of the clip are exactly zero. """


class ClipTooShort(InputError):

    """ Clip is shorter than a single analysis frame. """


class WindowTooShort(ClipTooShort):

    """ Clip is shorter than a single medium-level window. """


class FitError(AffectBenchError):

    """ Numerical procedure can't proceed on the provided data. """

    exit_code = 3


class EmptySpectrum(FitError):

    """ All magnitudes of a spectrum are zero. """


class LengthMismatch(FitError):

    """ Paired sequences have different lengths. """


class DegenerateMatrix(FitError):

    """ Matrix has rank zero. """


class ConstantTarget(FitError):

    """ Target has zero variance. """


class ConstantInput(FitError):

    """ Input vector has zero variance. """


class BadK(FitError):

    """ Number of features to select is out of range. """


class DivergedLoss(FitError):

    """ Training loss became infinite or NaN. """


class SchemaError(AffectBenchError):

    """ Tabular input does not follow its expected layout. """

    exit_code = 4


class ManifestParseError(SchemaError):

    """ Manifest row or header can't be parsed. """


class LabelOutOfRange(SchemaError):

    """ Raw affect label lies outside its declared range. """


class DuplicatePath(SchemaError):

    """ Manifest references the same clip twice. """


class SchemaMismatch(SchemaError):

    """ Columns or rows do not match the canonical feature schema. """


class DimensionMismatch(SchemaError):

    """ Matrix has an unexpected number of columns. """


class CheckpointMismatch(AffectBenchError):

    """ Checkpoint was produced by a different search. """

    exit_code = 5


class ModelError(AffectBenchError):

    """ Model document can't be used. """

    exit_code = 6


class SchemaVersionMismatch(ModelError):

    """ Document was written with another schema version. """


class CorruptDocument(ModelError):

    """ Document is not valid JSON or misses required content. """


class NonConverged(UserWarning):

    """ Iterative solver stopped on its iteration budget. """


class RunConfig:

    """ Holds the effective configuration of a run. """

    # Keep these defaults in sync with CLI option definitions.
    default_conf = {
        "sample_rate": DEFAULT_SAMPLE_RATE,
        "peak_normalize": False,
        "label_min": None,
        "label_max": None,
        "frame_ms": DEFAULT_FRAME_MS,
        "overlap": DEFAULT_OVERLAP,
        "medium_window_s": DEFAULT_MEDIUM_WINDOW_S,
        "n_mels": DEFAULT_N_MELS,
        "f_min": DEFAULT_F_MIN,
        "roughness_threshold": DEFAULT_PEAK_THRESHOLD,
        "key_contrast_weighting": False,
        "variance_threshold_flag": False,
        "variance_threshold": DEFAULT_VARIANCE_THRESHOLD,
        "pca_target": 0.9,
        "kbest_k": 25,
        # Unset, the matrix evaluates all, pca<pca_target> and kbest<kbest_k>.
        "feature_sets": None,
        "families": ESTIMATOR_FAMILIES,
        "targets": TARGETS,
        "test_fraction": 0.2,
        "seed": 42,
        "jobs": 1,
        "strict": False,
        "checkpoint_every": DEFAULT_CHECKPOINT_EVERY,
        "grid": DEFAULT_GRID,
        "estimators": {},
        "paths": {},
    }

    def __init__(self, **kwargs):
        """ Validates configuration parameter types and values. """
        # Load default values.
        self.conf = deepcopy(self.default_conf)

        unrecognized_options = set(kwargs) - set(self.default_conf)
        if unrecognized_options:
            raise ValueError(f"Unrecognized {unrecognized_options} options.")

        # Unset CLI flags come as None and must not shadow file or defaults.
        self.conf.update({k: v for k, v in kwargs.items() if v is not None})

        # Grid is merged key by key, so a file can restrict a single axis.
        grid = dict(DEFAULT_GRID)
        unknown_axes = set(self.conf["grid"]) - set(DEFAULT_GRID)
        if unknown_axes:
            raise ValueError(f"Unrecognized {unknown_axes} grid axes.")
        grid.update(self.conf["grid"])
        self.conf["grid"] = {axis: tuple(values) for axis, values in grid.items()}

        unknown_families = set(self.estimators).union(self.families) - set(
            ESTIMATOR_FAMILIES
        )
        if unknown_families:
            raise ValueError(f"Unrecognized {unknown_families} estimator families.")

        if self.conf["feature_sets"] is None:
            self.conf["feature_sets"] = tuple(map(self.feature_set, SELECTIONS))
        for set_id in self.feature_sets:
            if not FEATURE_SET_PATTERN.match(set_id):
                raise ValueError(f"Unknown {set_id} feature set.")

        assert set(self.targets).issubset(TARGETS)
        assert self.sample_rate > 0
        assert self.frame_ms > 0
        assert 0 <= self.overlap < 1
        assert self.medium_window_s * 1000 >= self.frame_ms
        assert self.n_mels >= 14
        assert 0 <= self.f_min < self.sample_rate / 2
        assert 0 < self.roughness_threshold < 1
        assert self.variance_threshold >= 0
        assert 0 < self.pca_target <= 1
        assert self.kbest_k >= 1
        assert 0 < self.test_fraction < 1
        assert self.jobs >= 1
        assert self.checkpoint_every >= 1
        assert all(self.grid.values())
        # Raw label range is declared as a pair, or not at all.
        assert (self.label_min is None) == (self.label_max is None)
        if self.label_min is not None:
            assert self.label_min < self.label_max

    @classmethod
    def from_file(cls, path, **overrides):
        """Load a TOML configuration file, then apply overrides on top.

        Overrides set to ``None`` are ignored, so unset CLI options keep the
        file's values.
        """
        path = Path(path)
        logger.debug(f"Load configuration from {path}")
        document = tomlkit.parse(path.read_text(encoding="utf-8")).unwrap()
        document.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**document)

    def __getattr__(self, attr_id):
        """ Expose configuration entries as properties. """
        # Guard against lookups happening before __init__, i.e. on unpickling.
        conf = self.__dict__.get("conf", {})
        if attr_id in conf:
            return conf[attr_id]
        raise AttributeError(attr_id)

    def feature_set(self, selection):
        """Name of the feature set of a reduction, sized by the configuration.

        ``pca_target`` is rounded to a whole percentage.
        """
        return {
            "all": "all",
            "kbest": f"kbest{self.kbest_k}",
            "pca": f"pca{round(self.pca_target * 100)}",
        }[selection]

    def hyperparameters(self, family):
        """ User overrides of the estimator family's hyperparameters. """
        return dict(self.estimators.get(family, {}))

    def record_paths(self, **paths):
        """ Keep track of the files a command reads and writes. """
        self.conf["paths"].update({k: str(v) for k, v in paths.items() if v})

    def snapshot(self):
        """ Plain, JSON-compatible and key-sorted copy of the configuration. """
        return json.loads(json.dumps(self.conf, sort_keys=True))

    def table(self):
        """ Flatten the configuration as ``(key, value)`` rows. """
        rows = []
        for key, value in sorted(self.snapshot().items()):
            if isinstance(value, dict):
                for sub_key, sub_value in sorted(value.items()):
                    rows.append((f"{key}.{sub_key}", sub_value))
            else:
                rows.append((key, value))
        return rows
