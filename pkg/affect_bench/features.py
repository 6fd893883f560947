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

"""The 68-column feature schema and the clip-level summarization.

Each of the 34 base descriptors is computed over low-level frames or
medium-level windows, then summarized by its mean and standard deviation.
"""

import numpy as np
from boltons.cacheutils import cachedproperty

from . import (
    SCHEMA_VERSION,
    ClipTooShort,
    EmptySpectrum,
    RunConfig,
    SchemaMismatch,
    logger,
)
from .descriptors import (
    N_MFCC,
    flux_curve,
    medium_windows,
    mfcc,
    rms,
    spectral_entropy,
    spectral_flatness,
    spectral_irregularity,
    spectral_moments,
    spectral_novelty,
    spectral_rolloff,
    spectral_roughness,
    window_low_energy,
    window_rhythm,
    window_tonal,
    zero_crossing_rate,
)
from .dsp import Spectrum, frame_signal, magnitude_spectrogram, mel_filterbank
from .export import read_csv, write_csv

# Base descriptors, in canonical order.
BASE_FEATURES = (
    "dynamics_rms",
    "rhythm_fluctuationmax_peakpos",
    "rhythm_pulseclarity",
    "rhythm_tempo",
    "spectral_centroid",
    "spectral_spread",
    "spectral_skewness",
    "spectral_kurtosis",
    "spectral_flatness",
    "spectral_entropy",
    "spectral_rolloff85",
    "spectral_rolloff95",
    "spectral_roughness",
    "spectral_irregularity",
    "spectral_novelty",
    *(f"spectral_mfcc_{i}" for i in range(1, N_MFCC + 1)),
    "timbre_zerocross",
    "timbre_lowenergy",
    "timbre_spectralflux",
    "tonal_mode",
    "tonal_keyclarity",
    "tonal_hcdf",
)

SUMMARY_STATS = ("mean", "std")

MFCC_PREFIX = "spectral_mfcc_"


def feature_name(base, stat):
    """Column name of a summary statistic of a base descriptor.

    MFCCs carry the statistic before their coefficient index.
    """
    if base.startswith(MFCC_PREFIX):
        return f"{MFCC_PREFIX}{stat}_{base[len(MFCC_PREFIX):]}"
    return f"{base}_{stat}"


# The 68 feature columns, mean before std for each base descriptor.
FEATURE_NAMES = tuple(
    feature_name(base, stat) for base in BASE_FEATURES for stat in SUMMARY_STATS
)

CSV_ID_COLUMN = "clip_id"


def summary_stats(values):
    """Mean and sample standard deviation of a series.

    A single value has a standard deviation of 0. An empty series gives
    ``(0, 0)``.
    """
    values = np.asarray(values, dtype=np.float64)
    if not values.size:
        return 0.0, 0.0
    std = values.std(ddof=1) if values.size > 1 else 0.0
    return float(values.mean()), float(std)


class FeatureVector:

    """ Feature values of a single clip, in ``FEATURE_NAMES`` order. """

    def __init__(self, values, clip_id="<memory>", schema_version=SCHEMA_VERSION):
        values = np.array(values, dtype=np.float64)
        if values.shape != (len(FEATURE_NAMES),):
            raise SchemaMismatch(
                f"Feature vector has shape {values.shape}, "
                f"expected ({len(FEATURE_NAMES)},)."
            )
        if not np.all(np.isfinite(values)):
            raise SchemaMismatch(f"{clip_id} has non-finite features.")
        values.setflags(write=False)
        self.values = values
        self.clip_id = clip_id
        self.schema_version = schema_version

    def __len__(self):
        return self.values.size

    def __getitem__(self, name):
        return float(self.values[FEATURE_NAMES.index(name)])

    def as_dict(self):
        return dict(zip(FEATURE_NAMES, self.values.tolist()))


def summarize(clip, conf=None):
    """Compute the feature vector of a clip.

    Spectral descriptors skip frames with an all-zero spectrum. Raises
    ``ClipTooShort`` if the clip holds less than 2 frames, or
    ``WindowTooShort`` if it is shorter than a medium-level window.
    """
    conf = conf or RunConfig()
    frame_ms, overlap = conf.frame_ms, conf.overlap

    series = frame_signal(clip, frame_ms, overlap)
    if len(series) < 2:
        raise ClipTooShort(f"{clip.source_id} holds a single frame.")
    windows = medium_windows(clip, conf.medium_window_s, overlap)
    magnitudes, bin_hz = magnitude_spectrogram(series)
    n_fft = 2 * (magnitudes.shape[1] - 1)
    filterbank = mel_filterbank(
        conf.n_mels, n_fft, clip.sample_rate, conf.f_min, clip.sample_rate / 2
    )

    curves = {base: [] for base in BASE_FEATURES}
    curves["dynamics_rms"] = [rms(frame) for frame in series]
    curves["timbre_zerocross"] = [zero_crossing_rate(frame) for frame in series]
    flux = flux_curve(magnitudes)
    curves["timbre_spectralflux"] = flux
    curves["spectral_novelty"] = spectral_novelty(flux)

    for row in magnitudes:
        spectrum = Spectrum(row, bin_hz)
        try:
            centroid, spread, skewness, kurtosis = spectral_moments(spectrum)
        except EmptySpectrum:
            continue
        curves["spectral_centroid"].append(centroid)
        curves["spectral_spread"].append(spread)
        curves["spectral_skewness"].append(skewness)
        curves["spectral_kurtosis"].append(kurtosis)
        curves["spectral_flatness"].append(spectral_flatness(spectrum))
        curves["spectral_entropy"].append(spectral_entropy(spectrum))
        curves["spectral_rolloff85"].append(spectral_rolloff(spectrum, 0.85))
        curves["spectral_rolloff95"].append(spectral_rolloff(spectrum, 0.95))
        curves["spectral_roughness"].append(
            spectral_roughness(spectrum, conf.roughness_threshold)
        )
        curves["spectral_irregularity"].append(spectral_irregularity(spectrum))
        for index, coeff in enumerate(mfcc(spectrum, filterbank), start=1):
            curves[f"{MFCC_PREFIX}{index}"].append(coeff)

    for window in windows:
        curves["timbre_lowenergy"].append(window_low_energy(window, frame_ms, overlap))
        fluctuation, clarity, tempo = window_rhythm(window, frame_ms, overlap)
        curves["rhythm_fluctuationmax_peakpos"].append(fluctuation)
        curves["rhythm_pulseclarity"].append(clarity)
        curves["rhythm_tempo"].append(tempo)
        mode, key_clarity, hcdf = window_tonal(
            window,
            frame_ms,
            overlap,
            conf.roughness_threshold,
            conf.key_contrast_weighting,
        )
        curves["tonal_mode"].append(mode)
        curves["tonal_keyclarity"].append(key_clarity)
        curves["tonal_hcdf"].append(hcdf)

    values = [stat for base in BASE_FEATURES for stat in summary_stats(curves[base])]
    logger.debug(
        f"Summarized {clip.source_id} over {len(series)} frames "
        f"and {len(windows)} windows."
    )
    return FeatureVector(values, clip_id=clip.source_id)


class FeatureMatrix:

    """Feature vectors of a dataset, one row per clip.

    Rows are identified by their clip ID, in the order they were added.
    """

    def __init__(self, rows, row_ids, names=FEATURE_NAMES):
        rows = np.array(rows, dtype=np.float64)
        if not rows.size:
            rows = rows.reshape(len(row_ids), len(FEATURE_NAMES))
        rows = rows.reshape(len(row_ids), -1)
        if tuple(names) != FEATURE_NAMES or rows.shape[1] != len(FEATURE_NAMES):
            raise SchemaMismatch(
                f"Feature matrix has {rows.shape[1]} columns, "
                f"expected the {len(FEATURE_NAMES)} canonical features."
            )
        if len(set(row_ids)) != len(row_ids):
            raise SchemaMismatch("Feature matrix has duplicate clip IDs.")
        if not np.all(np.isfinite(rows)):
            raise SchemaMismatch("Feature matrix has non-finite values.")
        rows.setflags(write=False)
        self.rows = rows
        self.row_ids = tuple(row_ids)
        self.names = FEATURE_NAMES

    @classmethod
    def from_vectors(cls, vectors):
        vectors = list(vectors)
        return cls(
            [vector.values for vector in vectors],
            [vector.clip_id for vector in vectors],
        )

    def __len__(self):
        return len(self.row_ids)

    def __repr__(self):
        return f"<{self.__class__.__name__} {len(self)}x{len(self.names)}>"

    @cachedproperty
    def row_index(self):
        return {row_id: index for index, row_id in enumerate(self.row_ids)}

    def column(self, name):
        if name not in self.names:
            raise SchemaMismatch(f"Unknown {name} feature.")
        return self.rows[:, self.names.index(name)]

    def take(self, row_ids):
        """ Sub-matrix of the given clips, in the given order. """
        unknown = [row_id for row_id in row_ids if row_id not in self.row_index]
        if unknown:
            raise SchemaMismatch(f"No features for {unknown}.")
        return self.__class__(
            self.rows[[self.row_index[row_id] for row_id in row_ids]], row_ids
        )

    def to_csv(self, path, config=None):
        """ Write the matrix with 9 significant digits per value. """
        write_csv(
            path,
            (CSV_ID_COLUMN,) + self.names,
            ((row_id, *row) for row_id, row in zip(self.row_ids, self.rows.tolist())),
            config=config,
        )


def read_feature_csv(path):
    """ Load a feature matrix written by ``FeatureMatrix.to_csv``. """
    _, header, rows = read_csv(path)
    if header != (CSV_ID_COLUMN,) + FEATURE_NAMES:
        raise SchemaMismatch(f"{path} columns do not match the feature schema.")
    if any(len(row) != len(header) for row in rows):
        raise SchemaMismatch(f"{path} has rows of the wrong width.")
    try:
        values = [[float(cell) for cell in row[1:]] for row in rows]
    except ValueError as ex:
        raise SchemaMismatch(f"{path}: {ex}") from ex
    logger.info(f"{len(rows)} feature vectors read from {path}")
    return FeatureMatrix(
        np.array(values).reshape(len(rows), len(FEATURE_NAMES)),
        [row[0] for row in rows],
    )
