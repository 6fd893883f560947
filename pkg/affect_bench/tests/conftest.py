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

import csv
import io
import sys
from textwrap import indent

import click
import numpy as np
import pytest
from boltons.iterutils import flatten, same
from boltons.tbutils import ExceptionInfo
from click.testing import CliRunner
from scipy.io import wavfile

from .. import CLI_NAME, DEFAULT_SAMPLE_RATE, RunConfig
from ..audio import AudioClip
from ..cli import affect_bench
from ..features import FeatureMatrix, summarize
from ..manifest import AffectLabel

""" Fixtures, configuration and helpers for tests. """


def is_windows():
    """ Return `True` only if current platform is of the Windows family. """
    return sys.platform in ["win32", "cygwin"]


skip_windows = pytest.mark.skipif(is_windows(), reason="Skip Windows")
""" Pytest mark to skip a test if it is run on a Windows system. """


def print_cli_output(cmd, output):
    """ Simulate CLI output. Used to print debug traces in test results. """
    print("\n► {}".format(click.style(" ".join(cmd), fg="white")))
    if output:
        print(indent(output, "  "))


@pytest.fixture
def runner():
    runner = CliRunner()
    with runner.isolated_filesystem():
        yield runner


@pytest.fixture
def invoke(runner):
    """ Executes Click's CLI, print output and return results. """
    def _run(*args, color=False, env=None):
        # We allow for nested iterables and None values as args for
        # convenience. We just need to flatten and filters them out.
        args = list(filter(None.__ne__, flatten(args)))
        args = [str(arg) for arg in args]
        if args:
            assert same(map(type, args), str)

        result = runner.invoke(affect_bench, args, color=color, env=env)

        print_cli_output([CLI_NAME] + args, result.output)

        # Print some more debug info.
        print(result)
        if result.exception and not isinstance(result.exception, SystemExit):
            print(ExceptionInfo.from_exc_info(*result.exc_info).get_formatted())

        return result

    return _run


class ClipFactory:

    """Produce deterministic synthetic signals to serve as test fixtures.

    All generators return float sample arrays at the factory's rate, which
    ``clip()`` and ``wav_bytes()`` wrap into clips or RIFF/WAVE payloads.
    """

    def __init__(self, sample_rate=DEFAULT_SAMPLE_RATE, duration=6.0):
        self.sample_rate = sample_rate
        self.duration = duration

    @property
    def n_samples(self):
        return int(round(self.sample_rate * self.duration))

    def time(self, n_samples=None):
        return np.arange(n_samples or self.n_samples) / self.sample_rate

    def sine(self, frequency=440.0, amplitude=1.0, n_samples=None):
        return amplitude * np.sin(2 * np.pi * frequency * self.time(n_samples))

    def chord(self, frequencies, amplitude=1.0, n_samples=None):
        """ Sum of equal-amplitude sines, scaled to the given peak bound. """
        total = sum(self.sine(freq, n_samples=n_samples) for freq in frequencies)
        return amplitude * total / len(frequencies)

    def noise(self, amplitude=0.5, seed=0, n_samples=None):
        rng = np.random.default_rng(seed)
        return rng.uniform(-amplitude, amplitude, n_samples or self.n_samples)

    def clicks(self, rate_hz=2.0, amplitude=1.0, width=32, n_samples=None):
        """ Train of short decaying bursts, ``rate_hz`` per second. """
        samples = np.zeros(n_samples or self.n_samples)
        period = int(round(self.sample_rate / rate_hz))
        burst = amplitude * np.exp(-np.arange(width) / (width / 4))
        burst *= np.where(np.arange(width) % 2, -1, 1)
        for start in range(0, samples.size - width, period):
            samples[start : start + width] += burst
        return samples

    def silence(self, n_samples=None):
        return np.zeros(n_samples or self.n_samples)

    def clip(self, samples, source_id="<memory>", sample_rate=None):
        return AudioClip(samples, sample_rate or self.sample_rate, source_id=source_id)

    def wav_bytes(self, samples, sample_rate=None, dtype=np.int16):
        """Encode samples in [-1, 1] as a WAV payload of the given sample type."""
        samples = np.asarray(samples, dtype=np.float64)
        dtype = np.dtype(dtype)
        if dtype.kind == "f":
            data = samples.astype(dtype)
        elif dtype.kind == "u":
            half = 2 ** (8 * dtype.itemsize - 1)
            data = np.clip(np.round(samples * half + half), 0, 2 * half - 1)
            data = data.astype(dtype)
        else:
            full = 2 ** (8 * dtype.itemsize - 1)
            data = np.clip(np.round(samples * full), -full, full - 1).astype(dtype)
        buffer = io.BytesIO()
        wavfile.write(buffer, sample_rate or self.sample_rate, data)
        return buffer.getvalue()

    def write_wav(self, path, samples, sample_rate=None, dtype=np.float32):
        path.write_bytes(self.wav_bytes(samples, sample_rate, dtype))
        return path


@pytest.fixture
def clip_factory():
    return ClipFactory()


def synthetic_signals(count, factory, seed=7):
    """Mixtures of a harmonic tone, light noise and a click train.

    Two parameters drive each signal: its level and the pitch of its tone.
    Returns ``(clip_id, samples)`` pairs.
    """
    rng = np.random.default_rng(seed)
    signals = []
    for index in range(count):
        level = rng.uniform(0.1, 0.9)
        pitch = rng.uniform(150.0, 1500.0)
        samples = level * (
            0.6 * factory.sine(pitch)
            + 0.25 * factory.sine(2 * pitch)
            + 0.02 * factory.noise(amplitude=1.0, seed=seed * 1000 + index)
            + 0.1 * factory.clicks(rate_hz=2.0)
        )
        signals.append((f"clip_{index:03d}.wav", samples))
    return signals


def labels_from_features(matrix):
    """Affine map of ``dynamics_rms_mean`` to arousal and of
    ``spectral_centroid_mean`` to valence, both stretched over [-0.9, 0.9].
    """

    def stretch(column):
        low, high = column.min(), column.max()
        return -0.9 + 1.8 * (column - low) / (high - low)

    arousal = stretch(matrix.column("dynamics_rms_mean"))
    valence = stretch(matrix.column("spectral_centroid_mean"))
    return [AffectLabel(float(a), float(v)) for a, v in zip(arousal, valence)]


def write_manifest(path, rows):
    """ Write ``(clip_path, arousal, valence)`` rows under the manifest header. """
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("path", "arousal", "valence"))
        writer.writerows(rows)
    return path


@pytest.fixture
def make_dataset(tmp_path):
    """Write synthetic clips as WAV files next to their manifest.

    Labels are derived from the clips' own features, so they are an exact
    function of the audio.
    """

    def _make_dataset(count=6, duration=2.5, folder="dataset"):
        factory = ClipFactory(duration=duration)
        root = tmp_path.joinpath(folder)
        root.mkdir(parents=True, exist_ok=True)
        # WAV files hold float32 samples: labels come from the same values.
        signals = [
            (clip_id, samples.astype(np.float32).astype(np.float64))
            for clip_id, samples in synthetic_signals(count, factory)
        ]
        conf = RunConfig()
        matrix = FeatureMatrix.from_vectors(
            summarize(factory.clip(samples, clip_id), conf)
            for clip_id, samples in signals
        )
        labels = labels_from_features(matrix)
        for clip_id, samples in signals:
            factory.write_wav(root.joinpath(clip_id), samples)
        manifest = write_manifest(
            root.joinpath("manifest.csv"),
            [
                (clip_id, repr(label.arousal), repr(label.valence))
                for (clip_id, _), label in zip(signals, labels)
            ],
        )
        return manifest, matrix, labels

    return _make_dataset


@pytest.fixture(scope="session")
def synthetic_dataset():
    """ 200 summarized synthetic clips and their labels, computed in memory. """
    factory = ClipFactory(duration=3.0)
    conf = RunConfig()
    matrix = FeatureMatrix.from_vectors(
        summarize(factory.clip(samples, clip_id), conf)
        for clip_id, samples in synthetic_signals(200, factory)
    )
    return matrix, labels_from_features(matrix)


def check_finite(values):
    values = np.asarray(values, dtype=np.float64)
    assert np.all(np.isfinite(values)), values


def check_relative(actual, expected, tolerance):
    """ Assert the max relative error between arrays is under ``tolerance``. """
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    assert actual.shape == expected.shape
    scale = np.maximum(np.abs(expected), 1e-300)
    error = np.max(np.abs(actual - expected) / scale)
    assert error < tolerance, error


# Estimator hyperparameters small enough for fast tests.
FAST_ESTIMATORS = {
    "mlp2": {"hidden_units": 8, "epochs": 50, "learning_rate": 0.01},
    "random_forest": {"n_estimators": 10},
}
