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

import numpy as np
import pytest

from .. import ClipTooShort, LengthMismatch
from ..dsp import (
    Spectrum,
    autocorrelate,
    dct_ii,
    fft_magnitude,
    frame_length,
    frame_signal,
    hann_window,
    hop_length,
    hz_to_mel,
    magnitude_spectrogram,
    mel_centers,
    mel_filterbank,
    next_power_of_two,
)
from .conftest import check_relative


def direct_dft(frame, n_fft):
    padded = np.zeros(n_fft)
    padded[: frame.size] = frame
    k = np.arange(n_fft // 2 + 1)[:, None]
    n = np.arange(n_fft)[None, :]
    return np.abs(np.sum(padded * np.exp(-2j * np.pi * k * n / n_fft), axis=1))


def test_frame_geometry():
    assert frame_length(50, 22050) == 1102
    assert hop_length(1102, 0.5) == 551
    assert hop_length(10, 0.95) == 1


def test_frame_count(clip_factory):
    clip = clip_factory.clip(np.arange(1102 + 551 * 4, dtype=float))
    series = frame_signal(clip, 50, 0.5)
    assert len(series) == 5
    assert series.frames.shape == (5, 1102)
    assert series.starts.tolist() == [0, 551, 1102, 1653, 2204]
    assert series.frames[2][0] == 1102
    assert series.frame_rate == pytest.approx(22050 / 551)


def test_trailing_samples_dropped(clip_factory):
    clip = clip_factory.clip(np.ones(1102 + 550))
    assert len(frame_signal(clip, 50, 0.5)) == 1


def test_single_frame(clip_factory):
    clip = clip_factory.clip(np.ones(1102))
    assert len(frame_signal(clip, 50, 0.5)) == 1


def test_clip_too_short(clip_factory):
    with pytest.raises(ClipTooShort):
        frame_signal(clip_factory.clip(np.ones(1101)), 50, 0.5)


@pytest.mark.parametrize("overlap", [-0.1, 1.0])
def test_invalid_overlap(clip_factory, overlap):
    with pytest.raises(ValueError):
        frame_signal(clip_factory.clip(np.ones(2000)), 50, overlap)


def test_hann_window():
    window = hann_window(64)
    assert window[0] == window[-1] == 0
    assert np.allclose(window, window[::-1])
    assert hann_window(64) is window
    with pytest.raises(ValueError):
        window[3] = 1


@pytest.mark.parametrize(
    "n, expected", [(1, 1), (2, 2), (3, 4), (1102, 2048), (2048, 2048)]
)
def test_next_power_of_two(n, expected):
    assert next_power_of_two(n) == expected


@pytest.mark.parametrize("size", [8, 50, 128, 200, 256])
def test_fft_against_direct_dft(size):
    rng = np.random.default_rng(size)
    frame = rng.normal(size=size)
    window = hann_window(size)
    spectrum = fft_magnitude(frame, window, sample_rate=1000.0)
    n_fft = next_power_of_two(size)
    expected = direct_dft(frame * window, n_fft)
    assert len(spectrum) == n_fft // 2 + 1
    assert spectrum.bin_hz == pytest.approx(1000.0 / n_fft)
    mask = expected > 1e-3 * expected.max()
    check_relative(spectrum.magnitudes[mask], expected[mask], 1e-9)


def test_parseval():
    rng = np.random.default_rng(1)
    frame = rng.normal(size=256)
    window = np.ones(256)
    spectrum = fft_magnitude(frame, window)
    assert spectrum.energy() == pytest.approx(256 * np.sum(frame**2), rel=1e-9)


def test_fft_length_mismatch():
    with pytest.raises(LengthMismatch):
        fft_magnitude(np.ones(10), np.ones(12))


def test_spectrogram_matches_frames(clip_factory):
    clip = clip_factory.clip(clip_factory.noise(seed=2, n_samples=4000))
    series = frame_signal(clip, 50, 0.5)
    magnitudes, bin_hz = magnitude_spectrogram(series)
    window = hann_window(series.frame_len)
    for index, frame in enumerate(series):
        spectrum = fft_magnitude(frame, window, clip.sample_rate)
        assert np.allclose(magnitudes[index], spectrum.magnitudes, rtol=1e-12)
        assert bin_hz == spectrum.bin_hz


def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum([], 1.0)
    with pytest.raises(ValueError):
        Spectrum([1.0, -1.0], 1.0)
    spectrum = Spectrum([0.0, 3.0, 4.0], 10.0)
    assert spectrum.n_fft == 4
    assert spectrum.frequencies.tolist() == [0, 10, 20]
    assert spectrum.power.tolist() == [0, 9, 16]


def test_hz_to_mel():
    assert hz_to_mel(0.0) == pytest.approx(0.0)
    assert hz_to_mel(700.0) == pytest.approx(2595 * np.log10(2))


def test_mel_filterbank_shape():
    filterbank = mel_filterbank(40, 2048, 22050, 20.0, 11025.0)
    assert filterbank.shape == (40, 1025)
    assert np.all(filterbank >= 0)
    assert np.all(filterbank.max(axis=1) > 0)
    assert mel_filterbank(40, 2048, 22050, 20.0, 11025.0) is filterbank


def test_mel_filterbank_peaks():
    """ Each filter is a unit triangle peaking at its center frequency. """
    n_fft, sample_rate = 4096, 16000
    filterbank = mel_filterbank(10, n_fft, sample_rate, 100.0, 8000.0)
    centers = mel_centers(10, 100.0, 8000.0)
    bin_hz = sample_rate / n_fft
    peaks = np.argmax(filterbank, axis=1) * bin_hz
    assert np.all(np.abs(peaks - centers) <= bin_hz)
    assert np.all(filterbank.max(axis=1) <= 1 + 1e-9)
    assert np.all(filterbank.max(axis=1) > 0.9)


@pytest.mark.parametrize(
    "args", [(0, 2048, 22050, 20.0, 11025.0), (10, 2048, 22050, 500.0, 100.0)]
)
def test_mel_filterbank_invalid(args):
    with pytest.raises(ValueError):
        mel_filterbank(*args)


def test_dct_orthonormality():
    size = 40
    basis = np.stack([dct_ii(row, size) for row in np.eye(size)])
    assert np.max(np.abs(basis @ basis.T - np.eye(size))) < 1e-10


def test_dct_of_constant():
    coefficients = dct_ii(np.full(16, 2.0), 4)
    assert coefficients[0] == pytest.approx(2.0 * np.sqrt(16))
    assert np.allclose(coefficients[1:], 0, atol=1e-12)


def test_dct_invalid_count():
    with pytest.raises(ValueError):
        dct_ii(np.ones(4), 5)


def test_autocorrelate():
    signal = np.sin(2 * np.pi * np.arange(400) / 20)
    correlation = autocorrelate(signal, 30)
    assert correlation[0] == 1
    assert np.argmax(correlation[5:]) + 5 == 20
    assert autocorrelate(np.zeros(10), 3).tolist() == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        autocorrelate(signal, 400)


@pytest.mark.parametrize(
    "n_filters, n_fft, sample_rate, f_min, f_max",
    [(40, 2048, 22050, 20.0, 11025.0), (10, 4096, 16000, 100.0, 8000.0)],
)
def test_mel_filters_are_unimodal(n_filters, n_fft, sample_rate, f_min, f_max):
    assert np.all(np.diff(mel_centers(n_filters, f_min, f_max)) > 0)
    filterbank = mel_filterbank(n_filters, n_fft, sample_rate, f_min, f_max)
    for row in filterbank:
        peak = int(np.argmax(row))
        assert np.all(np.diff(row[: peak + 1]) >= 0)
        assert np.all(np.diff(row[peak:]) <= 0)


def test_autocorrelate_white_noise():
    noise = np.random.default_rng(3).normal(size=20000)
    correlation = autocorrelate(noise, 50)
    assert correlation[0] == 1
    # Standard error of each lag is 1 / sqrt(n).
    assert np.all(np.abs(correlation[1:]) < 5 / np.sqrt(noise.size))
