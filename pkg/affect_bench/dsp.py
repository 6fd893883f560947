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

""" Deterministic signal-processing kernels shared by all descriptors. """

from functools import lru_cache

import librosa
import numpy as np
from boltons.cacheutils import cachedproperty
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft

from . import ClipTooShort, LengthMismatch


class FrameSeries:

    """Overlapping frames cut from a clip.

    Frame ``i`` covers samples ``[i * hop, i * hop + frame_len)``. Trailing
    samples not filling a whole frame are dropped.
    """

    def __init__(self, frames, frame_len, hop, sample_rate):
        assert frame_len >= 2
        assert hop >= 1
        assert frames.ndim == 2 and frames.shape[1] == frame_len
        self.frames = frames
        self.frame_len = frame_len
        self.hop = hop
        self.sample_rate = sample_rate

    def __len__(self):
        return self.frames.shape[0]

    def __iter__(self):
        return iter(self.frames)

    @cachedproperty
    def starts(self):
        """Index of each frame's first sample."""
        return np.arange(len(self)) * self.hop

    @property
    def frame_rate(self):
        """Number of frames per second of signal."""
        return self.sample_rate / self.hop


def frame_length(frame_ms, sample_rate):
    """ Number of samples in a frame of the given duration. """
    return int(round(frame_ms * sample_rate / 1000))


def hop_length(frame_len, overlap_fraction):
    return max(1, int(round(frame_len * (1 - overlap_fraction))))


def frame_signal(clip, frame_ms, overlap_fraction):
    """ Cut a clip into frames of ``frame_ms`` milliseconds. """
    if not 0 <= overlap_fraction < 1:
        raise ValueError(f"Overlap {overlap_fraction!r} is not within [0, 1[.")
    frame_len = frame_length(frame_ms, clip.sample_rate)
    if frame_len < 2:
        raise ValueError(f"{frame_ms} ms frames are shorter than 2 samples.")
    if len(clip) < frame_len:
        raise ClipTooShort(
            f"{clip.source_id} has {len(clip)} samples, less than a "
            f"{frame_len}-sample frame."
        )
    hop = hop_length(frame_len, overlap_fraction)
    frames = sliding_window_view(clip.samples, frame_len)[::hop]
    return FrameSeries(frames, frame_len, hop, clip.sample_rate)


def _frozen(array):
    array.setflags(write=False)
    return array


@lru_cache(maxsize=None)
def hann_window(n):
    """Symmetric Hann window, zero at both ends.

    The returned array is cached and read-only.
    """
    if n < 2:
        raise ValueError(f"Hann window needs at least 2 points, not {n}.")
    return _frozen(np.hanning(n))


def next_power_of_two(n):
    return 1 << (int(n) - 1).bit_length()


class Spectrum:

    """One-sided magnitude spectrum of a real frame.

    Holds ``n_fft / 2 + 1`` bins spaced by ``bin_hz``.
    """

    def __init__(self, magnitudes, bin_hz):
        magnitudes = np.asarray(magnitudes, dtype=np.float64)
        if magnitudes.ndim != 1 or not magnitudes.size:
            raise ValueError("Spectrum requires a non-empty vector of magnitudes.")
        if not np.all(np.isfinite(magnitudes)) or np.any(magnitudes < 0):
            raise ValueError("Magnitudes must be finite and non-negative.")
        self.magnitudes = magnitudes
        self.bin_hz = float(bin_hz)

    def __len__(self):
        return self.magnitudes.size

    @property
    def n_fft(self):
        return 2 * (len(self) - 1)

    @cachedproperty
    def frequencies(self):
        return np.arange(len(self)) * self.bin_hz

    @cachedproperty
    def power(self):
        return self.magnitudes**2

    def energy(self):
        """Energy of the full two-sided spectrum.

        Interior bins stand for both their positive and negative frequency.
        By Parseval, equals ``n_fft`` times the energy of the windowed frame.
        """
        power = self.power
        if len(self) == 1:
            return float(power[0])
        return float(power[0] + power[-1] + 2 * power[1:-1].sum())


def fft_magnitude(frame, window, sample_rate=1.0):
    """Magnitude spectrum of a windowed frame.

    The frame is zero-padded to the next power of two.
    """
    frame = np.asarray(frame, dtype=np.float64)
    window = np.asarray(window, dtype=np.float64)
    if frame.shape != window.shape:
        raise LengthMismatch(
            f"Frame has {frame.size} samples but window has {window.size}."
        )
    n_fft = next_power_of_two(frame.size)
    magnitudes = np.abs(np.fft.rfft(frame * window, n=n_fft))
    return Spectrum(magnitudes, sample_rate / n_fft)


def magnitude_spectrogram(series):
    """Hann-windowed magnitude spectra of all frames at once.

    Returns the ``(n_frames, n_fft / 2 + 1)`` magnitude matrix and the bin
    width in Hz. Row ``i`` equals ``fft_magnitude(frame_i, hann)``.
    """
    window = hann_window(series.frame_len)
    n_fft = next_power_of_two(series.frame_len)
    magnitudes = np.abs(np.fft.rfft(series.frames * window, n=n_fft, axis=-1))
    return magnitudes, series.sample_rate / n_fft


def hz_to_mel(frequency):
    """ HTK mel scale: ``2595 * log10(1 + f / 700)``. """
    return librosa.hz_to_mel(frequency, htk=True)


def mel_centers(n_filters, f_min, f_max):
    """ Center frequencies (Hz) of the filters of ``mel_filterbank``. """
    edges = librosa.mel_frequencies(
        n_mels=n_filters + 2, fmin=f_min, fmax=f_max, htk=True
    )
    return edges[1:-1]


@lru_cache(maxsize=None)
def mel_filterbank(n_filters, n_fft, sample_rate, f_min, f_max):
    """Triangular filters equally spaced on the HTK mel scale.

    Each filter peaks at its center and reaches zero at its neighbors'
    centers. The matrix has ``n_fft / 2 + 1`` columns, is cached, and is
    read-only.
    """
    if n_filters < 1:
        raise ValueError(f"Filterbank needs at least one filter, not {n_filters}.")
    if not 0 <= f_min < f_max <= sample_rate / 2:
        raise ValueError(
            f"Band [{f_min}, {f_max}] Hz is not within [0, {sample_rate / 2}] Hz."
        )
    filterbank = librosa.filters.mel(
        sr=sample_rate,
        n_fft=n_fft,
        n_mels=n_filters,
        fmin=f_min,
        fmax=f_max,
        htk=True,
        norm=None,
        dtype=np.float64,
    )
    return _frozen(filterbank)


def dct_ii(vec, n_coeffs):
    """ First ``n_coeffs`` coefficients of the orthonormal DCT-II. """
    vec = np.asarray(vec, dtype=np.float64)
    if not 0 <= n_coeffs <= vec.size:
        raise ValueError(f"Can't get {n_coeffs} coefficients out of {vec.size}.")
    return fft.dct(vec, type=2, norm="ortho")[:n_coeffs]


def autocorrelate(signal, max_lag):
    """Autocorrelation for lags ``0`` to ``max_lag``, normalized by lag 0.

    An all-zero signal gives an all-zero vector.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if not 0 <= max_lag < signal.size:
        raise ValueError(f"Lag {max_lag} out of range for {signal.size} samples.")
    full = np.correlate(signal, signal, mode="full")
    lags = full[signal.size - 1 : signal.size + max_lag]
    if lags[0] == 0:
        return np.zeros(max_lag + 1)
    return lags / lags[0]
