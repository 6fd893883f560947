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

"""Frame and window-level descriptors.

Frame kernels take a single frame or its ``Spectrum`` and return a scalar.
Window kernels work on medium-level windows of a clip and return one value
per window.
"""

from collections import namedtuple

import numpy as np
from scipy.signal import find_peaks

from . import (
    DEFAULT_FRAME_MS,
    DEFAULT_MEDIUM_WINDOW_S,
    DEFAULT_OVERLAP,
    DEFAULT_PEAK_THRESHOLD,
    ClipTooShort,
    EmptySpectrum,
    LengthMismatch,
    WindowTooShort,
)
from .dsp import (
    autocorrelate,
    dct_ii,
    frame_signal,
    hann_window,
    magnitude_spectrogram,
    next_power_of_two,
)

# Floor applied to power before taking logarithms.
POWER_FLOOR = 1e-12
MEL_FLOOR = 1e-10

N_MFCC = 13

# Moving-average length applied to the rectified flux derivative.
NOVELTY_SMOOTHING = 5  # frames

# Search ranges of the rhythm analysis.
TEMPO_RANGE = (40.0, 200.0)  # BPM
FLUCTUATION_RANGE = (0.2, 10.0)  # Hz
FLUCTUATION_MIN_FFT = 1024

# Spectral peaks outside this band are ignored by the chroma analysis.
CHROMA_RANGE = (50.0, 5000.0)  # Hz

# Pitch class of the A4 reference, with C as pitch class 0.
A4_HZ = 440.0
A4_PITCH_CLASS = 9

# Krumhansl-Schmuckler key profiles, tonic first.
MAJOR_PROFILE = np.array(
    [6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88]
)
MINOR_PROFILE = np.array(
    [6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17]
)

# Projection of the 12 pitch classes on the circle of fifths, minor thirds
# and major thirds, giving the 6-D tonal centroid space.
_PITCH_CLASSES = np.arange(12)
TONAL_CENTROID_BASIS = np.stack(
    [
        np.sin(_PITCH_CLASSES * 7 * np.pi / 6),
        np.cos(_PITCH_CLASSES * 7 * np.pi / 6),
        np.sin(_PITCH_CLASSES * 3 * np.pi / 2),
        np.cos(_PITCH_CLASSES * 3 * np.pi / 2),
        0.5 * np.sin(_PITCH_CLASSES * 2 * np.pi / 3),
        0.5 * np.cos(_PITCH_CLASSES * 2 * np.pi / 3),
    ]
)


RhythmSeries = namedtuple("RhythmSeries", "fluctuation_peak pulse_clarity tempo")
TonalSeries = namedtuple("TonalSeries", "mode key_clarity hcdf")


def rms(frame):
    frame = np.asarray(frame, dtype=np.float64)
    if not frame.size:
        raise ValueError("Can't compute the RMS of an empty frame.")
    return float(np.sqrt(np.mean(frame**2)))


def _require_energy(spectrum):
    if not spectrum.magnitudes.sum() > 0:
        raise EmptySpectrum("All magnitudes of the spectrum are zero.")


def spectral_moments(spectrum):
    """Centroid, spread, skewness and kurtosis of the magnitude distribution.

    Magnitudes are used as weights over bin frequencies. A spectrum with all
    its energy in one bin has zero spread, and its skewness and kurtosis are
    reported as zero.
    """
    _require_energy(spectrum)
    weights = spectrum.magnitudes / spectrum.magnitudes.sum()
    centroid = float(np.sum(spectrum.frequencies * weights))
    deviation = spectrum.frequencies - centroid
    spread = float(np.sqrt(np.sum(deviation**2 * weights)))
    if spread == 0:
        return centroid, 0.0, 0.0, 0.0
    skewness = float(np.sum(deviation**3 * weights) / spread**3)
    kurtosis = float(np.sum(deviation**4 * weights) / spread**4)
    return centroid, spread, skewness, kurtosis


def spectral_flatness(spectrum):
    """Geometric over arithmetic mean of the power spectrum, in [0, 1].

    Powers are floored to ``POWER_FLOOR``, so an all-zero spectrum is flat.
    """
    power = np.maximum(spectrum.power, POWER_FLOOR)
    flatness = np.exp(np.mean(np.log(power))) / np.mean(power)
    return float(min(flatness, 1.0))


def spectral_entropy(spectrum):
    """ Shannon entropy of the normalized magnitudes, divided by its maximum. """
    _require_energy(spectrum)
    if len(spectrum) == 1:
        return 0.0
    weights = spectrum.magnitudes / spectrum.magnitudes.sum()
    weights = weights[weights > 0]
    entropy = -np.sum(weights * np.log(weights)) / np.log(len(spectrum))
    return float(np.clip(entropy, 0.0, 1.0))


def spectral_rolloff(spectrum, fraction):
    """Frequency below which ``fraction`` of the total power lies.

    Returns the frequency of the first bin where the cumulative power reaches
    the fraction.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"Rolloff fraction {fraction!r} is not within ]0, 1].")
    cumulative = np.cumsum(spectrum.power)
    if not cumulative[-1] > 0:
        raise EmptySpectrum("All magnitudes of the spectrum are zero.")
    index = np.searchsorted(cumulative, fraction * cumulative[-1], side="left")
    return float(min(index, len(spectrum) - 1) * spectrum.bin_hz)


def spectral_peaks(magnitudes, threshold=DEFAULT_PEAK_THRESHOLD):
    """ Bin indexes of local maxima reaching ``threshold`` times the maximum. """
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    top = magnitudes.max(initial=0.0)
    if top <= 0:
        return np.empty(0, dtype=int)
    peaks, _ = find_peaks(magnitudes, height=threshold * top)
    return peaks


def dissonance(freq_1, freq_2, amp_1, amp_2):
    """Plomp-Levelt dissonance of partial pairs, Sethares' parametrization.

    Works element-wise on arrays of pairs.
    """
    low = np.minimum(freq_1, freq_2)
    delta = np.abs(freq_1 - freq_2)
    scale = 0.24 / (0.021 * low + 19)
    curve = np.exp(-3.5 * scale * delta) - np.exp(-5.75 * scale * delta)
    return amp_1 * amp_2 * curve


def spectral_roughness(spectrum, threshold=DEFAULT_PEAK_THRESHOLD):
    """ Summed dissonance over all pairs of spectral peaks. """
    peaks = spectral_peaks(spectrum.magnitudes, threshold)
    if peaks.size < 2:
        return 0.0
    freqs = peaks * spectrum.bin_hz
    amps = spectrum.magnitudes[peaks]
    left, right = np.triu_indices(peaks.size, k=1)
    return float(
        np.sum(dissonance(freqs[left], freqs[right], amps[left], amps[right]))
    )


def spectral_irregularity(spectrum):
    """ Jensen irregularity: squared successive differences over total power. """
    magnitudes = spectrum.magnitudes
    if magnitudes.size < 2:
        raise ValueError("Irregularity needs at least 2 bins.")
    total = np.sum(magnitudes**2)
    if not total > 0:
        raise EmptySpectrum("All magnitudes of the spectrum are zero.")
    return float(np.sum(np.diff(magnitudes) ** 2) / total)


def spectral_flux(spectrum, previous):
    """ Euclidean distance between two consecutive magnitude spectra. """
    if len(spectrum) != len(previous):
        raise LengthMismatch(
            f"Spectra have {len(spectrum)} and {len(previous)} bins."
        )
    return float(np.linalg.norm(spectrum.magnitudes - previous.magnitudes))


def flux_curve(magnitudes):
    """Flux of each row of a spectrogram against the previous one.

    The first frame has no predecessor and gets a flux of 0.
    """
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    flux = np.zeros(magnitudes.shape[0])
    if magnitudes.shape[0] > 1:
        flux[1:] = np.linalg.norm(np.diff(magnitudes, axis=0), axis=1)
    return flux


def spectral_novelty(flux):
    """Onset-style novelty curve derived from a flux curve.

    Half-wave rectified first difference, smoothed by a centered moving
    average. Curves shorter than 3 frames give all zeros.
    """
    flux = np.asarray(flux, dtype=np.float64)
    if flux.size < 3:
        return np.zeros(flux.size)
    rising = np.maximum(np.diff(flux, prepend=flux[0]), 0.0)
    kernel = np.ones(NOVELTY_SMOOTHING) / NOVELTY_SMOOTHING
    offset = (NOVELTY_SMOOTHING - 1) // 2
    return np.convolve(rising, kernel)[offset : offset + flux.size]


def mfcc(spectrum, filterbank):
    """Cepstral coefficients 1 to 13 of a spectrum.

    Coefficient 0, the log-energy term, is left out.
    """
    filterbank = np.asarray(filterbank)
    if filterbank.shape[1] != len(spectrum):
        raise LengthMismatch(
            f"Filterbank has {filterbank.shape[1]} columns for {len(spectrum)} bins."
        )
    log_mel = np.log(filterbank @ spectrum.power + MEL_FLOOR)
    return dct_ii(log_mel, N_MFCC + 1)[1:]


def zero_crossing_rate(frame):
    """Sign changes per sample transition.

    Zero samples carry the sign of the last non-zero sample. Leading zeros
    count as positive.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size < 2:
        raise ValueError("Zero-crossing rate needs at least 2 samples.")
    signs = np.sign(frame)
    # Index of the last non-zero sample seen so far.
    last = np.where(signs != 0, np.arange(signs.size), 0)
    np.maximum.accumulate(last, out=last)
    filled = signs[last]
    filled[filled == 0] = 1
    return np.count_nonzero(filled[1:] != filled[:-1]) / (frame.size - 1)


def low_energy(rms_curve):
    """ Fraction of frames with an RMS strictly below the mean RMS. """
    rms_curve = np.asarray(rms_curve, dtype=np.float64)
    if not rms_curve.size:
        raise ValueError("Can't compute the low-energy rate of no frames.")
    mean = rms_curve.mean()
    below = (rms_curve < mean) & ~np.isclose(rms_curve, mean, rtol=1e-12, atol=0)
    return float(below.mean())


def medium_windows(clip, window_s=DEFAULT_MEDIUM_WINDOW_S, overlap=DEFAULT_OVERLAP):
    """ Cut a clip into medium-level windows, each as a clip of its own. """
    try:
        series = frame_signal(clip, window_s * 1000, overlap)
    except ClipTooShort as ex:
        raise WindowTooShort(
            f"{clip.source_id} lasts {clip.duration:.3f}s, less than a "
            f"{window_s}s window."
        ) from ex
    return [clip.replace(samples=window) for window in series]


def window_low_energy(window, frame_ms=DEFAULT_FRAME_MS, overlap=DEFAULT_OVERLAP):
    series = frame_signal(window, frame_ms, overlap)
    return low_energy([rms(frame) for frame in series])


def onset_envelope(window, frame_ms=DEFAULT_FRAME_MS, overlap=DEFAULT_OVERLAP):
    """Novelty curve of a window and its sampling rate in Hz.

    The curve has one value per low-level frame.
    """
    series = frame_signal(window, frame_ms, overlap)
    magnitudes, _ = magnitude_spectrogram(series)
    return spectral_novelty(flux_curve(magnitudes)), series.frame_rate


def window_rhythm(window, frame_ms=DEFAULT_FRAME_MS, overlap=DEFAULT_OVERLAP):
    """Fluctuation peak (Hz), pulse clarity and tempo (BPM) of a window.

    A window without any onset activity gives zeros.
    """
    envelope, rate = onset_envelope(window, frame_ms, overlap)
    envelope = envelope - envelope.mean()
    if envelope.size < 2 or not np.any(envelope):
        return 0.0, 0.0, 0.0

    # Strongest modulation frequency of the envelope.
    n_fft = max(FLUCTUATION_MIN_FFT, next_power_of_two(envelope.size))
    modulation = np.abs(np.fft.rfft(envelope * hann_window(envelope.size), n=n_fft))
    frequencies = np.arange(modulation.size) * rate / n_fft
    low, high = FLUCTUATION_RANGE
    band = (frequencies >= low) & (frequencies <= high)
    fluctuation = 0.0
    if band.any():
        fluctuation = float(frequencies[band][np.argmax(modulation[band])])

    # Best periodicity within the tempo range.
    min_lag = max(1, int(np.ceil(rate * 60 / TEMPO_RANGE[1])))
    max_lag = min(envelope.size - 1, int(np.floor(rate * 60 / TEMPO_RANGE[0])))
    if min_lag > max_lag:
        return fluctuation, 0.0, 0.0
    correlation = autocorrelate(envelope, max_lag)
    lag = min_lag + int(np.argmax(correlation[min_lag : max_lag + 1]))
    clarity = float(np.clip(correlation[lag], 0.0, 1.0))
    return fluctuation, clarity, 60 * rate / lag


def rhythm_features(
    clip,
    frame_ms=DEFAULT_FRAME_MS,
    overlap=DEFAULT_OVERLAP,
    window_s=DEFAULT_MEDIUM_WINDOW_S,
):
    """ Per-window fluctuation peak, pulse clarity and tempo of a clip. """
    values = [
        window_rhythm(window, frame_ms, overlap)
        for window in medium_windows(clip, window_s, overlap)
    ]
    return RhythmSeries(*(np.array(column) for column in zip(*values)))


def chroma_vector(magnitudes, bin_hz, threshold=DEFAULT_PEAK_THRESHOLD):
    """12-bin pitch-class profile of a magnitude spectrum.

    Each spectral peak within the chroma band adds its power to the pitch
    class of its nearest equal-tempered note. Index 0 is C.
    """
    magnitudes = np.asarray(magnitudes, dtype=np.float64)
    peaks = spectral_peaks(magnitudes, threshold)
    freqs = peaks * bin_hz
    keep = (freqs >= CHROMA_RANGE[0]) & (freqs <= CHROMA_RANGE[1])
    peaks, freqs = peaks[keep], freqs[keep]
    if not peaks.size:
        return np.zeros(12)
    semitones = np.rint(12 * np.log2(freqs / A4_HZ)).astype(int)
    pitch_classes = (semitones + A4_PITCH_CLASS) % 12
    return np.bincount(pitch_classes, weights=magnitudes[peaks] ** 2, minlength=12)


def _correlate_rows(vector, profiles):
    vector = vector - vector.mean()
    profiles = profiles - profiles.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(profiles, axis=1) * np.linalg.norm(vector)
    if not norms.all():
        return np.zeros(profiles.shape[0])
    return profiles @ vector / norms


def key_correlations(chroma):
    """Correlation of a chroma vector with the 12 major and 12 minor keys.

    Returns two arrays indexed by tonic pitch class.
    """
    chroma = np.asarray(chroma, dtype=np.float64)
    major = np.stack([np.roll(MAJOR_PROFILE, tonic) for tonic in range(12)])
    minor = np.stack([np.roll(MINOR_PROFILE, tonic) for tonic in range(12)])
    return _correlate_rows(chroma, major), _correlate_rows(chroma, minor)


def chroma_contrast(chroma):
    """One minus the flatness of a chroma vector.

    0 for a uniform profile, close to 1 for a single pitch class.
    """
    chroma = np.maximum(np.asarray(chroma, dtype=np.float64), POWER_FLOOR)
    return float(1 - np.exp(np.mean(np.log(chroma))) / np.mean(chroma))


def tonal_centroids(chromas):
    """6-D tonal centroid of each L1-normalized chroma row.

    All-zero rows map to the origin.
    """
    chromas = np.atleast_2d(np.asarray(chromas, dtype=np.float64))
    totals = chromas.sum(axis=1, keepdims=True)
    normalized = np.divide(
        chromas, totals, out=np.zeros_like(chromas), where=totals > 0
    )
    return normalized @ TONAL_CENTROID_BASIS.T


def window_tonal(
    window,
    frame_ms=DEFAULT_FRAME_MS,
    overlap=DEFAULT_OVERLAP,
    threshold=DEFAULT_PEAK_THRESHOLD,
    contrast_weighting=False,
):
    """Mode, key clarity and harmonic change of a window.

    Key clarity is the best correlation of the window's chroma with the 24
    key profiles, clipped to [0, 1]. Mode is the best major minus the best
    minor correlation, positive for major. With ``contrast_weighting``, both
    are multiplied by the chroma contrast, so unpitched content scores close
    to zero. A window without any pitched peak gives zeros.
    """
    series = frame_signal(window, frame_ms, overlap)
    magnitudes, bin_hz = magnitude_spectrogram(series)
    chromas = np.stack([chroma_vector(row, bin_hz, threshold) for row in magnitudes])

    total = chromas.sum(axis=0)
    if not total.sum() > 0:
        return 0.0, 0.0, 0.0
    total = total / total.sum()

    major, minor = key_correlations(total)
    contrast = chroma_contrast(total) if contrast_weighting else 1.0
    key_clarity = float(np.clip(max(major.max(), minor.max()) * contrast, 0, 1))
    mode = float(np.clip((major.max() - minor.max()) * contrast, -1, 1))

    hcdf = 0.0
    if chromas.shape[0] > 1:
        centroids = tonal_centroids(chromas)
        hcdf = float(np.linalg.norm(np.diff(centroids, axis=0), axis=1).mean())
    return mode, key_clarity, hcdf


def tonal_features(
    clip,
    frame_ms=DEFAULT_FRAME_MS,
    overlap=DEFAULT_OVERLAP,
    window_s=DEFAULT_MEDIUM_WINDOW_S,
    threshold=DEFAULT_PEAK_THRESHOLD,
    contrast_weighting=False,
):
    """ Per-window mode, key clarity and harmonic change of a clip. """
    values = [
        window_tonal(window, frame_ms, overlap, threshold, contrast_weighting)
        for window in medium_windows(clip, window_s, overlap)
    ]
    return TonalSeries(*(np.array(column) for column in zip(*values)))
