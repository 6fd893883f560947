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

""" Audio clips, and the decoding and conditioning that produce them. """

import io
import math
import struct
import warnings
from pathlib import Path

import numpy as np
from boltons.cacheutils import cachedproperty
from boltons.dictutils import FrozenDict
from scipy.io import wavfile
from scipy.signal import resample_poly

from . import MalformedContainer, SilentClip, UnsupportedEncoding, logger

# Messages scipy uses to refuse a well-formed container it can't decode.
UNSUPPORTED_MESSAGES = ("Unknown wave file format", "Unsupported bit depth")


def _scale_unsigned(samples):
    """ Unsigned integers are centered on half their range. """
    offset = 2.0 ** (8 * samples.dtype.itemsize - 1)
    return (samples.astype(np.float64) - offset) / offset


def _scale_signed(samples):
    """Signed integers are mapped to [-1, 1[ by their full-scale value.

    Narrow PCM depths (24-bit and others) come left-justified in the next
    wider type, so the container type's width is the right divisor.
    """
    return samples.astype(np.float64) / 2.0 ** (8 * samples.dtype.itemsize - 1)


def _scale_float(samples):
    return samples.astype(np.float64)


# Sample scaling per numpy dtype kind.
SAMPLE_SCALERS = FrozenDict(
    {
        "u": _scale_unsigned,
        "i": _scale_signed,
        "f": _scale_float,
    }
)


class AudioClip:

    """A mono buffer of real samples with its sample rate.

    Samples are nominally in [-1, 1]. The buffer is copied and frozen on
    creation, so a clip can be shared between threads and processes.
    """

    def __init__(self, samples, sample_rate, source_id="<memory>"):
        samples = np.array(samples, dtype=np.float64)
        if samples.ndim != 1 or not samples.size:
            raise ValueError("Audio clip requires a non-empty mono sample buffer.")
        if not np.all(np.isfinite(samples)):
            raise ValueError(f"{source_id} contains non-finite samples.")
        if int(sample_rate) != sample_rate or sample_rate <= 0:
            raise ValueError(f"Invalid {sample_rate!r} sample rate.")
        samples.setflags(write=False)

        self.samples = samples
        self.sample_rate = int(sample_rate)
        self.source_id = str(source_id)

    def __len__(self):
        return self.samples.size

    def __repr__(self):
        return (
            f"<{self.__class__.__name__} {self.source_id} "
            f"{self.duration:.3f}s @ {self.sample_rate}Hz>"
        )

    @cachedproperty
    def duration(self):
        """Length of the clip in seconds."""
        return len(self) / self.sample_rate

    @cachedproperty
    def peak(self):
        """Maximum absolute amplitude."""
        return float(np.max(np.abs(self.samples)))

    def replace(self, samples=None, sample_rate=None):
        """ Returns a new clip from the same source, with some fields replaced. """
        return self.__class__(
            self.samples if samples is None else samples,
            self.sample_rate if sample_rate is None else sample_rate,
            source_id=self.source_id,
        )


def decode_wav(data, source_id="<bytes>"):
    """Decode a RIFF/WAVE byte string into a mono clip.

    Supports integer PCM of any depth scipy reads (8, 16, 24 and 32 bits
    included) and 32 or 64-bit float payloads. Channels are averaged.
    """
    try:
        with warnings.catch_warnings():
            # Unknown chunks (LIST, bext, ...) are skipped by scipy with a warning.
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            sample_rate, samples = wavfile.read(io.BytesIO(data))
    except ValueError as ex:
        if str(ex).startswith(UNSUPPORTED_MESSAGES):
            raise UnsupportedEncoding(f"{source_id}: {ex}") from ex
        raise MalformedContainer(f"{source_id}: {ex}") from ex
    except (EOFError, IndexError, struct.error) as ex:
        raise MalformedContainer(f"{source_id}: truncated container.") from ex

    scaler = SAMPLE_SCALERS.get(samples.dtype.kind)
    if not scaler:
        raise UnsupportedEncoding(f"{source_id}: {samples.dtype} samples.")
    samples = scaler(samples)

    if samples.ndim == 2:
        logger.debug(f"Average {samples.shape[1]} channels of {source_id} to mono.")
        samples = samples.mean(axis=1)

    if not samples.size:
        raise MalformedContainer(f"{source_id}: empty data chunk.")
    if not np.all(np.isfinite(samples)):
        raise MalformedContainer(f"{source_id}: non-finite float samples.")

    return AudioClip(samples, sample_rate, source_id=source_id)


def read_wav(path):
    """ Read and decode a WAV file. ``OSError`` is left to the caller. """
    path = Path(path)
    return decode_wav(path.read_bytes(), source_id=str(path))


def resample(clip, target_rate):
    """Band-limited polyphase resampling.

    The output has exactly ``round(len * target / source)`` samples.
    """
    if int(target_rate) != target_rate or target_rate <= 0:
        raise ValueError(f"Invalid {target_rate!r} target rate.")
    target_rate = int(target_rate)
    if target_rate == clip.sample_rate:
        return clip

    divisor = math.gcd(target_rate, clip.sample_rate)
    up, down = target_rate // divisor, clip.sample_rate // divisor
    samples = resample_poly(clip.samples, up, down)

    expected = max(1, int(round(len(clip) * target_rate / clip.sample_rate)))
    if samples.size >= expected:
        samples = samples[:expected]
    else:
        samples = np.pad(samples, (0, expected - samples.size))

    logger.debug(
        f"Resampled {clip.source_id} from {clip.sample_rate} to {target_rate} Hz."
    )
    return clip.replace(samples=samples, sample_rate=target_rate)


def normalize_peak(clip):
    """ Scale the clip so its maximum absolute sample is 1. """
    peak = clip.peak
    if peak == 0:
        raise SilentClip(f"{clip.source_id} is silent.")
    if peak == 1:
        return clip
    return clip.replace(samples=clip.samples / peak)


def load_clip(path, conf):
    """Read a WAV file and condition it for feature extraction.

    Applies, in order: decoding to mono, resampling to the configured rate and
    optional peak normalization.
    """
    clip = resample(read_wav(path), conf.sample_rate)
    if conf.peak_normalize:
        clip = normalize_peak(clip)
    return clip
