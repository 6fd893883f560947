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

""" Datasets of clips annotated with their perceived affect. """

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from boltons.cacheutils import cachedproperty

from . import (
    TARGETS,
    DuplicatePath,
    LabelOutOfRange,
    ManifestParseError,
    SchemaMismatch,
    logger,
)

# Expected header of manifest files.
MANIFEST_HEADER = ("path", "arousal", "valence")


@dataclass(frozen=True)
class AffectLabel:

    """ Arousal and valence coordinates, normalized to [-1, 1]. """

    arousal: float
    valence: float

    def __post_init__(self):
        for target in TARGETS:
            value = getattr(self, target)
            if not math.isfinite(value) or not -1 <= value <= 1:
                raise LabelOutOfRange(f"{target} {value!r} is not within [-1, 1].")


@dataclass(frozen=True)
class ManifestEntry:

    clip_path: str
    label: AffectLabel


def normalize_label(value, label_min=None, label_max=None):
    """Affine map of a raw annotation from its declared range to [-1, 1].

    Without declared range, the value is expected to be normalized already.
    """
    if label_min is None:
        if not -1 <= value <= 1:
            raise LabelOutOfRange(f"{value!r} is not within [-1, 1].")
        return value
    if not label_min <= value <= label_max:
        raise LabelOutOfRange(
            f"{value!r} is not within declared [{label_min}, {label_max}] range."
        )
    return 2 * (value - label_min) / (label_max - label_min) - 1


class DatasetManifest:

    """Ordered list of annotated clips.

    Relative clip paths are resolved against the manifest's own directory.
    """

    def __init__(self, entries, name="manifest", base_dir=None):
        self.entries = tuple(entries)
        self.name = name
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()

        # Spellings of the same file count as duplicates.
        seen = set()
        for entry in self.entries:
            location = self.resolve(entry).resolve()
            if location in seen:
                raise DuplicatePath(f"{entry.clip_path} referenced twice in {name}.")
            seen.add(location)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __repr__(self):
        return f"<{self.__class__.__name__} {self.name} ({len(self)} clips)>"

    @cachedproperty
    def clip_ids(self):
        return tuple(entry.clip_path for entry in self.entries)

    def resolve(self, entry):
        """ Location of the entry's audio file. """
        path = Path(entry.clip_path)
        if not path.is_absolute():
            path = self.base_dir.joinpath(path)
        return path

    @cachedproperty
    def missing(self):
        """Clip IDs whose audio file can't be found."""
        return tuple(
            entry.clip_path
            for entry in self.entries
            if not self.resolve(entry).is_file()
        )

    def labels(self, target, row_ids=None):
        """Vector of a target's values.

        If ``row_ids`` is provided, labels are returned in that order, which
        is how features and annotations get aligned.
        """
        if target not in TARGETS:
            raise ValueError(f"Unknown {target} target.")
        return np.array(
            [getattr(label, target) for label in self.affect_labels(row_ids)],
            dtype=np.float64,
        )

    def affect_labels(self, row_ids=None):
        """ Labels of the given clips, in that order. """
        by_id = {entry.clip_path: entry.label for entry in self}
        if row_ids is None:
            return [entry.label for entry in self]
        unknown = [row_id for row_id in row_ids if row_id not in by_id]
        if unknown:
            raise SchemaMismatch(
                f"{len(unknown)} feature rows have no annotation in {self.name}, "
                f"first is {unknown[0]}."
            )
        return [by_id[row_id] for row_id in row_ids]


def load_manifest(path, label_min=None, label_max=None):
    """Parse a ``path,arousal,valence`` CSV file.

    Rows are kept in file order. Referenced audio files that can't be found
    are reported but kept, so extraction can account for them.
    """
    path = Path(path)
    entries = []
    seen = set()
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(col.strip() for col in header) != MANIFEST_HEADER:
            raise ManifestParseError(
                f"{path} header must be {','.join(MANIFEST_HEADER)!r}, got {header!r}."
            )

        for line_number, row in enumerate(reader, start=2):
            # Tolerate blank lines.
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise ManifestParseError(
                    f"{path}:{line_number}: expected {len(MANIFEST_HEADER)} "
                    f"columns, got {len(row)}."
                )
            clip_path = row[0].strip()
            if not clip_path:
                raise ManifestParseError(f"{path}:{line_number}: empty clip path.")
            try:
                raw = [float(cell) for cell in row[1:]]
            except ValueError as ex:
                raise ManifestParseError(f"{path}:{line_number}: {ex}.") from ex
            if not all(map(math.isfinite, raw)):
                raise ManifestParseError(f"{path}:{line_number}: non-finite label.")

            location = path.parent.joinpath(clip_path).resolve()
            if location in seen:
                raise DuplicatePath(f"{path}:{line_number}: {clip_path} seen before.")
            seen.add(location)

            try:
                label = AffectLabel(
                    *(normalize_label(value, label_min, label_max) for value in raw)
                )
            except LabelOutOfRange as ex:
                raise LabelOutOfRange(f"{path}:{line_number}: {ex}") from ex
            entries.append(ManifestEntry(clip_path, label))

    manifest = DatasetManifest(entries, name=path.stem, base_dir=path.parent)
    logger.info(f"{len(manifest)} annotated clips found in {path}.")
    if manifest.missing:
        logger.warning(f"{len(manifest.missing)} referenced audio files not found.")
    return manifest
