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

"""Feature extraction over a whole dataset.

Clips are decoded and summarized one by one, in manifest order. Clips which
can't be analyzed are skipped with a warning and accounted for in the
statistics.
"""

import textwrap
from collections import Counter, OrderedDict
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat

from tabulate import tabulate

from . import ClipTooShort, FitError, InputError, SchemaError, SilentClip, logger
from .audio import load_clip
from .features import FeatureMatrix, summarize

# Reference all tracked statistics and their definition.
STATS_DEF = OrderedDict(
    [
        ("clip_found", "Total number of clips referenced by the manifest."),
        ("clip_missing", "Number of clips whose audio file does not exist."),
        (
            "clip_unreadable",
            "Number of clips rejected because their file could not be read or "
            "decoded.",
        ),
        (
            "clip_silent",
            "Number of clips rejected by peak normalization because all their "
            "samples are zero.",
        ),
        (
            "clip_short",
            "Number of clips rejected because they are shorter than a medium-level "
            "analysis window.",
        ),
        (
            "clip_failed",
            "Number of clips whose analysis failed numerically or produced an "
            "invalid feature vector.",
        ),
        ("clip_extracted", "Number of clips summarized into a feature vector."),
    ]
)


def extract_path(path, conf):
    """Load and summarize a single clip file.

    Returns a ``(vector, stat_id, message)`` tuple, with ``vector`` set to
    ``None`` for rejected clips. Module-level so worker processes can run it.
    """
    try:
        vector = summarize(load_clip(path, conf), conf)
    except ClipTooShort as ex:
        return None, "clip_short", str(ex)
    except SilentClip as ex:
        return None, "clip_silent", str(ex)
    except (InputError, OSError) as ex:
        return None, "clip_unreadable", str(ex)
    except (FitError, SchemaError) as ex:
        return None, "clip_failed", f"{ex.__class__.__name__}: {ex}"
    return vector, "clip_extracted", None


class Extraction:

    """ Extract the features of all clips of a manifest. """

    def __init__(self, manifest, conf):
        self.manifest = manifest
        self.conf = conf

        # Feature vectors by clip ID, in manifest order.
        self.vectors = {}

        # Rejection messages by clip ID.
        self.failures = {}

        self.stats = Counter(dict.fromkeys(STATS_DEF, 0))
        self.stats["clip_found"] = len(manifest)

    def iter_extract(self):
        """Extract clips one by one, yielding the ID of each processed clip.

        Run on ``conf.jobs`` worker processes if more than one.
        """
        missing = set(self.manifest.missing)
        for clip_id in self.manifest.missing:
            logger.warning(f"Skip {clip_id}: file not found.")
            self.failures[clip_id] = "file not found"
            self.stats["clip_missing"] += 1
            yield clip_id

        entries = [
            entry for entry in self.manifest if entry.clip_path not in missing
        ]
        paths = [self.manifest.resolve(entry) for entry in entries]

        if self.conf.jobs > 1:
            logger.info(f"Extract features on {self.conf.jobs} processes.")
            with ProcessPoolExecutor(max_workers=self.conf.jobs) as executor:
                # map() preserves the order of its inputs.
                results = executor.map(extract_path, paths, repeat(self.conf))
                yield from self._collect(entries, results)
        else:
            results = (extract_path(path, self.conf) for path in paths)
            yield from self._collect(entries, results)

    def _collect(self, entries, results):
        for entry, (vector, stat_id, message) in zip(entries, results):
            clip_id = entry.clip_path
            self.stats[stat_id] += 1
            if vector is None:
                logger.warning(f"Skip {clip_id}: {message}")
                self.failures[clip_id] = message
            else:
                self.vectors[clip_id] = vector
            yield clip_id

    def extract_all(self):
        for _ in self.iter_extract():
            pass

    def matrix(self):
        """ Feature matrix of all extracted clips, rows in manifest order. """
        row_ids = [cid for cid in self.manifest.clip_ids if cid in self.vectors]
        return FeatureMatrix(
            [self.vectors[clip_id].values for clip_id in row_ids], row_ids
        )

    def report(self):
        """ Returns a text report of user-friendly statistics. """
        table = [["Clips", "Metric", "Description"]]
        for stat_id, desc in STATS_DEF.items():
            table.append(
                [
                    stat_id[len("clip_") :].replace("_", " - ").title(),
                    self.stats[stat_id],
                    "\n".join(textwrap.wrap(desc, 60)),
                ]
            )
        return tabulate(table, tablefmt="fancy_grid", headers="firstrow")

    def check_stats(self):
        """ Perform some high-level consistency checks on metrics. """
        assert self.stats["clip_found"] == len(self.manifest)
        assert self.stats["clip_found"] == (
            self.stats["clip_missing"]
            + self.stats["clip_unreadable"]
            + self.stats["clip_silent"]
            + self.stats["clip_short"]
            + self.stats["clip_failed"]
            + self.stats["clip_extracted"]
        )
        assert self.stats["clip_extracted"] == len(self.vectors)
        assert len(self.failures) + len(self.vectors) == len(self.manifest)
