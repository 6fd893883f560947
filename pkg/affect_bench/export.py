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

""" Canonical text serialization of the files we write.

All writes are atomic: a crash leaves either the old file or the new one.
"""

import csv
import io
import json
from pathlib import Path

from boltons.fileutils import atomic_save

from . import SCHEMA_VERSION, SchemaMismatch, logger

# Significant digits of floats written to CSV files.
CSV_DIGITS = 9

# Prefix of the metadata lines heading our CSV files.
COMMENT_PREFIX = "#"


def format_cell(value):
    """ Render a CSV cell: floats to 9 significant digits, ``None`` as empty. """
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.{CSV_DIGITS}g}"
    return str(value)


def dumps_json(document):
    """ Canonical JSON: sorted keys, 2-space indent, no NaN or infinity. """
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_text(path, text):
    path = Path(path)
    with atomic_save(str(path)) as handle:
        handle.write(text.encode("utf-8"))
    logger.debug(f"Wrote {path}")


def write_json(path, document):
    write_text(path, dumps_json(document))


def write_csv(path, header, rows, config=None):
    """Write a CSV file headed by its metadata lines.

    Metadata lines carry the schema version and, if provided, the compact
    JSON of the configuration that produced the file.
    """
    buffer = io.StringIO()
    buffer.write(f"{COMMENT_PREFIX} schema_version={SCHEMA_VERSION}\n")
    if config is not None:
        compact = json.dumps(config, sort_keys=True, separators=(",", ":"))
        buffer.write(f"{COMMENT_PREFIX} config={compact}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([format_cell(cell) for cell in row] for row in rows)
    write_text(path, buffer.getvalue())


def read_csv(path):
    """Read a CSV file written by ``write_csv``.

    Returns the metadata as a dict, the header and the data rows. Blank lines
    are skipped.
    """
    path = Path(path)
    metadata = {}
    lines = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith(COMMENT_PREFIX):
            key, _, value = line[len(COMMENT_PREFIX) :].strip().partition("=")
            metadata[key] = value
        elif line.strip():
            lines.append(line)
    if not lines:
        raise SchemaMismatch(f"{path} has no header.")

    version = metadata.get("schema_version")
    if version is not None and version != str(SCHEMA_VERSION):
        raise SchemaMismatch(
            f"{path} has schema version {version}, expected {SCHEMA_VERSION}."
        )

    reader = csv.reader(lines)
    header = next(reader)
    return metadata, tuple(header), [tuple(row) for row in reader]
