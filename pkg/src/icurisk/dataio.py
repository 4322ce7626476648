"""Deterministic serialization helpers shared across pipeline stages.

Artifacts must be byte-identical across reruns with the same seed, so
every writer here sorts keys, uses repr-exact float formatting, and
never embeds timestamps.
"""

from __future__ import annotations

import csv
import hashlib
import json


def write_json(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(header, rows, path):
    """Rows of floats/str; floats written with repr so reload is exact."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return "1" if v else "0"
    return v


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def sha256_of(payload) -> str:
    """Stable digest of a JSON-serializable object."""
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
