"""Deterministic CSV / JSON writers.

Floats are serialized as shortest round-trip decimals (Python repr), rows
are sorted by their leading key before writing, and every file carries the
configuration echo plus the surface-file content hash, so identical configs
and seeds reproduce outputs byte for byte.
"""

from __future__ import annotations

import csv
import json


def fmt(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, complex):
        return repr(value)
    return value


def write_csv(path, header, rows, provenance=None):
    """RFC-4180 body preceded by '#'-prefixed provenance comment lines."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if provenance:
            for key, val in provenance.items():
                fh.write(f"# {key}={val}\n")
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def read_csv(path):
    """Counterpart of write_csv: returns (provenance, header, rows)."""
    provenance = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    provenance[key.strip()] = val.strip()
                continue
            lines.append(line)
    reader = csv.reader(lines)
    rows = list(reader)
    return provenance, rows[0], rows[1:]


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path, payload, config_echo=None, surface_hash=None):
    doc = {}
    if config_echo is not None:
        doc["config"] = config_echo
    if surface_hash is not None:
        doc["surface_sha256"] = surface_hash
    doc.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=1)
        fh.write("\n")
