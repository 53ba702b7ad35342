"""Readers for the experiment file formats.

records.csv: fixed header
    n,N,input_distance,output_distance,vorticity_distance,ratio,
    particle_separation,separation_bound,supports_disjoint
summary.json: at least a "slope" key plus whatever the experiment stored.
field files: one-line JSON header {"type","n","version"} followed by raw
little-endian float64 row-major values (two arrays for vector fields).

Schema violations are reported with the offending line number.
"""

from __future__ import annotations

import json

import numpy as np

EXPECTED_HEADER = (
    "n,N,input_distance,output_distance,vorticity_distance,ratio,"
    "particle_separation,separation_bound,supports_disjoint"
)

FIELD_FORMAT_VERSION = 1


class SchemaError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


def _parse_bool(token: str, path, lineno: int) -> bool:
    if token == "true":
        return True
    if token == "false":
        return False
    raise SchemaError(path, lineno, f"expected true/false, got {token!r}")


def read_records(path) -> list[dict]:
    """Parse records.csv into a list of row dicts."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise SchemaError(path, 1, "empty file")
    if lines[0] != EXPECTED_HEADER:
        raise SchemaError(path, 1, f"unexpected header {lines[0]!r}")
    columns = EXPECTED_HEADER.split(",")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(columns):
            raise SchemaError(path, lineno,
                              f"expected {len(columns)} fields, got {len(parts)}")
        try:
            row = {
                "n": int(parts[0]),
                "N": int(parts[1]),
                "input_distance": float(parts[2]),
                "output_distance": float(parts[3]),
                "vorticity_distance": float(parts[4]),
                "ratio": float(parts[5]),
                "particle_separation": float(parts[6]),
                "separation_bound": float(parts[7]),
                "supports_disjoint": _parse_bool(parts[8], path, lineno),
            }
        except ValueError as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(path, lineno, str(exc)) from exc
        rows.append(row)
    return rows


def read_summary(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_field(path):
    """Read a field file; returns (kind, list of (n, n) float arrays)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise SchemaError(path, 1, "malformed field header") from exc
        if header.get("version") != FIELD_FORMAT_VERSION:
            raise SchemaError(path, 1,
                              f"unsupported version {header.get('version')!r}")
        kind = header.get("type")
        if kind not in ("scalar", "vector"):
            raise SchemaError(path, 1, f"unknown field type {kind!r}")
        n = int(header["n"])
        count = 1 if kind == "scalar" else 2
        raw = fh.read(count * n * n * 8)
        if len(raw) != count * n * n * 8:
            raise SchemaError(path, 2, "truncated field payload")
        data = np.frombuffer(raw, dtype="<f8").reshape(count, n, n)
    return kind, [data[i] for i in range(count)]
