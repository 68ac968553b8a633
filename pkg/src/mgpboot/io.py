"""CSV datasets and run manifests.

CSV conventions: UTF-8, comma-delimited, one header row, LF line endings,
reals written with 17 significant digits, and the literal token ``NA`` for a
missing value.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

NA = "NA"


@dataclass(frozen=True)
class Dataset:
    names: tuple[str, ...]
    values: np.ndarray
    path: str | None = None

    @property
    def d(self) -> int:
        return self.values.shape[1]


def fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return NA
        return format(value, ".17g")
    return str(value)


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if all(_is_number(h) for h in header):
        raise DataError(f"{path}: line 1 looks numeric; a header row is required")
    if len(set(header)) != len(header) or any(not h for h in header):
        raise DataError(f"{path}: header names must be nonempty and unique")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: line {lineno} has {len(row)} fields, header has {len(header)}")
        try:
            parsed = [float(cell) for cell in row]
        except ValueError:
            raise DataError(f"{path}: line {lineno} has a non-numeric cell") from None
        if not all(math.isfinite(v) for v in parsed):
            raise DataError(f"{path}: line {lineno} has a non-finite cell")
        values.append(parsed)
    if not values:
        raise DataError(f"{path}: no data rows")
    return Dataset(tuple(header), np.array(values, dtype=np.float64), str(path))


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def write_matrix(path, names, values):
    return write_csv(path, names, (list(r) for r in np.asarray(values)))


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, *, version, command, config, seed, inputs, outputs, counters):
    """Write ``manifest.json``; contents depend only on the run's inputs and settings."""
    out_dir = Path(out_dir)
    manifest = {
        "tool": "mgpboot",
        "version": version,
        "command": command,
        "seed": seed,
        "config": config,
        "inputs": [{"path": str(p), "sha256": sha256(p)} for p in inputs],
        "outputs": sorted(str(Path(o).relative_to(out_dir)) for o in outputs),
        "counters": counters,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
