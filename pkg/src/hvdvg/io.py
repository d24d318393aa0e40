"""Atomic file output, versioned JSON and titer dataset ingestion."""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

SCHEMA_VERSION = "1.0"
DATASET_HEADER = ("t_hpi", "pfu_per_ml")


class FormatError(ValueError):
    """A file does not have the expected layout."""


class ValidationError(ValueError):
    """A file parses but its content violates a requirement."""


class SchemaVersionError(FormatError):
    pass


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(_jsonable(payload))
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, dumps(payload))


def check_schema(doc: dict, *, required: bool = False) -> None:
    v = doc.get("schema_version")
    if v is None:
        if required:
            raise SchemaVersionError("missing schema_version")
        return
    major = str(v).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise SchemaVersionError(f"unsupported schema_version {v!r} (this build reads {SCHEMA_VERSION})")


def read_json(path, *, required_version: bool = False) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be a JSON object")
    check_schema(doc, required=required_version)
    return doc


@dataclass(frozen=True)
class Dataset:
    """Titer time series ``(t_i, V_i)`` in hours and particles per ml.

    ``scale`` converts between raw particle counts and the model's density
    units (raw = scaled * scale).
    """

    t: np.ndarray
    V: np.ndarray
    moi_label: Optional[float] = None
    scale: float = 1e6

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        V = np.asarray(self.V, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "V", V)
        if t.ndim != 1 or t.shape != V.shape:
            raise ValidationError("t and V must be 1-d arrays of equal length")
        if t.size < 2:
            raise ValidationError(f"need at least 2 data points, got {t.size}")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(V))):
            raise ValidationError("non-finite value in dataset")
        if np.any(t < 0):
            raise ValidationError("times must be >= 0")
        for i in range(1, t.size):
            if not t[i] > t[i - 1]:
                raise ValidationError(f"times must be strictly increasing (row {i + 1}: {t[i]} after {t[i - 1]})")
        for i, v in enumerate(V):
            if not v > 0:
                raise ValidationError(f"titer must be > 0 (row {i + 1}: {v})")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError("scale must be a positive finite number")

    @property
    def n(self) -> int:
        return int(self.t.size)

    def to_csv_text(self) -> str:
        lines = []
        if self.moi_label is not None:
            lines.append(f"# moi_label = {self.moi_label!r}")
        lines.append(f"# scale = {self.scale!r}")
        lines.append(",".join(DATASET_HEADER))
        lines.extend(f"{a:.17g},{b:.17g}" for a, b in zip(self.t, self.V))
        return "\n".join(lines) + "\n"


def load_dataset(path, *, scale: Optional[float] = None, moi_label: Optional[float] = None) -> Dataset:
    """Read a ``t_hpi,pfu_per_ml`` CSV.

    Leading ``# key = value`` comment lines may set ``scale`` and
    ``moi_label``; keyword arguments override them. Rows are validated, not
    sorted.
    """
    meta = {}
    rows = []
    header = None
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if header is None and "=" in line:
                    k, v = (s.strip() for s in line[1:].split("=", 1))
                    meta[k] = v
                continue
            if header is None:
                header = tuple(c.strip() for c in next(csv.reader([line])))
                if header != DATASET_HEADER:
                    raise FormatError(f"{path}: expected header {','.join(DATASET_HEADER)!r}, got {line!r}")
                continue
            cells = next(csv.reader([line]))
            if len(cells) != 2:
                raise FormatError(f"{path}: line {lineno}: expected 2 columns, got {len(cells)}")
            try:
                rows.append((float(cells[0]), float(cells[1])))
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: non-numeric value") from None
    if header is None:
        raise FormatError(f"{path}: missing header {','.join(DATASET_HEADER)!r}")
    unknown = set(meta) - {"scale", "moi_label"}
    if unknown:
        raise FormatError(f"{path}: unknown metadata keys {sorted(unknown)}")
    if scale is None:
        scale = float(meta.get("scale", 1e6))
    if moi_label is None and "moi_label" in meta:
        moi_label = float(meta["moi_label"])
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    arr = np.array(rows)
    return Dataset(t=arr[:, 0], V=arr[:, 1], moi_label=moi_label, scale=scale)
