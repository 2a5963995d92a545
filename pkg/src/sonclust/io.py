"""CSV and JSON formats used by the command line.

Datasets are headerless CSV by default, one point per row.  Every JSON
document carries ``schema_version`` and a ``kind`` tag.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import Dataset, InputError, Partition
from .mixture import MixtureModel

SCHEMA_VERSION = 1


class FormatError(InputError):
    """Malformed input file; the message names the file and line."""


def read_dataset_csv(path, header: bool = False) -> Dataset:
    path = Path(path)
    rows = []
    width = None
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if header and lineno == 1:
                    continue
                if not row or all(not cell.strip() for cell in row):
                    continue
                try:
                    values = [float(cell) for cell in row]
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
                if not all(math.isfinite(v) for v in values):
                    raise FormatError(f"{path}:{lineno}: non-finite value")
                if width is None:
                    width = len(values)
                elif len(values) != width:
                    raise FormatError(f"{path}:{lineno}: expected {width} columns, got {len(values)}")
                rows.append(values)
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if not rows:
        raise FormatError(f"{path}:1: dataset is empty")
    return Dataset(np.array(rows))


def write_dataset_csv(path, dataset: Dataset, header: bool = False) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if header:
            writer.writerow([f"x{k}" for k in range(dataset.d)])
        for row in dataset.points:
            writer.writerow([repr(float(v)) for v in row])


def write_labels_csv(path, labels) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(f"{int(lab)}\n")


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: {exc.msg}") from None


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), indent=2) + "\n"


def document(kind: str, **fields) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **fields}


def load_model(path) -> MixtureModel:
    """Mixture config: JSON object with ``means``, ``sigmas`` and ``weights``."""
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise FormatError(f"{path}:1: model config must be a JSON object")
    missing = [key for key in ("means", "sigmas", "weights") if key not in doc]
    if missing:
        raise FormatError(f"{path}:1: model config missing {', '.join(missing)}")
    try:
        return MixtureModel(doc["means"], doc["sigmas"], doc["weights"])
    except (InputError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}:1: invalid model: {exc}") from None


def partition_from_doc(doc: dict, source="solution") -> Partition:
    try:
        return Partition.from_clusters(doc["partition"])
    except (KeyError, TypeError, InputError) as exc:
        raise FormatError(f"{source}:1: bad partition field: {exc}") from None
