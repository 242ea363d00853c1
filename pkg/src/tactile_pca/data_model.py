"""Tactile segments, class labels, dataset grids and preprocessing."""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

DATASET_SCHEMA = "tactile-dataset"
DATASET_VERSION = 1


class DatasetError(ValueError):
    """Raised for malformed or degenerate datasets."""


class SchemaError(DatasetError):
    """An artifact file has the wrong schema tag or version."""


@dataclass(frozen=True)
class ClassLabel:
    """A (where, what) label. Indices are 1-based."""

    loc_index: int
    id_index: int
    loc_value: float
    id_value: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.loc_index, self.id_index)


@dataclass(frozen=True, eq=False)
class TactileSegment:
    """One tap: an ``n_dims x n_samples`` matrix of deflections.

    Non-finite values are tolerated at construction so that raw data can be
    loaded and then rejected by :func:`filter_abnormal_taps`.
    """

    samples: np.ndarray
    label: ClassLabel

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DatasetError(f"samples must be a non-empty 2-D matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n_dims(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_count(self) -> int:
        return self.samples.shape[1]

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.samples)))


@dataclass(frozen=True)
class GridMetadata:
    """Physical description of a where/what grid.

    ``ranges`` and ``increments`` are keyed by ``"loc"`` and ``"id"``; the
    value of class index ``i`` is ``ranges[key][0] + (i - 1) * increments[key]``.
    """

    sensor: str
    n_id: int
    n_loc: int
    n_dims: int
    nominal_samples: int
    what_increment: float
    circular_what: bool = False
    units: dict = field(default_factory=lambda: {"loc": "mm", "id": "mm"})
    ranges: dict = field(default_factory=dict)
    increments: dict = field(default_factory=dict)

    def loc_value(self, loc_index: int) -> float:
        return float(self.ranges["loc"][0] + (loc_index - 1) * self.increments["loc"])

    def id_value(self, id_index: int) -> float:
        return float(self.ranges["id"][0] + (id_index - 1) * self.increments["id"])

    def loc_values(self) -> np.ndarray:
        return np.array([self.loc_value(i) for i in range(1, self.n_loc + 1)])

    def id_values(self) -> np.ndarray:
        return np.array([self.id_value(i) for i in range(1, self.n_id + 1)])

    def to_dict(self) -> dict:
        return {
            "sensor": self.sensor,
            "n_dims": self.n_dims,
            "n_id": self.n_id,
            "n_loc": self.n_loc,
            "nominal_samples": self.nominal_samples,
            "what_increment": self.what_increment,
            "circular_what": self.circular_what,
            "units": dict(self.units),
            "ranges": {k: list(v) for k, v in self.ranges.items()},
            "increments": dict(self.increments),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridMetadata":
        try:
            return cls(
                sensor=str(d["sensor"]),
                n_id=int(d["n_id"]),
                n_loc=int(d["n_loc"]),
                n_dims=int(d["n_dims"]),
                nominal_samples=int(d["nominal_samples"]),
                what_increment=float(d["what_increment"]),
                circular_what=bool(d["circular_what"]),
                units=dict(d.get("units", {})),
                ranges={k: [float(x) for x in v] for k, v in d.get("ranges", {}).items()},
                increments={k: float(v) for k, v in d.get("increments", {}).items()},
            )
        except KeyError as exc:
            raise DatasetError(f"missing header field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class DatasetGrid:
    segments: tuple[TactileSegment, ...]
    meta: GridMetadata

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        for seg in self.segments:
            if seg.n_dims != self.meta.n_dims:
                raise DatasetError(
                    f"segment has {seg.n_dims} dims, grid declares {self.meta.n_dims}"
                )

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def n_classes(self) -> int:
        return self.meta.n_id * self.meta.n_loc

    def labels(self) -> list[ClassLabel]:
        return [s.label for s in self.segments]

    def missing_classes(self) -> list[tuple[int, int]]:
        present = {s.label.key for s in self.segments}
        return [
            (l, i)
            for l in range(1, self.meta.n_loc + 1)
            for i in range(1, self.meta.n_id + 1)
            if (l, i) not in present
        ]

    def stack(self) -> np.ndarray:
        """Samples as an ``(N, n_dims, n_samples)`` array; requires equal lengths."""
        counts = {s.sample_count for s in self.segments}
        if len(counts) != 1:
            raise DatasetError(f"segments have differing sample counts {sorted(counts)}")
        return np.stack([s.samples for s in self.segments])


@dataclass
class FilterReport:
    dropped: list[int] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def filter_abnormal_taps(grid: DatasetGrid) -> tuple[DatasetGrid, FilterReport]:
    """Keep only taps whose length equals the modal sample count.

    Ties between equally common counts go to the larger count. Taps of the
    modal length that contain non-finite values are dropped as well.
    """
    if len(grid) == 0:
        raise DatasetError("empty dataset")
    counts = Counter(s.sample_count for s in grid.segments)
    top = max(counts.values())
    modes = sorted(c for c, n in counts.items() if n == top)
    mode = modes[-1]
    report = FilterReport()
    if len(modes) > 1:
        report.notes.append(
            f"ambiguous mode among sample counts {modes}; kept the larger ({mode})"
        )
    kept = []
    for i, seg in enumerate(grid.segments):
        if seg.sample_count != mode:
            report.dropped.append(i)
        elif not seg.is_finite:
            report.dropped.append(i)
            report.notes.append(f"segment {i} dropped: non-finite samples")
        else:
            kept.append(seg)
    meta = replace(grid.meta, nominal_samples=mode)
    return DatasetGrid(tuple(kept), meta), report


def center_segment(segment: TactileSegment) -> TactileSegment:
    """Subtract each sensor dimension's time mean."""
    if not segment.is_finite:
        raise DatasetError("invalid sample")
    s = segment.samples
    return TactileSegment(s - s.mean(axis=1, keepdims=True), segment.label)


def preprocess(grid: DatasetGrid) -> tuple[DatasetGrid, FilterReport]:
    filtered, report = filter_abnormal_taps(grid)
    centered = tuple(center_segment(s) for s in filtered.segments)
    return DatasetGrid(centered, filtered.meta), report


# --- serialization ---------------------------------------------------------


def grid_to_dict(grid: DatasetGrid) -> dict:
    return {
        "schema": DATASET_SCHEMA,
        "version": DATASET_VERSION,
        "header": grid.meta.to_dict(),
        "segments": [
            {
                "loc_index": s.label.loc_index,
                "id_index": s.label.id_index,
                "loc_value": s.label.loc_value,
                "id_value": s.label.id_value,
                "samples": s.samples.tolist(),
            }
            for s in grid.segments
        ],
    }


def check_schema(doc: dict, schema: str, version: int) -> None:
    if not isinstance(doc, dict) or doc.get("schema") != schema:
        raise SchemaError(f"not a {schema} document")
    if doc.get("version") != version:
        raise SchemaError(
            f"schema version mismatch: expected {version}, found {doc.get('version')}"
        )


def grid_from_dict(doc: dict) -> DatasetGrid:
    check_schema(doc, DATASET_SCHEMA, DATASET_VERSION)
    meta = GridMetadata.from_dict(doc["header"])
    segments = []
    for s in doc["segments"]:
        label = ClassLabel(
            int(s["loc_index"]), int(s["id_index"]), float(s["loc_value"]), float(s["id_value"])
        )
        segments.append(TactileSegment(np.array(s["samples"], dtype=float), label))
    return DatasetGrid(tuple(segments), meta)


def save_grid(grid: DatasetGrid, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(grid_to_dict(grid), fh)


def load_grid(path: str | Path) -> DatasetGrid:
    with open(path) as fh:
        text = fh.read()
    if not text.strip():
        raise DatasetError("empty dataset")
    return grid_from_dict(json.loads(text))


def export_grid_csv(grid: DatasetGrid, path: str | Path) -> None:
    """One row per segment: label columns, shape, then row-major samples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["loc_index", "id_index", "loc_value", "id_value", "n_dims", "n_samples", "samples..."])
        for s in grid.segments:
            lab = s.label
            w.writerow(
                [lab.loc_index, lab.id_index, repr(lab.loc_value), repr(lab.id_value),
                 s.n_dims, s.sample_count]
                + [repr(float(v)) for v in s.samples.ravel()]
            )


def read_grid_csv(path: str | Path, meta: GridMetadata) -> DatasetGrid:
    segments = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        next(rows)
        for row in rows:
            nd, ns = int(row[4]), int(row[5])
            samples = np.array([float(v) for v in row[6:]]).reshape(nd, ns)
            label = ClassLabel(int(row[0]), int(row[1]), float(row[2]), float(row[3]))
            segments.append(TactileSegment(samples, label))
    return DatasetGrid(tuple(segments), meta)


def circular_diff(a, b, period: float = 360.0):
    """Absolute wrap-aware difference between angles."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) % period
    return np.minimum(d, period - d)


def what_diff(a, b, circular: bool):
    if circular:
        return circular_diff(a, b)
    return np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))


def labels_sorted(labels: Sequence[ClassLabel]) -> list[int]:
    """Indices that order labels by (loc_index, id_index), stable."""
    return sorted(range(len(labels)), key=lambda i: labels[i].key)
