"""Dataset schema, mixed-type encoding/decoding, and row-space statistics.

A table is described by a :class:`DatasetSchema`: an ordered list of
features, each either continuous (min-max normalized to [0, 1]) or
categorical (one-hot encoded). The schema carries the training statistics
(min, max, median absolute deviation) that encoding and the distance
metrics depend on, plus a mutability flag per feature that constrains
which features recourse may change.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import IngestError, SchemaError

SCHEMA_VERSION = 1

# Continuous values closer than this (in normalized units) count as equal
# for L0/sparsity purposes.
TAU_EQ = 1e-4

# Default distinct-value threshold for inferring categorical columns.
DEFAULT_MAX_CATEGORIES = 20

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class FeatureSpec:
    """One column of the dataset: type, training statistics, mutability."""

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    min: float = 0.0
    max: float = 0.0
    mad: float = 0.0
    mutable: bool = True

    def __post_init__(self) -> None:
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if len(self.categories) < 2:
                raise SchemaError(
                    f"feature {self.name!r}: categorical needs >= 2 categories"
                )
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"feature {self.name!r}: duplicate categories")
        else:
            if not (self.min <= self.max):
                raise SchemaError(f"feature {self.name!r}: min > max")
            if self.mad < 0:
                raise SchemaError(f"feature {self.name!r}: mad < 0")

    @property
    def width(self) -> int:
        return 1 if self.kind == CONTINUOUS else len(self.categories)

    @property
    def span(self) -> float:
        return self.max - self.min

    def mad_divisor(self) -> float:
        """MAD guarded against constant columns (never zero)."""
        return max(self.mad, 1e-6 * self.span, 1e-12)


@dataclass(frozen=True)
class DatasetSchema:
    """Ordered feature specs plus the classification target."""

    features: tuple[FeatureSpec, ...]
    target_name: str
    target_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        if self.target_name in names:
            raise SchemaError("target name collides with a feature name")
        if len(self.target_labels) < 2:
            raise SchemaError("need >= 2 target labels")
        if len(set(self.target_labels)) != len(self.target_labels):
            raise SchemaError("duplicate target labels")

    @cached_property
    def encoded_width(self) -> int:
        return sum(f.width for f in self.features)

    @cached_property
    def _offsets(self) -> dict[str, tuple[int, int]]:
        out: dict[str, tuple[int, int]] = {}
        pos = 0
        for f in self.features:
            out[f.name] = (pos, pos + f.width)
            pos += f.width
        return out

    @cached_property
    def _by_name(self) -> dict[str, FeatureSpec]:
        return {f.name: f for f in self.features}

    def feature(self, name: str) -> FeatureSpec:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"unknown feature {name!r}") from None

    def block(self, name: str) -> slice:
        lo, hi = self._offsets[name]
        return slice(lo, hi)

    def label_index(self, label: str | float) -> int:
        key = _label_key(label)
        try:
            return self.target_labels.index(key)
        except ValueError:
            raise SchemaError(f"unknown target label {label!r}") from None

    @cached_property
    def fingerprint(self) -> str:
        import hashlib

        payload = json.dumps(schema_to_dict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @property
    def mutable_features(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.mutable)


@dataclass(frozen=True)
class RawRow:
    """One row in feature space: feature name -> string or number.

    May carry extra keys (e.g. the target column from ingestion); encoding
    only reads schema features.
    """

    values: Mapping[str, str | float]

    def get(self, name: str) -> str | float:
        try:
            return self.values[name]
        except KeyError:
            raise SchemaError(f"row is missing feature {name!r}") from None


@dataclass(frozen=True)
class EncodedVector:
    """Model-space image of a row: normalized/one-hot slots."""

    data: np.ndarray
    schema_id: str

    def __post_init__(self) -> None:
        if self.data.ndim != 1:
            raise SchemaError("encoded vector must be 1-D")


def _label_key(value: str | float) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return str(value)


def encode(row: RawRow, schema: DatasetSchema) -> EncodedVector:
    """Min-max normalize continuous features, one-hot categoricals."""
    out = np.zeros(schema.encoded_width)
    pos = 0
    for f in schema.features:
        v = row.get(f.name)
        if f.kind == CONTINUOUS:
            try:
                x = float(v)
            except (TypeError, ValueError):
                raise SchemaError(
                    f"feature {f.name!r}: expected a number, got {v!r}"
                ) from None
            if f.span > 0:
                out[pos] = min(1.0, max(0.0, (x - f.min) / f.span))
            else:
                out[pos] = 0.0
            pos += 1
        else:
            name = str(v)
            try:
                idx = f.categories.index(name)
            except ValueError:
                raise SchemaError(
                    f"feature {f.name!r}: unknown category {name!r}"
                ) from None
            out[pos + idx] = 1.0
            pos += f.width
    return EncodedVector(out, schema.fingerprint)


def decode(vec: EncodedVector | np.ndarray, schema: DatasetSchema) -> RawRow:
    """Inverse of :func:`encode`: denormalize, argmax each one-hot block."""
    data = vec.data if isinstance(vec, EncodedVector) else np.asarray(vec, float)
    if data.shape != (schema.encoded_width,):
        raise SchemaError(
            f"encoded length {data.shape} does not match width {schema.encoded_width}"
        )
    values: dict[str, str | float] = {}
    pos = 0
    for f in schema.features:
        if f.kind == CONTINUOUS:
            values[f.name] = f.min + float(data[pos]) * f.span
            pos += 1
        else:
            block = data[pos : pos + f.width]
            values[f.name] = f.categories[int(np.argmax(block))]
            pos += f.width
    return RawRow(values)


def harden(soft: np.ndarray, schema: DatasetSchema) -> RawRow:
    """Snap a soft decoder output to a schema-valid hard row.

    Continuous slots are clamped to [0, 1] before denormalizing; each
    categorical block collapses to its argmax category.
    """
    data = np.asarray(soft, float).copy()
    pos = 0
    for f in schema.features:
        if f.kind == CONTINUOUS:
            data[pos] = min(1.0, max(0.0, data[pos]))
        pos += f.width
    return decode(data, schema)


def encode_table(rows: Sequence[RawRow], schema: DatasetSchema) -> np.ndarray:
    return np.stack([encode(r, schema).data for r in rows]) if rows else np.zeros(
        (0, schema.encoded_width)
    )


def labels_of(rows: Sequence[RawRow], schema: DatasetSchema) -> np.ndarray:
    """Target label indexes for rows that carry the target column."""
    return np.array([schema.label_index(r.get(schema.target_name)) for r in rows])


def l0_feature_diff(
    a: RawRow, b: RawRow, schema: DatasetSchema, tau_eq: float = TAU_EQ
) -> tuple[int, list[str]]:
    """Count features whose values differ; continuous compared at tau_eq
    in normalized units."""
    changed: list[str] = []
    for f in schema.features:
        va, vb = a.get(f.name), b.get(f.name)
        if f.kind == CONTINUOUS:
            if f.span > 0:
                delta = abs(float(va) - float(vb)) / f.span
            else:
                delta = 0.0 if float(va) == float(vb) else math.inf
            if delta > tau_eq:
                changed.append(f.name)
        else:
            if str(va) != str(vb):
                changed.append(f.name)
    return len(changed), changed


def row_distance(a: RawRow, b: RawRow, schema: DatasetSchema) -> float:
    """MAD-normalized Euclidean distance over continuous features plus
    simple matching distance averaged over categorical features."""
    sq = 0.0
    mismatches = 0
    n_cat = 0
    for f in schema.features:
        va, vb = a.get(f.name), b.get(f.name)
        if f.kind == CONTINUOUS:
            d = (float(va) - float(vb)) / f.mad_divisor()
            sq += d * d
        else:
            n_cat += 1
            if str(va) != str(vb):
                mismatches += 1
    dist = math.sqrt(sq)
    if n_cat:
        dist += mismatches / n_cat
    return dist


def median_absolute_deviation(values: Sequence[float]) -> float:
    arr = np.asarray(values, float)
    return float(np.median(np.abs(arr - np.median(arr))))


@dataclass(frozen=True)
class SchemaHints:
    """Optional overrides for CSV ingestion.

    target: target column name (default: last column).
    kinds: per-column kind override ("continuous"/"categorical").
    mutable: per-column mutability override (default: everything mutable).
    max_categories: distinct-value threshold for inferring categoricals.
    """

    target: str | None = None
    kinds: Mapping[str, str] = field(default_factory=dict)
    mutable: Mapping[str, bool] = field(default_factory=dict)
    max_categories: int = DEFAULT_MAX_CATEGORIES


def _parse_number(cell: str, row: int, col: str) -> float:
    try:
        x = float(cell)
    except ValueError:
        raise IngestError(
            f"row {row}, column {col!r}: {cell!r} is not a number"
        ) from None
    if not math.isfinite(x):
        raise IngestError(f"row {row}, column {col!r}: non-finite value {cell!r}")
    return x


def ingest_csv(
    path: str | Path, schema_hints: SchemaHints | None = None
) -> tuple[DatasetSchema, list[RawRow]]:
    """Read a headered CSV and infer a schema from its contents.

    Columns whose cells are not all numeric become categorical when they
    have at most ``max_categories`` distinct values; everything else is
    continuous. Returned rows include the target column value under
    ``schema.target_name``.
    """
    hints = schema_hints or SchemaHints()
    path = Path(path)
    if not path.exists():
        raise IngestError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise IngestError("duplicate column names in header")
        records = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise IngestError(
                    f"row {lineno}: expected {len(header)} cells, got {len(cells)}"
                )
            records.append([c.strip() for c in cells])
    if not records:
        raise IngestError("empty file")

    target = hints.target if hints.target is not None else header[-1]
    if target not in header:
        raise IngestError(f"missing column: target {target!r} not in header")
    for col in list(hints.kinds) + list(hints.mutable):
        if col not in header:
            raise IngestError(f"missing column: {col!r} named in hints")

    columns = {name: [rec[i] for rec in records] for i, name in enumerate(header)}

    def infer_kind(name: str) -> str:
        if name in hints.kinds:
            return hints.kinds[name]
        cells = columns[name]
        numeric = True
        for c in cells:
            try:
                if not math.isfinite(float(c)):
                    numeric = False
                    break
            except ValueError:
                numeric = False
                break
        if numeric:
            return CONTINUOUS
        return (
            CATEGORICAL
            if len(set(cells)) <= hints.max_categories
            else CONTINUOUS
        )

    features = []
    for name in header:
        if name == target:
            continue
        kind = infer_kind(name)
        mutable = hints.mutable.get(name, True)
        if kind == CATEGORICAL:
            cats = tuple(sorted(set(columns[name])))
            features.append(
                FeatureSpec(name=name, kind=CATEGORICAL, categories=cats, mutable=mutable)
            )
        else:
            vals = [
                _parse_number(c, i + 2, name) for i, c in enumerate(columns[name])
            ]
            features.append(
                FeatureSpec(
                    name=name,
                    kind=CONTINUOUS,
                    min=min(vals),
                    max=max(vals),
                    mad=median_absolute_deviation(vals),
                    mutable=mutable,
                )
            )

    labels = tuple(sorted(set(columns[target])))
    schema = DatasetSchema(
        features=tuple(features), target_name=target, target_labels=labels
    )

    rows = []
    for i, rec in enumerate(records):
        values: dict[str, str | float] = {}
        for j, name in enumerate(header):
            if name == target:
                values[name] = rec[j]
            else:
                spec = schema.feature(name)
                if spec.kind == CONTINUOUS:
                    values[name] = _parse_number(rec[j], i + 2, name)
                else:
                    values[name] = rec[j]
        rows.append(RawRow(values))
    return schema, rows


def schema_to_dict(schema: DatasetSchema) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "normalization": "minmax[0,1]",
        "encoded_width": schema.encoded_width,
        "features": [
            {
                "name": f.name,
                "kind": f.kind,
                "categories": list(f.categories),
                "min": f.min,
                "max": f.max,
                "mad": f.mad,
                "mutable": f.mutable,
            }
            for f in schema.features
        ],
        "target_name": schema.target_name,
        "target_labels": list(schema.target_labels),
    }


def schema_from_dict(doc: Mapping) -> DatasetSchema:
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {doc.get('version')!r}")
    features = tuple(
        FeatureSpec(
            name=f["name"],
            kind=f["kind"],
            categories=tuple(f.get("categories", ())),
            min=float(f.get("min", 0.0)),
            max=float(f.get("max", 0.0)),
            mad=float(f.get("mad", 0.0)),
            mutable=bool(f.get("mutable", True)),
        )
        for f in doc["features"]
    )
    schema = DatasetSchema(
        features=features,
        target_name=doc["target_name"],
        target_labels=tuple(doc["target_labels"]),
    )
    stated = doc.get("encoded_width")
    if stated is not None and stated != schema.encoded_width:
        raise SchemaError(
            f"schema file claims encoded_width {stated}, features give "
            f"{schema.encoded_width}"
        )
    return schema
