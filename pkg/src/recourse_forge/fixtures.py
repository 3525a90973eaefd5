"""Synthetic demo datasets for tests, docs, and the demo-data command."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .tabular import (
    CONTINUOUS,
    DatasetSchema,
    FeatureSpec,
    RawRow,
    median_absolute_deviation,
)


def make_blobs(
    n: int = 500,
    seed: int = 7,
    centers: tuple[tuple[float, float], tuple[float, float]] = (
        (0.3, 0.3),
        (0.7, 0.7),
    ),
    std: float = 0.08,
    feature_names: tuple[str, str] = ("f1", "f2"),
) -> tuple[DatasetSchema, list[RawRow]]:
    """Two Gaussian blobs in the unit square, linearly separable.

    Rows carry the target under ``label``; schema statistics are computed
    from the generated sample, matching what CSV ingestion would infer.
    """
    rng = np.random.default_rng(seed)
    half = n // 2
    points = np.vstack(
        [
            rng.normal(centers[0], std, size=(half, 2)),
            rng.normal(centers[1], std, size=(n - half, 2)),
        ]
    ).clip(0.0, 1.0)
    labels = np.array([0] * half + [1] * (n - half))
    order = rng.permutation(n)
    points, labels = points[order], labels[order]

    features = tuple(
        FeatureSpec(
            name=name,
            kind=CONTINUOUS,
            min=float(points[:, j].min()),
            max=float(points[:, j].max()),
            mad=median_absolute_deviation(points[:, j]),
        )
        for j, name in enumerate(feature_names)
    )
    schema = DatasetSchema(
        features=features, target_name="label", target_labels=("0", "1")
    )
    rows = [
        RawRow(
            {
                feature_names[0]: float(points[i, 0]),
                feature_names[1]: float(points[i, 1]),
                "label": str(labels[i]),
            }
        )
        for i in range(n)
    ]
    return schema, rows


def write_blobs_csv(path: str | Path, n: int = 500, seed: int = 7) -> Path:
    """Write the blobs fixture as a plain CSV (last column is the target)."""
    schema, rows = make_blobs(n=n, seed=seed)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = [f.name for f in schema.features] + [schema.target_name]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            writer.writerow(
                [
                    row.get(col) if col == schema.target_name else repr(float(row.get(col)))
                    for col in names
                ]
            )
    return path
