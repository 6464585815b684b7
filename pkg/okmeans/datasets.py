from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from .types import ContractViolation, Dataset, RobustInstance


class DatasetParseError(ValueError):
    pass


def load_csv(
    path: str | Path,
    has_labels: bool = False,
    *,
    header: bool = False,
    has_mask: bool = False,
    name: str | None = None,
) -> Dataset:
    """Read a comma-separated numeric file into a Dataset.

    Trailing columns, right to left: the 0/1 outlier mask (if `has_mask`), then the integer
    label (if `has_labels`). Everything before them is a coordinate.
    """
    p = Path(path)
    with p.open(newline="", encoding="utf-8") as f:
        rows = [row for row in csv.reader(f)]
    return parse_rows(rows, has_labels=has_labels, header=header, has_mask=has_mask, name=name or p.stem)


def parse_rows(
    rows: Sequence[Sequence[str]],
    *,
    has_labels: bool = False,
    header: bool = False,
    has_mask: bool = False,
    name: str = "dataset",
) -> Dataset:
    first_row = 2 if header else 1
    body = [r for r in (rows[1:] if header else rows)]
    # blank trailing lines are common in hand-written files
    while body and not any(cell.strip() for cell in body[-1]):
        body.pop()
    if not body:
        raise DatasetParseError(f"'{name}': file has no data rows.")

    arity = len(body[0])
    extra = int(has_labels) + int(has_mask)
    if arity - extra < 1:
        raise DatasetParseError(f"'{name}': row {first_row} has no coordinate columns.")

    points = np.empty((len(body), arity - extra), dtype=np.float64)
    labels = np.empty(len(body), dtype=np.int64) if has_labels else None
    mask = np.empty(len(body), dtype=bool) if has_mask else None
    d = arity - extra
    for i, row in enumerate(body):
        row_no = first_row + i
        if len(row) != arity:
            raise DatasetParseError(
                f"'{name}': row {row_no} has {len(row)} columns, expected {arity}."
            )
        for j in range(d):
            points[i, j] = _parse_real(name, row_no, j + 1, row[j])
        if labels is not None:
            labels[i] = _parse_integral(name, row_no, d + 1, row[d])
        if mask is not None:
            col = arity
            flag = _parse_integral(name, row_no, col, row[col - 1])
            if flag not in (0, 1):
                raise DatasetParseError(f"'{name}': row {row_no} col {col}: mask must be 0 or 1.")
            mask[i] = bool(flag)
    return Dataset(points=points, labels=labels, true_outliers=mask, name=name)


def _parse_real(name: str, row: int, col: int, cell: str) -> float:
    try:
        value = float(cell.strip())
    except ValueError as e:
        raise DatasetParseError(f"'{name}': row {row} col {col}: '{cell}' is not a number.") from e
    if not math.isfinite(value):
        raise DatasetParseError(f"'{name}': row {row} col {col}: '{cell}' is not finite.")
    return value


def _parse_integral(name: str, row: int, col: int, cell: str) -> int:
    value = _parse_real(name, row, col, cell)
    if value != int(value):
        raise DatasetParseError(f"'{name}': row {row} col {col}: '{cell}' is not an integer.")
    return int(value)


def export_csv(data: Dataset, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    head = [f"x{j}" for j in range(data.d)]
    if data.labels is not None:
        head.append("label")
    if data.true_outliers is not None:
        head.append("outlier")
    with p.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(head)
        for i in range(data.n):
            row: list[str] = [repr(float(v)) for v in data.points[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            if data.true_outliers is not None:
                row.append("1" if data.true_outliers[i] else "0")
            w.writerow(row)
    return p


def normalize_zscore(data: Dataset) -> Dataset:
    """Shift and scale every column to mean 0 and population standard deviation 1.

    Zero-variance columns become all zeros.
    """
    if data.n < 2:
        raise ContractViolation(f"normalize_zscore needs n >= 2, got n={data.n}.")
    mean = data.points.mean(axis=0)
    std = data.points.std(axis=0)
    # a constant column can still get a rounding-sized std from its mean
    varies = np.ptp(data.points, axis=0) > 0
    safe = np.where(varies, std, 1.0)
    out = np.where(varies, (data.points - mean) / safe, 0.0)
    return Dataset(points=out, labels=data.labels, true_outliers=data.true_outliers, name=data.name)


def inject_outliers(data: Dataset, fraction: float, xi: float, seed: int) -> Dataset:
    """Append round(fraction * n) (at least 1) points drawn uniformly from [-xi, xi]^d.

    Existing rows are untouched; the mask marks exactly the appended rows and appended
    points get label -1 when labels exist.
    """
    if not 0 < fraction < 1:
        raise ContractViolation(f"fraction={fraction} must lie in (0, 1).")
    if not xi > 0:
        raise ContractViolation(f"xi={xi} must be > 0.")
    count = max(1, int(round(fraction * data.n)))
    rng = np.random.default_rng(seed)
    fresh = rng.uniform(-xi, xi, size=(count, data.d))
    points = np.vstack([data.points, fresh])
    old_mask = data.true_outliers if data.true_outliers is not None else np.zeros(data.n, dtype=bool)
    mask = np.concatenate([old_mask, np.ones(count, dtype=bool)])
    labels = None
    if data.labels is not None:
        labels = np.concatenate([data.labels, np.full(count, -1, dtype=np.int64)])
    return Dataset(points=points, labels=labels, true_outliers=mask, name=f"{data.name}-{xi:g}")


def mark_label_outliers(data: Dataset, outlier_classes: Iterable[int]) -> Dataset:
    if data.labels is None:
        raise ContractViolation(f"Dataset '{data.name}' has no labels to derive outliers from.")
    classes = sorted({int(c) for c in outlier_classes})
    mask = np.isin(data.labels, np.asarray(classes, dtype=np.int64))
    return Dataset(points=data.points, labels=data.labels, true_outliers=mask, name=data.name)


def smallest_classes(data: Dataset, count: int) -> list[int]:
    """The `count` labels with the fewest points; equal sizes go to the lower label."""
    if data.labels is None:
        raise ContractViolation(f"Dataset '{data.name}' has no labels.")
    values, sizes = np.unique(data.labels, return_counts=True)
    order = np.lexsort((values, sizes))
    return [int(v) for v in values[order[:count]]]


def generate_planted(
    k: int,
    cluster_size: int,
    z: int,
    separation: float,
    spread: float,
    d: int,
    seed: int,
    *,
    outlier_distance: float | None = None,
) -> RobustInstance:
    """k Gaussian blobs plus z far-away planted outliers.

    Blob centers sit on consecutive multiples of `separation` along the first axis (with
    jitter in the other axes), so they are pairwise at least `separation` apart. Outliers are
    placed at radius in [R, 2R) from the blob-center centroid in random directions, with
    R = `outlier_distance` (default 10 * (k * separation + spread)). Outliers come last.
    """
    if k < 1 or cluster_size < 1 or z < 0 or d < 1:
        raise ContractViolation("generate_planted needs k >= 1, cluster_size >= 1, z >= 0, d >= 1.")
    if not separation > spread:
        raise ContractViolation(f"separation={separation} must exceed spread={spread}.")
    rng = np.random.default_rng(seed)
    centers = np.zeros((k, d))
    centers[:, 0] = separation * np.arange(k)
    if d > 1:
        centers[:, 1:] = rng.uniform(-0.5 * separation, 0.5 * separation, size=(k, d - 1))

    blobs = [c + spread * rng.standard_normal((cluster_size, d)) for c in centers]
    radius = outlier_distance if outlier_distance is not None else 10.0 * (k * separation + spread)
    directions = rng.standard_normal((z, d))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    directions = directions / np.where(norms > 0, norms, 1.0)
    far = centers.mean(axis=0) + directions * (radius * (1.0 + rng.uniform(0.0, 1.0, size=(z, 1))))

    points = np.vstack([*blobs, far]) if z else np.vstack(blobs)
    labels = np.concatenate([np.repeat(np.arange(k), cluster_size), np.full(z, -1)])
    mask = np.concatenate([np.zeros(k * cluster_size, dtype=bool), np.ones(z, dtype=bool)])
    data = Dataset(points=points, labels=labels, true_outliers=mask, name=f"planted-k{k}-z{z}")
    return RobustInstance(data=data, k=k, z=z)


def generate_labeled_blobs(
    class_sizes: Sequence[int],
    d: int,
    separation: float,
    spread: float,
    seed: int,
    *,
    name: str = "blobs",
) -> Dataset:
    """One Gaussian blob per class, with random class centers in [0, separation * C]^d."""
    if not class_sizes or any(s < 1 for s in class_sizes):
        raise ContractViolation("class_sizes must be a non-empty list of positive sizes.")
    rng = np.random.default_rng(seed)
    n_classes = len(class_sizes)
    centers = rng.uniform(0.0, separation * n_classes, size=(n_classes, d))
    parts = [c + spread * rng.standard_normal((s, d)) for c, s in zip(centers, class_sizes)]
    labels = np.concatenate([np.full(s, j, dtype=np.int64) for j, s in enumerate(class_sizes)])
    return Dataset(points=np.vstack(parts), labels=labels, name=name)
