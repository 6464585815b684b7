from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class ContractViolation(ValueError):
    """An operation was called with inputs outside its preconditions."""


class Objective(str, Enum):
    KMEANS = "kmeans"
    KMEDIAN = "kmedian"
    KCENTER = "kcenter"


@dataclass(frozen=True)
class ErrorInfo:
    exc_type: str
    message: str
    traceback: str


@dataclass(frozen=True, eq=False)
class Dataset:
    """n points in d dimensions, with optional class labels and ground-truth outlier mask."""

    points: np.ndarray
    labels: np.ndarray | None = None
    true_outliers: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ContractViolation(f"Dataset '{self.name}': points must be a non-empty n x d array.")
        if not np.all(np.isfinite(pts)):
            raise ContractViolation(f"Dataset '{self.name}': every coordinate must be finite.")
        object.__setattr__(self, "points", pts)
        n = pts.shape[0]
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != n:
                raise ContractViolation(
                    f"Dataset '{self.name}': {labels.shape[0]} labels for {n} points."
                )
            object.__setattr__(self, "labels", labels)
        if self.true_outliers is not None:
            mask = np.asarray(self.true_outliers, dtype=bool).reshape(-1)
            if mask.shape[0] != n:
                raise ContractViolation(
                    f"Dataset '{self.name}': outlier mask has length {mask.shape[0]}, expected {n}."
                )
            object.__setattr__(self, "true_outliers", mask)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    @property
    def n_true_outliers(self) -> int | None:
        if self.true_outliers is None:
            return None
        return int(self.true_outliers.sum())

    def subset(self, indices: np.ndarray, name: str | None = None) -> Dataset:
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            points=self.points[idx],
            labels=None if self.labels is None else self.labels[idx],
            true_outliers=None if self.true_outliers is None else self.true_outliers[idx],
            name=name or self.name,
        )


@dataclass(frozen=True, eq=False)
class RobustInstance:
    data: Dataset
    k: int
    z: int

    def __post_init__(self) -> None:
        n = self.data.n
        if not 1 <= self.k <= n:
            raise ContractViolation(f"k={self.k} must satisfy 1 <= k <= n={n}.")
        if not 0 <= self.z <= n - self.k:
            raise ContractViolation(
                f"z={self.z} must satisfy 0 <= z <= n - k = {n - self.k} (at least k inliers remain)."
            )


@dataclass(frozen=True, eq=False)
class CenterSet:
    centers: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.centers, dtype=np.float64)
        if c.ndim == 1:
            c = c.reshape(-1, 1)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ContractViolation("CenterSet needs at least one center.")
        if not np.all(np.isfinite(c)):
            raise ContractViolation("CenterSet coordinates must be finite.")
        object.__setattr__(self, "centers", c)

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    """Centers plus the robust evaluation of them on the evaluated dataset.

    ``outliers`` is Z(C), the z points farthest from ``centers``. ``removed`` is the set O a
    method discarded before solving (empty for methods without explicit removal).
    ``assignment`` has one entry per point, -1 for points in ``outliers``.
    """

    centers: CenterSet
    outliers: np.ndarray
    removed: np.ndarray
    assignment: np.ndarray
    robust_cost: float
    objective: Objective
    elapsed: float
    seed: int
    method: str
    removal_cost: float | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "objective": self.objective.value,
            "robust_cost": float(self.robust_cost),
            "removal_cost": None if self.removal_cost is None else float(self.removal_cost),
            "elapsed": float(self.elapsed),
            "seed": int(self.seed),
            "centers": self.centers.centers.tolist(),
            "outliers": [int(i) for i in self.outliers],
            "removed": [int(i) for i in self.removed],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)
