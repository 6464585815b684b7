"""Robust clustering cost f_z(X, C) under the k-Means, k-Median and k-Center objectives."""

from __future__ import annotations

import concurrent.futures as cf
import math
from dataclasses import dataclass

import numpy as np

from .types import CenterSet, ContractViolation, Dataset, Objective

DEFAULT_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class CostEvaluation:
    robust_cost: float
    outliers: np.ndarray
    assignment: np.ndarray
    distances: np.ndarray


def top_indices(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` largest values; equal values go to the lower index first.

    Returned in ascending index order.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    if not 0 <= count <= n:
        raise ContractViolation(f"Cannot select {count} of {n} entries.")
    if count == 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(n), -values))
    return np.sort(order[:count]).astype(np.int64)


def nearest_center(
    points: np.ndarray,
    centers: np.ndarray,
    *,
    block: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Squared distance to, and index of, the nearest center for every point.

    Distances come from explicit coordinate differences, so a point sitting on a center
    is at distance exactly 0. Equal distances resolve to the lower center index.
    """
    n = points.shape[0]
    sq = np.empty(n, dtype=np.float64)
    idx = np.empty(n, dtype=np.int64)

    def fill(start: int) -> None:
        end = min(start + block, n)
        diff = points[start:end, None, :] - centers[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        j = np.argmin(d2, axis=1)
        idx[start:end] = j
        sq[start:end] = d2[np.arange(end - start), j]

    starts = range(0, n, max(1, block))
    if workers > 1 and n > block:
        with cf.ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(fill, starts))
    else:
        for s in starts:
            fill(s)
    return sq, idx


def evaluate_cost_detailed(
    data: Dataset,
    centers: CenterSet,
    z: int,
    objective: Objective = Objective.KMEANS,
    *,
    block: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> CostEvaluation:
    if centers.k < 1:
        raise ContractViolation("evaluate_cost needs a non-empty center set.")
    if centers.centers.shape[1] != data.d:
        raise ContractViolation(
            f"Centers have dimension {centers.centers.shape[1]}, data has {data.d}."
        )
    if not 0 <= z <= data.n - 1:
        raise ContractViolation(f"z={z} must satisfy 0 <= z <= n - 1 = {data.n - 1}.")

    sq, assignment = nearest_center(data.points, centers.centers, block=block, workers=workers)
    dist = np.sqrt(sq)
    outliers = top_indices(dist, z)
    keep = np.ones(data.n, dtype=bool)
    keep[outliers] = False

    # fsum is exactly rounded, so dropping more points can never raise the cost
    if objective is Objective.KMEANS:
        cost = math.fsum(sq[keep].tolist())
    elif objective is Objective.KMEDIAN:
        cost = math.fsum(dist[keep].tolist())
    elif objective is Objective.KCENTER:
        cost = float(dist[keep].max())
    else:  # pragma: no cover
        raise ContractViolation(f"Unknown objective {objective!r}.")

    assignment = assignment.copy()
    assignment[outliers] = -1
    return CostEvaluation(robust_cost=cost, outliers=outliers, assignment=assignment, distances=dist)


def evaluate_cost(
    data: Dataset,
    centers: CenterSet,
    z: int,
    objective: Objective = Objective.KMEANS,
    *,
    block: int = DEFAULT_BLOCK,
    workers: int = 1,
) -> tuple[float, np.ndarray]:
    """Cost of `data` under `centers` after dropping the z points farthest from them."""
    ev = evaluate_cost_detailed(data, centers, z, objective, block=block, workers=workers)
    return ev.robust_cost, ev.outliers
