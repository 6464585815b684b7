"""Per-point outlier scores from a NeighborTable.

All rank arithmetic lives here and uses self-inclusive ranks (rank 1 is the point itself).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np

from .cost import top_indices
from .knn import NeighborTable
from .types import ContractViolation

_FLOOR_EPS = 1e-9


class ScoreRule(str, Enum):
    VANILLA_RADIUS = "vanilla_radius"
    MIDRANGE_SUM = "midrange_sum"
    INTERVAL_SUM = "interval_sum"
    CONSTANT_K = "constant_k"


@dataclass(frozen=True, eq=False)
class ScoreVector:
    scores: np.ndarray
    rule: ScoreRule
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.scores.shape[0])


def _floor(x: float) -> int:
    # (c + 1) * z / 2 for c = 3 can come out as 1.9999999999999998
    return math.floor(x + _FLOOR_EPS)


def vanilla_rank(z: int, c: float) -> int:
    """floor((c + 1) z / 2): the neighbor rank whose distance is r_x."""
    return _floor((c + 1.0) * z / 2.0)


def midrange_ranks(z: int, c: float) -> tuple[int, int]:
    """(z + 1, floor(c z)): the inclusive rank range summed into s_x."""
    return z + 1, _floor(c * z)


def constant_k_rank(K: int) -> int:
    return K + 1


def _check_c(c: float) -> None:
    if not c > 1:
        raise ContractViolation(f"c={c} must be > 1.")


def _require_width(table: NeighborTable, rank: int) -> None:
    if table.K < rank:
        raise ContractViolation(f"NeighborTable has K={table.K}; this score needs K >= {rank}.")


def score_vanilla(table: NeighborTable, z: int, c: float) -> ScoreVector:
    _check_c(c)
    if z < 1:
        raise ContractViolation(f"z={z} must be >= 1.")
    rank = vanilla_rank(z, c)
    if rank < 1:
        raise ContractViolation(f"floor((c+1)z/2) = {rank} is not a valid rank.")
    _require_width(table, rank)
    return ScoreVector(
        scores=table.column(rank).copy(),
        rule=ScoreRule.VANILLA_RADIUS,
        params={"z": z, "c": c, "rank": rank},
    )


def score_interval_sum(table: NeighborTable, lo: int, hi: int) -> ScoreVector:
    """Sum of distances to the neighbors ranked lo..hi inclusive."""
    if not 1 <= lo <= hi:
        raise ContractViolation(f"rank interval [{lo}, {hi}] is empty or starts below 1.")
    _require_width(table, hi)
    scores = table.dists[:, lo - 1 : hi].sum(axis=1)
    return ScoreVector(scores=scores, rule=ScoreRule.INTERVAL_SUM, params={"rank_lo": lo, "rank_hi": hi})


def score_midrange_sum(table: NeighborTable, z: int, c: float) -> ScoreVector:
    _check_c(c)
    if z < 1:
        raise ContractViolation(f"z={z} must be >= 1.")
    lo, hi = midrange_ranks(z, c)
    if hi < lo:
        raise ContractViolation(f"floor(c z) = {hi} is below z + 1 = {lo}; increase c or z.")
    inner = score_interval_sum(table, lo, hi)
    return ScoreVector(
        scores=inner.scores,
        rule=ScoreRule.MIDRANGE_SUM,
        params={"z": z, "c": c, "rank_lo": lo, "rank_hi": hi},
    )


def score_constant_k(table: NeighborTable, K: int) -> ScoreVector:
    """Classic KNN score: distance to the K-th nearest other point."""
    if K < 1:
        raise ContractViolation(f"K={K} must be >= 1.")
    rank = constant_k_rank(K)
    _require_width(table, rank)
    return ScoreVector(
        scores=table.column(rank).copy(),
        rule=ScoreRule.CONSTANT_K,
        params={"K": K, "rank": rank},
    )


def select_outliers(scores: ScoreVector, z: int) -> np.ndarray:
    if not 0 <= z <= scores.n:
        raise ContractViolation(f"z={z} must satisfy 0 <= z <= n={scores.n}.")
    return top_indices(scores.scores, z)


def export_scores_csv(scores: ScoreVector, selected: np.ndarray, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    flags = np.zeros(scores.n, dtype=bool)
    flags[np.asarray(selected, dtype=np.int64)] = True
    with p.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", "score", "selected"])
        for i in range(scores.n):
            w.writerow([i, repr(float(scores.scores[i])), int(flags[i])])
    return p
