"""Exhaustive ground truth for tiny robust clustering instances.

k-Means parts use their centroids. k-Median and k-Center restrict centers to data points:
the best data point of each part, which is the same optimum as choosing k remaining points
as centers and assigning every point to its nearest one (that is how it is enumerated).
"""

from __future__ import annotations

import concurrent.futures as cf
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import numpy as np

from .datasets import generate_planted
from .kmeans import SolverConfig
from .robust import run_okmeans, run_okmeans2
from .types import CenterSet, ContractViolation, Dataset, Objective, RobustInstance
from .utils import EventLog

MAX_ENUMERATION = 10**8


class OracleSizeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OracleResult:
    opt_cost: float
    opt_outliers: np.ndarray
    opt_partition: np.ndarray
    objective: Objective
    opt_centers: CenterSet
    metadata: dict[str, Any] = field(default_factory=dict)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.opt_partition, minlength=self.opt_centers.k)

    def to_dict(self) -> dict[str, Any]:
        return {
            "opt_cost": float(self.opt_cost),
            "opt_outliers": [int(i) for i in self.opt_outliers],
            "opt_partition": [int(i) for i in self.opt_partition],
            "objective": self.objective.value,
            "opt_centers": self.opt_centers.centers.tolist(),
            "metadata": self.metadata,
        }


def enumeration_bound(n: int, z: int, k: int) -> int:
    return math.comb(n, z) * k ** (n - z)


@lru_cache(maxsize=64)
def _labelings(m: int, k: int) -> np.ndarray:
    """Every canonical labeling of m points into at most k parts: point 0 is in part 0 and
    each new label is at most one above the largest used so far."""
    rows: list[tuple[int, ...]] = [(0,)]
    for _ in range(1, m):
        grown = []
        for r in rows:
            top = max(r)
            for lab in range(min(top + 2, k)):
                grown.append((*r, lab))
        rows = grown
    out = np.asarray(rows, dtype=np.int64).reshape(len(rows), m)
    out.setflags(write=False)
    return out


def _centroids(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    centers = np.repeat(X[:1], k, axis=0).astype(np.float64)
    for j in range(k):
        part = X[labels == j]
        if part.shape[0]:
            centers[j] = part.mean(axis=0)
    return centers


def _kmeans_cost(X: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    diff = X - centers[labels]
    return math.fsum(np.einsum("ij,ij->i", diff, diff).tolist())


def _best_kmeans(X: np.ndarray, k: int) -> tuple[float, np.ndarray, np.ndarray]:
    m = X.shape[0]
    if m <= k:
        labels = np.arange(m, dtype=np.int64)
        centers = np.vstack([X, np.repeat(X[:1], k - m, axis=0)])
        return 0.0, labels, centers
    Xc = X - X.mean(axis=0)
    sq = np.einsum("ij,ij->i", Xc, Xc)
    L = _labelings(m, k)
    costs = np.zeros(L.shape[0])
    for j in range(k):
        M = (L == j).astype(np.float64)
        cnt = M.sum(axis=1)
        S = M @ Xc
        costs += M @ sq - np.einsum("ij,ij->i", S, S) / np.maximum(cnt, 1.0)
    labels = L[int(np.argmin(costs))].copy()
    centers = _centroids(X, labels, k)
    return _kmeans_cost(X, labels, centers), labels, centers


def _best_discrete(X: np.ndarray, k: int, objective: Objective) -> tuple[float, np.ndarray, np.ndarray]:
    m = X.shape[0]
    if m <= k:
        centers = np.vstack([X, np.repeat(X[:1], k - m, axis=0)])
        return 0.0, np.arange(m, dtype=np.int64), centers
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    combos = np.asarray(list(itertools.combinations(range(m), k)), dtype=np.int64)
    near = D[:, combos]  # (m, n_combos, k)
    best_d = near.min(axis=2)
    costs = best_d.sum(axis=0) if objective is Objective.KMEDIAN else best_d.max(axis=0)
    b = int(np.argmin(costs))
    labels = np.argmin(near[:, b, :], axis=1).astype(np.int64)
    chosen = combos[b]
    dist = D[np.arange(m), chosen[labels]]
    cost = math.fsum(dist.tolist()) if objective is Objective.KMEDIAN else float(dist.max())
    return cost, labels, X[chosen].copy()


def _best_partition(X: np.ndarray, k: int, objective: Objective) -> tuple[float, np.ndarray, np.ndarray]:
    if objective is Objective.KMEANS:
        return _best_kmeans(X, k)
    return _best_discrete(X, k, objective)


def brute_force_robust(
    instance: RobustInstance,
    objective: Objective = Objective.KMEANS,
    *,
    workers: int = 1,
) -> OracleResult:
    """Exact optimum over every z-subset of outliers and every partition of the rest.

    Ties keep the lexicographically first outlier set.
    """
    n, k, z = instance.data.n, instance.k, instance.z
    bound = enumeration_bound(n, z, k)
    if bound > MAX_ENUMERATION:
        raise OracleSizeError(
            f"C({n},{z}) * {k}^{n - z} = {bound} exceeds the oracle limit of {MAX_ENUMERATION}."
        )
    X = instance.data.points
    subsets = list(itertools.combinations(range(n), z))

    def solve(outl: tuple[int, ...]) -> tuple[float, np.ndarray, np.ndarray]:
        keep = np.ones(n, dtype=bool)
        keep[list(outl)] = False
        return _best_partition(X[keep], k, objective)

    if workers > 1 and len(subsets) > 1:
        with cf.ThreadPoolExecutor(max_workers=workers) as ex:
            solved = list(ex.map(solve, subsets))
    else:
        solved = [solve(s) for s in subsets]

    best = min(range(len(subsets)), key=lambda i: (solved[i][0], i))
    cost, labels, centers = solved[best]
    return OracleResult(
        opt_cost=cost,
        opt_outliers=np.asarray(subsets[best], dtype=np.int64),
        opt_partition=labels,
        objective=objective,
        opt_centers=CenterSet(centers=centers),
        metadata={"centers": "centroids" if objective is Objective.KMEANS else "data points"},
    )


def exact_kmeans(data: Dataset, k: int) -> OracleResult:
    """Optimal standard k-Means (no outliers)."""
    return brute_force_robust(RobustInstance(data=data, k=k, z=0), Objective.KMEANS)


def exact_kmeans_solver(data: Dataset, cfg: SolverConfig) -> CenterSet:
    """Drop-in exact sub-solver for the robust pipelines (beta = 1)."""
    return exact_kmeans(data, cfg.k).opt_centers


def kcenter_reduction_ratio(instance: RobustInstance, removed: np.ndarray) -> float:
    """Optimal k-Center cost on X minus `removed` over the optimal robust k-Center cost."""
    opt = brute_force_robust(instance, Objective.KCENTER).opt_cost
    keep = np.ones(instance.data.n, dtype=bool)
    keep[np.asarray(removed, dtype=np.int64)] = False
    rest = RobustInstance(data=instance.data.subset(np.flatnonzero(keep)), k=instance.k, z=0)
    reduced = brute_force_robust(rest, Objective.KCENTER).opt_cost
    return _ratio(reduced, opt)


def _ratio(achieved: float, opt: float) -> float:
    if opt > 0:
        return achieved / opt
    return 1.0 if achieved <= 1e-12 else math.inf


@dataclass(frozen=True)
class SweepFamily:
    """Planted instances: k blobs of ceil(c * z) points each plus z outliers."""

    k: int = 2
    z_values: tuple[int, ...] = (1, 2)
    d: int = 2
    spread: float = 1.0
    separation: tuple[float, float] = (2.5, 6.0)
    outlier_distance: tuple[float, float] = (1.0, 8.0)

    def __post_init__(self) -> None:
        if not self.z_values or min(self.z_values) < 1:
            raise ContractViolation("SweepFamily.z_values must be positive.")
        if self.separation[0] <= self.spread:
            raise ContractViolation("SweepFamily.separation must exceed spread.")


@dataclass(frozen=True)
class SweepResult:
    max_ratio_okmeans: float
    max_ratio_okmeans2: float
    trials: int
    resamples: int
    ratios_okmeans: list[float] = field(default_factory=list)
    ratios_okmeans2: list[float] = field(default_factory=list)


def ratio_sweep(
    family: SweepFamily,
    trials: int,
    c: float,
    seed: int,
    *,
    log: EventLog | None = None,
    max_resamples: int | None = None,
) -> SweepResult:
    """Worst achieved/optimal robust k-Means ratio of both pipelines with an exact sub-solver.

    Instances whose optimal clusters are smaller than c*z are rejected and redrawn.
    """
    if trials < 1:
        raise ContractViolation("trials must be >= 1.")
    if not c > 1:
        raise ContractViolation(f"c={c} must be > 1.")
    log = log or EventLog(emit_logs=False)
    rng = np.random.default_rng(seed)
    limit = max_resamples if max_resamples is not None else 50 * trials
    r1: list[float] = []
    r2: list[float] = []
    resamples = 0
    while len(r1) < trials:
        z = int(rng.choice(family.z_values))
        size = math.ceil(c * z - 1e-9)
        inst = generate_planted(
            family.k,
            size,
            z,
            float(rng.uniform(*family.separation)),
            family.spread,
            family.d,
            int(rng.integers(2**31)),
            outlier_distance=float(rng.uniform(*family.outlier_distance)),
        )
        opt = brute_force_robust(inst, Objective.KMEANS)
        if opt.cluster_sizes().min() < c * z - 1e-9:
            resamples += 1
            log("sweep_resample", trial=len(r1), z=z, sizes=opt.cluster_sizes().tolist())
            if resamples > limit:
                raise ContractViolation(f"Gave up after {resamples} rejected instances.")
            continue
        cfg = SolverConfig(k=family.k)
        a1 = run_okmeans(inst, c, cfg, solver=exact_kmeans_solver).robust_cost
        a2 = run_okmeans2(inst, c, cfg, solver=exact_kmeans_solver).robust_cost
        r1.append(_ratio(a1, opt.opt_cost))
        r2.append(_ratio(a2, opt.opt_cost))
        log("sweep_trial", trial=len(r1), z=z, n=inst.data.n, ratio_okmeans=r1[-1], ratio_okmeans2=r2[-1])
    return SweepResult(
        max_ratio_okmeans=max(r1),
        max_ratio_okmeans2=max(r2),
        trials=trials,
        resamples=resamples,
        ratios_okmeans=r1,
        ratios_okmeans2=r2,
    )
