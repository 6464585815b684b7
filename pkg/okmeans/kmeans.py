"""Weighted k-means++ seeding and Lloyd refinement: the standard solver run after outlier removal."""

from __future__ import annotations

import concurrent.futures as cf
import math
from dataclasses import dataclass, field

import numpy as np

from .cost import nearest_center
from .types import CenterSet, ContractViolation, Dataset

# Lloyd cost may wobble by rounding; anything beyond this is a bug
_MONOTONE_SLACK = 1e-9


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    k: int = 2
    max_iters: int = 100
    rel_tol: float = 1e-6
    restarts: int = 3
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ContractViolation(f"SolverConfig.k={self.k} must be >= 1.")
        if self.max_iters < 1:
            raise ContractViolation(f"SolverConfig.max_iters={self.max_iters} must be >= 1.")
        if self.rel_tol < 0:
            raise ContractViolation(f"SolverConfig.rel_tol={self.rel_tol} must be >= 0.")
        if self.restarts < 1:
            raise ContractViolation(f"SolverConfig.restarts={self.restarts} must be >= 1.")


@dataclass(frozen=True, eq=False)
class LloydResult:
    centers: CenterSet
    cost: float
    iters: int
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class KMeansSolution:
    centers: CenterSet
    cost: float


def _weights(data: Dataset, weights: np.ndarray | None) -> np.ndarray:
    if weights is None:
        return np.ones(data.n, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != data.n:
        raise ContractViolation(f"{w.shape[0]} weights for {data.n} points.")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ContractViolation("weights must be finite and nonnegative.")
    if not w.sum() > 0:
        raise ContractViolation("weights must have a positive sum.")
    return w


def seed_kmeanspp(
    data: Dataset,
    weights: np.ndarray | None,
    k: int,
    seed: int | np.random.SeedSequence,
) -> CenterSet:
    """Weighted k-means++: first center with probability proportional to weight, later ones
    proportional to weight * d(x, chosen)^2."""
    w = _weights(data, weights)
    if not 1 <= k <= data.n:
        raise ContractViolation(f"k={k} must satisfy 1 <= k <= n={data.n}.")
    if k > int(np.count_nonzero(w)):
        raise ContractViolation(f"k={k} exceeds the number of positively weighted points.")
    rng = np.random.default_rng(seed)
    X = data.points
    chosen = [int(rng.choice(data.n, p=w / w.sum()))]
    d2 = np.einsum("ij,ij->i", X - X[chosen[0]], X - X[chosen[0]])
    for _ in range(1, k):
        mass = w * d2
        total = mass.sum()
        if total > 0:
            nxt = int(rng.choice(data.n, p=mass / total))
        else:
            # every weighted point already coincides with a center
            free = w.copy()
            free[chosen] = 0.0
            nxt = int(rng.choice(data.n, p=free / free.sum()))
        chosen.append(nxt)
        diff = X - X[nxt]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return CenterSet(centers=X[chosen].copy())


def _weighted_cost(w: np.ndarray, sq: np.ndarray) -> float:
    return math.fsum((w * sq).tolist())


def lloyd(
    data: Dataset,
    weights: np.ndarray | None,
    init: CenterSet,
    cfg: SolverConfig,
) -> LloydResult:
    w = _weights(data, weights)
    if init.k != cfg.k:
        raise ContractViolation(f"init has {init.k} centers, config asks for k={cfg.k}.")
    if init.centers.shape[1] != data.d:
        raise ContractViolation("init centers and data differ in dimension.")
    X = data.points
    centers = init.centers.copy()
    history: list[float] = []
    prev = math.inf
    iters = 0
    converged = False
    for iters in range(1, cfg.max_iters + 1):
        sq, labels = nearest_center(X, centers)
        cost = _weighted_cost(w, sq)
        if cost > prev + _MONOTONE_SLACK * max(1.0, prev):
            raise SolverError(f"Lloyd cost rose from {prev!r} to {cost!r} at iteration {iters}.")
        history.append(cost)
        if cost == 0.0 or (math.isfinite(prev) and prev - cost <= cfg.rel_tol * prev):
            converged = True
            break
        prev = cost
        centers = _update_centers(X, w, labels, sq, centers)

    if not converged:
        sq, _ = nearest_center(X, centers)
        cost = _weighted_cost(w, sq)
        history.append(cost)
    return LloydResult(centers=CenterSet(centers=centers), cost=cost, iters=iters, history=history)


def _update_centers(
    X: np.ndarray,
    w: np.ndarray,
    labels: np.ndarray,
    sq: np.ndarray,
    centers: np.ndarray,
) -> np.ndarray:
    k, d = centers.shape
    mass = np.bincount(labels, weights=w, minlength=k)
    sums = np.zeros((k, d))
    np.add.at(sums, labels, X * w[:, None])
    out = centers.copy()
    filled = mass > 0
    out[filled] = sums[filled] / mass[filled, None]

    empty = np.flatnonzero(~filled)
    if empty.size:
        # reseed each empty cluster at the weighted point currently farthest from its center
        far = np.where(w > 0, sq, -1.0)
        for j in empty:
            i = int(np.argmax(far))
            out[j] = X[i]
            far[i] = -1.0
    return out


def _chain(data: Dataset, weights: np.ndarray | None, cfg: SolverConfig, ss: np.random.SeedSequence) -> LloydResult:
    init = seed_kmeanspp(data, weights, cfg.k, ss)
    return lloyd(data, weights, init, cfg)


def solve_kmeans(data: Dataset, weights: np.ndarray | None, cfg: SolverConfig) -> KMeansSolution:
    """Best of `cfg.restarts` independent k-means++ + Lloyd chains.

    Chain i draws from SeedSequence(cfg.seed).spawn(...)[i], so adding restarts only adds chains.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    if cfg.workers > 1 and cfg.restarts > 1:
        with cf.ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            runs = list(ex.map(lambda ss: _chain(data, weights, cfg, ss), streams))
    else:
        runs = [_chain(data, weights, cfg, ss) for ss in streams]
    best = min(range(len(runs)), key=lambda i: (runs[i].cost, i))
    return KMeansSolution(centers=runs[best].centers, cost=runs[best].cost)
