"""Robust clustering pipelines: remove z points by a KNN score, then solve standard k-means.

Every pipeline finishes by recomputing the outlier set against the returned centers, which
can only lower the cost.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Protocol

import numpy as np

from .cost import evaluate_cost, evaluate_cost_detailed
from .kmeans import SolverConfig, solve_kmeans
from .knn import knn_table
from .scoring import (
    ScoreVector,
    constant_k_rank,
    midrange_ranks,
    score_constant_k,
    score_midrange_sum,
    score_vanilla,
    select_outliers,
    vanilla_rank,
)
from .types import CenterSet, ClusteringResult, ContractViolation, Dataset, Objective, RobustInstance
from .utils import import_func, now_ts

SubSolver = Callable[[Dataset, SolverConfig], CenterSet]


class MethodKind(str, Enum):
    OKMEANS = "okmeans"
    OKMEANS2 = "okmeans2"
    CONSTANT_K = "constant_k"
    KMEANSPP = "kmeanspp"
    EXTERNAL = "external"


@dataclass(frozen=True)
class Method:
    kind: MethodKind
    c: float | None = None
    K: int | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    baseline: str | None = None
    name: str | None = None

    def __post_init__(self) -> None:
        if self.kind in (MethodKind.OKMEANS, MethodKind.OKMEANS2) and (self.c is None or not self.c > 1):
            raise ContractViolation(f"{self.kind.value} needs c > 1, got c={self.c}.")
        if self.kind is MethodKind.CONSTANT_K and (self.K is None or self.K < 1):
            raise ContractViolation(f"constant_k needs K >= 1, got K={self.K}.")
        if self.kind is MethodKind.EXTERNAL and not self.baseline:
            raise ContractViolation("external methods need a baseline name.")

    @property
    def label(self) -> str:
        if self.kind is MethodKind.OKMEANS:
            return f"OKMeans(c={self.c:g})"
        if self.kind is MethodKind.OKMEANS2:
            return f"OKMeans2(c={self.c:g})"
        if self.kind is MethodKind.CONSTANT_K:
            return f"ConstantK(K={self.K})"
        if self.kind is MethodKind.KMEANSPP:
            return "KMeans++"
        return self.name or str(self.baseline)

    def with_seed(self, seed: int) -> Method:
        return replace(self, solver=replace(self.solver, seed=seed))


@dataclass(frozen=True)
class CoresetSpec:
    size: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ContractViolation(f"coreset size {self.size} must be >= 1.")


class Baseline(Protocol):
    def __call__(self, instance: RobustInstance, cfg: SolverConfig) -> ClusteringResult: ...


_BASELINES: dict[str, Baseline] = {}


def register_baseline(name: str, fn: Baseline) -> None:
    _BASELINES[name] = fn


def get_baseline(name: str) -> Baseline:
    if name in _BASELINES:
        return _BASELINES[name]
    if ":" in name:
        fn: Baseline = import_func(name)
        return fn
    raise ContractViolation(f"Unknown baseline '{name}'. Register it or use 'module:function'.")


def kmeans_subsolver(data: Dataset, cfg: SolverConfig) -> CenterSet:
    return solve_kmeans(data, None, cfg).centers


def _solver_meta(cfg: SolverConfig) -> dict[str, Any]:
    return {
        "max_iters": cfg.max_iters,
        "rel_tol": cfg.rel_tol,
        "restarts": cfg.restarts,
    }


def _finish(
    instance: RobustInstance,
    centers: CenterSet,
    removed: np.ndarray,
    cfg: SolverConfig,
    label: str,
    started: float,
    metadata: dict[str, Any],
) -> ClusteringResult:
    ev = evaluate_cost_detailed(instance.data, centers, instance.z, Objective.KMEANS)
    keep = np.ones(instance.data.n, dtype=bool)
    keep[removed] = False
    removal_cost, _ = evaluate_cost(instance.data.subset(np.flatnonzero(keep)), centers, 0)
    return ClusteringResult(
        centers=centers,
        outliers=ev.outliers,
        removed=np.asarray(removed, dtype=np.int64),
        assignment=ev.assignment,
        robust_cost=ev.robust_cost,
        objective=Objective.KMEANS,
        elapsed=max(0.0, now_ts() - started),
        seed=cfg.seed,
        method=label,
        removal_cost=removal_cost,
        metadata={**metadata, "solver": _solver_meta(cfg)},
    )


def _run_scored(
    instance: RobustInstance,
    rank_needed: int,
    score: Callable[..., ScoreVector],
    cfg: SolverConfig,
    solver: SubSolver | None,
    label: str,
    metadata: dict[str, Any],
    knn_workers: int,
) -> ClusteringResult:
    started = now_ts()
    cfg = replace(cfg, k=instance.k)
    data = instance.data
    if instance.z == 0:
        removed = np.empty(0, dtype=np.int64)
    else:
        if rank_needed > data.n:
            raise ContractViolation(
                f"{label} needs neighbor rank {rank_needed}, but the dataset has n={data.n} points."
            )
        table = knn_table(data, rank_needed, workers=knn_workers)
        removed = select_outliers(score(table), instance.z)
    keep = np.ones(data.n, dtype=bool)
    keep[removed] = False
    centers = (solver or kmeans_subsolver)(data.subset(np.flatnonzero(keep)), cfg)
    return _finish(instance, centers, removed, cfg, label, started, metadata)


def run_okmeans(
    instance: RobustInstance,
    c: float,
    cfg: SolverConfig,
    *,
    solver: SubSolver | None = None,
    knn_workers: int = 1,
) -> ClusteringResult:
    """Drop the z points farthest from their floor((c+1)z/2)-th neighbor, then cluster the rest."""
    if not c > 1:
        raise ContractViolation(f"c={c} must be > 1.")
    rank = vanilla_rank(instance.z, c)
    return _run_scored(
        instance,
        rank,
        lambda t: score_vanilla(t, instance.z, c),
        cfg,
        solver,
        f"OKMeans(c={c:g})",
        {"rule": "vanilla_radius", "c": c, "rank": rank, "z": instance.z},
        knn_workers,
    )


def run_okmeans2(
    instance: RobustInstance,
    c: float,
    cfg: SolverConfig,
    *,
    solver: SubSolver | None = None,
    knn_workers: int = 1,
) -> ClusteringResult:
    """Drop the z points with the largest summed distance to neighbors ranked z+1..floor(cz)."""
    if not c > 1:
        raise ContractViolation(f"c={c} must be > 1.")
    lo, hi = midrange_ranks(instance.z, c)
    return _run_scored(
        instance,
        hi,
        lambda t: score_midrange_sum(t, instance.z, c),
        cfg,
        solver,
        f"OKMeans2(c={c:g})",
        {"rule": "midrange_sum", "c": c, "rank_lo": lo, "rank_hi": hi, "z": instance.z},
        knn_workers,
    )


def run_constant_k(
    instance: RobustInstance,
    K: int,
    cfg: SolverConfig,
    *,
    solver: SubSolver | None = None,
    knn_workers: int = 1,
) -> ClusteringResult:
    rank = constant_k_rank(K)
    return _run_scored(
        instance,
        rank,
        lambda t: score_constant_k(t, K),
        cfg,
        solver,
        f"ConstantK(K={K})",
        {"rule": "constant_k", "K": K, "rank": rank, "z": instance.z},
        knn_workers,
    )


def run_kmeanspp_baseline(instance: RobustInstance, cfg: SolverConfig) -> ClusteringResult:
    """Outlier-unaware k-means++ on all points; outliers assigned post hoc as the z farthest."""
    started = now_ts()
    cfg = replace(cfg, k=instance.k)
    centers = solve_kmeans(instance.data, None, cfg).centers
    return _finish(
        instance,
        centers,
        np.empty(0, dtype=np.int64),
        cfg,
        "KMeans++",
        started,
        {"rule": "none", "z": instance.z},
    )


def sample_coreset(instance: RobustInstance, spec: CoresetSpec) -> tuple[RobustInstance, np.ndarray]:
    """Uniform sample of spec.size points without replacement, with the budget scaled to
    max(1, round(z * m / n)) (0 stays 0). Returns the reduced instance and its source indices."""
    n = instance.data.n
    m = spec.size
    if not 1 <= m <= n:
        raise ContractViolation(f"coreset size m={m} must satisfy 1 <= m <= n={n}.")
    rng = np.random.default_rng(spec.seed)
    idx = np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)
    z = instance.z
    z_scaled = max(1, int(round(z * m / n))) if z >= 1 else 0
    data = instance.data.subset(idx, name=f"{instance.data.name}[m={m}]")
    return RobustInstance(data=data, k=instance.k, z=z_scaled), idx


def uniform_coreset(instance: RobustInstance, spec: CoresetSpec) -> RobustInstance:
    return sample_coreset(instance, spec)[0]


def run_method(
    instance: RobustInstance,
    method: Method,
    *,
    solver: SubSolver | None = None,
    knn_workers: int = 1,
) -> ClusteringResult:
    if method.kind is MethodKind.OKMEANS:
        assert method.c is not None
        return run_okmeans(instance, method.c, method.solver, solver=solver, knn_workers=knn_workers)
    if method.kind is MethodKind.OKMEANS2:
        assert method.c is not None
        return run_okmeans2(instance, method.c, method.solver, solver=solver, knn_workers=knn_workers)
    if method.kind is MethodKind.CONSTANT_K:
        assert method.K is not None
        return run_constant_k(instance, method.K, method.solver, solver=solver, knn_workers=knn_workers)
    if method.kind is MethodKind.KMEANSPP:
        return run_kmeanspp_baseline(instance, method.solver)
    assert method.baseline is not None
    return get_baseline(method.baseline)(instance, replace(method.solver, k=instance.k))


def run_pipeline(
    instance: RobustInstance,
    method: Method,
    coreset: CoresetSpec | None = None,
    objective: Objective = Objective.KMEANS,
    *,
    knn_workers: int = 1,
) -> ClusteringResult:
    """Optionally shrink the instance to a uniform coreset, run `method` on it, and evaluate
    the returned centers on the full dataset with the original budget z."""
    started = now_ts()
    if coreset is not None:
        reduced, idx = sample_coreset(instance, coreset)
    else:
        reduced, idx = instance, None
    inner = run_method(reduced, method, knn_workers=knn_workers)
    removed = inner.removed if idx is None else idx[inner.removed]

    data = instance.data
    ev = evaluate_cost_detailed(data, inner.centers, instance.z, objective)
    keep = np.ones(data.n, dtype=bool)
    keep[removed] = False
    removal_cost, _ = evaluate_cost(data.subset(np.flatnonzero(keep)), inner.centers, 0, objective)

    metadata = dict(inner.metadata)
    metadata["evaluated_on"] = "full"
    if coreset is not None:
        metadata["coreset"] = {"size": coreset.size, "seed": coreset.seed, "z_scaled": reduced.z}
    return ClusteringResult(
        centers=inner.centers,
        outliers=ev.outliers,
        removed=np.sort(removed).astype(np.int64),
        assignment=ev.assignment,
        robust_cost=ev.robust_cost,
        objective=objective,
        elapsed=max(0.0, now_ts() - started),
        seed=method.solver.seed,
        method=method.label,
        removal_cost=removal_cost,
        metadata=metadata,
    )
