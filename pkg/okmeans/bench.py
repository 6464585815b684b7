"""Multi-seed experiment runner: one job per (method, seed), aggregated into report rows."""

from __future__ import annotations

import concurrent.futures as cf
import math
import traceback as tb
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .config import ConfigValidationError, ExperimentConfig, MethodEntry
from .datasets import (
    generate_labeled_blobs,
    generate_planted,
    inject_outliers,
    load_csv,
    mark_label_outliers,
    normalize_zscore,
    smallest_classes,
)
from .report import RECALL_FARTHEST, RECALL_REMOVED, ReportRow
from .robust import CoresetSpec, Method, MethodKind, run_pipeline
from .types import Dataset, ErrorInfo, Objective, RobustInstance
from .utils import EventLog, default_workers, now_ts


@dataclass(frozen=True)
class BenchConfig:
    max_workers: int = field(default_factory=default_workers)
    executor: str = "process"  # "process" or "thread"
    # Set to False to disable JSON-line logs (useful for tests/integration)
    emit_logs: bool = True
    # Include full tracebacks in job_failed events
    verbose: bool = False


_SCORED = (MethodKind.OKMEANS, MethodKind.OKMEANS2, MethodKind.CONSTANT_K)


@dataclass(frozen=True)
class JobRecord:
    cost: float
    recall: float | None
    recall_set: str
    elapsed: float
    n_outliers: int


def build_dataset(config: ExperimentConfig) -> Dataset:
    """Ingest or generate the dataset, then normalize, mark label outliers and inject, in that order."""
    spec = config.dataset
    if spec.source == "csv":
        assert spec.path is not None
        data = load_csv(spec.path, spec.has_labels, header=spec.header, has_mask=spec.has_mask)
    elif spec.source == "planted":
        data = generate_planted(
            spec.planted_k,
            spec.cluster_size,
            spec.planted_z,
            spec.separation,
            spec.spread,
            spec.dim,
            spec.data_seed,
        ).data
    else:
        data = generate_labeled_blobs(
            spec.class_sizes, spec.dim, spec.separation, spec.spread, spec.data_seed, name=config.name
        )

    if spec.normalize:
        data = normalize_zscore(data)
    if spec.smallest_classes:
        data = mark_label_outliers(data, smallest_classes(data, spec.smallest_classes))
    elif spec.outlier_classes:
        data = mark_label_outliers(data, spec.outlier_classes)
    if spec.inject_fraction is not None:
        assert spec.inject_xi is not None
        data = inject_outliers(data, spec.inject_fraction, spec.inject_xi, spec.data_seed)
    return data


def build_instance(config: ExperimentConfig) -> RobustInstance:
    data = build_dataset(config)
    z = config.z
    if z is None:
        z = data.n_true_outliers
        if z is None:
            raise ConfigValidationError(f"'z = auto' but dataset '{data.name}' has no outlier mask.")
    return RobustInstance(data=data, k=config.k, z=z)


def recall(outliers: np.ndarray, truth: np.ndarray | None) -> float | None:
    """|outliers & truth| / |truth|, or None without a (non-empty) mask."""
    if truth is None:
        return None
    total = int(truth.sum())
    if total == 0:
        return None
    return int(truth[np.asarray(outliers, dtype=np.int64)].sum()) / total


def recall_set(method: Method, on_coreset: bool) -> str:
    """Score-based methods on the full data are judged on the points they removed; every
    other run on Z(C), the z points farthest from its final centers."""
    if method.kind in _SCORED and not on_coreset:
        return RECALL_REMOVED
    return RECALL_FARTHEST


def _run_job(
    instance: RobustInstance,
    method: Method,
    coreset_size: int | None,
    objective: Objective,
    seed: int,
) -> JobRecord:
    """Executed in a worker process/thread."""
    coreset = None
    if coreset_size is not None and coreset_size < instance.data.n:
        coreset = CoresetSpec(size=coreset_size, seed=seed)
    res = run_pipeline(instance, method.with_seed(seed), coreset, objective)
    which = recall_set(method, coreset is not None)
    detected = res.removed if which == RECALL_REMOVED else res.outliers
    return JobRecord(
        cost=float(res.robust_cost),
        recall=recall(detected, instance.data.true_outliers),
        recall_set=which,
        elapsed=res.elapsed,
        n_outliers=int(res.outliers.shape[0]),
    )


def _mean_std(values: list[float]) -> tuple[float, float]:
    """Population mean and standard deviation of the sorted values."""
    xs = sorted(values)
    mean = math.fsum(xs) / len(xs)
    var = math.fsum((x - mean) ** 2 for x in xs) / len(xs)
    return mean, math.sqrt(var)


def aggregate(method: str, dataset: str, records: list[JobRecord], *, timing: bool = True) -> ReportRow:
    costs = [r.cost for r in records]
    cost_mean, cost_std = _mean_std(costs)
    best = min(costs)
    recalls = [r.recall for r in records if r.recall is not None]
    recall_mean = recall_std = None
    if recalls:
        recall_mean, recall_std = _mean_std(recalls)
    time_mean = time_std = None
    if timing:
        time_mean, time_std = _mean_std([r.elapsed for r in records])
    return ReportRow(
        method=method,
        dataset=dataset,
        cost_best=best,
        cost_mean=max(cost_mean, best),
        cost_std=cost_std,
        recall_mean=recall_mean,
        recall_std=recall_std,
        recall_set=records[0].recall_set if recalls else None,
        time_mean_s=time_mean,
        time_std_s=time_std,
        n_seeds=len(records),
    )


def _failed_row(method: str, dataset: str, n_seeds: int, seed: int, err: ErrorInfo) -> ReportRow:
    return ReportRow(
        method=method,
        dataset=dataset,
        cost_best=None,
        cost_mean=None,
        cost_std=None,
        recall_mean=None,
        recall_std=None,
        recall_set=None,
        time_mean_s=None,
        time_std_s=None,
        n_seeds=n_seeds,
        failure=f"seed {seed}: {err.exc_type}: {err.message}",
    )


def _label(entry: MethodEntry) -> str:
    if entry.coreset_size is None:
        return entry.method.label
    return f"{entry.method.label}[m={entry.coreset_size}]"


class Bench:
    def __init__(self, config: BenchConfig) -> None:
        self.config = config
        self.log = EventLog(emit_logs=config.emit_logs, verbose=config.verbose)

    def run(self, experiment: ExperimentConfig, instance: RobustInstance | None = None) -> list[ReportRow]:
        """One row per configured method, in config order."""
        t0 = now_ts()
        instance = instance or build_instance(experiment)
        executor_type = self.config.executor.lower().strip()
        if executor_type not in {"process", "thread"}:
            raise ValueError("BenchConfig.executor must be 'process' or 'thread'.")
        executor_cls = cf.ProcessPoolExecutor if executor_type == "process" else cf.ThreadPoolExecutor

        log = self.log
        log(
            "run_start",
            experiment=experiment.name,
            dataset=instance.data.name,
            n=instance.data.n,
            d=instance.data.d,
            k=instance.k,
            z=instance.z,
            max_workers=self.config.max_workers,
            executor=executor_type,
        )

        labels = [_label(e) for e in experiment.methods]
        slots: dict[tuple[int, int], JobRecord | ErrorInfo] = {}
        with executor_cls(max_workers=self.config.max_workers) as ex:
            running: dict[cf.Future[JobRecord], tuple[int, int]] = {}
            for mi, entry in enumerate(experiment.methods):
                for si, seed in enumerate(experiment.seeds):
                    fut = ex.submit(
                        _run_job, instance, entry.method, entry.coreset_size, experiment.objective, seed
                    )
                    running[fut] = (mi, si)
                    log("job_submitted", method=labels[mi], seed=seed)

            for fut in cf.as_completed(running):
                mi, si = running[fut]
                seed = experiment.seeds[si]
                try:
                    rec = fut.result()
                    slots[(mi, si)] = rec
                    log("job_success", method=labels[mi], seed=seed, cost=rec.cost, recall=rec.recall)
                except Exception as e:
                    err = ErrorInfo(
                        exc_type=type(e).__name__,
                        message=str(e),
                        traceback="".join(tb.format_exception(type(e), e, e.__traceback__)),
                    )
                    slots[(mi, si)] = err
                    fields: dict[str, Any] = {
                        "method": labels[mi],
                        "seed": seed,
                        "error_type": err.exc_type,
                        "error_message": err.message,
                    }
                    if self.config.verbose:
                        fields["error_traceback"] = err.traceback
                    log("job_failed", **fields)

        rows: list[ReportRow] = []
        for mi, label in enumerate(labels):
            outcomes = [slots[(mi, si)] for si in range(len(experiment.seeds))]
            errors = [(experiment.seeds[si], o) for si, o in enumerate(outcomes) if isinstance(o, ErrorInfo)]
            if errors:
                seed, err = errors[0]
                rows.append(_failed_row(label, instance.data.name, len(outcomes), seed, err))
                continue
            records = [o for o in outcomes if isinstance(o, JobRecord)]
            rows.append(aggregate(label, instance.data.name, records, timing=experiment.timing))

        failed = sum(1 for r in rows if r.failed)
        log("run_finished", experiment=experiment.name, wall_seconds=max(0.0, now_ts() - t0), failed=failed)
        return rows


def run_experiment(
    config: ExperimentConfig,
    *,
    emit_logs: bool = True,
    verbose: bool = False,
) -> list[ReportRow]:
    bench = Bench(
        BenchConfig(
            max_workers=config.workers,
            executor=config.executor,
            emit_logs=emit_logs,
            verbose=verbose,
        )
    )
    return bench.run(config)
