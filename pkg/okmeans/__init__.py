"""okmeans: robust k-Means that removes outliers by K-nearest-neighbor distance scores."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

from .bench import Bench, BenchConfig, run_experiment
from .cost import evaluate_cost
from .kmeans import SolverConfig, solve_kmeans
from .robust import CoresetSpec, Method, MethodKind, run_okmeans, run_okmeans2, run_pipeline
from .types import CenterSet, ClusteringResult, Dataset, Objective, RobustInstance

try:
    __version__ = version("okmeans")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "Bench",
    "BenchConfig",
    "CenterSet",
    "ClusteringResult",
    "CoresetSpec",
    "Dataset",
    "Method",
    "MethodKind",
    "Objective",
    "RobustInstance",
    "SolverConfig",
    "__version__",
    "evaluate_cost",
    "run_experiment",
    "run_okmeans",
    "run_okmeans2",
    "run_pipeline",
    "solve_kmeans",
]
