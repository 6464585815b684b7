"""Experiment configuration: a flat `key = value` file plus overrides.

Example (see configs/ for complete recipes)::

    # SHUTTLE-like desk-scale recipe
    name = shuttle-like
    dataset = labeled_blobs
    class_sizes = 3000,1200,600,200,10,7
    outlier_classes = smallest:2
    normalize = true
    k = 4
    z = auto
    methods = okmeans:c=3, okmeans2:c=3, constk:K=2, kmeanspp
    seeds = 0-9

Precedence, lowest first: file, the OKMEANS_WORKERS environment variable, `--set` overrides.
"""

from __future__ import annotations

import os
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .kmeans import SolverConfig
from .robust import Method, MethodKind
from .types import ContractViolation, Objective
from .utils import WORKERS_ENV, default_workers

FORMATS = ("csv", "json", "markdown")
SOURCES = ("csv", "planted", "labeled_blobs")

_KNOWN_KEYS = {
    "name", "dataset", "path", "has_labels", "has_mask", "header", "normalize",
    "inject_fraction", "inject_xi", "outlier_classes", "data_seed",
    "planted_k", "cluster_size", "planted_z", "separation", "spread", "dim", "class_sizes",
    "k", "z", "methods", "coreset", "seeds", "objective",
    "max_iters", "rel_tol", "restarts", "workers", "executor", "output", "format", "timing",
}


class ConfigValidationError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSpec:
    source: str = "planted"
    path: str | None = None
    has_labels: bool = False
    has_mask: bool = False
    header: bool = False
    normalize: bool = False
    inject_fraction: float | None = None
    inject_xi: float | None = None
    outlier_classes: tuple[int, ...] = ()
    smallest_classes: int | None = None
    data_seed: int = 0
    planted_k: int = 3
    cluster_size: int = 100
    planted_z: int = 10
    separation: float = 10.0
    spread: float = 1.0
    dim: int = 2
    class_sizes: tuple[int, ...] = ()


@dataclass(frozen=True)
class MethodEntry:
    method: Method
    coreset_size: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dataset: DatasetSpec
    methods: tuple[MethodEntry, ...]
    seeds: tuple[int, ...]
    k: int
    z: int | None = None
    objective: Objective = Objective.KMEANS
    workers: int = 1
    executor: str = "process"
    output: str | None = None
    format: str = "csv"
    timing: bool = True


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigValidationError(f"line {lineno}: expected 'key = value', got '{body}'.")
        key, value = body.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigValidationError(f"line {lineno}: empty key.")
        out[key] = value.strip()
    return out


def parse_overrides(items: list[str]) -> dict[str, str]:
    """Parse ['k=3', 'seeds=0-4'] into a dict."""
    out: dict[str, str] = {}
    for item in items:
        if "=" not in item:
            raise ConfigValidationError(f"Invalid override '{item}'. Expected key=value.")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | Path, overrides: Mapping[str, str] | None = None) -> ExperimentConfig:
    p = Path(path)
    raw = parse_config_text(p.read_text(encoding="utf-8"))
    env_workers = os.environ.get(WORKERS_ENV, "").strip()
    if env_workers:
        raw["workers"] = env_workers
    raw.update(overrides or {})
    return parse_experiment(raw, default_name=p.stem)


def parse_experiment(raw: Mapping[str, str], default_name: str = "experiment") -> ExperimentConfig:
    unknown = sorted(k for k in raw if k not in _KNOWN_KEYS and not k.startswith("baseline."))
    if unknown:
        raise ConfigValidationError(f"Unknown config keys: {', '.join(unknown)}.")

    name = raw.get("name") or default_name
    dataset = _parse_dataset(raw)
    k = _parse_int_field("k", raw.get("k"), default=None, minimum=1)
    if k is None:
        raise ConfigValidationError("'k' is required.")

    z_raw = raw.get("z", "auto").strip().lower()
    z = None if z_raw == "auto" else _parse_int_field("z", z_raw, default=0, minimum=0)
    if z is None and dataset.source == "csv" and not (
        dataset.has_mask or dataset.inject_fraction or dataset.outlier_classes or dataset.smallest_classes
    ):
        raise ConfigValidationError("'z = auto' needs ground-truth outliers (has_mask, injection or outlier_classes).")

    seeds = _parse_seeds(raw.get("seeds", "0"))
    solver = SolverConfig(
        k=k,
        max_iters=_req_int("max_iters", raw.get("max_iters"), 100, 1),
        rel_tol=_req_float("rel_tol", raw.get("rel_tol"), 1e-6, 0.0),
        restarts=_req_int("restarts", raw.get("restarts"), 3, 1),
    )
    baselines = {key.split(".", 1)[1]: value for key, value in raw.items() if key.startswith("baseline.")}
    default_m = _parse_int_field("coreset", _none_if_off(raw.get("coreset")), default=None, minimum=1)
    methods = tuple(
        _parse_method(tok, solver, default_m, baselines)
        for tok in _split_list(raw.get("methods", "okmeans:c=3"))
    )
    if not methods:
        raise ConfigValidationError("'methods' must list at least one method.")

    try:
        objective = Objective(raw.get("objective", "kmeans").strip().lower())
    except ValueError as e:
        raise ConfigValidationError(f"'objective' must be one of {[o.value for o in Objective]}.") from e

    executor = raw.get("executor", "process").strip().lower()
    if executor not in {"process", "thread"}:
        raise ConfigValidationError("'executor' must be 'process' or 'thread'.")
    fmt = raw.get("format", "csv").strip().lower()
    if fmt not in FORMATS:
        raise ConfigValidationError(f"'format' must be one of {', '.join(FORMATS)}.")

    return ExperimentConfig(
        name=name,
        dataset=dataset,
        methods=methods,
        seeds=seeds,
        k=k,
        z=z,
        objective=objective,
        workers=_req_int("workers", raw.get("workers"), default_workers(), 1),
        executor=executor,
        output=raw.get("output") or None,
        format=fmt,
        timing=_parse_bool_field("timing", raw.get("timing"), default=True),
    )


def _parse_dataset(raw: Mapping[str, str]) -> DatasetSpec:
    source = raw.get("dataset", "planted").strip().lower()
    if source not in SOURCES:
        raise ConfigValidationError(f"'dataset' must be one of {', '.join(SOURCES)}.")
    path = raw.get("path") or None
    if source == "csv" and not path:
        raise ConfigValidationError("'dataset = csv' needs 'path'.")

    classes_raw = raw.get("outlier_classes", "").strip()
    smallest = None
    classes: tuple[int, ...] = ()
    if classes_raw.startswith("smallest:"):
        smallest = _parse_int_field("outlier_classes", classes_raw.split(":", 1)[1], default=None, minimum=1)
    elif classes_raw:
        classes = tuple(_req_int("outlier_classes", t, 0, -(2**62)) for t in _split_list(classes_raw))

    fraction = _parse_float_field("inject_fraction", _none_if_off(raw.get("inject_fraction")), default=None, minimum=0.0)
    xi = _parse_float_field("inject_xi", raw.get("inject_xi"), default=None, minimum=0.0)
    if fraction is not None and not 0 < fraction < 1:
        raise ConfigValidationError("'inject_fraction' must lie in (0, 1).")
    if fraction is not None and not xi:
        raise ConfigValidationError("'inject_fraction' needs a positive 'inject_xi'.")

    sizes = tuple(_req_int("class_sizes", t, 0, 1) for t in _split_list(raw.get("class_sizes", "")))
    if source == "labeled_blobs" and not sizes:
        raise ConfigValidationError("'dataset = labeled_blobs' needs 'class_sizes'.")

    spec = DatasetSpec(
        source=source,
        path=path,
        has_labels=_parse_bool_field("has_labels", raw.get("has_labels"), default=False),
        has_mask=_parse_bool_field("has_mask", raw.get("has_mask"), default=False),
        header=_parse_bool_field("header", raw.get("header"), default=False),
        normalize=_parse_bool_field("normalize", raw.get("normalize"), default=False),
        inject_fraction=fraction,
        inject_xi=xi,
        outlier_classes=classes,
        smallest_classes=smallest,
        data_seed=_req_int("data_seed", raw.get("data_seed"), 0, 0),
        planted_k=_req_int("planted_k", raw.get("planted_k"), 3, 1),
        cluster_size=_req_int("cluster_size", raw.get("cluster_size"), 100, 1),
        planted_z=_req_int("planted_z", raw.get("planted_z"), 10, 0),
        separation=_req_float("separation", raw.get("separation"), 10.0, 0.0),
        spread=_req_float("spread", raw.get("spread"), 1.0, 0.0),
        dim=_req_int("dim", raw.get("dim"), 2, 1),
        class_sizes=sizes,
    )
    if (spec.outlier_classes or spec.smallest_classes) and source == "csv" and not spec.has_labels:
        raise ConfigValidationError("'outlier_classes' needs 'has_labels = true'.")
    return spec


_KIND_ALIASES = {
    "okmeans": MethodKind.OKMEANS,
    "okmeans2": MethodKind.OKMEANS2,
    "constk": MethodKind.CONSTANT_K,
    "constant_k": MethodKind.CONSTANT_K,
    "kmeanspp": MethodKind.KMEANSPP,
    "kmeans++": MethodKind.KMEANSPP,
    "baseline": MethodKind.EXTERNAL,
}


def _parse_method(
    token: str,
    solver: SolverConfig,
    default_m: int | None,
    baselines: Mapping[str, str],
) -> MethodEntry:
    """Parse 'okmeans:c=3:m=10000' style tokens."""
    head, *opts = [part.strip() for part in token.split(":")]
    kind = _KIND_ALIASES.get(head.lower())
    if kind is None:
        raise ConfigValidationError(f"Unknown method '{head}' in '{token}'.")
    params: dict[str, str] = {}
    for opt in opts:
        if "=" not in opt:
            raise ConfigValidationError(f"Method option '{opt}' in '{token}' must be key=value.")
        key, value = opt.split("=", 1)
        params[key.strip()] = value.strip()

    field_name = f"methods[{token}]"
    m = default_m
    if "m" in params:
        m = _parse_int_field(field_name + ".m", _none_if_off(params.pop("m")), default=None, minimum=1)

    kwargs: dict[str, Any] = {"kind": kind, "solver": solver}
    if kind in (MethodKind.OKMEANS, MethodKind.OKMEANS2):
        kwargs["c"] = _req_float(field_name + ".c", params.pop("c", None), 3.0, 0.0)
    elif kind is MethodKind.CONSTANT_K:
        kwargs["K"] = _req_int(field_name + ".K", params.pop("K", None), 2, 1)
    elif kind is MethodKind.EXTERNAL:
        name = params.pop("name", "")
        if name not in baselines:
            raise ConfigValidationError(f"Baseline '{name}' needs a 'baseline.{name} = module:function' line.")
        kwargs["baseline"] = baselines[name]
        kwargs["name"] = name
    if params:
        raise ConfigValidationError(f"Unexpected options {sorted(params)} for method '{head}'.")
    try:
        return MethodEntry(method=Method(**kwargs), coreset_size=m)
    except ContractViolation as e:
        raise ConfigValidationError(f"{field_name}: {e}") from e


def _parse_seeds(raw: str) -> tuple[int, ...]:
    seeds: list[int] = []
    for tok in _split_list(raw):
        if "-" in tok:
            lo_s, hi_s = tok.split("-", 1)
            lo = _req_int("seeds", lo_s, 0, 0)
            hi = _req_int("seeds", hi_s, 0, 0)
            if hi < lo:
                raise ConfigValidationError(f"'seeds' range '{tok}' is empty.")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(_req_int("seeds", tok, 0, 0))
    if not seeds:
        raise ConfigValidationError("'seeds' must list at least one seed.")
    return tuple(seeds)


def _split_list(raw: str) -> list[str]:
    return [t.strip() for t in raw.split(",") if t.strip()]


def _none_if_off(raw: str | None) -> str | None:
    if raw is None or raw.strip().lower() in {"", "none", "off", "false"}:
        return None
    return raw


def _parse_bool_field(field_name: str, raw: str | None, *, default: bool) -> bool:
    if raw is None or not raw.strip():
        return default
    value = raw.strip().lower()
    if value in {"1", "true", "yes", "on"}:
        return True
    if value in {"0", "false", "no", "off"}:
        return False
    raise ConfigValidationError(f"'{field_name}' must be a boolean.")


def _parse_int_field(field_name: str, raw: str | None, *, default: int | None, minimum: int) -> int | None:
    if raw is None or not str(raw).strip():
        return default
    try:
        value = int(str(raw).strip())
    except ValueError as e:
        raise ConfigValidationError(f"'{field_name}' must be an integer.") from e
    if value < minimum:
        raise ConfigValidationError(f"'{field_name}' must be >= {minimum}.")
    return value


def _parse_float_field(field_name: str, raw: str | None, *, default: float | None, minimum: float) -> float | None:
    if raw is None or not str(raw).strip():
        return default
    try:
        value = float(str(raw).strip())
    except ValueError as e:
        raise ConfigValidationError(f"'{field_name}' must be a number.") from e
    if value < minimum:
        raise ConfigValidationError(f"'{field_name}' must be >= {minimum}.")
    return value


def _req_int(field_name: str, raw: str | None, default: int, minimum: int) -> int:
    value = _parse_int_field(field_name, raw, default=default, minimum=minimum)
    assert value is not None
    return value


def _req_float(field_name: str, raw: str | None, default: float, minimum: float) -> float:
    value = _parse_float_field(field_name, raw, default=default, minimum=minimum)
    assert value is not None
    return value
