"""Report rows and their CSV / JSON / Markdown renderings."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

TIMING_NOTE = (
    "time_*_s covers coreset sampling, KNN scoring, the k-means solve and full-data evaluation; "
    "dataset loading, normalization and injection are excluded."
)
RECALL_REMOVED = "removed"
RECALL_FARTHEST = "farthest"
RECALL_NOTE = (
    "recall_* is |detected & true outliers| / |true outliers|. recall_set names the detected set: "
    "'removed' is the set a score-based method dropped before solving; 'farthest' is Z(C), the z "
    "points farthest from the final centers (KMeans++, external baselines and coreset runs). "
    "Empty when the dataset has no mask."
)
NO_TIMING_NOTE = "timing disabled: time columns are left empty so the report is byte-reproducible."


@dataclass(frozen=True)
class ReportRow:
    method: str
    dataset: str
    cost_best: float | None
    cost_mean: float | None
    cost_std: float | None
    recall_mean: float | None
    recall_std: float | None
    recall_set: str | None
    time_mean_s: float | None
    time_std_s: float | None
    n_seeds: int
    failure: str | None = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


COLUMNS = tuple(f.name for f in fields(ReportRow))
_COST = ("cost_best", "cost_mean", "cost_std")
_TIME = ("time_mean_s", "time_std_s")


def _cell(name: str, value: Any) -> str:
    if value is None:
        return ""
    if name in _COST:
        return f"{value:.3e}"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _strip_timing(row: ReportRow) -> dict[str, Any]:
    d = asdict(row)
    for name in _TIME:
        d[name] = None
    return d


def _notes(include_timing: bool) -> list[str]:
    return [TIMING_NOTE if include_timing else NO_TIMING_NOTE, RECALL_NOTE]


def _to_csv(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(c, r[c]) for c in COLUMNS])
    return buf.getvalue()


def _to_json(rows: list[dict[str, Any]], notes: list[str]) -> str:
    return json.dumps({"notes": notes, "rows": rows}, ensure_ascii=False, indent=2) + "\n"


def _to_markdown(rows: list[dict[str, Any]], notes: list[str]) -> str:
    lines = [f"> {n}" for n in notes]
    lines.append("")
    lines.append("| " + " | ".join(COLUMNS) + " |")
    lines.append("|" + "|".join("---" for _ in COLUMNS) + "|")
    for r in rows:
        cells = [_cell(c, r[c]).replace("|", "\\|") for c in COLUMNS]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_report(
    rows: Sequence[ReportRow],
    fmt: str,
    path: str | Path | None = None,
    *,
    include_timing: bool = True,
) -> str:
    """Render `rows` as csv, json or markdown; also write the text to `path` when given.

    Costs are printed with 4 significant digits, recall and time with 4 decimals.
    JSON keeps the raw floats.
    """
    data = [asdict(r) if include_timing else _strip_timing(r) for r in rows]
    if fmt == "csv":
        text = _to_csv(data)
    elif fmt == "json":
        text = _to_json(data, _notes(include_timing))
    elif fmt == "markdown":
        text = _to_markdown(data, _notes(include_timing))
    else:
        raise ValueError(f"Unknown report format '{fmt}'. Expected csv, json or markdown.")
    if path is not None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    return text
