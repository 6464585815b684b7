from __future__ import annotations

import importlib
import json
import os
import sys
import time
from collections.abc import Callable
from datetime import datetime, timezone
from typing import Any, TextIO, cast

WORKERS_ENV = "OKMEANS_WORKERS"


def import_func(path: str) -> Callable[..., Any]:
    """Import a callable from a string like 'pkg.mod:function'."""
    if ":" not in path:
        raise ValueError(f"Invalid func path '{path}'. Expected 'module:function'.")
    mod_name, fn_name = path.split(":", 1)
    mod = importlib.import_module(mod_name)
    fn = getattr(mod, fn_name, None)
    if fn is None or not callable(fn):
        raise ValueError(f"'{path}' does not resolve to a callable.")
    return cast(Callable[..., Any], fn)


def now_ts() -> float:
    return time.perf_counter()


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, (os.cpu_count() or 2) - 1)


class EventLog:
    """JSON-lines event log on stderr: one object per line with 'ts' and 'event'."""

    def __init__(self, emit_logs: bool = True, verbose: bool = False, stream: TextIO | None = None) -> None:
        self.emit_logs = emit_logs
        self.verbose = verbose
        self._stream = stream

    def __call__(self, event: str, **fields: Any) -> None:
        if not self.emit_logs:
            return
        payload = {"ts": datetime.now(timezone.utc).isoformat(), "event": event, **fields}
        print(json.dumps(payload, ensure_ascii=False, default=str), file=self._stream or sys.stderr)
