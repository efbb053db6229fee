"""
JSON-lines run log: one object per evaluation epoch plus a final record per run.

Records carry no clock values, so two runs of one config write identical
bytes. Runs are buffered and written as whole blocks, in the order the caller
commits them, which keeps concurrent sweeps reproducible.
"""

import hashlib
import json
import logging
import os
import threading
from typing import Any, Dict, Iterator, List, Optional, Union

from src.standard_formats import EpochRecord, RunLogRecord, RunResult

logger = logging.getLogger(__name__)


def config_hash(config: Dict[str, Any]) -> str:
    canonical = json.dumps(config, sort_keys=True, default=str, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _line(record: RunLogRecord) -> str:
    return json.dumps(record, sort_keys=True, default=str)


class RunLogBuffer:
    """Collects one run's records in memory until the owning RunLog commits them."""

    def __init__(self):
        self.lines: List[str] = []

    def epoch(self, run_id: str, cfg_hash: str, record: EpochRecord) -> None:
        self.lines.append(_line({
            "run_id": run_id,
            "config_hash": cfg_hash,
            "kind": "epoch",
            "epoch": record,
            "final": None,
        }))

    def final(self, run_id: str, cfg_hash: str, result: RunResult,
              extra: Optional[Dict[str, Any]] = None) -> None:
        summary = {k: v for k, v in result.items() if k != "epochs"}
        if extra:
            summary.update(extra)
        self.lines.append(_line({
            "run_id": run_id,
            "config_hash": cfg_hash,
            "kind": "final",
            "epoch": None,
            "final": summary,
        }))


class RunLog:
    """
    File-backed log. Records written through `epoch`/`final` go straight to
    disk; `buffer` hands out per-run buffers that `commit` appends as a block.

    Args:
        path: the JSON-lines file.
        truncate: start from an empty file instead of appending to an existing one.
    """

    def __init__(self, path: str, truncate: bool = False):
        self.path = path
        self._lock = threading.Lock()
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        if truncate:
            open(path, "w", encoding="utf-8").close()

    def buffer(self) -> RunLogBuffer:
        return RunLogBuffer()

    def commit(self, buffer: RunLogBuffer) -> None:
        if not buffer.lines:
            return
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write("".join(line + "\n" for line in buffer.lines))
        buffer.lines.clear()

    def epoch(self, run_id: str, cfg_hash: str, record: EpochRecord) -> None:
        single = RunLogBuffer()
        single.epoch(run_id, cfg_hash, record)
        self.commit(single)

    def final(self, run_id: str, cfg_hash: str, result: RunResult,
              extra: Optional[Dict[str, Any]] = None) -> None:
        single = RunLogBuffer()
        single.final(run_id, cfg_hash, result, extra)
        self.commit(single)


RunRecorder = Union[RunLog, RunLogBuffer]


def read_run_log(path: str) -> Iterator[RunLogRecord]:
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                logger.warning("Skipping unreadable run-log line %d in %s: %s", line_no, path, e)


def final_results(path: str) -> List[Dict[str, Any]]:
    """The 'final' summaries of every run recorded in a log."""
    return [rec["final"] for rec in read_run_log(path) if rec.get("kind") == "final" and rec.get("final")]
