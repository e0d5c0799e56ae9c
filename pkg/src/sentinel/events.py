"""Structured event log, one JSON object per line"""

from __future__ import annotations
import json
from collections import Counter
from pathlib import Path
from typing import Any, Dict, Iterator, List

EVENT_NAMES = (
    "subscribe",
    "found_chain",
    "decision",
    "observe",
    "block_accept",
    "block_reject",
    "block_invalid",
    "reorg",
    "adopt",
    "whitelist_admit",
    "win",
    "sync_request",
    "sync_response",
    "sync_give_up",
    "prune",
)


class EventLog:
    """Events of every sentinel of a run, in processing order.

    With `enabled=False` only the per-name counters are kept.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.records: List[Dict[str, Any]] = []
        self.counts: Counter = Counter()

    def record(self, t: float, node: str, event: str, **fields: Any) -> None:
        if event not in EVENT_NAMES:
            raise ValueError(f"unknown event {event!r}")
        self.counts[event] += 1
        if self.enabled:
            self.records.append({"t": round(t, 6), "node": node, "event": event, **fields})

    def filter(self, event: str) -> Iterator[Dict[str, Any]]:
        return (r for r in self.records if r["event"] == event)

    def __len__(self) -> int:
        return len(self.records)

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for r in self.records:
                f.write(json.dumps(r, sort_keys=True) + "\n")
        return path


def read_events(path: Path) -> List[Dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
