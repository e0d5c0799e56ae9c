"""Trace loading"""

from __future__ import annotations
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional

from config import TRACES_DIR
from devsim.models import DeviceTrace, TraceError
from sigcore.models import Direction, PacketRecord, SignatureError, parse_protocol

logger = logging.getLogger(__name__)


def record_from_dict(obj: dict) -> PacketRecord:
    try:
        protocol, code = parse_protocol(obj["protocol"])
        return PacketRecord(
            timestamp=float(obj.get("timestamp", 0.0)),
            protocol=protocol,
            endpoint=str(obj["endpoint"]),
            service_port=int(obj["service_port"]),
            direction=Direction(str(obj["direction"]).upper()),
            protocol_code=code,
        )
    except KeyError as e:
        raise TraceError(f"missing field {e.args[0]!r}")
    except (SignatureError, ValueError, TypeError) as e:
        raise TraceError(str(e))


def trace_from_lines(lines: Iterable[str], default_label: str) -> DeviceTrace:
    """Parse JSON lines; an optional {"device_type": ...} line names the trace"""
    label = default_label
    records = []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceError(f"line {n}: invalid JSON ({e.msg})")
        if not isinstance(obj, dict):
            raise TraceError(f"line {n}: expected an object")
        if "device_type" in obj and "protocol" not in obj:
            label = str(obj["device_type"])
            continue
        try:
            records.append(record_from_dict(obj))
        except TraceError as e:
            raise TraceError(f"line {n}: {e}")
    return DeviceTrace(device_type=label, records=tuple(records))


def load_trace(path: Path) -> DeviceTrace:
    path = Path(path)
    if not path.exists():
        raise TraceError(f"trace file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return trace_from_lines(f, path.stem)


def bundled_traces(traces_dir: Optional[Path] = None) -> Dict[str, DeviceTrace]:
    """Built-in traces keyed by device_type"""
    traces = {}
    for path in sorted(Path(traces_dir or TRACES_DIR).glob("*.jsonl")):
        trace = load_trace(path)
        traces[trace.device_type] = trace
    logger.debug(f"loaded {len(traces)} bundled traces")
    return traces


def resolve_traces(labels: Iterable[str], traces_dir: Optional[Path] = None) -> Dict[str, DeviceTrace]:
    """Bundled traces for `labels`, or file paths; unknown labels raise TraceError"""
    bundled = bundled_traces(traces_dir)
    out = {}
    for label in labels:
        if label in out:
            continue
        if label in bundled:
            out[label] = bundled[label]
        elif label.endswith(".jsonl") and Path(label).exists():
            out[label] = load_trace(Path(label))
        else:
            raise TraceError(f"unknown trace label: {label!r}")
    return out
