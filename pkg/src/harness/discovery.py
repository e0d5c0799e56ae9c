"""Signature discovery: how fast one device of each type reveals its signature set"""

from __future__ import annotations
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from config import REPLAY_MEAN_INTERVAL
from devsim.io import bundled_traces, resolve_traces
from devsim.models import DeviceTrace
from devsim.replay import replay_next
from harness.io import write_table
from harness.models import DiscoveryReport, DiscoveryRow, DiscoveryTotals
from sigcore.signatures import compute_signature, signature_set

logger = logging.getLogger(__name__)

LATE_SHARE = 0.1


def discovery_curve(
    trace: DeviceTrace,
    duration: float,
    bucket: float,
    rng: np.random.Generator,
    mean_interval: float = REPLAY_MEAN_INTERVAL,
) -> tuple[List[DiscoveryRow], DiscoveryTotals]:
    """Replay `trace` alone for `duration` and count first sightings per bucket"""
    if duration <= 0 or bucket <= 0:
        raise ValueError("duration and bucket must be > 0")
    known = signature_set(trace.records)
    seen = set()
    first_seen: List[float] = []
    packets = 0
    t = 0.0
    while True:
        delay, record = replay_next(trace, rng, mean_interval)
        t += delay
        if t >= duration:
            break
        packets += 1
        sig = compute_signature(record)
        if sig not in seen:
            seen.add(sig)
            first_seen.append(t)

    n_buckets = math.ceil(duration / bucket)
    counts = np.bincount([int(ts // bucket) for ts in first_seen], minlength=n_buckets)
    cumulative = np.cumsum(counts)
    rows = [
        DiscoveryRow(label=trace.device_type, bucket=i, new_signatures=int(counts[i]), cumulative=int(cumulative[i]))
        for i in range(n_buckets)
    ]
    late_from = duration * (1 - LATE_SHARE)
    totals = DiscoveryTotals(
        label=trace.device_type,
        trace_signatures=len(known),
        discovered=len(seen),
        packets=packets,
        last_new_at=round(first_seen[-1], 3) if first_seen else None,
        saturated_at=round(first_seen[-1], 3) if seen == known else None,
        late_new=sum(1 for ts in first_seen if ts >= late_from),
    )
    return rows, totals


def signature_discovery_report(
    labels: Optional[List[str]] = None,
    duration: float = 3600.0,
    bucket: float = 60.0,
    seed: int = 0,
    mean_interval: float = REPLAY_MEAN_INTERVAL,
    traces_dir: Optional[Path] = None,
) -> DiscoveryReport:
    """Discovery curves for the given device labels, or every bundled trace"""
    traces: Dict[str, DeviceTrace] = resolve_traces(labels, traces_dir) if labels else bundled_traces(traces_dir)
    report = DiscoveryReport(duration=duration, bucket=bucket, seed=seed, mean_interval=mean_interval)
    streams = np.random.SeedSequence(seed).spawn(len(traces))
    for (label, trace), stream in zip(sorted(traces.items()), streams):
        rows, totals = discovery_curve(trace, duration, bucket, np.random.default_rng(stream), mean_interval)
        report.rows.extend(rows)
        report.totals.append(totals)
        logger.info(f"discovery {label}: {totals.discovered}/{totals.trace_signatures} signatures, {totals.late_new} late")
    return report


def write_discovery(report: DiscoveryReport, out_dir: Path) -> Dict[str, str]:
    """discovery.csv (per-bucket curves) and discovery_totals.csv"""
    out_dir = Path(out_dir)
    files = {
        "curves": write_table([r.model_dump() for r in report.rows], out_dir / "discovery.csv"),
        "totals": write_table([t.model_dump() for t in report.totals], out_dir / "discovery_totals.csv"),
    }
    (out_dir / "discovery.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return {k: v.name for k, v in files.items()}
