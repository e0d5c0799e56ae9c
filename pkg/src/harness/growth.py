"""Chain growth measurement and size extrapolation"""

from __future__ import annotations
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from config import GROWTH_BUCKET
from harness.models import GrowthReport, GrowthRow
from ledger.encoding import CONTROL_BASE_SIZE, HEADER_SIZE, encoded_size
from ledger.io import import_store, load_manifest
from ledger.store import ChainStore, resolve_fork
from sigcore.models import DeviceFingerprint

logger = logging.getLogger(__name__)

SECONDS_PER_YEAR = 365 * 24 * 3600
CONTROL = "control"


def canonical_branch(store: ChainStore, chain: DeviceFingerprint, tip: Optional[bytes] = None) -> List[bytes]:
    """Block hashes from genesis to the canonical tip"""
    if tip is None or tip not in store.device_blocks:
        tip = resolve_fork(chain, store)
    return list(reversed(list(store.ancestors(tip))))


def control_intervals(store: ChainStore) -> List[float]:
    path = store.control_path()[1:]
    times = [store.control_blocks[h].timestamp for h in path]
    return [b - a for a, b in zip(times, times[1:])]


def growth_rows(
    store: ChainStore,
    canonical_tips: Optional[Dict[DeviceFingerprint, bytes]] = None,
    labels: Optional[Dict[DeviceFingerprint, str]] = None,
    bucket: float = GROWTH_BUCKET,
) -> List[GrowthRow]:
    """Blocks and encoded bytes per time bucket along the canonical control path and device branches"""
    canonical_tips = canonical_tips or {}
    labels = labels or {}
    series = [(CONTROL, CONTROL, [store.control_blocks[h] for h in store.control_path()[1:]])]
    for chain in store.chains():
        branch = canonical_branch(store, chain, canonical_tips.get(chain))
        series.append((chain.hex, labels.get(chain, ""), [store.device_blocks[h] for h in branch]))

    rows = []
    for name, label, blocks in series:
        per_bucket = defaultdict(list)
        for b in blocks:
            per_bucket[int(b.timestamp // bucket)].append(encoded_size(b))
        for idx in sorted(per_bucket):
            sizes = per_bucket[idx]
            rows.append(
                GrowthRow(
                    bucket=idx,
                    chain=name,
                    label=label,
                    blocks=len(sizes),
                    bytes=int(sum(sizes)),
                    mean_block_size=round(float(np.mean(sizes)), 3),
                )
            )
    return rows


def control_block_size(device_types: int) -> int:
    return CONTROL_BASE_SIZE + HEADER_SIZE * device_types


def chain_growth_report(
    export_dir: Path,
    bucket: float = GROWTH_BUCKET,
    device_types: Optional[int] = None,
) -> GrowthReport:
    """Growth table of an exported run plus a yearly control-chain size projection"""
    export_dir = Path(export_dir)
    if not export_dir.is_dir():
        raise FileNotFoundError(f"export directory not found: {export_dir}")
    store, errors = import_store(export_dir)
    for e in errors:
        logger.warning(f"growth: {e}")
    manifest = load_manifest(export_dir)
    tips, labels = {}, {}
    for hex_id, entry in manifest.get("chains", {}).items():
        chain = DeviceFingerprint.from_hex(hex_id)
        if entry.get("canonical_tip"):
            tips[chain] = bytes.fromhex(entry["canonical_tip"])
        labels[chain] = entry.get("label", "")

    rows = growth_rows(store, tips, labels, bucket)
    k = device_types if device_types is not None else len(store.chains())
    intervals = control_intervals(store)
    blocks_per_year = SECONDS_PER_YEAR / float(np.mean(intervals)) if intervals else None
    size = control_block_size(k)
    return GrowthReport(
        bucket=bucket,
        rows=rows,
        header_step=HEADER_SIZE,
        blocks_per_year=round(blocks_per_year, 3) if blocks_per_year else None,
        device_types=k,
        control_block_size=size,
        projected_bytes_per_year=round(blocks_per_year * size, 1) if blocks_per_year else None,
    )
