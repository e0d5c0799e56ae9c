"""Audit of exported chains: rejected forks, signature timelines, adoption curves"""

from __future__ import annotations
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from harness.growth import canonical_branch
from harness.io import write_table
from harness.models import AdoptionPoint, AuditReport, ForkRow, SignatureTimeline
from ledger.io import import_store, load_manifest
from ledger.store import ChainStore
from sentinel.events import read_events
from sigcore.models import DeviceFingerprint

logger = logging.getLogger(__name__)


def _fork_rows(store: ChainStore, chain: DeviceFingerprint, label: str, canonical: List[bytes]) -> Tuple[List[ForkRow], int]:
    on_path = set(canonical)
    allowed = store.cumulative(canonical[-1]) if canonical else frozenset()
    rows, stale = [], 0
    for tip in sorted(store.tips.get(chain, ())):
        if tip in on_path:
            continue
        fork = [h for h in store.ancestors(tip) if h not in on_path]
        fork_sigs = set()
        for h in fork:
            fork_sigs.update(store.device_blocks[h].signatures)
        anomalous = sorted(s.hex for s in fork_sigs - allowed)
        if not anomalous:
            stale += 1
            continue
        rows.append(
            ForkRow(
                chain_id=chain.hex,
                label=label,
                tip=tip.hex(),
                fork_height=store.device_height[fork[-1]],
                length=len(fork),
                anomalous=anomalous,
            )
        )
    return rows, stale


def _timelines(store: ChainStore, chain: DeviceFingerprint, canonical: List[bytes], first_observed: Dict[Tuple[str, str], float]) -> List[SignatureTimeline]:
    first_block: Dict[str, float] = {}
    for h in store.chain_blocks.get(chain, ()):
        b = store.device_blocks[h]
        for s in b.signatures:
            first_block[s.hex] = min(first_block.get(s.hex, b.timestamp), b.timestamp)
    confirmed: Dict[str, float] = {}
    for h in canonical:
        b = store.device_blocks[h]
        for s in b.signatures:
            confirmed.setdefault(s.hex, b.timestamp)
    out = []
    for sig in sorted(first_block):
        seen = first_observed.get((chain.hex, sig), first_block[sig])
        out.append(
            SignatureTimeline(
                chain_id=chain.hex,
                signature=sig,
                first_seen=min(seen, first_block[sig]),
                confirmed=confirmed.get(sig),
                canonical=sig in confirmed,
            )
        )
    return out


def adoption_curves(events: List[dict]) -> List[AdoptionPoint]:
    """Per signature, the fraction of subscribers that observed it and that whitelist it, over time"""
    subscribers: Dict[str, Set[str]] = defaultdict(set)
    for e in events:
        if e["event"] == "subscribe":
            subscribers[e["chain"]].add(e["node"])
    observed: Dict[Tuple[str, str], Set[str]] = defaultdict(set)
    listed: Dict[Tuple[str, str], Set[str]] = defaultdict(set)
    points = []
    for e in events:
        kind = e["event"]
        touched = []
        if kind == "observe":
            key = (e["chain"], e["signature"])
            observed[key].add(e["node"])
            touched.append(key)
        elif kind == "whitelist_admit":
            key = (e["chain"], e["signature"])
            listed[key].add(e["node"])
            touched.append(key)
        elif kind == "reorg":
            for sig in e.get("removed", []):
                key = (e["chain"], sig)
                listed[key].discard(e["node"])
                touched.append(key)
        for key in touched:
            if not observed[key] and not listed[key]:
                continue
            n = max(1, len(subscribers.get(key[0], ())))
            points.append(
                AdoptionPoint(
                    chain_id=key[0],
                    signature=key[1],
                    t=e["t"],
                    observed_fraction=round(len(observed[key]) / n, 6),
                    whitelisted_fraction=round(len(listed[key]) / n, 6),
                )
            )
    return points


def audit(export_dir: Path, events_path: Optional[Path] = None) -> AuditReport:
    """Fork/transparency report; corrupt files are reported per file and skipped"""
    export_dir = Path(export_dir)
    if not export_dir.is_dir():
        raise FileNotFoundError(f"export directory not found: {export_dir}")
    store, errors = import_store(export_dir)
    manifest = load_manifest(export_dir)
    entries = manifest.get("chains", {})

    events: List[dict] = []
    events_path = events_path or (export_dir.parent / "events.jsonl")
    if Path(events_path).exists():
        try:
            events = read_events(Path(events_path))
        except (OSError, ValueError) as e:
            errors.append(f"{Path(events_path).name}: {e}")
    first_observed: Dict[Tuple[str, str], float] = {}
    for e in events:
        if e["event"] == "observe":
            first_observed.setdefault((e["chain"], e["signature"]), e["t"])

    report = AuditReport(errors=errors)
    for chain in store.chains():
        entry = entries.get(chain.hex, {})
        tip = bytes.fromhex(entry["canonical_tip"]) if entry.get("canonical_tip") else None
        canonical = canonical_branch(store, chain, tip)
        rows, stale = _fork_rows(store, chain, entry.get("label", ""), canonical)
        report.rejected_forks.extend(rows)
        report.stale_forks += stale
        report.signatures.extend(_timelines(store, chain, canonical, first_observed))
        if entry and entry.get("subscribers", 0) <= 1:
            report.founder_warnings.append(
                f"chain {chain.short} has a single subscriber; its founder alone defines the whitelist"
            )
    report.adoption = adoption_curves(events)
    logger.info(
        f"Audit: {len(report.rejected_forks)} rejected forks, {report.stale_forks} stale forks, "
        f"{len(report.errors)} errors"
    )
    return report


def write_audit(report: AuditReport, out_dir: Path) -> Dict[str, str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    forks = [dict(r.model_dump(), anomalous=";".join(r.anomalous)) for r in report.rejected_forks]
    files = {
        "forks": write_table(forks, out_dir / "forks.csv"),
        "signatures": write_table([s.model_dump() for s in report.signatures], out_dir / "signatures.csv"),
        "adoption": write_table([a.model_dump() for a in report.adoption], out_dir / "adoption.csv"),
    }
    (out_dir / "audit.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return {k: v.name for k, v in files.items()}
