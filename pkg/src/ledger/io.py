"""Chain export/import: one JSON object per line, hashes hex-encoded"""

from __future__ import annotations
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from sigcore.models import DeviceFingerprint, PacketSignature
from ledger.models import ControlBlock, PowMode, WhitelistBlock
from ledger.store import ChainStore

logger = logging.getLogger(__name__)

CONTROL_FILE = "control.jsonl"
MANIFEST_FILE = "manifest.json"


def chain_file_name(chain_id: DeviceFingerprint) -> str:
    return f"chain-{chain_id.hex}.jsonl"


def whitelist_block_to_dict(block: WhitelistBlock, block_hash: bytes, height: int, received: int) -> dict:
    return {
        "hash": block_hash.hex(),
        "height": height,
        "received": received,
        "prev_hash": block.prev_hash.hex(),
        "chain_id": block.chain_id.hex,
        "sentinel_address": block.sentinel_address.hex(),
        "timestamp": block.timestamp,
        "signatures": [s.hex for s in block.signatures],
    }


def control_block_to_dict(block: ControlBlock, block_hash: bytes, height: int, received: int) -> dict:
    return {
        "hash": block_hash.hex(),
        "height": height,
        "received": received,
        "prev_hash": block.prev_hash.hex(),
        "timestamp": block.timestamp,
        "sentinel_address": block.sentinel_address.hex(),
        "whitelist_headers": [h.hex() for h in block.whitelist_headers],
        "nonce": block.nonce,
        "target": format(block.target, "064x"),
    }


def whitelist_block_from_dict(d: dict) -> WhitelistBlock:
    return WhitelistBlock(
        prev_hash=bytes.fromhex(d["prev_hash"]),
        chain_id=DeviceFingerprint.from_hex(d["chain_id"]),
        sentinel_address=bytes.fromhex(d["sentinel_address"]),
        timestamp=float(d["timestamp"]),
        signatures=tuple(PacketSignature.from_hex(s) for s in d["signatures"]),
    )


def control_block_from_dict(d: dict) -> ControlBlock:
    return ControlBlock(
        prev_hash=bytes.fromhex(d["prev_hash"]),
        timestamp=float(d["timestamp"]),
        sentinel_address=bytes.fromhex(d["sentinel_address"]),
        whitelist_headers=tuple(bytes.fromhex(h) for h in d["whitelist_headers"]),
        nonce=int(d["nonce"]),
        target=int(d["target"], 16),
    )


def _write_jsonl(path: Path, rows: List[dict]) -> None:
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")


def export_store(
    store: ChainStore,
    out_dir: Path,
    canonical_tips: Optional[Dict[DeviceFingerprint, bytes]] = None,
    subscribers: Optional[Dict[DeviceFingerprint, int]] = None,
    labels: Optional[Dict[DeviceFingerprint, str]] = None,
) -> Path:
    """Write every stored block, ordered by height then receipt"""
    out_dir.mkdir(parents=True, exist_ok=True)
    control_rows = [
        control_block_to_dict(store.control_blocks[h], h, store.control_height[h], store.receipt[h])
        for h in sorted(store.control_blocks, key=lambda h: (store.control_height[h], store.receipt[h]))
    ]
    _write_jsonl(out_dir / CONTROL_FILE, control_rows)

    canonical_tips = canonical_tips or {}
    manifest = {
        "mode": store.mode.value,
        "anchor_all": store.anchor_all,
        "target": format(store.target, "064x"),
        "control_tip": store.control_tip.hex(),
        "chains": {},
    }
    for chain in store.chains():
        hashes = sorted(store.chain_blocks[chain], key=lambda h: (store.device_height[h], store.receipt[h]))
        rows = [
            whitelist_block_to_dict(store.device_blocks[h], h, store.device_height[h], store.receipt[h])
            for h in hashes
        ]
        _write_jsonl(out_dir / chain_file_name(chain), rows)
        tip = canonical_tips.get(chain)
        manifest["chains"][chain.hex] = {
            "file": chain_file_name(chain),
            "blocks": len(rows),
            "canonical_tip": tip.hex() if tip else None,
            "subscribers": (subscribers or {}).get(chain, 0),
            "label": (labels or {}).get(chain, ""),
        }
    (out_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    return out_dir


def read_jsonl(path: Path) -> List[dict]:
    rows = []
    with path.open("r", encoding="utf-8") as f:
        for n, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path.name}:{n}: {e}")
    return rows


def load_manifest(export_dir: Path) -> dict:
    p = export_dir / MANIFEST_FILE
    if not p.exists():
        return {"chains": {}}
    return json.loads(p.read_text(encoding="utf-8"))


def import_store(export_dir: Path) -> Tuple[ChainStore, List[str]]:
    """Rebuild a ChainStore from an export; corrupt files are reported and skipped"""
    manifest = load_manifest(export_dir)
    store = ChainStore(
        mode=PowMode(manifest.get("mode", PowMode.SIMULATED.value)),
        target=int(manifest.get("target", "f" * 64), 16),
        anchor_all=bool(manifest.get("anchor_all", False)),
    )
    errors: List[str] = []
    try:
        for d in read_jsonl(export_dir / CONTROL_FILE):
            if d["height"] == 0:
                continue
            res = store.add_control_block(control_block_from_dict(d))
            if not res.report.ok:
                errors.append(f"{CONTROL_FILE}: block {d['hash'][:12]} {res.report.status.value} {res.report.reasons}")
    except (OSError, ValueError, KeyError) as e:
        errors.append(f"{CONTROL_FILE}: {e}")

    for path in sorted(export_dir.glob("chain-*.jsonl")):
        try:
            rows = read_jsonl(path)
            for d in sorted(rows, key=lambda r: (r["height"], r["received"])):
                res = store.add_whitelist_block(whitelist_block_from_dict(d))
                if res.report.status.value == "INVALID":
                    errors.append(f"{path.name}: block {d['hash'][:12]} invalid {res.report.reasons}")
        except (OSError, ValueError, KeyError) as e:
            logger.warning(f"Skipping corrupt chain file {path.name}: {e}")
            errors.append(f"{path.name}: {e}")
    return store, errors
