"""Chain storage, validation, fork resolution and whitelist derivation"""

from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Set, Tuple

from sigcore.models import DeviceFingerprint, PacketSignature
from ledger.encoding import control_hash, hash_value, header_hash
from ledger.models import (
    CONTROL_GENESIS,
    MAX_TARGET,
    ZERO_HASH,
    ControlBlock,
    LedgerError,
    PowMode,
    Validity,
    ValidityReport,
    Whitelist,
    WhitelistBlock,
)

logger = logging.getLogger(__name__)

_EMPTY: frozenset = frozenset()


@dataclass
class StoreResult:
    report: ValidityReport
    block_hash: bytes
    known: bool = False
    reorg: bool = False
    promoted: List[bytes] = field(default_factory=list)


class ChainStore:
    """Blocks of the control chain and of every device chain one node knows about.

    Mutated only by its owner. Device-chain tips are the stored blocks without
    stored children; ties between tips are broken by receipt order.
    """

    def __init__(self, mode: PowMode = PowMode.SIMULATED, target: int = MAX_TARGET, anchor_all: bool = False):
        self.mode = mode
        self.target = target
        # archive view: headers of every stored control block count as confirmed
        self.anchor_all = anchor_all
        self.control_blocks: Dict[bytes, ControlBlock] = {}
        self.control_height: Dict[bytes, int] = {}
        self.device_blocks: Dict[bytes, WhitelistBlock] = {}
        self.device_height: Dict[bytes, int] = {}
        self.receipt: Dict[bytes, int] = {}
        self.children: Dict[bytes, Set[bytes]] = {}
        self.tips: Dict[DeviceFingerprint, Set[bytes]] = {}
        self.chain_blocks: Dict[DeviceFingerprint, Set[bytes]] = {}
        self.confirmed_header_index: Set[bytes] = set()
        self.pending: Dict[bytes, WhitelistBlock] = {}
        # control height when each pending block arrived
        self.pending_since: Dict[bytes, int] = {}
        self.forks_created: Dict[DeviceFingerprint, int] = {}
        self.control_forks = 0
        self._cumulative: Dict[bytes, frozenset] = {}
        self._control_children: Dict[bytes, int] = {}
        self._seq = 0

        self.genesis_hash = control_hash(CONTROL_GENESIS)
        self.control_blocks[self.genesis_hash] = CONTROL_GENESIS
        self.control_height[self.genesis_hash] = 0
        self.receipt[self.genesis_hash] = self._next_seq()
        self.control_tip = self.genesis_hash

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    # ---------------------------------------------------------------- queries

    def has_chain(self, chain_id: DeviceFingerprint) -> bool:
        return bool(self.tips.get(chain_id))

    def chains(self) -> List[DeviceFingerprint]:
        return sorted(c for c, t in self.tips.items() if t)

    def height(self, block_hash: bytes) -> int:
        if block_hash in self.device_height:
            return self.device_height[block_hash]
        return self.control_height[block_hash]

    def cumulative(self, block_hash: bytes) -> frozenset:
        """Union of signatures from the chain genesis up to block_hash (cached)"""
        return self._cumulative[block_hash]

    def ancestors(self, block_hash: Optional[bytes]) -> Iterator[bytes]:
        """block_hash, its parent, ... back to the device-chain genesis"""
        while block_hash is not None and block_hash in self.device_blocks:
            yield block_hash
            prev = self.device_blocks[block_hash].prev_hash
            block_hash = None if prev == ZERO_HASH else prev

    def is_ancestor(self, ancestor: bytes, block_hash: bytes) -> bool:
        if ancestor not in self.device_height:
            return False
        target_height = self.device_height[ancestor]
        h: Optional[bytes] = block_hash
        while h is not None and h in self.device_blocks and self.device_height[h] > target_height:
            prev = self.device_blocks[h].prev_hash
            h = None if prev == ZERO_HASH else prev
        return h == ancestor

    def control_path(self, tip: Optional[bytes] = None) -> List[bytes]:
        """Control block hashes from genesis to tip (longest chain by default)"""
        h = tip or self.control_tip
        path = []
        while True:
            path.append(h)
            if h == self.genesis_hash:
                break
            h = self.control_blocks[h].prev_hash
        path.reverse()
        return path

    # ---------------------------------------------------------------- control

    def add_control_block(self, block: ControlBlock, block_hash: Optional[bytes] = None) -> StoreResult:
        h = block_hash or control_hash(block)
        if h in self.control_blocks:
            return StoreResult(ValidityReport.valid(), h, known=True)
        report = validate_control_block(block, self, self.mode, block_hash=h)
        if not report.ok:
            return StoreResult(report, h)

        prev = block.prev_hash
        self.control_blocks[h] = block
        self.control_height[h] = self.control_height[prev] + 1
        self.receipt[h] = self._next_seq()
        n_children = self._control_children.get(prev, 0) + 1
        self._control_children[prev] = n_children
        if n_children > 1:
            self.control_forks += 1

        result = StoreResult(report, h)
        old_tip = self.control_tip
        if self.anchor_all:
            newly = set(block.whitelist_headers) - self.confirmed_header_index
            self.confirmed_header_index.update(block.whitelist_headers)
            if self.control_height[h] > self.control_height[old_tip]:
                self.control_tip = h
                result.reorg = prev != old_tip
            result.promoted = self._promote_pending(newly)
        elif self.control_height[h] > self.control_height[old_tip]:
            self.control_tip = h
            if prev == old_tip:
                newly = set(block.whitelist_headers) - self.confirmed_header_index
                self.confirmed_header_index.update(block.whitelist_headers)
            else:
                result.reorg = True
                before = self.confirmed_header_index
                self.confirmed_header_index = self._headers_on_path(h)
                newly = self.confirmed_header_index - before
                logger.debug(f"control reorg to height {self.control_height[h]}")
            result.promoted = self._promote_pending(newly)
        return result

    def _headers_on_path(self, tip: bytes) -> Set[bytes]:
        index: Set[bytes] = set()
        for h in self.control_path(tip):
            index.update(self.control_blocks[h].whitelist_headers)
        return index

    def _promote_pending(self, newly_confirmed: Iterable[bytes]) -> List[bytes]:
        promoted = []
        for hh in sorted(newly_confirmed):
            block = self.pending.pop(hh, None)
            self.pending_since.pop(hh, None)
            if block is not None and self.add_whitelist_block(block, hh).report.ok:
                promoted.append(hh)
        return promoted

    # ---------------------------------------------------------------- devices

    def add_whitelist_block(self, block: WhitelistBlock, block_hash: Optional[bytes] = None) -> StoreResult:
        h = block_hash or header_hash(block)
        if h in self.device_blocks:
            return StoreResult(ValidityReport.valid(), h, known=True)
        report = validate_whitelist_block(block, self, block_hash=h)
        if report.status is Validity.PENDING:
            self.pending[h] = block
            self.pending_since.setdefault(h, self.control_height[self.control_tip])
            return StoreResult(report, h)
        if not report.ok:
            return StoreResult(report, h)

        self.pending.pop(h, None)
        self.pending_since.pop(h, None)
        chain = block.chain_id
        self.device_blocks[h] = block
        self.receipt[h] = self._next_seq()
        if block.is_genesis:
            self.device_height[h] = 0
            parent_cum = _EMPTY
        else:
            prev = block.prev_hash
            self.device_height[h] = self.device_height[prev] + 1
            parent_cum = self._cumulative[prev]
            siblings = self.children.setdefault(prev, set())
            if siblings:
                self.forks_created[chain] = self.forks_created.get(chain, 0) + 1
            siblings.add(h)
        self._cumulative[h] = parent_cum | frozenset(block.signatures) if block.signatures else parent_cum
        self.chain_blocks.setdefault(chain, set()).add(h)
        tips = self.tips.setdefault(chain, set())
        tips.discard(block.prev_hash)
        tips.add(h)
        return StoreResult(report, h)

    def remove_device_block(self, block_hash: bytes) -> None:
        block = self.device_blocks.pop(block_hash)
        chain = block.chain_id
        self.device_height.pop(block_hash, None)
        self.receipt.pop(block_hash, None)
        self._cumulative.pop(block_hash, None)
        self.children.pop(block_hash, None)
        self.chain_blocks[chain].discard(block_hash)
        self.tips[chain].discard(block_hash)
        if not block.is_genesis:
            siblings = self.children.get(block.prev_hash)
            if siblings is not None:
                siblings.discard(block_hash)
                if not siblings:
                    del self.children[block.prev_hash]
                    if block.prev_hash in self.device_blocks:
                        self.tips[chain].add(block.prev_hash)

    def drop_stale_pending(self, chain_id: DeviceFingerprint, depth: int) -> int:
        """Forget pending blocks of a chain that waited `depth` control blocks without being anchored"""
        height = self.control_height[self.control_tip]
        stale = [
            h for h, block in self.pending.items()
            if block.chain_id == chain_id and height - self.pending_since[h] >= depth
        ]
        for h in stale:
            del self.pending[h]
            del self.pending_since[h]
        return len(stale)


# -------------------------------------------------------------------- validation


def validate_whitelist_block(
    block: WhitelistBlock, store: ChainStore, block_hash: Optional[bytes] = None
) -> ValidityReport:
    """VALID iff parent resolves, no duplicates, and the header is anchored on the longest control chain"""
    reasons = []
    if not block.is_genesis:
        parent = store.device_blocks.get(block.prev_hash)
        if parent is None:
            reasons.append("orphan")
        elif parent.chain_id != block.chain_id:
            reasons.append("chain_mismatch")
    if len(set(block.signatures)) != len(block.signatures):
        reasons.append("duplicate")
    if len(block.sentinel_address) != 32:
        reasons.append("address_size")
    if reasons:
        return ValidityReport.invalid(*reasons)
    h = block_hash or header_hash(block)
    if h not in store.confirmed_header_index:
        return ValidityReport.pending("unanchored")
    return ValidityReport.valid()


def validate_control_block(
    block: ControlBlock,
    store: ChainStore,
    mode: PowMode,
    block_hash: Optional[bytes] = None,
) -> ValidityReport:
    """Linkage always; the hash threshold only in REAL_POW mode"""
    reasons = []
    if block.prev_hash not in store.control_blocks:
        reasons.append("orphan")
    if any(len(hh) != 32 for hh in block.whitelist_headers):
        reasons.append("header_size")
    if len(set(block.whitelist_headers)) != len(block.whitelist_headers):
        reasons.append("duplicate")
    if mode is PowMode.REAL_POW:
        if block.target != store.target:
            reasons.append("target")
        h = block_hash or control_hash(block)
        if hash_value(h) >= block.target:
            reasons.append("pow")
    if reasons:
        return ValidityReport.invalid(*reasons)
    return ValidityReport.valid()


# -------------------------------------------------------------------- derivation


def resolve_fork(
    chain_id: DeviceFingerprint,
    store: ChainStore,
    candidates: Optional[Iterable[bytes]] = None,
) -> bytes:
    """Highest tip; on equal height the one received first"""
    tips = list(candidates) if candidates is not None else list(store.tips.get(chain_id, ()))
    if not tips:
        raise LedgerError(f"no blocks for chain {chain_id.short}")
    return max(tips, key=lambda h: (store.device_height[h], -store.receipt[h]))


def derive_whitelist(
    chain_id: DeviceFingerprint,
    store: ChainStore,
    tip: Optional[bytes] = None,
    recompute: bool = False,
) -> Whitelist:
    """Cumulative signatures along the longest branch (or along `tip`)"""
    if not store.has_chain(chain_id):
        raise LedgerError(f"unknown chain {chain_id.short}")
    tip = tip or resolve_fork(chain_id, store)
    if not recompute:
        return Whitelist(chain_id, store.cumulative(tip))
    allowed: Set[PacketSignature] = set()
    for h in store.ancestors(tip):
        allowed.update(store.device_blocks[h].signatures)
    return Whitelist(chain_id, frozenset(allowed))


def prune_rejected_forks(
    chain_id: DeviceFingerprint,
    store: ChainStore,
    depth: int,
    keep_tip: Optional[bytes] = None,
) -> int:
    """Drop branches whose tip is at least `depth` blocks behind the kept tip.

    Pending blocks of the chain left unanchored for `depth` control blocks go too;
    only removed stored blocks are counted.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    dropped = store.drop_stale_pending(chain_id, depth)
    if dropped:
        logger.debug(f"dropped {dropped} stale pending blocks of {chain_id.short}")
    if not store.has_chain(chain_id):
        return 0
    keep = keep_tip or resolve_fork(chain_id, store)
    keep_height = store.device_height[keep]
    stale = sorted(
        t for t in store.tips[chain_id] if t != keep and store.device_height[t] <= keep_height - depth
    )
    if not stale:
        return 0
    keep_path = set(store.ancestors(keep))
    removed = 0
    for tip in stale:
        h: Optional[bytes] = tip
        while h is not None and h not in keep_path and not store.children.get(h):
            prev = store.device_blocks[h].prev_hash
            store.remove_device_block(h)
            removed += 1
            h = None if prev == ZERO_HASH else prev
            if h is not None and h not in store.device_blocks:
                h = None
    return removed
