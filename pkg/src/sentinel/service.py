"""Sentinel: per-node profiling, filtering, mining and chain convergence"""

from __future__ import annotations
import hashlib
import logging
from collections import deque
from dataclasses import dataclass
from typing import Callable, Deque, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from consensus.activity import ActivityLedger
from consensus.models import OutcomeKind, PowContext
from consensus.pow import mine_step, schedule_block_delay
from ledger.encoding import control_hash, header_hash
from ledger.models import ZERO_HASH, ControlBlock, PowMode, Validity, WhitelistBlock
from ledger.store import ChainStore, prune_rejected_forks, resolve_fork
from netsim.models import Envelope, EventKind, SimEvent
from sentinel import messages as msg
from sentinel.events import EventLog
from sentinel.messages import (
    BlockAnnouncement,
    ShareMessage,
    SyncRequest,
    SyncResponse,
    TimerTag,
)
from sentinel.models import (
    DeviceState,
    FilterDecision,
    Phase,
    SentinelCfg,
    SentinelError,
    Verdict,
)
from sigcore.models import DeviceFingerprint, PacketRecord, PacketSignature
from sigcore.signatures import compute_fingerprint, compute_signature

logger = logging.getLogger(__name__)

WinObserver = Callable[[str, ControlBlock, Tuple[WhitelistBlock, ...], float], None]


def sentinel_address_new(rng: np.random.Generator) -> bytes:
    """SHA-256 of 32 random bytes"""
    return hashlib.sha256(rng.bytes(32)).digest()


def block_locator(path: List[bytes]) -> Tuple[bytes, ...]:
    """Tip, tip-1, tip-2, tip-4, ... and always the genesis"""
    out = []
    i, step = len(path) - 1, 1
    while i > 0:
        out.append(path[i])
        if len(out) >= 2:
            step *= 2
        i -= step
    out.append(path[0])
    return tuple(out)


@dataclass
class _SyncState:
    peer: str
    chain_id: Optional[DeviceFingerprint]
    bootstrap: bool
    attempts: int = 1
    timer: Optional[SimEvent] = None


class Sentinel:
    """One simulated node.

    Single-threaded: every entry point runs inside the simulator's event loop.
    """

    def __init__(
        self,
        node_id: str,
        sim,
        cfg: SentinelCfg,
        pow_ctx: PowContext,
        rng: np.random.Generator,
        events: Optional[EventLog] = None,
        address: Optional[bytes] = None,
    ):
        self.node_id = node_id
        self.sim = sim
        self.cfg = cfg
        self.pow = pow_ctx
        self.rng = rng
        self.address = address or sentinel_address_new(rng)
        self.events = events if events is not None else EventLog(enabled=False)
        self.store = ChainStore(mode=pow_ctx.mode, target=pow_ctx.target)
        self.activity = ActivityLedger(cfg.share_window)

        self.devices: Dict[str, DeviceState] = {}
        self.subscriptions: Dict[str, DeviceFingerprint] = {}
        self.observed: Dict[DeviceFingerprint, Dict[PacketSignature, None]] = {}
        self.adopted: Dict[DeviceFingerprint, Set[PacketSignature]] = {}
        self.founding: Dict[DeviceFingerprint, Tuple[PacketSignature, ...]] = {}
        self.chosen_tip: Dict[DeviceFingerprint, bytes] = {}
        self.bootstrapping: Set[DeviceFingerprint] = set()
        self.observers: List[WinObserver] = []

        self._whitelists: Dict[DeviceFingerprint, frozenset] = {}
        self._orphans: Dict[bytes, List[Tuple[str, BlockAnnouncement]]] = {}
        self._orphan_order: Deque[bytes] = deque()
        self._sync: Dict[str, _SyncState] = {}
        self._sync_seq = 0
        self._throttle: Dict[str, Deque[float]] = {}
        self._pow_key: Optional[tuple] = None
        self._pow_candidate: Optional[Tuple[ControlBlock, Tuple[WhitelistBlock, ...]]] = None
        self._pow_nonce = 0
        self.wins = 0

    # ------------------------------------------------------------ lifecycle

    def start(self) -> None:
        """Arm mining and share timers"""
        if not self.cfg.mining:
            return
        if self.pow.mode is PowMode.SIMULATED:
            self.sim.schedule(schedule_block_delay(self.pow, self.rng), EventKind.MINING_RESULT, self.node_id)
        else:
            self.sim.schedule(self.cfg.pow_tick, EventKind.TIMER, self.node_id, TimerTag(msg.POW_TICK))
        if self.cfg.activity_shares and self.pow.mode is PowMode.SIMULATED:
            self._schedule_share()

    def _schedule_share(self) -> None:
        delay = float(self.rng.exponential(self.cfg.share_interval))
        self.sim.schedule(delay, EventKind.TIMER, self.node_id, TimerTag(msg.SHARE))

    def handle(self, ev: SimEvent) -> None:
        """Entry point for every non-packet event addressed to this node"""
        if ev.kind is EventKind.MESSAGE_DELIVERY:
            env: Envelope = ev.payload
            self.on_message(env.sender, env.message)
        elif ev.kind is EventKind.MINING_RESULT:
            self.on_mining_result(ev.payload)
        elif ev.kind is EventKind.TIMER:
            self.on_timer(ev.payload)
        else:
            raise SentinelError(f"unexpected event {ev.kind.value}")

    # -------------------------------------------------------------- devices

    def on_device_connected(self, device_id: str, now: float, profiling_duration: Optional[float] = None) -> Phase:
        if device_id in self.devices:
            raise SentinelError(f"device {device_id} already connected")
        duration = self.cfg.profiling_duration if profiling_duration is None else profiling_duration
        self.devices[device_id] = DeviceState(device_id, Phase.PROFILING, now + duration)
        if duration <= 0:
            self.finish_profiling(device_id, now)
        else:
            self.sim.schedule(duration, EventKind.TIMER, self.node_id, TimerTag(msg.PROFILE_DONE, device_id))
        return self.devices[device_id].phase

    def finish_profiling(self, device_id: str, now: float) -> Optional[DeviceFingerprint]:
        """Fingerprint the device and subscribe; a silent device stays in PROFILING"""
        dev = self._device(device_id)
        if dev.phase is Phase.ENFORCING:
            return dev.chain_id
        if not dev.profiled:
            logger.debug(f"{self.node_id}: {device_id} silent after profiling, waiting for first packet")
            return None
        chain = compute_fingerprint(dev.profiled)
        dev.chain_id = chain
        dev.phase = Phase.ENFORCING
        self.subscriptions[device_id] = chain
        observed = self.observed.setdefault(chain, {})
        for sig in dev.profiled:
            observed.setdefault(sig, None)
        self.adopted.setdefault(chain, set())
        self.events.record(now, self.node_id, "subscribe", device=device_id, chain=chain.hex, signatures=len(dev.profiled))

        if not self.store.has_chain(chain) and chain not in self.founding:
            self.founding[chain] = tuple(sorted(dev.profiled))
            self.events.record(now, self.node_id, "found_chain", chain=chain.hex)
            peers = self._bootstrap_peers()
            if peers:
                self.bootstrapping.add(chain)
            for peer in peers:
                self.request_sync(peer, chain, bootstrap=True)
        self._update_tip(chain, now)
        return chain

    def _bootstrap_peers(self) -> List[str]:
        """Up to sync_fanout neighbours, drawn from the node's own generator"""
        neighbors = self.sim.neighbors(self.node_id)
        if len(neighbors) <= self.cfg.sync_fanout:
            return list(neighbors)
        picked = self.rng.choice(len(neighbors), size=self.cfg.sync_fanout, replace=False)
        return [neighbors[i] for i in sorted(picked)]

    def _device(self, device_id: str) -> DeviceState:
        dev = self.devices.get(device_id)
        if dev is None:
            raise SentinelError(f"unknown device {device_id}")
        return dev

    def on_packet(self, device_id: str, record: PacketRecord, now: float) -> FilterDecision:
        dev = self._device(device_id)
        sig = compute_signature(record)
        if dev.phase is Phase.PROFILING:
            dev.profiled.setdefault(sig, None)
            dev.profile_passed += 1
            if self.cfg.log_all_decisions:
                self.events.record(now, self.node_id, "decision", device=device_id, verdict=Verdict.PROFILE_PASS.value, signature=sig.hex)
            if now >= dev.profiling_until:
                self.finish_profiling(device_id, now)
            return FilterDecision(Verdict.PROFILE_PASS, sig, "profiling")

        chain = dev.chain_id
        if sig in self.whitelist(chain):
            dev.forwarded += 1
            if self.cfg.log_all_decisions:
                self.events.record(now, self.node_id, "decision", device=device_id, verdict=Verdict.FORWARD.value, signature=sig.hex)
            return FilterDecision(Verdict.FORWARD, sig, "whitelisted")

        dev.dropped += 1
        self.events.record(now, self.node_id, "decision", device=device_id, verdict=Verdict.DROP.value, signature=sig.hex)
        observed = self.observed[chain]
        if sig not in observed:
            observed[sig] = None
            self.events.record(now, self.node_id, "observe", chain=chain.hex, signature=sig.hex)
            if len(self.store.tips.get(chain, ())) > 1:
                self._update_tip(chain, now)
        return FilterDecision(Verdict.DROP, sig, "unknown signature")

    # ------------------------------------------------------------ whitelist

    def recognized(self, chain: DeviceFingerprint) -> Set[PacketSignature]:
        return set(self.observed.get(chain, ())) | self.adopted.get(chain, set())

    def whitelist(self, chain: DeviceFingerprint) -> frozenset:
        """Cumulative signatures of the chosen branch, or the founding set before any block is stored"""
        wl = self._whitelists.get(chain)
        if wl is None:
            tip = self.chosen_tip.get(chain)
            if tip is not None:
                wl = self.store.cumulative(tip)
            else:
                wl = frozenset(self.founding.get(chain, ()))
            self._whitelists[chain] = wl
        return wl

    def subscribed_chains(self) -> List[DeviceFingerprint]:
        return sorted(set(self.subscriptions.values()))

    def _acceptable_point(self, tip: bytes, recognized: Set[PacketSignature]) -> Optional[bytes]:
        """Highest block on tip's branch whose cumulative signatures are all recognized"""
        for h in self.store.ancestors(tip):
            if self.store.cumulative(h) <= recognized:
                return h
        return None

    def _update_tip(self, chain: DeviceFingerprint, now: float) -> None:
        """Choose the local branch; adopt a foreign one leading by confirmation_depth"""
        if chain not in self.observed:
            return
        tips = sorted(self.store.tips.get(chain, ()))
        if not tips:
            return
        recognized = self.recognized(chain)
        acceptable = set()
        foreign = []
        for t in tips:
            point = self._acceptable_point(t, recognized)
            if point is not None:
                acceptable.add(point)
            if point != t:
                foreign.append(t)
        local = resolve_fork(chain, self.store, acceptable) if acceptable else None
        local_height = self.store.device_height[local] if local is not None else -1
        if foreign:
            best = resolve_fork(chain, self.store, foreign)
            lead = self.store.device_height[best] - local_height
            if lead >= self.cfg.confirmation_depth:
                new_sigs = self.store.cumulative(best) - recognized
                self.adopted[chain].update(new_sigs)
                self.events.record(
                    now, self.node_id, "adopt", chain=chain.hex, tip=best.hex(), lead=lead,
                    signatures=sorted(s.hex for s in new_sigs),
                )
                logger.debug(f"{self.node_id}: adopted branch of {chain.short} leading by {lead}")
                acceptable.add(best)
                local = resolve_fork(chain, self.store, acceptable)
        if local is not None:
            self._set_tip(chain, local, now)

    def _set_tip(self, chain: DeviceFingerprint, tip: bytes, now: float) -> None:
        old = self.chosen_tip.get(chain)
        if old == tip:
            return
        before = self.whitelist(chain)
        self.chosen_tip[chain] = tip
        self._whitelists.pop(chain, None)
        after = self.whitelist(chain)
        if old is not None and not self.store.is_ancestor(old, tip):
            self.events.record(
                now, self.node_id, "reorg", chain=chain.hex, old=old.hex(), new=tip.hex(),
                removed=sorted(s.hex for s in before - after),
            )
        for sig in sorted(after - before):
            self.events.record(now, self.node_id, "whitelist_admit", chain=chain.hex, signature=sig.hex)

    # --------------------------------------------------------------- mining

    def candidate_signatures(self, chain: DeviceFingerprint) -> Tuple[PacketSignature, ...]:
        wl = self.whitelist(chain)
        return tuple(s for s in self.observed.get(chain, ()) if s not in wl)

    def build_round_candidates(self, now: float) -> Tuple[ControlBlock, List[WhitelistBlock]]:
        """One whitelist candidate per subscribed chain plus the control candidate listing them"""
        chains = self.subscribed_chains()
        if not chains:
            raise SentinelError(f"{self.node_id} has no subscriptions")
        blocks = []
        for chain in chains:
            tip = self.chosen_tip.get(chain)
            if tip is None:
                block = WhitelistBlock(ZERO_HASH, chain, self.address, now, self.founding[chain])
            else:
                block = WhitelistBlock(tip, chain, self.address, now, self.candidate_signatures(chain))
            blocks.append(block)
        control = ControlBlock(
            prev_hash=self.store.control_tip,
            timestamp=now,
            sentinel_address=self.address,
            whitelist_headers=tuple(header_hash(b) for b in blocks),
            nonce=0,
            target=self.pow.target,
        )
        return control, blocks

    def on_mining_result(self, solved: Optional[Tuple[ControlBlock, Tuple[WhitelistBlock, ...]]] = None) -> None:
        """SIMULATED: the race timer fired. REAL_POW: `solved` carries the solved candidate"""
        now = self.sim.now
        if self.pow.mode is PowMode.SIMULATED:
            if self.subscriptions:
                self.on_block_win(now)
            self.sim.schedule(schedule_block_delay(self.pow, self.rng), EventKind.MINING_RESULT, self.node_id)
        elif solved is not None:
            control, blocks = solved
            self.on_block_win(now, control, blocks)
            self._pow_key = None

    def _pow_tick(self) -> None:
        now = self.sim.now
        self.sim.schedule(self.cfg.pow_tick, EventKind.TIMER, self.node_id, TimerTag(msg.POW_TICK))
        if not self.subscriptions:
            return
        key = (self.store.control_tip, tuple(self.chosen_tip.get(c) for c in self.subscribed_chains()),
               sum(len(o) for o in self.observed.values()))
        if key != self._pow_key:
            control, blocks = self.build_round_candidates(now)
            self._pow_candidate = (control, tuple(blocks))
            self._pow_key = key
            self._pow_nonce = 0
        control, blocks = self._pow_candidate
        budget = max(1, int(self.cfg.nonces_per_tick * self.pow.hash_weight))
        shared = False
        while budget > 0:
            out = mine_step(control, self.pow, budget, self._pow_nonce)
            budget -= out.next_nonce - self._pow_nonce
            self._pow_nonce = out.next_nonce
            if out.kind is OutcomeKind.SOLVED:
                solved = (control.with_nonce(out.nonce), blocks)
                self.sim.schedule(0.0, EventKind.MINING_RESULT, self.node_id, solved)
                self._pow_key = None
                break
            if out.kind is OutcomeKind.SHARE and not shared and self.cfg.activity_shares:
                self._broadcast_share(out.nonce)
                shared = True
            if out.kind is OutcomeKind.EXHAUSTED:
                break

    def on_block_win(
        self,
        now: float,
        control: Optional[ControlBlock] = None,
        blocks: Optional[Iterable[WhitelistBlock]] = None,
    ) -> List[str]:
        """Append the candidates locally and broadcast them; returns the peers sent to"""
        if control is None:
            control, blocks = self.build_round_candidates(now)
        blocks = tuple(blocks or ())
        res = self.store.add_control_block(control)
        if not res.report.ok:
            logger.warning(f"{self.node_id}: own control block invalid {res.report.reasons}")
            return []
        touched = set()
        for block in blocks:
            self.store.add_whitelist_block(block)
            touched.add(block.chain_id)
        for chain in sorted(touched):
            self.founding.pop(chain, None)
            self._update_tip(chain, now)
        self.wins += 1
        self.events.record(
            now, self.node_id, "win", control=res.block_hash.hex(),
            chains=[b.chain_id.hex for b in blocks], signatures=sum(len(b.signatures) for b in blocks),
        )
        ann = BlockAnnouncement(control, blocks)
        peers = [p for p in self.sim.neighbors(self.node_id) if self.peer_active(p, now)]
        for peer in peers:
            self.sim.deliver(self.node_id, peer, ann)
        for observer in self.observers:
            observer(self.node_id, control, blocks, now)
        return peers

    def peer_active(self, peer: str, now: float) -> bool:
        """Shares seen within the window; everyone counts as active during the first window"""
        if not self.cfg.activity_shares or now < self.activity.window:
            return True
        return self.activity.is_peer_active(peer, now)

    def _broadcast_share(self, nonce: Optional[int] = None) -> None:
        share = ShareMessage(nonce)
        for peer in self.sim.neighbors(self.node_id):
            self.sim.deliver(self.node_id, peer, share)

    # -------------------------------------------------------------- messages

    def on_message(self, sender: str, message) -> None:
        now = self.sim.now
        if isinstance(message, BlockAnnouncement):
            self.on_control_block_received(sender, message, now)
        elif isinstance(message, ShareMessage):
            self.activity.record_share(sender, now, message.nonce)
        elif isinstance(message, SyncRequest):
            self._on_sync_request(sender, message, now)
        elif isinstance(message, SyncResponse):
            self._on_sync_response(sender, message, now)
        else:
            raise SentinelError(f"unknown message {type(message).__name__}")

    def on_timer(self, tag: TimerTag) -> None:
        now = self.sim.now
        if tag.name == msg.CONNECT:
            self.on_device_connected(tag.arg, now)
        elif tag.name == msg.PROFILE_DONE:
            self.finish_profiling(tag.arg, now)
        elif tag.name == msg.SYNC_TIMEOUT:
            self._on_sync_timeout(tag.arg, now)
        elif tag.name == msg.SYNC_REPLY:
            requester, request = tag.arg
            self.sim.deliver(self.node_id, requester, self._build_sync_response(request))
        elif tag.name == msg.SHARE:
            self._broadcast_share()
            self._schedule_share()
        elif tag.name == msg.POW_TICK:
            self._pow_tick()
        else:
            raise SentinelError(f"unknown timer {tag.name}")

    def on_control_block_received(self, sender: str, ann: BlockAnnouncement, now: float) -> None:
        """Always store the control block; store subscribed whitelist blocks and choose tips"""
        control = ann.control
        ch = control_hash(control)
        if ch in self.store.control_blocks:
            return
        res = self.store.add_control_block(control, ch)
        if not res.report.ok:
            if "orphan" in res.report.reasons:
                self._stash(control.prev_hash, sender, ann)
                self.request_sync(sender, None)
            else:
                self.events.record(now, self.node_id, "block_invalid", block=ch.hex(), reasons=list(res.report.reasons))
                logger.debug(f"{self.node_id}: invalid control block {res.report.reasons}")
            return

        touched: Set[DeviceFingerprint] = set()
        relayed: List[WhitelistBlock] = []
        for block in ann.whitelist_blocks:
            if block.chain_id not in self.observed:
                relayed.append(block)
                continue
            rejected = self._receive_whitelist_block(sender, block, ann, now)
            if rejected is not None:
                touched.add(block.chain_id)
                if not rejected:
                    relayed.append(block)
        touched.update(self.store.device_blocks[h].chain_id for h in res.promoted if h in self.store.device_blocks)
        for h in [ch, *(header_hash(b) for b in ann.whitelist_blocks)]:
            self._replay_orphans(h, now)
        for chain in sorted(touched):
            self._update_tip(chain, now)
            self._prune(chain, now)

        if self.cfg.relay_blocks:
            fwd = BlockAnnouncement(control, tuple(relayed))
            for peer in self.sim.neighbors(self.node_id):
                if peer != sender and self.peer_active(peer, now):
                    self.sim.deliver(self.node_id, peer, fwd)

    def _receive_whitelist_block(self, sender: str, block: WhitelistBlock, ann: BlockAnnouncement, now: float) -> Optional[bool]:
        """Store one subscribed block; returns True if rejected for extension, None if not stored"""
        hh = header_hash(block)
        res = self.store.add_whitelist_block(block, hh)
        if res.known:
            return None
        status = res.report.status
        if status is Validity.INVALID:
            if "orphan" in res.report.reasons:
                self._stash(block.prev_hash, sender, BlockAnnouncement(ann.control, (block,)))
                self.request_sync(sender, block.chain_id)
            else:
                self.events.record(now, self.node_id, "block_invalid", block=hh.hex(), reasons=list(res.report.reasons))
            return None
        if status is Validity.PENDING:
            return None
        unknown = set(block.signatures) - self.recognized(block.chain_id)
        if unknown:
            self.events.record(
                now, self.node_id, "block_reject", chain=block.chain_id.hex, block=hh.hex(),
                height=self.store.device_height[hh], unknown=sorted(s.hex for s in unknown),
            )
            return True
        self.events.record(now, self.node_id, "block_accept", chain=block.chain_id.hex, block=hh.hex(), height=self.store.device_height[hh])
        return False

    def _prune(self, chain: DeviceFingerprint, now: float) -> None:
        if chain not in self.chosen_tip:
            return
        removed = prune_rejected_forks(chain, self.store, self.cfg.prune_depth, keep_tip=self.chosen_tip[chain])
        if removed:
            self.events.record(now, self.node_id, "prune", chain=chain.hex, removed=removed)

    # ----------------------------------------------------------------- orphans

    def _stash(self, missing: bytes, sender: str, ann: BlockAnnouncement) -> None:
        self._orphans.setdefault(missing, []).append((sender, ann))
        self._orphan_order.append(missing)
        while len(self._orphan_order) > self.cfg.max_orphans:
            self._orphans.pop(self._orphan_order.popleft(), None)

    def _replay_orphans(self, parent: bytes, now: float) -> None:
        waiting = self._orphans.pop(parent, None)
        if not waiting:
            return
        for sender, ann in waiting:
            ch = control_hash(ann.control)
            if ch not in self.store.control_blocks:
                self.on_control_block_received(sender, ann, now)
                continue
            touched = set()
            for block in ann.whitelist_blocks:
                if block.chain_id in self.observed and self._receive_whitelist_block(sender, block, ann, now) is not None:
                    touched.add(block.chain_id)
                    self._replay_orphans(header_hash(block), now)
            for chain in sorted(touched):
                self._update_tip(chain, now)

    # -------------------------------------------------------------------- sync

    def request_sync(self, peer: str, chain_id: Optional[DeviceFingerprint], bootstrap: bool = False) -> Optional[str]:
        """Ask a neighbour for a chain (or only the control chain); bootstrap responses may be adopted"""
        for rid, st in self._sync.items():
            if st.peer == peer and st.chain_id == chain_id and st.bootstrap == bootstrap:
                return None
        self._sync_seq += 1
        rid = f"{self.node_id}:{self._sync_seq}"
        st = _SyncState(peer, chain_id, bootstrap)
        self._sync[rid] = st
        self._send_sync(rid, st)
        return rid

    def _send_sync(self, rid: str, st: _SyncState) -> None:
        locator = block_locator(self.store.control_path())
        self.sim.deliver(self.node_id, st.peer, SyncRequest(rid, st.chain_id, locator, st.bootstrap))
        st.timer = self.sim.schedule(self.cfg.sync_timeout, EventKind.TIMER, self.node_id, TimerTag(msg.SYNC_TIMEOUT, rid))
        self.events.record(
            self.sim.now, self.node_id, "sync_request", peer=st.peer, request=rid,
            chain=st.chain_id.hex if st.chain_id else None, bootstrap=st.bootstrap, attempt=st.attempts,
        )

    def _on_sync_timeout(self, rid: str, now: float) -> None:
        st = self._sync.get(rid)
        if st is None:
            return
        if st.attempts > self.cfg.sync_retries:
            del self._sync[rid]
            self.events.record(now, self.node_id, "sync_give_up", peer=st.peer, request=rid)
            logger.debug(f"{self.node_id}: gave up sync {rid} with {st.peer}")
            self._finish_bootstrap(st.chain_id)
            return
        st.attempts += 1
        self._send_sync(rid, st)

    def _on_sync_request(self, requester: str, req: SyncRequest, now: float) -> None:
        window = self._throttle.setdefault(requester, deque())
        while window and window[0] < now - self.cfg.sync_throttle_window:
            window.popleft()
        window.append(now)
        delay = self.cfg.sync_throttle_base * 2 ** (len(window) - 1)
        self.sim.schedule(delay, EventKind.TIMER, self.node_id, TimerTag(msg.SYNC_REPLY, (requester, req)))

    def _build_sync_response(self, req: SyncRequest) -> SyncResponse:
        path = self.store.control_path()
        on_path = {h: i for i, h in enumerate(path)}
        start = 0
        for h in req.locator:
            if h in on_path:
                start = on_path[h] + 1
                break
        controls = tuple(self.store.control_blocks[h] for h in path[start:])
        blocks: Tuple[WhitelistBlock, ...] = ()
        if req.chain_id is not None and req.chain_id in self.store.chain_blocks:
            hashes = sorted(
                self.store.chain_blocks[req.chain_id],
                key=lambda h: (self.store.device_height[h], self.store.receipt[h]),
            )
            blocks = tuple(self.store.device_blocks[h] for h in hashes)
        tip = self.chosen_tip.get(req.chain_id) if req.chain_id is not None else None
        return SyncResponse(req.request_id, req.chain_id, controls, blocks, tip)

    def _on_sync_response(self, sender: str, resp: SyncResponse, now: float) -> None:
        st = self._sync.pop(resp.request_id, None)
        if st is None:
            return
        if st.timer is not None:
            self.sim.cancel(st.timer)
        new_hashes = []
        for control in resp.control_blocks:
            res = self.store.add_control_block(control)
            if res.report.ok and not res.known:
                new_hashes.append(res.block_hash)
        chain = resp.chain_id
        imported = []
        if chain is not None and chain in self.observed:
            for block in resp.whitelist_blocks:
                res = self.store.add_whitelist_block(block)
                if res.report.ok:
                    imported.append(res.block_hash)
                    if not res.known:
                        new_hashes.append(res.block_hash)
        self.events.record(
            now, self.node_id, "sync_response", peer=sender, request=resp.request_id,
            control=len(resp.control_blocks), blocks=len(resp.whitelist_blocks), bootstrap=st.bootstrap,
        )
        for h in new_hashes:
            self._replay_orphans(h, now)
        if chain is None or chain not in self.observed:
            return
        if st.bootstrap and chain in self.bootstrapping and imported:
            if resp.tip in self.store.device_blocks:
                best = resp.tip
            else:
                best = resolve_fork(chain, self.store, [h for h in imported if h in self.store.device_blocks])
            new_sigs = self.store.cumulative(best) - self.recognized(chain)
            if new_sigs:
                self.adopted[chain].update(new_sigs)
                self.events.record(
                    now, self.node_id, "adopt", chain=chain.hex, tip=best.hex(), lead=None,
                    signatures=sorted(s.hex for s in new_sigs),
                )
            self.bootstrapping.discard(chain)
            self.founding.pop(chain, None)
        elif st.bootstrap:
            self._finish_bootstrap(chain)
        self._update_tip(chain, now)

    def _finish_bootstrap(self, chain: Optional[DeviceFingerprint]) -> None:
        if chain is None or chain not in self.bootstrapping:
            return
        if not any(s.bootstrap and s.chain_id == chain for s in self._sync.values()):
            self.bootstrapping.discard(chain)
            logger.debug(f"{self.node_id}: founding chain {chain.short}")

    # ----------------------------------------------------------------- reports

    def forwarded(self) -> int:
        return sum(d.forwarded for d in self.devices.values())

    def dropped(self) -> int:
        return sum(d.dropped for d in self.devices.values())
