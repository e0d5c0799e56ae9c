"""End-to-end experiment runs"""

from __future__ import annotations
import logging
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

from config import OUTPUT_DIR
from consensus.models import SHARE_CEILING, PowContext
from consensus.pow import sim_rate_for, target_for
from devsim.attacks import inject_attack
from devsim.io import resolve_traces
from devsim.models import AttackProfile
from devsim.replay import VirtualDevice
from harness.io import write_report
from harness.metrics import build_report
from harness.models import ExperimentConfig, MetricsReport
from ledger.io import export_store
from ledger.models import ControlBlock, PowMode, WhitelistBlock
from ledger.store import ChainStore
from netsim.models import EventKind, SimEvent, TopologyConfig
from netsim.rng import child_rng
from netsim.simulator import Simulator
from sentinel.events import EventLog
from sentinel.messages import CONNECT, TimerTag
from sentinel.models import SentinelCfg
from sentinel.service import Sentinel, sentinel_address_new
from sigcore.models import DeviceFingerprint

logger = logging.getLogger(__name__)

HARNESS = "harness"
DEVICE_STREAM_STRIDE = 1000


class ChainArchive:
    """Passive observer storing every broadcast block; never prunes"""

    def __init__(self, mode: PowMode, target: int):
        self.store = ChainStore(mode=mode, target=target, anchor_all=True)

    def __call__(self, node: str, control: ControlBlock, blocks: Tuple[WhitelistBlock, ...], now: float) -> None:
        res = self.store.add_control_block(control)
        if not res.report.ok:
            logger.warning(f"archive: control block from {node} rejected {res.report.reasons}")
            return
        for block in blocks:
            r = self.store.add_whitelist_block(block)
            if not r.report.ok:
                logger.warning(f"archive: whitelist block from {node} {r.report.status.value} {r.report.reasons}")


def pow_context(config: ExperimentConfig, total_weight: float) -> PowContext:
    if config.pow_mode is PowMode.SIMULATED:
        return PowContext(
            mode=PowMode.SIMULATED,
            sim_rate=sim_rate_for(config.block_interval, total_weight),
        )
    expected = total_weight * config.nonces_per_tick * config.block_interval / config.pow_tick
    target = target_for(expected)
    return PowContext(
        target=target,
        share_target=min(SHARE_CEILING, target * config.share_ratio),
        mode=PowMode.REAL_POW,
    )


class Run:
    """One seeded simulation wired from an ExperimentConfig"""

    def __init__(self, config: ExperimentConfig, seed: int):
        self.config = config
        self.seed = seed
        self.traces = resolve_traces(config.devices)
        if config.attack and config.attack.target_label and config.attack.target_label not in self.traces:
            raise ValueError(f"attack target_label {config.attack.target_label!r} is not among devices")

        topology = TopologyConfig(
            nodes=config.sentinels,
            degree=config.degree,
            latency_min_ms=config.latency_min_ms,
            latency_max_ms=config.latency_max_ms,
            loss=config.loss,
            seed=seed,
        )
        self.sim = Simulator(topology)
        self.events = EventLog(enabled=config.record_events)
        harness_rng = child_rng(seed, "harness")

        n_free = int(config.free_riders * config.sentinels)
        self.free_riders: Set[str] = set()
        if n_free:
            picks = harness_rng.choice(config.sentinels, size=n_free, replace=False)
            self.free_riders = {self.sim.node_ids[int(i)] for i in picks}
        miners = config.sentinels - len(self.free_riders)
        self.pow = pow_context(config, max(miners, 1))

        self.archive = ChainArchive(self.pow.mode, self.pow.target)
        self.sentinels: Dict[str, Sentinel] = {}
        self.devices: List[VirtualDevice] = []
        for i, node in enumerate(self.sim.node_ids):
            cfg = SentinelCfg(
                profiling_duration=config.profiling_duration,
                confirmation_depth=config.confirmation_depth,
                prune_depth=config.prune_depth,
                sync_timeout=config.sync_timeout,
                sync_retries=config.sync_retries,
                sync_fanout=config.sync_fanout,
                relay_blocks=not topology.full_mesh,
                activity_shares=config.activity_shares,
                share_window=10 * config.block_interval,
                mining=node not in self.free_riders,
                pow_tick=config.pow_tick,
                nonces_per_tick=config.nonces_per_tick,
                log_all_decisions=config.log_all_decisions,
            )
            sentinel = Sentinel(
                node,
                self.sim,
                cfg,
                self.pow,
                child_rng(seed, "sentinel", i),
                events=self.events,
                address=sentinel_address_new(child_rng(seed, "address", i)),
            )
            sentinel.observers.append(self.archive)
            self.sentinels[node] = sentinel
            self.sim.register(node, self._dispatcher(sentinel))

            for j, label in enumerate(config.devices):
                device = VirtualDevice(
                    device_id=f"{node}/d{j}",
                    trace=self.traces[label],
                    sentinel_id=node,
                    rng=child_rng(seed, "device", i * DEVICE_STREAM_STRIDE + j),
                    mean_interval=config.replay_interval,
                )
                at = float(harness_rng.uniform(0.0, config.connect_jitter)) if config.connect_jitter else 0.0
                self.sim.schedule(at, EventKind.TIMER, node, TimerTag(CONNECT, device.device_id))
                device.start(self.sim, at)
                self.devices.append(device)

        self.infected: Set[str] = set()
        if config.attack is not None and config.attack.fraction > 0:
            a = config.attack
            population = [d for d in self.devices if a.target_label in (None, d.label)]
            profile = AttackProfile(a.kind, a.fraction, a.start, a.rate, a.target_label)
            self.infected = inject_attack(self.sim, population, profile, child_rng(seed, "attack"))

        self.samples: List[Tuple[float, Dict[DeviceFingerprint, bool]]] = []
        self.sample_interval = config.sample_interval or config.block_interval
        self.sim.register(HARNESS, self._on_sample)
        self.sim.schedule(self.sample_interval, EventKind.TIMER, HARNESS)

        for sentinel in self.sentinels.values():
            sentinel.start()

    def _dispatcher(self, sentinel: Sentinel):
        def dispatch(ev: SimEvent) -> None:
            if ev.kind is EventKind.PACKET_ARRIVAL:
                p = ev.payload
                sentinel.on_packet(p.device.device_id, p.record, ev.fire_at)
                p.device.emit_next(self.sim, p.stream)
            else:
                sentinel.handle(ev)

        return dispatch

    def subscribers(self) -> Dict[DeviceFingerprint, List[Sentinel]]:
        out: Dict[DeviceFingerprint, List[Sentinel]] = {}
        for node in sorted(self.sentinels):
            s = self.sentinels[node]
            for chain in s.subscribed_chains():
                out.setdefault(chain, []).append(s)
        return out

    def _on_sample(self, ev: SimEvent) -> None:
        snapshot = {}
        for chain, subs in self.subscribers().items():
            first = subs[0].whitelist(chain)
            snapshot[chain] = all(s.whitelist(chain) == first for s in subs[1:])
        self.samples.append((self.sim.now, snapshot))
        self.sim.schedule(self.sample_interval, EventKind.TIMER, HARNESS)

    def execute(self) -> MetricsReport:
        logger.info(
            f"Running {self.config.name}: {self.config.sentinels} sentinels, "
            f"{len(self.devices)} devices, seed {self.seed}"
        )
        self.sim.run_until(self.config.duration)
        report = build_report(self)
        logger.info(f"Finished {self.config.name} seed {self.seed}: {self.sim.stats()}")
        return report

    def canonical_tips(self) -> Dict[DeviceFingerprint, bytes]:
        """Per chain the tip chosen by most subscribers; ties to the higher, then earlier archived block"""
        store = self.archive.store
        tips = {}
        for chain, subs in self.subscribers().items():
            votes: Dict[bytes, int] = {}
            for s in subs:
                t = s.chosen_tip.get(chain)
                if t is not None and t in store.device_blocks:
                    votes[t] = votes.get(t, 0) + 1
            if votes:
                tips[chain] = max(votes, key=lambda h: (votes[h], store.device_height[h], -store.receipt[h]))
        return tips

    def labels(self) -> Dict[DeviceFingerprint, str]:
        counts: Dict[DeviceFingerprint, Dict[str, int]] = {}
        by_id = {d.device_id: d for d in self.devices}
        for s in self.sentinels.values():
            for device_id, chain in s.subscriptions.items():
                label = by_id[device_id].label
                c = counts.setdefault(chain, {})
                c[label] = c.get(label, 0) + 1
        return {chain: max(sorted(c), key=c.get) for chain, c in counts.items()}

    def export(self, out_dir: Path) -> Path:
        subs = {chain: len(s) for chain, s in self.subscribers().items()}
        return export_store(self.archive.store, Path(out_dir), self.canonical_tips(), subs, self.labels())


def run_experiment(
    config: ExperimentConfig,
    seed: Optional[int] = None,
    output_dir: Optional[Path] = None,
    write: bool = True,
) -> MetricsReport:
    """Run one seed; with `write` the report, events and chain export land in the output directory"""
    seed = config.seeds[0] if seed is None else seed
    run = Run(config, seed)
    report = run.execute()
    if write:
        base = Path(output_dir or config.output_dir or OUTPUT_DIR)
        out = base / config.name / f"seed-{seed}"
        run.export(out / "export")
        report.artifacts["export"] = "export"
        if config.record_events:
            run.events.write(out / "events.jsonl")
            report.artifacts["events"] = "events.jsonl"
        write_report(report, out)
        logger.info(f"Wrote report to {out}")
    return report


def run_repetitions(config: ExperimentConfig, output_dir: Optional[Path] = None, write: bool = True) -> List[MetricsReport]:
    return [run_experiment(config, seed, output_dir, write) for seed in config.seeds]
