"""Metrics of a finished run"""

from __future__ import annotations
import math
from typing import TYPE_CHECKING, Dict, List, Optional, Set

import numpy as np

from harness.growth import canonical_branch, control_intervals, growth_rows
from harness.models import (
    AttackOutcome,
    ChainMetrics,
    ControlMetrics,
    MetricsReport,
    SentinelMetrics,
)
from ledger.encoding import encoded_size
from sigcore.models import DeviceFingerprint, PacketSignature
from sigcore.signatures import compute_signature

if TYPE_CHECKING:
    from harness.runner import Run

LATE_FRACTION = 0.1


def convergence_time(samples, chain: DeviceFingerprint) -> Optional[float]:
    """First sample time from which the chain's subscribers agree until the end"""
    t = None
    for now, snapshot in samples:
        ok = snapshot.get(chain)
        if ok is None:
            continue
        if ok and t is None:
            t = now
        elif not ok:
            t = None
    return t


def late_growth(run: "Run", chain: DeviceFingerprint, tip: Optional[bytes]) -> int:
    """New signatures carried by the final 10% of canonical-branch blocks"""
    store = run.archive.store
    if not store.has_chain(chain):
        return 0
    branch = canonical_branch(store, chain, tip)
    n = max(1, math.ceil(LATE_FRACTION * len(branch)))
    return sum(len(store.device_blocks[h].signatures) for h in branch[-n:])


def attack_signatures(run: "Run") -> Set[PacketSignature]:
    by_id = {d.device_id: d for d in run.devices}
    return {compute_signature(by_id[d].attack_record) for d in sorted(run.infected)}


def admitted_signatures(
    run: "Run", chain: DeviceFingerprint, candidates: Set[PacketSignature]
) -> Set[PacketSignature]:
    """Signatures whitelisted by a strict majority of the chain's subscribers"""
    subs = run.subscribers().get(chain, [])
    out = set()
    for sig in candidates:
        holders = sum(1 for s in subs if sig in s.whitelist(chain))
        if holders * 2 > len(subs):
            out.add(sig)
    return out


def build_report(run: "Run") -> MetricsReport:
    store = run.archive.store
    tips = run.canonical_tips()
    labels = run.labels()
    attack_sigs = attack_signatures(run)
    admitted_all: Set[PacketSignature] = set()

    chains: List[ChainMetrics] = []
    for chain, subs in sorted(run.subscribers().items()):
        tip = tips.get(chain)
        admitted = admitted_signatures(run, chain, attack_sigs)
        admitted_all |= admitted
        t_conv = convergence_time(run.samples, chain)
        on_chain = set()
        forks_rejected = 0
        if store.has_chain(chain):
            for h in store.chain_blocks[chain]:
                on_chain.update(store.device_blocks[h].signatures)
            forks_rejected = sum(1 for t in store.tips[chain] if t != tip)
        first = subs[0].whitelist(chain)
        converged = all(s.whitelist(chain) == first for s in subs[1:])
        chains.append(
            ChainMetrics(
                chain_id=chain.hex,
                label=labels.get(chain, ""),
                subscribers=len(subs),
                converged=converged,
                convergence_time=t_conv if converged else None,
                whitelist_size=len(store.cumulative(tip)) if tip is not None else len(first),
                canonical_height=store.device_height[tip] if tip is not None else -1,
                forks_created=store.forks_created.get(chain, 0),
                forks_rejected=forks_rejected,
                late_growth=late_growth(run, chain, tip),
                attack_signatures=len(attack_sigs & on_chain),
                attack_admitted=bool(admitted),
            )
        )

    infected_nodes = {d.sentinel_id for d in run.devices if d.device_id in run.infected}
    sentinels = [
        SentinelMetrics(
            node=node,
            address=s.address.hex(),
            devices=len(s.devices),
            forwarded=s.forwarded(),
            dropped=s.dropped(),
            profile_passed=sum(d.profile_passed for d in s.devices.values()),
            wins=s.wins,
            infected=node in infected_nodes,
            free_rider=node in run.free_riders,
        )
        for node, s in sorted(run.sentinels.items())
    ]

    path = store.control_path()[1:]
    intervals = control_intervals(store)
    control = ControlMetrics(
        height=store.control_height[store.control_tip],
        blocks_stored=len(store.control_blocks) - 1,
        forks=store.control_forks,
        mean_interval=round(float(np.mean(intervals)), 6) if intervals else None,
        mean_block_size=round(float(np.mean([encoded_size(store.control_blocks[h]) for h in path])), 3) if path else 0.0,
    )

    attack = None
    if run.config.attack is not None:
        a = run.config.attack
        attack = AttackOutcome(
            kind=a.kind,
            fraction=a.fraction,
            infected_devices=len(run.infected),
            infected_sentinels=len(infected_nodes),
            signatures=sorted(s.hex for s in attack_sigs),
            admitted=bool(admitted_all),
            admitted_signatures=sorted(s.hex for s in admitted_all),
        )

    return MetricsReport(
        name=run.config.name,
        seed=run.seed,
        duration=run.config.duration,
        chains=chains,
        sentinels=sentinels,
        growth=growth_rows(store, tips, labels, run.config.growth_bucket),
        control=control,
        attack=attack,
        network=run.sim.stats(),
        events=dict(sorted(run.events.counts.items())),
    )
