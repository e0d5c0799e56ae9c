"""Virtual devices replaying traces in random order at random intervals"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from devsim.models import DeviceTrace
from netsim.models import EventKind
from sigcore.models import PacketRecord

NORMAL = "normal"
ATTACK = "attack"


def replay_next(trace: DeviceTrace, rng: np.random.Generator, mean_interval: float) -> Tuple[float, PacketRecord]:
    """Uniformly random record after an exponential delay"""
    if mean_interval <= 0:
        raise ValueError("mean_interval must be > 0")
    delay = float(rng.exponential(mean_interval))
    record = trace.records[int(rng.integers(len(trace.records)))]
    return delay, record


@dataclass(frozen=True)
class PacketPayload:
    device: "VirtualDevice"
    record: PacketRecord
    stream: str


class VirtualDevice:
    """One simulated IoT device attached to a sentinel"""

    def __init__(
        self,
        device_id: str,
        trace: DeviceTrace,
        sentinel_id: str,
        rng: np.random.Generator,
        mean_interval: float,
    ):
        self.device_id = device_id
        self.trace = trace
        self.sentinel_id = sentinel_id
        self.rng = rng
        self.mean_interval = mean_interval
        self.attack_record: Optional[PacketRecord] = None
        self.attack_rate = 0.0
        self.attack_rng: Optional[np.random.Generator] = None
        self.emitted = 0
        self.attack_emitted = 0

    @property
    def label(self) -> str:
        return self.trace.device_type

    @property
    def infected(self) -> bool:
        return self.attack_record is not None

    def start(self, sim, at: float) -> None:
        delay, record = replay_next(self.trace, self.rng, self.mean_interval)
        self._schedule(sim, at - sim.now + delay, record, NORMAL)

    def infect(self, sim, record: PacketRecord, rate: float, start: float, rng: np.random.Generator) -> None:
        self.attack_record = record
        self.attack_rate = rate
        self.attack_rng = rng
        first = max(start, sim.now) + float(rng.exponential(1.0 / rate))
        self._schedule(sim, first - sim.now, record, ATTACK)

    def emit_next(self, sim, stream: str) -> None:
        """Schedule the following packet of the stream that just fired"""
        if stream == ATTACK:
            delay = float(self.attack_rng.exponential(1.0 / self.attack_rate))
            self._schedule(sim, delay, self.attack_record, ATTACK)
        else:
            delay, record = replay_next(self.trace, self.rng, self.mean_interval)
            self._schedule(sim, delay, record, NORMAL)

    def _schedule(self, sim, delay: float, template: PacketRecord, stream: str) -> None:
        record = template.at(sim.now + delay, self.device_id)
        if stream == ATTACK:
            self.attack_emitted += 1
        else:
            self.emitted += 1
        sim.schedule(delay, EventKind.PACKET_ARRIVAL, self.sentinel_id, PacketPayload(self, record, stream))
