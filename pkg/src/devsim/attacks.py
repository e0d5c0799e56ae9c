"""Attack injection"""

from __future__ import annotations
import logging
import math
from ipaddress import IPv4Address
from typing import List, Sequence, Set

import numpy as np

from devsim.models import AttackKind, AttackProfile
from devsim.replay import VirtualDevice
from sigcore.models import Direction, PacketRecord, Protocol

logger = logging.getLogger(__name__)

EXFIL_ENDPOINT = "exfil.attacker.example"
EXFIL_PORT = 443
_VICTIM_BASE = int(IPv4Address("198.18.0.0"))
_VICTIM_SPACE = 1 << 17


def attack_records(kind: AttackKind, count: int, rng: np.random.Generator) -> List[PacketRecord]:
    """One attack flow per infected device.

    SCAN and FLOOD vary the endpoint per victim, so every infected device
    produces its own signature; EXFIL shares one fixed endpoint.
    """
    if count <= 0:
        return []
    if kind is AttackKind.EXFIL:
        rec = PacketRecord(0.0, Protocol.TCP, EXFIL_ENDPOINT, EXFIL_PORT, Direction.R)
        return [rec] * count
    offsets = rng.choice(_VICTIM_SPACE, size=count, replace=False)
    if kind is AttackKind.SCAN:
        proto, port = Protocol.TCP, 23
    else:
        proto, port = Protocol.UDP, 80
    return [
        PacketRecord(0.0, proto, str(IPv4Address(_VICTIM_BASE + int(o))), port, Direction.R)
        for o in sorted(offsets)
    ]


def infected_count(fraction: float, population: int) -> int:
    if fraction * population < 1:
        return 0
    return min(population, math.ceil(fraction * population - 1e-9))


def inject_attack(sim, population: Sequence[VirtualDevice], profile: AttackProfile, rng: np.random.Generator) -> Set[str]:
    """Infect ceil(f*N) devices of the population; returns their ids"""
    if not population:
        raise ValueError("population must be non-empty")
    n = infected_count(profile.fraction, len(population))
    if n == 0:
        if profile.fraction > 0:
            logger.warning(
                f"attack fraction {profile.fraction} over {len(population)} devices infects nobody"
            )
        return set()
    picks = sorted(int(i) for i in rng.choice(len(population), size=n, replace=False))
    records = attack_records(profile.kind, n, rng)
    infected = set()
    for i, record in zip(picks, records):
        device = population[i]
        device.infect(sim, record, profile.rate, profile.start, rng.spawn(1)[0])
        infected.add(device.device_id)
    logger.info(f"{profile.kind.value} attack: infected {n}/{len(population)} devices")
    return infected
