"""Models"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional

from config import (
    BLOCK_INTERVAL,
    CONFIRMATION_DEPTH,
    NONCES_PER_TICK,
    POW_TICK,
    PROFILING_DURATION,
    PRUNE_DEPTH,
    SHARE_WINDOW_BLOCKS,
    SHARES_PER_WINDOW,
    SYNC_FANOUT,
    SYNC_RETRIES,
    SYNC_THROTTLE_BASE,
    SYNC_THROTTLE_WINDOW,
    SYNC_TIMEOUT,
)
from sigcore.models import DeviceFingerprint, PacketSignature


class SentinelError(ValueError):
    """Raised for device lifecycle misuse (duplicate connect, unknown device)"""


class Phase(str, Enum):
    PROFILING = "PROFILING"
    ENFORCING = "ENFORCING"


class Verdict(str, Enum):
    FORWARD = "FORWARD"
    DROP = "DROP"
    PROFILE_PASS = "PROFILE_PASS"


@dataclass(frozen=True)
class FilterDecision:
    verdict: Verdict
    signature: PacketSignature
    reason: str = ""


@dataclass
class DeviceState:
    """One locally monitored device"""

    device_id: str
    phase: Phase
    profiling_until: float
    profiled: Dict[PacketSignature, None] = field(default_factory=dict)
    chain_id: Optional[DeviceFingerprint] = None
    forwarded: int = 0
    dropped: int = 0
    profile_passed: int = 0


@dataclass(frozen=True)
class SentinelCfg:
    """Per-node protocol tuning"""

    profiling_duration: float = PROFILING_DURATION
    confirmation_depth: int = CONFIRMATION_DEPTH
    prune_depth: int = PRUNE_DEPTH
    sync_timeout: float = SYNC_TIMEOUT
    sync_retries: int = SYNC_RETRIES
    sync_fanout: int = SYNC_FANOUT
    sync_throttle_base: float = SYNC_THROTTLE_BASE
    sync_throttle_window: float = SYNC_THROTTLE_WINDOW
    relay_blocks: bool = False
    activity_shares: bool = True
    share_window: float = SHARE_WINDOW_BLOCKS * BLOCK_INTERVAL
    shares_per_window: int = SHARES_PER_WINDOW
    mining: bool = True
    pow_tick: float = POW_TICK
    nonces_per_tick: int = NONCES_PER_TICK
    log_all_decisions: bool = False
    max_orphans: int = 512

    def __post_init__(self):
        if self.profiling_duration < 0:
            raise ValueError("profiling_duration must be >= 0")
        if self.confirmation_depth < 1:
            raise ValueError("confirmation_depth must be >= 1")
        if self.prune_depth < 1:
            raise ValueError("prune_depth must be >= 1")
        if self.sync_timeout <= 0 or self.sync_retries < 0 or self.sync_fanout < 1:
            raise ValueError("invalid sync settings")

    @property
    def share_interval(self) -> float:
        return self.share_window / self.shares_per_window
