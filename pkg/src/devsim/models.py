"""Models"""

from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

from sigcore.models import PacketRecord


class TraceError(ValueError):
    """Raised for unreadable traces or unknown trace labels"""


class AttackKind(str, Enum):
    SCAN = "SCAN"
    FLOOD = "FLOOD"
    EXFIL = "EXFIL"


@dataclass(frozen=True)
class DeviceTrace:
    """Flow templates a virtual device replays"""

    device_type: str
    records: Tuple[PacketRecord, ...]

    def __post_init__(self):
        if not self.device_type:
            raise TraceError("device_type label must be non-empty")
        if not self.records:
            raise TraceError(f"trace {self.device_type!r} has no records")


@dataclass(frozen=True)
class AttackProfile:
    kind: AttackKind
    fraction: float
    start: float = 0.0
    rate: float = 0.2
    target_label: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("fraction must be in [0, 1]")
        if self.rate <= 0:
            raise ValueError("rate must be > 0")
        if self.start < 0:
            raise ValueError("start must be >= 0")
