"""Models"""

from __future__ import annotations
from dataclasses import dataclass
from enum import Enum

from ledger.models import MAX_TARGET, PowMode

# hash values are below 2**256, so a share target at this ceiling accepts every hash
SHARE_CEILING = MAX_TARGET + 1


@dataclass(frozen=True)
class PowContext:
    """Mining parameters of one node"""

    target: int = MAX_TARGET
    share_target: int = SHARE_CEILING
    mode: PowMode = PowMode.SIMULATED
    sim_rate: float = 1.0
    hash_weight: float = 1.0

    def __post_init__(self):
        if not 0 <= self.target <= MAX_TARGET:
            raise ValueError("target must be a 256-bit unsigned value")
        if not self.target < self.share_target <= SHARE_CEILING:
            raise ValueError("share_target must exceed target and be at most 2**256")
        if self.sim_rate <= 0:
            raise ValueError("sim_rate must be > 0")
        if self.hash_weight <= 0:
            raise ValueError("hash_weight must be > 0")


class OutcomeKind(str, Enum):
    SOLVED = "Solved"
    SHARE = "Share"
    EXHAUSTED = "Exhausted"


@dataclass(frozen=True)
class MineOutcome:
    kind: OutcomeKind
    nonce: int

    @property
    def next_nonce(self) -> int:
        """Where a resumed scan continues"""
        return self.nonce if self.kind is OutcomeKind.EXHAUSTED else self.nonce + 1
