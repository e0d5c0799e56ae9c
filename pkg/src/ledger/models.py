"""Models"""

from __future__ import annotations
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Tuple

from sigcore.models import DeviceFingerprint, PacketSignature

ZERO_HASH = bytes(32)
MAX_TARGET = (1 << 256) - 1


class LedgerError(ValueError):
    """Raised for ledger queries that cannot be answered (e.g. unknown chain)"""


class PowMode(str, Enum):
    REAL_POW = "REAL_POW"
    SIMULATED = "SIMULATED"


class Validity(str, Enum):
    VALID = "VALID"
    PENDING = "PENDING"
    INVALID = "INVALID"


@dataclass(frozen=True)
class ValidityReport:
    status: Validity
    reasons: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status is Validity.VALID

    @classmethod
    def valid(cls) -> "ValidityReport":
        return cls(Validity.VALID)

    @classmethod
    def pending(cls, *reasons: str) -> "ValidityReport":
        return cls(Validity.PENDING, tuple(reasons))

    @classmethod
    def invalid(cls, *reasons: str) -> "ValidityReport":
        return cls(Validity.INVALID, tuple(reasons))


@dataclass(frozen=True)
class WhitelistBlock:
    """One block of a device chain"""

    prev_hash: bytes
    chain_id: DeviceFingerprint
    sentinel_address: bytes
    timestamp: float
    signatures: Tuple[PacketSignature, ...] = ()

    @property
    def is_genesis(self) -> bool:
        return self.prev_hash == ZERO_HASH


@dataclass(frozen=True)
class ControlBlock:
    """One block of the proof-of-work control chain"""

    prev_hash: bytes
    timestamp: float
    sentinel_address: bytes
    whitelist_headers: Tuple[bytes, ...] = ()
    nonce: int = 0
    target: int = MAX_TARGET

    def with_nonce(self, nonce: int) -> "ControlBlock":
        return replace(self, nonce=nonce)


CONTROL_GENESIS = ControlBlock(
    prev_hash=ZERO_HASH,
    timestamp=0.0,
    sentinel_address=ZERO_HASH,
    whitelist_headers=(),
    nonce=0,
    target=MAX_TARGET,
)


@dataclass(frozen=True)
class Whitelist:
    chain_id: DeviceFingerprint
    allowed: frozenset = field(default_factory=frozenset)

    def __contains__(self, sig: PacketSignature) -> bool:
        return sig in self.allowed

    def __len__(self) -> int:
        return len(self.allowed)
