"""Models"""

from __future__ import annotations
from dataclasses import dataclass
from enum import Enum
from typing import Optional

SEPARATOR = "|"
DIGEST_SIZE = 32


class SignatureError(ValueError):
    """Raised for packet records that cannot be signed"""


class Protocol(str, Enum):
    TCP = "TCP"
    UDP = "UDP"
    ICMP = "ICMP"
    OTHER = "OTHER"


class Direction(str, Enum):
    """L for a service hosted on the device, R for a remote service"""

    L = "L"
    R = "R"


_PROTOCOL_NUMBERS = {6: Protocol.TCP, 17: Protocol.UDP, 1: Protocol.ICMP}


def parse_protocol(value) -> tuple[Protocol, Optional[int]]:
    """Parse a protocol name or IANA number into (protocol, other_code)"""
    if isinstance(value, Protocol):
        return value, None
    s = str(value).strip().upper()
    if not s:
        raise SignatureError("empty protocol")
    if s in Protocol.__members__ and s != "OTHER":
        return Protocol[s], None
    if s.startswith("OTHER"):
        s = s[len("OTHER"):].strip("() ")
    try:
        code = int(s)
    except ValueError:
        raise SignatureError(f"unknown protocol: {value!r}")
    if not 0 <= code <= 255:
        raise SignatureError(f"protocol number out of range: {code}")
    if code in _PROTOCOL_NUMBERS:
        return _PROTOCOL_NUMBERS[code], None
    return Protocol.OTHER, code


@dataclass(frozen=True)
class PacketRecord:
    """One observed packet/flow event"""

    timestamp: float
    protocol: Protocol
    endpoint: str
    service_port: int
    direction: Direction
    device_id: str = ""
    protocol_code: Optional[int] = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise SignatureError(f"negative timestamp: {self.timestamp}")
        if not 0 <= self.service_port <= 65535:
            raise SignatureError(f"service port out of range: {self.service_port}")
        if not self.endpoint:
            raise SignatureError("endpoint must be non-empty")
        if SEPARATOR in self.endpoint:
            raise SignatureError(f"endpoint contains {SEPARATOR!r}: {self.endpoint!r}")
        if self.protocol is Protocol.OTHER:
            if self.protocol_code is None or not 0 <= self.protocol_code <= 255:
                raise SignatureError("OTHER protocol needs a code in 0-255")

    @property
    def flow_key(self) -> tuple:
        return (self.protocol, self.protocol_code, self.endpoint, self.service_port, self.direction)

    def at(self, timestamp: float, device_id: str = "") -> "PacketRecord":
        """Same flow, new time and device"""
        return PacketRecord(
            timestamp=timestamp,
            protocol=self.protocol,
            endpoint=self.endpoint,
            service_port=self.service_port,
            direction=self.direction,
            device_id=device_id or self.device_id,
            protocol_code=self.protocol_code,
        )


@dataclass(frozen=True, order=True)
class PacketSignature:
    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_SIZE:
            raise SignatureError(f"signature digest must be {DIGEST_SIZE} bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @classmethod
    def from_hex(cls, s: str) -> "PacketSignature":
        return cls(bytes.fromhex(s))


@dataclass(frozen=True, order=True)
class DeviceFingerprint:
    """Names a device chain (chain_id)"""

    digest: bytes

    def __post_init__(self):
        if len(self.digest) != DIGEST_SIZE:
            raise SignatureError(f"fingerprint digest must be {DIGEST_SIZE} bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    @property
    def short(self) -> str:
        return self.digest.hex()[:12]

    @classmethod
    def from_hex(cls, s: str) -> "DeviceFingerprint":
        return cls(bytes.fromhex(s))
