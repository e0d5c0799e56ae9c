"""Packet signatures and device fingerprints"""

import hashlib
from functools import lru_cache
from typing import Iterable, Optional

from sigcore.models import (
    SEPARATOR,
    DeviceFingerprint,
    Direction,
    PacketRecord,
    PacketSignature,
    Protocol,
    SignatureError,
)


def _protocol_text(protocol: Protocol, code: Optional[int]) -> str:
    if protocol is Protocol.OTHER:
        return f"OTHER{code}"
    return protocol.value.upper()


def canonical_signature_string(record: PacketRecord) -> str:
    """`<PROTOCOL>|<endpoint>|<direction><port>`, e.g. `UDP|time1.google.com|R123`"""
    if SEPARATOR in record.endpoint:
        raise SignatureError(f"endpoint contains {SEPARATOR!r}: {record.endpoint!r}")
    proto = _protocol_text(record.protocol, record.protocol_code)
    return f"{proto}{SEPARATOR}{record.endpoint.lower()}{SEPARATOR}{record.direction.value}{record.service_port}"


@lru_cache(maxsize=65536)
def _signature_for_flow(
    protocol: Protocol,
    code: Optional[int],
    endpoint: str,
    port: int,
    direction: Direction,
) -> PacketSignature:
    text = canonical_signature_string(
        PacketRecord(0.0, protocol, endpoint, port, direction, protocol_code=code)
    )
    return PacketSignature(hashlib.sha256(text.encode("utf-8")).digest())


def compute_signature(record: PacketRecord) -> PacketSignature:
    """SHA-256 of the canonical string; time, device and payload never count"""
    return _signature_for_flow(*record.flow_key)


def compute_fingerprint(signatures: Iterable[PacketSignature]) -> DeviceFingerprint:
    """SHA-256 over the sorted, de-duplicated signature digests"""
    digests = sorted({s.digest for s in signatures})
    if not digests:
        raise SignatureError("cannot fingerprint silent device")
    return DeviceFingerprint(hashlib.sha256(b"".join(digests)).digest())


def signature_set(records: Iterable[PacketRecord]) -> set[PacketSignature]:
    return {compute_signature(r) for r in records}
