"""Canonical block encoding

Fixed field order, big-endian integers, length-prefixed sequences. Timestamps
are encoded as whole simulated microseconds.
"""

import hashlib
import struct

from ledger.models import ControlBlock, WhitelistBlock

WHITELIST_BASE_SIZE = 32 + 32 + 32 + 8 + 4
CONTROL_BASE_SIZE = 32 + 8 + 32 + 4 + 8 + 32
HEADER_SIZE = 32

_U64 = struct.Struct(">Q")
_U32 = struct.Struct(">I")


def _micros(timestamp: float) -> bytes:
    return _U64.pack(int(round(timestamp * 1_000_000)))


def encode_whitelist_block(block: WhitelistBlock) -> bytes:
    return b"".join(
        [
            block.prev_hash,
            block.chain_id.digest,
            block.sentinel_address,
            _micros(block.timestamp),
            _U32.pack(len(block.signatures)),
            *(s.digest for s in block.signatures),
        ]
    )


def control_prefix(block: ControlBlock) -> bytes:
    """Everything before the nonce"""
    return b"".join(
        [
            block.prev_hash,
            _micros(block.timestamp),
            block.sentinel_address,
            _U32.pack(len(block.whitelist_headers)),
            *block.whitelist_headers,
        ]
    )


def target_bytes(target: int) -> bytes:
    return target.to_bytes(32, "big")


def encode_control_block(block: ControlBlock) -> bytes:
    return control_prefix(block) + _U64.pack(block.nonce) + target_bytes(block.target)


def header_hash(block: WhitelistBlock) -> bytes:
    return hashlib.sha256(encode_whitelist_block(block)).digest()


def control_hash(block: ControlBlock) -> bytes:
    return hashlib.sha256(encode_control_block(block)).digest()


def hash_value(digest: bytes) -> int:
    return int.from_bytes(digest, "big")


def encoded_size(block) -> int:
    if isinstance(block, ControlBlock):
        return CONTROL_BASE_SIZE + HEADER_SIZE * len(block.whitelist_headers)
    return WHITELIST_BASE_SIZE + HEADER_SIZE * len(block.signatures)
