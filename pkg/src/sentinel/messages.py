"""Messages exchanged between sentinels and timer tags"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Any, Optional, Tuple

from ledger.models import ControlBlock, WhitelistBlock
from sigcore.models import DeviceFingerprint


@dataclass(frozen=True)
class BlockAnnouncement:
    """A control block with the whitelist blocks it lists"""

    control: ControlBlock
    whitelist_blocks: Tuple[WhitelistBlock, ...] = ()


@dataclass(frozen=True)
class ShareMessage:
    nonce: Optional[int] = None


@dataclass(frozen=True)
class SyncRequest:
    request_id: str
    chain_id: Optional[DeviceFingerprint]
    locator: Tuple[bytes, ...]
    bootstrap: bool = False


@dataclass(frozen=True)
class SyncResponse:
    request_id: str
    chain_id: Optional[DeviceFingerprint]
    control_blocks: Tuple[ControlBlock, ...] = ()
    whitelist_blocks: Tuple[WhitelistBlock, ...] = ()
    tip: Optional[bytes] = None


@dataclass(frozen=True)
class TimerTag:
    name: str
    arg: Any = None


CONNECT = "connect"
PROFILE_DONE = "profile_done"
SYNC_TIMEOUT = "sync_timeout"
SYNC_REPLY = "sync_reply"
SHARE = "share"
POW_TICK = "pow_tick"
