"""Models"""

from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, Field, model_validator

from config import LATENCY_MAX_MS, LATENCY_MIN_MS


class NetworkError(ValueError):
    """Raised for sends along edges that do not exist"""


class EventKind(str, Enum):
    PACKET_ARRIVAL = "PacketArrival"
    MESSAGE_DELIVERY = "MessageDelivery"
    TIMER = "Timer"
    MINING_RESULT = "MiningResult"


@dataclass(order=True)
class SimEvent:
    fire_at: float
    seq: int
    kind: EventKind = field(compare=False)
    target: str = field(compare=False)
    payload: Any = field(compare=False, default=None)
    cancelled: bool = field(compare=False, default=False)


@dataclass(frozen=True)
class Envelope:
    sender: str
    message: Any
    sent_at: float


class TopologyConfig(BaseModel):
    """Node count, adjacency, latency, loss and the master seed"""

    nodes: int = Field(ge=1)
    degree: Optional[int] = Field(default=None, ge=1, description="random regular graph degree; None = full mesh")
    latency_min_ms: float = Field(default=LATENCY_MIN_MS, ge=0)
    latency_max_ms: float = Field(default=LATENCY_MAX_MS, ge=0)
    loss: float = Field(default=0.0, ge=0.0, lt=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if self.latency_min_ms > self.latency_max_ms:
            raise ValueError("latency_min_ms must be <= latency_max_ms")
        if self.degree is not None and self.degree >= self.nodes:
            self.degree = None
        return self

    @property
    def full_mesh(self) -> bool:
        return self.degree is None
