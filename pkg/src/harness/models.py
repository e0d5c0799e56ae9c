"""Models"""

from __future__ import annotations
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from config import (
    BLOCK_INTERVAL,
    CONFIRMATION_DEPTH,
    CONNECT_JITTER,
    GROWTH_BUCKET,
    LATENCY_MAX_MS,
    LATENCY_MIN_MS,
    NONCES_PER_TICK,
    POW_TICK,
    PROFILING_DURATION,
    PRUNE_DEPTH,
    REPLAY_MEAN_INTERVAL,
    SHARE_RATIO,
    SYNC_FANOUT,
    SYNC_RETRIES,
    SYNC_TIMEOUT,
)
from devsim.models import AttackKind
from ledger.models import PowMode


class AttackConfig(BaseModel):
    kind: AttackKind = AttackKind.EXFIL
    fraction: float = Field(default=0.0, ge=0.0, le=1.0)
    start: float = Field(default=120.0, ge=0.0)
    rate: float = Field(default=0.2, gt=0.0, description="attack packets per simulated second")
    target_label: Optional[str] = None


class ExperimentConfig(BaseModel):
    """One simulated deployment; every sentinel monitors one device per label in `devices`"""

    name: str = "experiment"
    sentinels: int = Field(default=3, ge=1)
    devices: List[str] = Field(default_factory=lambda: ["lifx-like"])
    duration: float = Field(default=3600.0, gt=0)
    block_interval: float = Field(default=BLOCK_INTERVAL, gt=0)
    profiling_duration: float = Field(default=PROFILING_DURATION, ge=0)
    replay_interval: float = Field(default=REPLAY_MEAN_INTERVAL, gt=0)
    connect_jitter: float = Field(default=CONNECT_JITTER, ge=0)
    pow_mode: PowMode = PowMode.SIMULATED
    pow_tick: float = Field(default=POW_TICK, gt=0)
    nonces_per_tick: int = Field(default=NONCES_PER_TICK, ge=1)
    share_ratio: int = Field(default=SHARE_RATIO, ge=2)
    attack: Optional[AttackConfig] = None
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: Optional[str] = None

    degree: Optional[int] = Field(default=None, ge=1)
    latency_min_ms: float = Field(default=LATENCY_MIN_MS, ge=0)
    latency_max_ms: float = Field(default=LATENCY_MAX_MS, ge=0)
    loss: float = Field(default=0.0, ge=0.0, lt=1.0)

    confirmation_depth: int = Field(default=CONFIRMATION_DEPTH, ge=1)
    prune_depth: int = Field(default=PRUNE_DEPTH, ge=1)
    sync_timeout: float = Field(default=SYNC_TIMEOUT, gt=0)
    sync_retries: int = Field(default=SYNC_RETRIES, ge=0)
    sync_fanout: int = Field(default=SYNC_FANOUT, ge=1)
    activity_shares: bool = True
    free_riders: float = Field(default=0.0, ge=0.0, lt=1.0)
    log_all_decisions: bool = False
    record_events: bool = True
    sample_interval: Optional[float] = Field(default=None, gt=0)
    growth_bucket: float = Field(default=GROWTH_BUCKET, gt=0)

    @field_validator("devices")
    @classmethod
    def _labels(cls, v: List[str]) -> List[str]:
        v = [s.strip() for s in v if s and s.strip()]
        if not v:
            raise ValueError("devices must name at least one trace label")
        return v

    @field_validator("seeds")
    @classmethod
    def _seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("seeds must not be empty")
        return v

    @model_validator(mode="after")
    def _check(self):
        if self.latency_min_ms > self.latency_max_ms:
            raise ValueError("latency_min_ms must be <= latency_max_ms")
        return self


class ChainMetrics(BaseModel):
    chain_id: str
    label: str
    subscribers: int
    converged: bool
    convergence_time: Optional[float] = None
    whitelist_size: int
    canonical_height: int
    forks_created: int
    forks_rejected: int
    late_growth: int
    attack_signatures: int = 0
    attack_admitted: bool = False


class SentinelMetrics(BaseModel):
    node: str
    address: str
    devices: int
    forwarded: int
    dropped: int
    profile_passed: int
    wins: int
    infected: bool = False
    free_rider: bool = False


class GrowthRow(BaseModel):
    bucket: int
    chain: str
    label: str
    blocks: int
    bytes: int
    mean_block_size: float


class ControlMetrics(BaseModel):
    height: int
    blocks_stored: int
    forks: int
    mean_interval: Optional[float] = None
    mean_block_size: float


class AttackOutcome(BaseModel):
    kind: AttackKind
    fraction: float
    infected_devices: int
    infected_sentinels: int
    signatures: List[str] = Field(default_factory=list)
    admitted: bool = False
    admitted_signatures: List[str] = Field(default_factory=list)


class MetricsReport(BaseModel):
    name: str
    seed: int
    duration: float
    chains: List[ChainMetrics] = Field(default_factory=list)
    sentinels: List[SentinelMetrics] = Field(default_factory=list)
    growth: List[GrowthRow] = Field(default_factory=list)
    control: ControlMetrics
    attack: Optional[AttackOutcome] = None
    network: Dict[str, int] = Field(default_factory=dict)
    events: Dict[str, int] = Field(default_factory=dict)
    artifacts: Dict[str, str] = Field(default_factory=dict)


class SweepRow(BaseModel):
    fraction: float
    runs: int
    admitted: int
    probability: float


class SweepResult(BaseModel):
    kind: AttackKind = AttackKind.EXFIL
    sentinels: int
    repetitions: int
    rows: List[SweepRow] = Field(default_factory=list)
    monotone: bool
    midpoint: Optional[float] = None


class SweepRequest(BaseModel):
    base: ExperimentConfig
    fractions: List[float] = Field(default_factory=lambda: [0.2, 0.4, 0.45, 0.55, 0.6, 0.8])
    repetitions: int = Field(default=5, ge=1)

    @field_validator("fractions")
    @classmethod
    def _fractions(cls, v: List[float]) -> List[float]:
        if not v or any(not 0.0 <= f <= 1.0 for f in v):
            raise ValueError("fractions must be a non-empty list within [0, 1]")
        return v


class GrowthReport(BaseModel):
    bucket: float
    rows: List[GrowthRow] = Field(default_factory=list)
    header_step: int = 32
    blocks_per_year: Optional[float] = None
    device_types: int
    control_block_size: int
    projected_bytes_per_year: Optional[float] = None


class ForkRow(BaseModel):
    chain_id: str
    label: str
    tip: str
    fork_height: int
    length: int
    anomalous: List[str] = Field(default_factory=list)


class SignatureTimeline(BaseModel):
    chain_id: str
    signature: str
    first_seen: Optional[float] = None
    confirmed: Optional[float] = None
    canonical: bool


class AdoptionPoint(BaseModel):
    chain_id: str
    signature: str
    t: float
    observed_fraction: float
    whitelisted_fraction: float


class AuditReport(BaseModel):
    rejected_forks: List[ForkRow] = Field(default_factory=list)
    stale_forks: int = 0
    signatures: List[SignatureTimeline] = Field(default_factory=list)
    adoption: List[AdoptionPoint] = Field(default_factory=list)
    founder_warnings: List[str] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)


class DiscoveryRow(BaseModel):
    label: str
    bucket: int
    new_signatures: int
    cumulative: int


class DiscoveryTotals(BaseModel):
    label: str
    trace_signatures: int
    discovered: int
    packets: int
    last_new_at: Optional[float] = None
    saturated_at: Optional[float] = Field(default=None, description="time every trace signature had been seen")
    late_new: int = Field(description="signatures first seen in the final tenth of the window")


class DiscoveryReport(BaseModel):
    duration: float
    bucket: float
    seed: int
    mean_interval: float
    rows: List[DiscoveryRow] = Field(default_factory=list)
    totals: List[DiscoveryTotals] = Field(default_factory=list)
