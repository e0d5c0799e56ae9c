"""Proof of work: real nonce scanning and the simulated race"""

import hashlib
import struct

import numpy as np

from consensus.models import MineOutcome, OutcomeKind, PowContext
from ledger.encoding import control_prefix, target_bytes
from ledger.models import MAX_TARGET, ControlBlock, PowMode

_U64 = struct.Struct(">Q")
MAX_NONCE = (1 << 64) - 1


def mine_step(candidate: ControlBlock, ctx: PowContext, nonce_budget: int, start_nonce: int = 0) -> MineOutcome:
    """Scan `nonce_budget` nonces from `start_nonce`.

    Returns Solved on the first hash below target, Share on the first hash below
    share_target, otherwise Exhausted with the next unscanned nonce.
    """
    if ctx.mode is not PowMode.REAL_POW:
        raise ValueError("mine_step requires REAL_POW mode")
    if nonce_budget < 1:
        raise ValueError("nonce_budget must be >= 1")
    base = hashlib.sha256(control_prefix(candidate))
    suffix = target_bytes(candidate.target)
    target, share_target = ctx.target, ctx.share_target
    end = min(start_nonce + nonce_budget, MAX_NONCE + 1)
    for nonce in range(start_nonce, end):
        h = base.copy()
        h.update(_U64.pack(nonce))
        h.update(suffix)
        value = int.from_bytes(h.digest(), "big")
        if value < target:
            return MineOutcome(OutcomeKind.SOLVED, nonce)
        if value < share_target:
            return MineOutcome(OutcomeKind.SHARE, nonce)
    return MineOutcome(OutcomeKind.EXHAUSTED, end)


def schedule_block_delay(ctx: PowContext, rng: np.random.Generator) -> float:
    """Exponential waiting time with rate sim_rate * hash_weight"""
    if ctx.mode is not PowMode.SIMULATED:
        raise ValueError("schedule_block_delay requires SIMULATED mode")
    return float(rng.exponential(1.0 / (ctx.sim_rate * ctx.hash_weight)))


def sim_rate_for(block_interval: float, total_weight: float) -> float:
    """Per-unit-weight rate giving one network block per interval"""
    return 1.0 / (block_interval * total_weight)


def target_for(expected_hashes: float) -> int:
    """Target such that one hash in `expected_hashes` succeeds"""
    if expected_hashes <= 1:
        return MAX_TARGET
    return min(MAX_TARGET, int((MAX_TARGET + 1) / expected_hashes))
