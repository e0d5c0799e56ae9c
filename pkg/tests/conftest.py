import itertools

import pytest

from devsim.io import bundled_traces
from harness.models import ExperimentConfig
from ledger.encoding import header_hash
from ledger.models import ControlBlock, WhitelistBlock, ZERO_HASH
from ledger.store import ChainStore
from sigcore.models import Direction, PacketRecord, PacketSignature, Protocol
from sigcore.signatures import compute_fingerprint, compute_signature

NTP = PacketRecord(0.0, Protocol.UDP, "time1.google.com", 123, Direction.R)
LIFX_API = PacketRecord(0.0, Protocol.TCP, "104.198.46.246", 56700, Direction.R)


def sig(n: int) -> PacketSignature:
    """Synthetic signature with a recognisable digest"""
    return PacketSignature(n.to_bytes(32, "big"))


@pytest.fixture(scope="session")
def traces():
    return bundled_traces()


@pytest.fixture
def lifx_sigs():
    return (compute_signature(NTP), compute_signature(LIFX_API))


@pytest.fixture
def lifx_chain(lifx_sigs):
    return compute_fingerprint(lifx_sigs)


class ChainBuilder:
    """Appends blocks to a ChainStore, anchoring each in a fresh control block"""

    def __init__(self, store: ChainStore, chain_id):
        self.store = store
        self.chain_id = chain_id
        self._clock = itertools.count(1)

    def block(self, prev, sigs=(), address=b"\x01" * 32) -> WhitelistBlock:
        return WhitelistBlock(prev or ZERO_HASH, self.chain_id, address, float(next(self._clock)), tuple(sigs))

    def anchor(self, *blocks: WhitelistBlock) -> ControlBlock:
        control = ControlBlock(
            self.store.control_tip,
            float(next(self._clock)),
            b"\x02" * 32,
            tuple(header_hash(b) for b in blocks),
        )
        assert self.store.add_control_block(control).report.ok
        return control

    def add(self, prev, sigs=()) -> bytes:
        b = self.block(prev, sigs)
        self.anchor(b)
        res = self.store.add_whitelist_block(b)
        assert res.report.ok, res.report
        return res.block_hash


@pytest.fixture
def builder(lifx_chain):
    return ChainBuilder(ChainStore(), lifx_chain)


@pytest.fixture
def small_config(tmp_path):
    return ExperimentConfig(
        name="small",
        sentinels=3,
        devices=["lifx-like"],
        duration=600.0,
        seeds=[7],
        output_dir=str(tmp_path),
    )
