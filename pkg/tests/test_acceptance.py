"""End-to-end experiments at desk scale"""

from collections import Counter, defaultdict

import numpy as np
import pytest

from config import CONFIGS_DIR
from consensus.models import OutcomeKind, PowContext
from consensus.pow import mine_step
from devsim.models import AttackKind
from harness.audit import adoption_curves, audit
from harness.io import load_experiment_config
from harness.metrics import attack_signatures
from harness.models import AttackConfig, ExperimentConfig
from harness.runner import Run, run_experiment
from harness.sweep import breaking_point_sweep
from ledger.encoding import hash_value
from ledger.models import ControlBlock, PowMode
from ledger.store import ChainStore, validate_control_block
from sentinel.models import Verdict


def config_file(name, **update):
    return load_experiment_config(CONFIGS_DIR / f"{name}.env").model_copy(update=update)


def run(config, seed):
    r = Run(config, seed)
    report = r.execute()
    return r, report


class TestConvergence:
    def test_three_sentinels(self):
        for seed in config_file("convergence").seeds:
            r, report = run(config_file("convergence"), seed)
            assert len(report.chains) == 1
            chain = report.chains[0]
            assert chain.converged and chain.whitelist_size == 2
            whitelists = {frozenset(s.whitelist(c)) for s in r.sentinels.values() for c in s.subscribed_chains()}
            assert len(whitelists) == 1

    @pytest.mark.slow
    @pytest.mark.parametrize("sentinels", [20, 50])
    def test_larger_networks(self, sentinels, tmp_path):
        config = ExperimentConfig(name=f"conv-{sentinels}", sentinels=sentinels, duration=3600, record_events=False)
        report = run_experiment(config, seed=1, output_dir=tmp_path)
        assert all(c.converged and c.whitelist_size == 2 for c in report.chains)
        assert report.attack is None
        assert audit(tmp_path / config.name / "seed-1" / "export").rejected_forks == []


def scan_rejected(r: Run, report) -> bool:
    """Nothing admitted or leaked, every attack signature dropped, infected devices still served"""
    sigs = attack_signatures(r)
    attack_hex = {s.hex for s in sigs}
    owners = {d.sentinel_id for d in r.devices if d.infected}
    leaked = any(
        sigs & s.whitelist(chain)
        for node, s in r.sentinels.items()
        if node not in owners
        for chain in s.subscribed_chains()
    )
    dropped = {e["signature"] for e in r.events.filter("decision") if e["verdict"] == Verdict.DROP.value}
    serving = all(r.sentinels[d.sentinel_id].devices[d.device_id].forwarded > 0 for d in r.devices if d.infected)
    return not report.attack.admitted and not leaked and dropped == attack_hex and serving


@pytest.mark.slow
class TestForkRejection:
    def test_scan_attack_rejected_in_nine_of_ten_seeds(self):
        config = config_file("fork-rejection")
        outcomes = []
        for seed in range(1, 11):
            r, report = run(config, seed)
            assert len(attack_signatures(r)) == 5
            outcomes.append(scan_rejected(r, report))
        assert sum(outcomes) >= 9, outcomes

    def test_scan_forks_in_audit(self, tmp_path):
        r, report = run(config_file("fork-rejection"), 1)
        attack_hex = {s.hex for s in attack_signatures(r)}
        out = tmp_path / "export"
        r.export(out)
        r.events.write(tmp_path / "events.jsonl")
        forks = audit(out).rejected_forks
        assert forks
        assert {a for f in forks for a in f.anomalous} <= attack_hex

    def test_minority_exfil_only_in_rejected_forks(self, tmp_path):
        config = config_file(
            "breaking-point", duration=3600, attack=AttackConfig(kind=AttackKind.EXFIL, fraction=0.4), record_events=True
        )
        r, report = run(config, 1)
        assert not report.attack.admitted
        out = tmp_path / "export"
        r.export(out)
        result = audit(out)
        x = report.attack.signatures[0]
        assert x not in {s.signature for s in result.signatures if s.canonical}
        assert any(x in f.anomalous for f in result.rejected_forks)


@pytest.mark.slow
def test_breaking_point():
    base = config_file("breaking-point")
    result = breaking_point_sweep(base, [0.2, 0.4, 0.45, 0.55, 0.6, 0.8], 5, workers=4)
    probs = {row.fraction: row.probability for row in result.rows}
    assert all(row.runs == 5 for row in result.rows)
    assert probs[0.2] <= 0.1 and probs[0.4] <= 0.1
    assert probs[0.6] >= 0.9 and probs[0.8] >= 0.9
    assert result.monotone


@pytest.mark.slow
def test_sweep_extremes():
    base = ExperimentConfig(sentinels=10, duration=1800, activity_shares=False, record_events=False, seeds=[1])
    result = breaking_point_sweep(base, [0.0, 1.0], 2)
    assert [row.probability for row in result.rows] == [0.0, 1.0]


def replay_enforcement(records):
    """Rebuild each node's per-chain whitelist from the event log.

    Returns (decision, signature whitelisted at that moment, device subscribed) per
    decision, plus the final whitelists keyed by (node, chain hex).
    """
    profiled = defaultdict(set)
    chain_of = {}
    last_subscribed = {}
    whitelists = defaultdict(set)
    decisions = []
    for e in records:
        node, kind = e["node"], e["event"]
        if kind == "decision":
            key = (node, e["device"])
            if e["verdict"] == Verdict.PROFILE_PASS.value:
                profiled[key].add(e["signature"])
            chain = chain_of.get(key)
            allowed = chain is not None and e["signature"] in whitelists[(node, chain)]
            decisions.append((e, allowed, chain is not None))
        elif kind == "subscribe":
            chain_of[(node, e["device"])] = e["chain"]
            last_subscribed[node] = e["device"]
        elif kind == "found_chain":
            whitelists[(node, e["chain"])] = set(profiled[(node, last_subscribed[node])])
        elif kind == "whitelist_admit":
            whitelists[(node, e["chain"])].add(e["signature"])
        elif kind == "reorg":
            whitelists[(node, e["chain"])].difference_update(e["removed"])
    return decisions, whitelists


class TestEnforcement:
    def test_decisions_match_whitelist(self):
        config = ExperimentConfig(
            name="enforcement",
            sentinels=6,
            devices=["lifx-like", "plug-like"],
            duration=1200,
            log_all_decisions=True,
            attack=AttackConfig(kind=AttackKind.EXFIL, fraction=0.3),
            seeds=[2],
        )
        r, _ = run(config, 2)
        decisions, whitelists = replay_enforcement(r.events.records)
        verdicts = Counter(e["verdict"] for e, _, _ in decisions)
        assert verdicts[Verdict.FORWARD.value] and verdicts[Verdict.DROP.value] and verdicts[Verdict.PROFILE_PASS.value]
        for e, allowed, subscribed in decisions:
            if e["verdict"] == Verdict.PROFILE_PASS.value:
                assert not subscribed
            else:
                assert subscribed
                assert (e["verdict"] == Verdict.FORWARD.value) == allowed

        for node, s in r.sentinels.items():
            for chain in s.subscribed_chains():
                assert whitelists[(node, chain.hex)] == {sig.hex for sig in s.whitelist(chain)}


def first_crossing(points, field):
    return min((p.t for p in points if getattr(p, field) > 0.5), default=None)


class TestAdoptionCurve:
    def curve(self, fraction, seed=3):
        config = ExperimentConfig(
            name="update",
            sentinels=5,
            duration=1200,
            attack=AttackConfig(kind=AttackKind.EXFIL, fraction=fraction),
        )
        r, _ = run(config, seed)
        (sig,) = attack_signatures(r)
        return [p for p in adoption_curves(r.events.records) if p.signature == sig.hex]

    def test_majority_update_observed_before_confirmed(self):
        points = self.curve(0.8)
        observed = first_crossing(points, "observed_fraction")
        confirmed = first_crossing(points, "whitelisted_fraction")
        assert confirmed is not None
        assert observed <= confirmed
        assert points[-1].whitelisted_fraction == 1.0

    def test_minority_signature_never_reaches_half(self):
        points = self.curve(0.2)
        assert points
        assert max(p.observed_fraction for p in points) == 0.2
        assert all(p.whitelisted_fraction < 0.5 for p in points)


class TestGeneralPurposeDevices:
    def test_tablet_never_settles(self):
        config = config_file("general-purpose", duration=1200, record_events=False)
        _, report = run(config, 1)
        tablets = [c for c in report.chains if c.label == "tablet-like"]
        lifx = [c for c in report.chains if c.label == "lifx-like"]
        assert len(lifx) == 1
        assert lifx[0].converged and lifx[0].late_growth == 0
        assert tablets
        assert max(c.late_growth for c in tablets) > 0


@pytest.mark.slow
def test_chain_growth():
    config = config_file("growth")
    r, report = run(config, 1)
    control = sorted((g for g in report.growth if g.chain == "control"), key=lambda g: g.bucket)
    assert len(control) == 4
    assert control[-1].mean_block_size == 116 + 32 * 2
    assert control[-1].mean_block_size == pytest.approx(control[0].mean_block_size, rel=0.1)
    assert report.control.mean_interval == pytest.approx(config.block_interval, rel=0.15)
    shared = {c.chain_id for c in report.chains if c.subscribers > 1}
    assert len(shared) == 2
    for chain in shared:
        rows = sorted((g for g in report.growth if g.chain == chain), key=lambda g: g.bucket)
        assert rows[-1].mean_block_size == pytest.approx(rows[0].mean_block_size, rel=0.1)


class TestRealPow:
    def test_every_control_block_meets_target(self):
        config = config_file("real-pow", record_events=False)
        r, report = run(config, 1)
        store = r.archive.store
        assert len(store.control_blocks) > 10
        for h, block in store.control_blocks.items():
            if h == store.genesis_hash:
                continue
            assert hash_value(h) < r.pow.target
            assert block.target == r.pow.target
        assert sum(s.wins for s in report.sentinels) == len(store.control_blocks) - 1
        assert all(c.converged for c in report.chains)

    @pytest.mark.slow
    def test_expected_effort_at_2_240(self):
        target = 1 << 240
        ctx = PowContext(target=target, share_target=target + 1, mode=PowMode.REAL_POW)
        store = ChainStore(mode=PowMode.REAL_POW, target=target)
        efforts = []
        for ts in range(50):
            block = ControlBlock(store.genesis_hash, float(ts), b"\x03" * 32, (), 0, target)
            out = mine_step(block, ctx, 1 << 22)
            assert out.kind is OutcomeKind.SOLVED
            assert validate_control_block(block.with_nonce(out.nonce), store, PowMode.REAL_POW).ok
            efforts.append(out.nonce + 1)
        assert (1 << 16) / 3 < np.mean(efforts) < (1 << 16) * 3
