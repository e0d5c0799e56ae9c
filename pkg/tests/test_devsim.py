import json
from collections import Counter

import numpy as np
import pytest

from devsim.attacks import EXFIL_ENDPOINT, attack_records, infected_count, inject_attack
from devsim.io import bundled_traces, load_trace, resolve_traces, trace_from_lines
from devsim.models import AttackKind, AttackProfile, DeviceTrace, TraceError
from devsim.replay import ATTACK, NORMAL, VirtualDevice, replay_next
from netsim.models import EventKind, TopologyConfig
from netsim.simulator import Simulator
from sigcore.signatures import compute_signature, signature_set

from conftest import LIFX_API, NTP


@pytest.fixture
def lifx_trace():
    return DeviceTrace("lifx-like", (NTP, LIFX_API))


def devices(trace, n, sim):
    return [
        VirtualDevice(f"s0000/d{i}", trace, "s0000", np.random.default_rng(i), 10.0)
        for i in range(n)
    ]


class TestReplay:
    def test_single_record(self):
        trace = DeviceTrace("one", (NTP,))
        rng = np.random.default_rng(0)
        assert all(replay_next(trace, rng, 5.0)[1] == NTP for _ in range(100))

    def test_uniform_choice(self, lifx_trace):
        rng = np.random.default_rng(1)
        counts = Counter(replay_next(lifx_trace, rng, 5.0)[1] for _ in range(10_000))
        assert counts[NTP] / 10_000 == pytest.approx(0.5, abs=0.03)

    def test_mean_interval(self, lifx_trace):
        rng = np.random.default_rng(2)
        delays = [replay_next(lifx_trace, rng, 30.0)[0] for _ in range(10_000)]
        assert np.mean(delays) == pytest.approx(30.0, rel=0.05)
        assert min(delays) >= 0

    def test_interval_positive(self, lifx_trace):
        with pytest.raises(ValueError):
            replay_next(lifx_trace, np.random.default_rng(0), 0.0)

    def test_device_schedules_packets(self, lifx_trace):
        sim = Simulator(TopologyConfig(nodes=1))
        seen = []

        def on_packet(ev):
            seen.append(ev)
            ev.payload.device.emit_next(sim, ev.payload.stream)

        sim.register("s0000", on_packet)
        device = devices(lifx_trace, 1, sim)[0]
        device.start(sim, 5.0)
        sim.run_until(1000.0)
        assert len(seen) > 50
        assert all(ev.kind is EventKind.PACKET_ARRIVAL for ev in seen)
        assert all(ev.payload.stream == NORMAL for ev in seen)
        assert seen[0].fire_at >= 5.0
        assert all(ev.payload.record.timestamp == ev.fire_at for ev in seen)
        assert {ev.payload.record.device_id for ev in seen} == {"s0000/d0"}


class TestAttacks:
    def test_infected_count(self):
        assert infected_count(0.0, 50) == 0
        assert infected_count(0.01, 50) == 0
        assert infected_count(0.1, 50) == 5
        assert infected_count(0.45, 3) == 2
        assert infected_count(1.0, 7) == 7

    def test_zero_fraction_infects_nobody(self, lifx_trace):
        sim = Simulator(TopologyConfig(nodes=1))
        pop = devices(lifx_trace, 10, sim)
        out = inject_attack(sim, pop, AttackProfile(AttackKind.SCAN, 0.0), np.random.default_rng(0))
        assert out == set()
        assert sim.pending() == 0

    def test_scan_gives_distinct_signatures(self, lifx_trace):
        sim = Simulator(TopologyConfig(nodes=1))
        pop = devices(lifx_trace, 100, sim)
        infected = inject_attack(sim, pop, AttackProfile(AttackKind.SCAN, 0.1), np.random.default_rng(3))
        assert len(infected) == 10
        records = [d.attack_record for d in pop if d.infected]
        assert len(signature_set(records)) == 10
        assert all(r.service_port == 23 for r in records)

    def test_exfil_shares_one_signature(self, lifx_trace):
        sim = Simulator(TopologyConfig(nodes=1))
        pop = devices(lifx_trace, 20, sim)
        inject_attack(sim, pop, AttackProfile(AttackKind.EXFIL, 0.5), np.random.default_rng(3))
        records = [d.attack_record for d in pop if d.infected]
        assert len(records) == 10
        assert {r.endpoint for r in records} == {EXFIL_ENDPOINT}
        assert len(signature_set(records)) == 1

    def test_attack_signatures_outside_trace(self, lifx_trace):
        normal = signature_set(lifx_trace.records)
        for kind in AttackKind:
            recs = attack_records(kind, 5, np.random.default_rng(0))
            assert not signature_set(recs) & normal

    def test_attack_stream_starts_after_start(self, lifx_trace):
        sim = Simulator(TopologyConfig(nodes=1))
        seen = []
        sim.register("s0000", seen.append)
        pop = devices(lifx_trace, 4, sim)
        inject_attack(sim, pop, AttackProfile(AttackKind.FLOOD, 1.0, start=100.0, rate=0.5), np.random.default_rng(3))
        sim.run_until(1000.0)
        attack = [ev for ev in seen if ev.payload.stream == ATTACK]
        assert len(attack) == 4
        assert all(ev.fire_at > 100.0 for ev in attack)

    def test_profile_validation(self):
        with pytest.raises(ValueError):
            AttackProfile(AttackKind.SCAN, 1.5)
        with pytest.raises(ValueError):
            AttackProfile(AttackKind.SCAN, 0.5, rate=0.0)

    def test_empty_population(self):
        sim = Simulator(TopologyConfig(nodes=1))
        with pytest.raises(ValueError):
            inject_attack(sim, [], AttackProfile(AttackKind.SCAN, 0.5), np.random.default_rng(0))


class TestTraces:
    def test_bundled(self, traces):
        assert {"lifx-like", "plug-like", "tablet-like"} <= set(traces)
        assert signature_set(traces["lifx-like"].records) == {compute_signature(NTP), compute_signature(LIFX_API)}
        assert len(signature_set(traces["tablet-like"].records)) == 200

    def test_header_names_trace(self):
        lines = [json.dumps({"device_type": "cam"}), json.dumps(
            {"protocol": "udp", "endpoint": "time1.google.com", "service_port": 123, "direction": "r"}
        )]
        trace = trace_from_lines(lines, "fallback")
        assert trace.device_type == "cam"
        assert compute_signature(trace.records[0]) == compute_signature(NTP)

    def test_default_label(self):
        line = json.dumps({"protocol": "ICMP", "endpoint": "10.0.0.1", "service_port": 0, "direction": "R"})
        assert trace_from_lines([line, ""], "sensor").device_type == "sensor"

    @pytest.mark.parametrize(
        "line",
        [
            "{not json",
            "[1, 2]",
            json.dumps({"protocol": "UDP", "endpoint": "a", "direction": "R"}),
            json.dumps({"protocol": "SCTP", "endpoint": "a", "service_port": 1, "direction": "R"}),
            json.dumps({"protocol": "UDP", "endpoint": "a|b", "service_port": 1, "direction": "R"}),
        ],
    )
    def test_bad_line(self, line):
        with pytest.raises(TraceError, match="line 1"):
            trace_from_lines([line], "x")

    def test_empty_trace(self):
        with pytest.raises(TraceError):
            trace_from_lines([json.dumps({"device_type": "silent"})], "x")

    def test_unknown_label(self):
        with pytest.raises(TraceError, match="unknown trace label"):
            resolve_traces(["fridge-like"])

    def test_path_label(self, tmp_path):
        path = tmp_path / "cam.jsonl"
        path.write_text(json.dumps({"protocol": "TCP", "endpoint": "cam.example", "service_port": 443, "direction": "R"}))
        traces = resolve_traces(["lifx-like", str(path)])
        assert traces[str(path)].device_type == "cam"
        assert load_trace(path).records[0].endpoint == "cam.example"

    def test_missing_file(self, tmp_path):
        with pytest.raises(TraceError):
            load_trace(tmp_path / "nope.jsonl")

    def test_custom_dir(self, tmp_path):
        (tmp_path / "a.jsonl").write_text(json.dumps({"protocol": "UDP", "endpoint": "x", "service_port": 1, "direction": "L"}))
        assert list(bundled_traces(tmp_path)) == ["a"]
