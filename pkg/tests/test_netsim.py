import pytest
from pydantic import ValidationError
from scipy import stats

from netsim.models import EventKind, NetworkError, TopologyConfig
from netsim.rng import child_rng
from netsim.simulator import Simulator


def collecting(sim, node):
    seen = []
    sim.register(node, seen.append)
    return seen


class TestTopology:
    def test_latency_bounds_checked(self):
        with pytest.raises(ValidationError):
            TopologyConfig(nodes=3, latency_min_ms=100, latency_max_ms=10)

    def test_loss_must_be_below_one(self):
        with pytest.raises(ValidationError):
            TopologyConfig(nodes=3, loss=1.0)

    def test_degree_at_least_nodes_is_full_mesh(self):
        assert TopologyConfig(nodes=4, degree=8).full_mesh

    def test_random_regular(self):
        sim = Simulator(TopologyConfig(nodes=30, degree=4, seed=3))
        assert {len(sim.neighbors(n)) for n in sim.node_ids} == {4}

    def test_odd_product_rounds_degree_up(self):
        sim = Simulator(TopologyConfig(nodes=9, degree=3, seed=3))
        assert {len(sim.neighbors(n)) for n in sim.node_ids} == {4}

    def test_full_mesh(self):
        sim = Simulator(TopologyConfig(nodes=5))
        assert all(len(sim.neighbors(n)) == 4 for n in sim.node_ids)

    def test_node_ids_must_match(self):
        with pytest.raises(ValueError):
            Simulator(TopologyConfig(nodes=2), node_ids=["a"])


class TestEventLoop:
    def test_empty_queue(self):
        sim = Simulator(TopologyConfig(nodes=1))
        assert sim.run_until(100.0) == 0
        assert sim.now == 100.0

    def test_equal_times_in_schedule_order(self):
        sim = Simulator(TopologyConfig(nodes=1))
        seen = collecting(sim, "s0000")
        for i in range(5):
            sim.schedule(1.0, EventKind.TIMER, "s0000", i)
        sim.run_until(1.0)
        assert [e.payload for e in seen] == [0, 1, 2, 3, 4]

    def test_time_order(self):
        sim = Simulator(TopologyConfig(nodes=1))
        seen = collecting(sim, "s0000")
        for t in (3.0, 1.0, 2.0):
            sim.schedule(t, EventKind.TIMER, "s0000", t)
        assert sim.run_until(2.5) == 2
        assert [e.payload for e in seen] == [1.0, 2.0]
        assert sim.pending() == 1

    def test_cancelled_events_skipped(self):
        sim = Simulator(TopologyConfig(nodes=1))
        seen = collecting(sim, "s0000")
        ev = sim.schedule(1.0, EventKind.TIMER, "s0000")
        sim.cancel(ev)
        assert sim.run_until(2.0) == 0
        assert seen == []

    def test_no_past(self):
        sim = Simulator(TopologyConfig(nodes=1))
        sim.run_until(5.0)
        with pytest.raises(ValueError):
            sim.run_until(4.0)
        with pytest.raises(ValueError):
            sim.schedule(-1.0, EventKind.TIMER, "s0000")

    def test_handlers_may_schedule(self):
        sim = Simulator(TopologyConfig(nodes=1))
        ticks = []

        def tick(ev):
            ticks.append(sim.now)
            sim.schedule(10.0, EventKind.TIMER, "s0000")

        sim.register("s0000", tick)
        sim.schedule(10.0, EventKind.TIMER, "s0000")
        sim.run_until(55.0)
        assert ticks == [10.0, 20.0, 30.0, 40.0, 50.0]


class TestDelivery:
    def test_no_edge(self):
        sim = Simulator(TopologyConfig(nodes=10, degree=2, seed=1))
        a = sim.node_ids[0]
        stranger = next(n for n in sim.node_ids if n != a and not sim.has_edge(a, n))
        with pytest.raises(NetworkError):
            sim.deliver(a, stranger, "hello")

    def test_lossless_delivers_everything_within_latency(self):
        sim = Simulator(TopologyConfig(nodes=2, latency_min_ms=20, latency_max_ms=50))
        seen = collecting(sim, "s0001")
        for i in range(200):
            sim.deliver("s0000", "s0001", i)
        sim.run_until(1.0)
        assert len(seen) == 200
        assert all(0.020 <= e.fire_at <= 0.050 for e in seen)
        assert {e.payload.sender for e in seen} == {"s0000"}
        assert sim.stats()["messages_dropped"] == 0

    def test_loss_rate(self):
        sim = Simulator(TopologyConfig(nodes=2, loss=0.3, seed=5))
        seen = collecting(sim, "s0001")
        n = 2000
        for i in range(n):
            sim.deliver("s0000", "s0001", i)
        sim.run_until(10.0)
        assert stats.binomtest(n - len(seen), n, 0.3).pvalue > 0.001

    def test_same_seed_same_latencies(self):
        def latencies():
            sim = Simulator(TopologyConfig(nodes=3, seed=11))
            return [sim.deliver("s0000", "s0002", i).fire_at for i in range(10)]

        assert latencies() == latencies()


class TestRng:
    def test_streams_independent_of_index_count(self):
        a = child_rng(1, "sentinel", 3).random(5)
        child_rng(1, "sentinel", 4).random(5)
        assert (a == child_rng(1, "sentinel", 3).random(5)).all()

    def test_streams_differ(self):
        assert child_rng(1, "sentinel").random() != child_rng(1, "device").random()


def test_near_total_loss():
    sim = Simulator(TopologyConfig(nodes=2, loss=0.99, seed=8))
    seen = collecting(sim, "s0001")
    n = 10_000
    for i in range(n):
        sim.deliver("s0000", "s0001", i)
    sim.run_until(1.0)
    sigma = (n * 0.01 * 0.99) ** 0.5
    assert abs(len(seen) - n * 0.01) <= 3 * sigma
