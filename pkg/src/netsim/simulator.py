"""Deterministic discrete-event simulation loop"""

from __future__ import annotations
import heapq
import logging
from collections import Counter
from typing import Any, Callable, Dict, List, Optional

import networkx as nx

from netsim.models import Envelope, EventKind, NetworkError, SimEvent, TopologyConfig
from netsim.rng import child_rng

logger = logging.getLogger(__name__)

Handler = Callable[[SimEvent], None]


def build_topology(cfg: TopologyConfig, node_ids: List[str]) -> nx.Graph:
    if cfg.full_mesh:
        g = nx.complete_graph(len(node_ids))
    else:
        degree = cfg.degree
        if (degree * len(node_ids)) % 2:
            degree += 1
        g = nx.random_regular_graph(degree, len(node_ids), seed=cfg.seed)
    return nx.relabel_nodes(g, dict(enumerate(node_ids)))


class Simulator:
    """Single-threaded event queue ordered by (fire_at, seq).

    Same topology config and seed always give the same event order.
    """

    def __init__(self, topology: TopologyConfig, node_ids: Optional[List[str]] = None):
        self.topology = topology
        self.node_ids = node_ids or [f"s{i:04d}" for i in range(topology.nodes)]
        if len(self.node_ids) != topology.nodes:
            raise ValueError("node_ids must match topology.nodes")
        self.graph = build_topology(topology, self.node_ids)
        self._neighbors: Dict[str, List[str]] = {n: sorted(self.graph.neighbors(n)) for n in self.node_ids}
        self._net_rng = {n: child_rng(topology.seed, "network", i) for i, n in enumerate(self.node_ids)}
        self.handlers: Dict[str, Handler] = {}
        self.now = 0.0
        self._seq = 0
        self._queue: List[SimEvent] = []
        self.processed: Counter = Counter()
        self.sent = 0
        self.dropped = 0

    # ------------------------------------------------------------- scheduling

    def register(self, node_id: str, handler: Handler) -> None:
        self.handlers[node_id] = handler

    def schedule(self, delay: float, kind: EventKind, target: str, payload: Any = None) -> SimEvent:
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        self._seq += 1
        ev = SimEvent(self.now + delay, self._seq, kind, target, payload)
        heapq.heappush(self._queue, ev)
        return ev

    def cancel(self, event: SimEvent) -> None:
        event.cancelled = True

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    def run_until(self, t_end: float) -> int:
        """Process every event with fire_at <= t_end; returns the number processed"""
        if t_end < self.now:
            raise ValueError(f"t_end {t_end} is before current time {self.now}")
        count = 0
        queue = self._queue
        while queue and queue[0].fire_at <= t_end:
            ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = ev.fire_at
            handler = self.handlers.get(ev.target)
            if handler is None:
                logger.debug(f"no handler for {ev.target}, dropping {ev.kind.value}")
                continue
            handler(ev)
            self.processed[ev.kind] += 1
            count += 1
        self.now = t_end
        return count

    # ---------------------------------------------------------------- network

    def neighbors(self, node_id: str) -> List[str]:
        return self._neighbors[node_id]

    def has_edge(self, a: str, b: str) -> bool:
        return self.graph.has_edge(a, b)

    def deliver(self, sender: str, receiver: str, message: Any) -> Optional[SimEvent]:
        """Schedule a MessageDelivery after sampled latency, or drop it with probability `loss`"""
        if not self.graph.has_edge(sender, receiver):
            raise NetworkError(f"no edge {sender} -> {receiver}")
        rng = self._net_rng[sender]
        self.sent += 1
        if self.topology.loss > 0 and rng.random() < self.topology.loss:
            self.dropped += 1
            logger.debug(f"dropped {type(message).__name__} {sender} -> {receiver}")
            return None
        lo, hi = self.topology.latency_min_ms, self.topology.latency_max_ms
        latency = (lo + (hi - lo) * rng.random()) / 1000.0
        return self.schedule(latency, EventKind.MESSAGE_DELIVERY, receiver, Envelope(sender, message, self.now))

    def stats(self) -> Dict[str, int]:
        out = {k.value: self.processed.get(k, 0) for k in EventKind}
        out["messages_sent"] = self.sent
        out["messages_dropped"] = self.dropped
        return out
