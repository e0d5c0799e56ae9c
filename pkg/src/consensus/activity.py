"""Activity shares: partial solutions prove a peer is mining"""

from collections import deque
from typing import Deque, Dict, Hashable, Optional, Tuple


class ActivityLedger:
    """Shares received per peer; a peer is active with at least one share in the trailing window"""

    def __init__(self, window: float):
        if window <= 0:
            raise ValueError("window must be > 0")
        self.window = window
        self._shares: Dict[Hashable, Deque[Tuple[float, object]]] = {}

    def record_share(self, peer: Hashable, now: float, share: object = None) -> None:
        q = self._shares.setdefault(peer, deque())
        if q and now < q[-1][0]:
            raise ValueError("shares must be recorded in time order")
        q.append((now, share))
        self._expire(q, now)

    def _expire(self, q: Deque, now: float) -> None:
        cutoff = now - self.window
        while q and q[0][0] < cutoff:
            q.popleft()

    def is_peer_active(self, peer: Hashable, now: float) -> bool:
        q = self._shares.get(peer)
        if not q:
            return False
        self._expire(q, now)
        return bool(q)

    def last_share(self, peer: Hashable) -> Optional[float]:
        q = self._shares.get(peer)
        return q[-1][0] if q else None
