"""Deterministic discrete-event simulation: clock, scheduler and a simulated
duplex transport with seeded latency/jitter.

Everything runs on one event heap ordered by (time, insertion counter), so a
run is a pure function of its seeds.  Delays are monotonized per direction:
a message never overtakes an earlier one on the same link.
"""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable

from .protocol import LatencyProfile


@dataclass(order=True)
class _Event:
    at_ms: float
    order: int
    fn: Callable[[], None] = field(compare=False)


class SimScheduler:
    """Single-threaded event loop over simulated milliseconds."""

    def __init__(self) -> None:
        self.now_ms: float = 0.0
        self._heap: list[_Event] = []
        self._counter = 0

    def call_at(self, at_ms: float, fn: Callable[[], None]) -> None:
        if at_ms < self.now_ms:
            at_ms = self.now_ms
        self._counter += 1
        heapq.heappush(self._heap, _Event(at_ms, self._counter, fn))

    def call_after(self, delay_ms: float, fn: Callable[[], None]) -> None:
        self.call_at(self.now_ms + delay_ms, fn)

    def run_until(self, t_end_ms: float) -> None:
        """Run events with time <= t_end_ms, then advance the clock to it."""
        while self._heap and self._heap[0].at_ms <= t_end_ms:
            ev = heapq.heappop(self._heap)
            self.now_ms = ev.at_ms
            ev.fn()
        self.now_ms = max(self.now_ms, t_end_ms)

    def drain(self, limit_ms: float | None = None) -> None:
        """Run every pending event (optionally up to a horizon)."""
        while self._heap:
            if limit_ms is not None and self._heap[0].at_ms > limit_ms:
                break
            ev = heapq.heappop(self._heap)
            self.now_ms = ev.at_ms
            ev.fn()

    @property
    def pending(self) -> int:
        return len(self._heap)


class SimEndpoint:
    """One side of a simulated duplex link.

    Writing is immediate; delivery to the peer happens later on the
    scheduler, after the profile's delay.  Set ``on_line`` before traffic
    flows; lines arriving on a closed endpoint are dropped.
    """

    def __init__(self, scheduler: SimScheduler, label: str) -> None:
        self.scheduler = scheduler
        self.label = label
        self.on_line: Callable[[bytes], None] | None = None
        self.on_close: Callable[[], None] | None = None
        self.closed = False
        self._peer: "SimEndpoint | None" = None
        self._delay_fn: Callable[[], float] = lambda: 0.0
        self._last_delivery_ms = 0.0

    def send_line(self, line: bytes) -> None:
        if self.closed:
            return
        peer = self._peer
        assert peer is not None, "endpoint not paired"
        deliver_at = self.scheduler.now_ms + self._delay_fn()
        if deliver_at < self._last_delivery_ms:
            deliver_at = self._last_delivery_ms  # FIFO per direction
        self._last_delivery_ms = deliver_at
        self.scheduler.call_at(deliver_at, lambda: peer._deliver(line))

    def _deliver(self, line: bytes) -> None:
        if self.closed or self.on_line is None:
            return
        self.on_line(line)

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        peer = self._peer
        if peer is not None and not peer.closed:
            self.scheduler.call_after(0.0, peer._peer_closed)
        if self.on_close is not None:
            self.on_close()

    def _peer_closed(self) -> None:
        if self.closed:
            return
        self.closed = True
        if self.on_close is not None:
            self.on_close()


def simulated_transport(
    scheduler: SimScheduler,
    profile: LatencyProfile,
) -> tuple[SimEndpoint, SimEndpoint]:
    """An in-process duplex channel with seeded base delay +/- uniform jitter.

    Returns (client_end, server_end); each end's sends arrive at the other
    after the sampled delay, order-preserving per direction.
    """
    rng = random.Random(profile.seed)

    def delay() -> float:
        if profile.jitter_ms == 0:
            return float(profile.base_delay_ms)
        return max(
            0.0,
            profile.base_delay_ms + rng.uniform(-profile.jitter_ms, profile.jitter_ms),
        )

    a = SimEndpoint(scheduler, "client")
    b = SimEndpoint(scheduler, "server")
    a._peer = b
    b._peer = a
    a._delay_fn = delay
    b._delay_fn = delay
    return a, b
