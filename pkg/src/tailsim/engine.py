"""Deterministic discrete-event core: integer-nanosecond clock and event queue.

Time is an integer count of simulated nanoseconds; there is no floating-point
clock, so long runs cannot accumulate rounding error.  Events fire in strict
(fire_at, insertion sequence) order, which makes every run a total order and
therefore exactly reproducible for a given input schedule.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass

# Event kinds.  Handlers are registered per kind; payloads are kind-specific.
EV_LINK_FREE = 0
EV_PACKET_ARRIVAL = 1
EV_PACKET_DELIVER = 2
EV_FLOW_START = 3
EV_TRANSPORT_TIMEOUT = 4
EV_TELEMETRY_SAMPLE = 5
EV_RUN_END = 6
N_EVENT_KINDS = 7

EVENT_KIND_NAMES = {
    EV_LINK_FREE: "link-free",
    EV_PACKET_ARRIVAL: "packet-arrival-at-node",
    EV_PACKET_DELIVER: "packet-delivery-at-host",
    EV_FLOW_START: "flow-start",
    EV_TRANSPORT_TIMEOUT: "transport-timeout",
    EV_TELEMETRY_SAMPLE: "telemetry-sample",
    EV_RUN_END: "run-end",
}


class SchedulingError(Exception):
    """An event was scheduled before the current clock (an engine-use bug)."""


@dataclass
class RunSummary:
    """Outcome of one run_until() call."""

    events: int
    clock: int


class Engine:
    """Event queue plus virtual clock.

    A single engine instance is strictly single-threaded; independent
    instances may run concurrently in separate processes.  ``collect_trace``
    records (fire_at, sequence, kind) per processed event so small runs can
    be digest-compared; it is off by default because the log grows with the
    event count.
    """

    __slots__ = ("_heap", "_seq", "_clock", "_handlers", "_trace", "_total_events")

    def __init__(self, collect_trace: bool = False):
        self._heap: list = []
        self._seq = 0
        self._clock = 0
        self._handlers = [None] * N_EVENT_KINDS
        self._trace: list | None = [] if collect_trace else None
        self._total_events = 0

    @property
    def clock(self) -> int:
        return self._clock

    @property
    def total_events(self) -> int:
        return self._total_events

    def on(self, kind: int, handler) -> None:
        """Register the handler called as handler(fire_at, payload)."""
        self._handlers[kind] = handler

    def schedule(self, fire_at: int, kind: int, payload=None) -> int:
        """Queue an event; returns its insertion sequence number.

        Ties on fire_at break by insertion order (FIFO among simultaneous
        events), so simultaneous events never race.
        """
        if fire_at < self._clock:
            raise SchedulingError(
                f"event kind={kind} scheduled at {fire_at} ns, before clock {self._clock} ns"
            )
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (fire_at, seq, kind, payload))
        return seq

    def pending(self) -> int:
        return len(self._heap)

    def run_until(self, end: int) -> RunSummary:
        """Process every event with fire_at <= end.

        Returns once the queue is empty or the next event lies beyond
        ``end``.  The clock is left at the last processed event (it does not
        jump to ``end`` for an empty tail).
        """
        heap = self._heap
        handlers = self._handlers
        pop = heapq.heappop
        trace = self._trace
        n = 0
        while heap:
            item = heap[0]
            t = item[0]
            if t > end:
                break
            pop(heap)
            self._clock = t
            if trace is not None:
                trace.append((t, item[1], item[2]))
            handlers[item[2]](t, item[3])
            n += 1
        self._total_events += n
        return RunSummary(events=n, clock=self._clock)

    def trace_digest(self) -> str:
        """SHA-256 over the processed-event log (requires collect_trace)."""
        if self._trace is None:
            raise ValueError("engine was created without collect_trace")
        h = hashlib.sha256()
        for t, seq, kind in self._trace:
            h.update(t.to_bytes(8, "little"))
            h.update(seq.to_bytes(8, "little"))
            h.update(kind.to_bytes(1, "little"))
        return h.hexdigest()
