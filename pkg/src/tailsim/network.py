"""Wires topology, switch ports, transport endpoints, and telemetry into a run.

One Simulation owns one engine and is strictly single-threaded; separate
instances are fully independent, which is what lets sweeps fan runs out
across processes.  Packets move as: sender injects at its host NIC port,
each directed channel serializes one packet at a time, switch arrival
enqueues at the ECMP-chosen output port, delivery at the destination host
dispatches to the transport endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from heapq import heappush

from .engine import (EV_FLOW_START, EV_LINK_FREE, EV_PACKET_ARRIVAL,
                     EV_PACKET_DELIVER, EV_TRANSPORT_TIMEOUT, Engine,
                     RunSummary)
from .fabric import (DEFAULT_PIAS_THRESHOLDS, MODE_NAMES, OutputPort, Packet,
                     QUEUES_PER_MODE)
from .telemetry import Metrics
from .topology import Topology, serialization_ns
from .transport import Receiver, Sender, TransportParams
from .workload import FlowSpec

INF_NS = 1 << 62


@dataclass
class SwitchParams:
    # Default port buffer is ~3x the fabric BDP (10 Gb/s x 80 us = 100 KB):
    # shallow enough that sustained congestion marks and drops, deep enough
    # that two windows converging on one port do not overflow it before the
    # first mark's echo can act.
    scheduler: str = "dctcp_fifo"
    capacity_bytes: int = 450_000
    ecn_threshold_frac: float = 0.25
    pias_thresholds: tuple = DEFAULT_PIAS_THRESHOLDS
    pias_queue_cap_bytes: int = 150_000
    sjf_bands: int = QUEUES_PER_MODE[3]

    @property
    def mode(self) -> int:
        try:
            return MODE_NAMES[self.scheduler]
        except KeyError:
            raise ValueError(f"unknown scheduler {self.scheduler!r}; "
                             f"one of {sorted(MODE_NAMES)}") from None

    @property
    def kthresh_bytes(self) -> int:
        return int(self.ecn_threshold_frac * self.capacity_bytes)


@dataclass
class RunOutcome:
    summary: RunSummary
    metrics: Metrics
    flows: list[FlowSpec]
    queue_hists: dict[int, list[int]]
    drained: bool


class Simulation:
    """One seeded, deterministic run over a fixed flow schedule."""

    def __init__(self, topo: Topology, flows: list[FlowSpec],
                 switch: SwitchParams | None = None,
                 transport: TransportParams | None = None,
                 track_queues: bool = True,
                 track_progress_flows: set[int] | None = None,
                 collect_trace: bool = False,
                 measure_window: tuple[int, int] | None = None):
        self.topo = topo
        self.flows = flows
        self.switch = switch or SwitchParams()
        self.transport = transport or TransportParams()
        self.engine = Engine(collect_trace=collect_trace)
        self.metrics = Metrics(n_flows=len(flows))
        self._track_progress = track_progress_flows or set()
        # Flows arriving inside the measurement window feed the statistics;
        # the rest (warmup, tail) only provide background traffic.
        self.measure_window = measure_window
        if measure_window is None:
            self.measured = [True] * len(flows)
        else:
            lo, hi = measure_window
            self.measured = [lo <= f.arrive_ns < hi for f in flows]
        self.senders: list[Sender | None] = [None] * len(flows)
        self.receivers: list[Receiver | None] = [None] * len(flows)
        self._flow_by_id = {f.flow_id: f for f in flows}
        self.ports: dict[tuple[int, int], OutputPort] = {}
        self._build_ports(track_queues)
        eng = self.engine
        eng.on(EV_FLOW_START, self._on_flow_start)
        eng.on(EV_PACKET_ARRIVAL, self._on_arrival)
        eng.on(EV_PACKET_DELIVER, self._on_deliver)
        eng.on(EV_LINK_FREE, self._on_free)
        eng.on(EV_TRANSPORT_TIMEOUT, self._on_timer)

    def _build_ports(self, track_queues: bool) -> None:
        topo = self.topo
        sp = self.switch
        mode = sp.mode
        n_queues = sp.sjf_bands if sp.scheduler == "sjf_ideal" else None
        hist_window = self.measure_window or (0, INF_NS)
        uid = 0
        for link in topo.links:
            for a, b in ((link.a, link.b), (link.b, link.a)):
                is_switch = not topo.is_host(a.node_uid)
                port = OutputPort(
                    uid=uid, node_uid=a.node_uid, dst_uid=b.node_uid,
                    dst_is_host=topo.is_host(b.node_uid),
                    rate_bps=link.rate_bps, prop_ns=link.propagation_ns,
                    is_switch=is_switch, mode=mode,
                    capacity=sp.capacity_bytes, kthresh=sp.kthresh_bytes,
                    track_occupancy=is_switch and track_queues,
                    n_queues=n_queues, hist_window=hist_window,
                    pias_queue_cap=sp.pias_queue_cap_bytes)
                self.ports[(a.node_uid, a.port_index)] = port
                uid += 1

    def _route(self, src: int, dst: int, flow_id: int) -> list[OutputPort]:
        return [self.ports[(p.node_uid, p.port_index)]
                for p in self.topo.route_ports(src, dst, flow_id)]

    # -- transport-facing hooks -------------------------------------------

    def inject(self, pkt: Packet, now: int) -> None:
        self.metrics.pkt_sent[pkt.flow_id] += 1
        self._enqueue(pkt.route[0], pkt, now)

    def arm_timer(self, sender: Sender, fire_at: int) -> None:
        self.engine.schedule(fire_at, EV_TRANSPORT_TIMEOUT, sender)

    def flow_completed(self, flow_id: int, now: int) -> None:
        self.metrics.fct_ns[flow_id] = now - self.senders[flow_id].start_ns

    def note_timeout(self) -> None:
        self.metrics.timeouts += 1

    def note_fast_retransmit(self) -> None:
        self.metrics.fast_retransmits += 1

    def note_reordered(self) -> None:
        self.metrics.reordered += 1

    def note_ofo(self) -> None:
        self.metrics.ofo_arrivals += 1

    # -- event handlers ----------------------------------------------------

    def _on_flow_start(self, t: int, fs: FlowSpec) -> None:
        fwd = self._route(fs.src, fs.dst, fs.flow_id)
        rev = self._route(fs.dst, fs.src, fs.flow_id)
        mode = self.switch.mode
        recv = Receiver(self, fs.flow_id, fs.size, rev, mode,
                        counted=self.measured[fs.flow_id])
        send = Sender(self, fs.flow_id, fs.size, fwd, mode, self.transport,
                      self.switch.pias_thresholds)
        if fs.flow_id in self._track_progress:
            send.progress = []
        self.receivers[fs.flow_id] = recv
        self.senders[fs.flow_id] = send
        send.start(t)

    def _on_arrival(self, t: int, pkt: Packet) -> None:
        hop = pkt.hop + 1
        pkt.hop = hop
        if hop == 1 and pkt.ce and not pkt.is_ack:
            self.metrics.first_hop_prio_violations += 1
        self._enqueue(pkt.route[hop], pkt, t)

    # The transmit path bypasses the queue machinery entirely whenever the
    # channel is idle (idle implies every queue is empty, so there is nothing
    # to schedule around), and a link-free wake event is created only while
    # packets are actually waiting.  Scheduling is inlined against the
    # engine's heap: these two functions account for most event traffic.

    def _enqueue(self, port: OutputPort, pkt: Packet, now: int) -> None:
        eng = self.engine
        if not port.wake_pending and now >= port.free_at:
            done = now + (pkt.size * 8_000_000_000 + port.rate_bps - 1) // port.rate_bps
            port.free_at = done
            seq = eng._seq
            eng._seq = seq + 1
            heappush(eng._heap, (
                done + port.prop_ns, seq,
                EV_PACKET_DELIVER if port.dst_is_host else EV_PACKET_ARRIVAL,
                pkt))
        elif port.push(pkt, now):
            if not port.wake_pending:
                port.wake_pending = True
                seq = eng._seq
                eng._seq = seq + 1
                heappush(eng._heap, (port.free_at, seq, EV_LINK_FREE, port))
        else:
            m = self.metrics
            m.drops += 1
            m.pkt_dropped[pkt.flow_id] += 1

    def _on_free(self, t: int, port: OutputPort) -> None:
        # Fires only while the port holds queued packets.
        pkt = port.pop(t)
        done = t + (pkt.size * 8_000_000_000 + port.rate_bps - 1) // port.rate_bps
        port.free_at = done
        eng = self.engine
        seq = eng._seq
        eng._seq = seq + 1
        heappush(eng._heap, (
            done + port.prop_ns, seq,
            EV_PACKET_DELIVER if port.dst_is_host else EV_PACKET_ARRIVAL,
            pkt))
        if port.occupancy > 0:
            seq = eng._seq
            eng._seq = seq + 1
            heappush(eng._heap, (done, seq, EV_LINK_FREE, port))
        else:
            port.wake_pending = False

    def _on_timer(self, t: int, sender: Sender) -> None:
        sender.on_timer(t)

    def _on_deliver(self, t: int, pkt: Packet) -> None:
        m = self.metrics
        fid = pkt.flow_id
        m.pkt_delivered[fid] += 1
        if pkt.is_ack:
            self.senders[fid].on_ack(pkt, t)
        else:
            if self.measured[fid]:
                m.data_arrivals += 1
                m.delivered_payload_bytes += pkt.payload
                m.record_mark(fid, pkt.marks)
            self.receivers[fid].on_data(pkt, t)

    # -- running -----------------------------------------------------------

    def run(self, horizon_ns: int | None = None) -> RunOutcome:
        """Schedule all flow arrivals and run to drain (or to the horizon).

        With no horizon the run ends when the event queue empties, i.e.
        when every injected flow has completed and every timer has lapsed.
        """
        eng = self.engine
        for fs in self.flows:
            eng.schedule(fs.arrive_ns, EV_FLOW_START, fs)
        end = horizon_ns if horizon_ns is not None else INF_NS
        summary = eng.run_until(end)
        drained = eng.pending() == 0
        end_clock = eng.clock
        hists = {}
        for key, port in self.ports.items():
            if port.hist is not None:
                port.flush_hist(end_clock)
                hists[port.uid] = port.hist
        return RunOutcome(summary=summary, metrics=self.metrics,
                          flows=self.flows, queue_hists=hists, drained=drained)

    # -- small accessors used by tests and the harness ---------------------

    def switch_ports(self):
        return [p for p in self.ports.values() if p.is_switch]

    def in_flight_packets(self) -> int:
        m = self.metrics
        return sum(m.pkt_sent) - sum(m.pkt_delivered) - sum(m.pkt_dropped)
