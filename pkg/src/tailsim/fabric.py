"""Output-port queueing: bounded priority queues, ECN marking, four schedulers.

A port owns an ordered list of FIFO queues served with strict priority
(queue 0 drains first; a lower queue is served only when every queue above
it is empty).  Marking is done on enqueue against the instantaneous
total-port occupancy: arriving packets see the queue they join.  The
classification a packet receives uses the CE bit it *arrived* with, so a
mark applied here takes effect at the next switch, never at this one.

Scheduler modes
---------------
dctcp_fifo  single FIFO (queue index 1; queue 0 idle) - plain DCTCP fabric.
ecn_prio    two queues: CE-marked packets and ACKs go to queue 0, the rest
            to queue 1.  This is the tail-packet prioritization scheme: a
            packet that already crossed a congested hop jumps the line at
            later hops.
pias        four queues; the sender stamps a priority that demotes as the
            flow's sent-byte count crosses thresholds.
sjf_ideal   eight queues banded on log2(flow size); smaller flows higher.
"""

from __future__ import annotations

from collections import deque

MODE_DCTCP_FIFO = 0
MODE_ECN_PRIO = 1
MODE_PIAS = 2
MODE_SJF_IDEAL = 3

MODE_NAMES = {
    "dctcp_fifo": MODE_DCTCP_FIFO,
    "ecn_prio": MODE_ECN_PRIO,
    "pias": MODE_PIAS,
    "sjf_ideal": MODE_SJF_IDEAL,
}
MODE_LABELS = {v: k for k, v in MODE_NAMES.items()}

QUEUES_PER_MODE = {
    MODE_DCTCP_FIFO: 2,
    MODE_ECN_PRIO: 2,
    MODE_PIAS: 4,
    MODE_SJF_IDEAL: 8,
}

HEADER_BYTES = 40
MTU_BYTES = 1500

DEFAULT_PIAS_THRESHOLDS = (16_000, 128_000, 512_000)
PIAS_QUEUE_CAP_BYTES = 150_000  # finite per-sub-queue room, ~100 MTU
SJF_BASE_BYTES = 4096

QUEUE_BUCKET_BYTES = 1500   # byte resolution used by the pure CDF helpers
QUEUE_HIST_MAX_PKTS = 512   # per-queue packet-count histogram ceiling


class ClassifyError(Exception):
    """A packet reached a scheduler without the stamp that scheduler needs."""


class Packet:
    """The unit moved through the fabric.

    ``size`` is bytes on the wire (payload + header for data, header only
    for ACKs) and is what queues and links account in.  ``ce`` is the
    congestion-experienced bit: once set in-network it is never cleared.
    ``marks`` counts the hops at which the mark condition held, which can
    exceed one even though the wire bit saturates.
    """

    __slots__ = ("flow_id", "seq", "size", "payload", "is_ack", "ce",
                 "ece_echo", "prio", "marks", "route", "hop", "sent_at",
                 "ack_no")

    def __init__(self, flow_id: int, seq: int, payload: int, is_ack: bool,
                 route: list, prio: int = 0, ack_no: int = 0):
        self.flow_id = flow_id
        self.seq = seq
        self.payload = payload
        self.size = payload + HEADER_BYTES
        self.is_ack = is_ack
        self.ce = False
        self.ece_echo = False
        self.prio = prio
        self.marks = 0
        self.route = route
        self.hop = 0
        self.sent_at = 0
        self.ack_no = ack_no


def pias_priority(bytes_sent: int, thresholds=DEFAULT_PIAS_THRESHOLDS) -> int:
    """Priority level for a flow that has sent bytes_sent so far.

    Level 0 until the first threshold, then one level per boundary crossed;
    monotone in bytes_sent, so a flow only ever demotes.
    """
    level = 0
    for t in thresholds:
        if bytes_sent >= t:
            level += 1
        else:
            break
    return level


def sjf_band(flow_size: int, n_bands: int = QUEUES_PER_MODE[MODE_SJF_IDEAL]) -> int:
    """log2 size band, clamped; smaller flows map to higher priority."""
    band = 0
    size = flow_size // SJF_BASE_BYTES
    while size > 1 and band < n_bands - 1:
        size >>= 1
        band += 1
    return band


class OutputPort:
    """Per-output-port queue set plus the attached directed channel state.

    Host NIC ports are modeled as an unbounded single FIFO with no marking:
    drops and ECN exist only in switches.  Switch ports share one byte
    budget (``capacity``) across their queues and mark when the pre-enqueue
    occupancy is at or above the threshold K.

    ``hist[qi][n]`` accumulates the simulated time queue qi spent holding
    exactly n packets (clamped at the histogram ceiling): the holding-time
    weighted queue-length distribution with no per-sample storage.  Queue
    length is counted in packets, which is what a drained ACK or a promoted
    data packet actually removes from the line a later arrival waits in.
    Each queue accrues lazily against its own last-touch time.
    """

    __slots__ = ("uid", "node_uid", "dst_uid", "dst_is_host", "rate_bps",
                 "prop_ns", "is_switch", "mode", "n_queues", "queues",
                 "qbytes", "occupancy", "capacity", "queue_cap", "kthresh",
                 "free_at", "wake_pending", "drops", "demotions", "marks",
                 "hist", "hist_last_t", "hist_end", "debug_log")

    def __init__(self, uid: int, node_uid: int, dst_uid: int, dst_is_host: bool,
                 rate_bps: int, prop_ns: int, is_switch: bool, mode: int,
                 capacity: int, kthresh: int, track_occupancy: bool = False,
                 n_queues: int | None = None,
                 hist_window: tuple[int, int] = (0, 1 << 62),
                 pias_queue_cap: int = PIAS_QUEUE_CAP_BYTES):
        self.uid = uid
        self.node_uid = node_uid
        self.dst_uid = dst_uid
        self.dst_is_host = dst_is_host
        self.rate_bps = rate_bps
        self.prop_ns = prop_ns
        self.is_switch = is_switch
        self.mode = mode
        self.n_queues = (n_queues or QUEUES_PER_MODE[mode]) if is_switch else 1
        self.queues = [deque() for _ in range(self.n_queues)]
        self.qbytes = [0] * self.n_queues
        self.occupancy = 0
        self.capacity = capacity if is_switch else (1 << 62)
        # pias models the realistic finite sub-queue: a packet whose stamped
        # queue is full is demoted to the next one with room (dropped only
        # when none has).  The other modes share the full port budget.
        self.queue_cap = pias_queue_cap if mode == MODE_PIAS else self.capacity
        self.kthresh = kthresh
        self.free_at = 0        # channel serializes one packet at a time
        self.wake_pending = False
        self.drops = 0
        self.demotions = 0
        self.marks = 0
        self.hist = ([[0] * (QUEUE_HIST_MAX_PKTS + 1)
                      for _ in range(self.n_queues)]
                     if (is_switch and track_occupancy) else None)
        # occupancy time is accounted only inside [hist_last_t[qi], hist_end)
        self.hist_last_t = [hist_window[0]] * self.n_queues
        self.hist_end = hist_window[1]
        self.debug_log = None  # test hook: (queue_idx, lens-at-dequeue)

    def classify(self, pkt: Packet) -> int:
        mode = self.mode
        if mode == MODE_ECN_PRIO:
            return 0 if (pkt.ce or pkt.is_ack) else 1
        if mode == MODE_DCTCP_FIFO:
            return 1
        # pias / sjf_ideal: sender-stamped level
        if pkt.prio >= self.n_queues:
            raise ClassifyError(
                f"stamped priority {pkt.prio} outside {self.n_queues}-queue port")
        return pkt.prio

    def push(self, pkt: Packet, now: int) -> bool:
        """Enqueue; returns False on tail drop.

        Order matters: the drop test sees the packet size, classification
        sees the arrival CE bit, and only then is this hop's mark applied.
        """
        occ = self.occupancy
        if not self.is_switch:
            self.queues[0].append(pkt)
            self.occupancy = occ + pkt.size
            return True
        if occ + pkt.size > self.capacity:
            self.drops += 1
            return False
        mode = self.mode
        if mode == MODE_ECN_PRIO:
            qi = 0 if (pkt.ce or pkt.is_ack) else 1
        elif mode == MODE_DCTCP_FIFO:
            qi = 1
        else:
            qi = pkt.prio
            if qi >= self.n_queues:
                raise ClassifyError(
                    f"stamped priority {qi} outside {self.n_queues}-queue port")
            if mode == MODE_PIAS:
                cap = self.queue_cap
                size = pkt.size
                qbytes = self.qbytes
                while qi < self.n_queues and qbytes[qi] + size > cap:
                    qi += 1
                if qi >= self.n_queues:
                    self.drops += 1
                    return False
                if qi != pkt.prio:
                    self.demotions += 1
        if occ >= self.kthresh:
            pkt.ce = True
            pkt.marks += 1
            self.marks += 1
        hist = self.hist
        if hist is not None:
            t = now if now < self.hist_end else self.hist_end
            dt = t - self.hist_last_t[qi]
            if dt > 0:
                n = len(self.queues[qi])
                hist[qi][n if n < QUEUE_HIST_MAX_PKTS else QUEUE_HIST_MAX_PKTS] += dt
                self.hist_last_t[qi] = t
        self.queues[qi].append(pkt)
        self.qbytes[qi] += pkt.size
        self.occupancy = occ + pkt.size
        return True

    def pop(self, now: int) -> Packet | None:
        """Head of the lowest-index nonempty queue (strict priority)."""
        qi = 0
        for q in self.queues:
            if q:
                if self.debug_log is not None:
                    self.debug_log.append((qi, tuple(len(x) for x in self.queues)))
                hist = self.hist
                if hist is not None:
                    t = now if now < self.hist_end else self.hist_end
                    dt = t - self.hist_last_t[qi]
                    if dt > 0:
                        n = len(q)
                        hist[qi][n if n < QUEUE_HIST_MAX_PKTS else QUEUE_HIST_MAX_PKTS] += dt
                        self.hist_last_t[qi] = t
                pkt = q.popleft()
                self.occupancy -= pkt.size
                self.qbytes[qi] -= pkt.size
                return pkt
            qi += 1
        return None

    def flush_hist(self, end_ns: int) -> None:
        """Close the histograms at run end so the final level is weighted."""
        if self.hist is not None:
            t = end_ns if end_ns < self.hist_end else self.hist_end
            for qi in range(self.n_queues):
                dt = t - self.hist_last_t[qi]
                if dt > 0:
                    n = len(self.queues[qi])
                    self.hist[qi][n if n < QUEUE_HIST_MAX_PKTS else QUEUE_HIST_MAX_PKTS] += dt
                    self.hist_last_t[qi] = t
