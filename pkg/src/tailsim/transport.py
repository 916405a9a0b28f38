"""Reliable windowed transport with ECN-proportional window reduction.

Senders keep the classic congestion machinery (slow start, congestion
avoidance, fast retransmit on three duplicate ACKs, exponential-backoff
retransmission timer) plus a marked-fraction estimator alpha: every
observation window the fraction F of acked bytes whose ACKs echoed a mark
folds into alpha = (1-g)*alpha + g*F, and a window with any mark cuts
cwnd by the factor (1 - alpha/2), at most once per window.

Receivers ACK every data packet (no delayed ACKs), echo the packet's CE
bit verbatim, and buffer out-of-order segments so priority-induced
reordering below the dup-ACK threshold causes no spurious retransmit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fabric import (MODE_PIAS, MODE_SJF_IDEAL, Packet, pias_priority,
                     sjf_band)


@dataclass
class TransportParams:
    mss: int = 1460
    g: float = 1.0 / 16.0
    init_cwnd_mss: int = 10
    min_rto_ns: int = 10_000_000
    max_rto_ns: int = 2_560_000_000
    dupack_threshold: int = 3
    # Grace period between the third duplicate ACK and acting on it: if the
    # gap fills in the meantime it was reordering, not loss.  Priority
    # schedulers reorder by design, so loss detection needs this slack.
    reorder_grace_ns: int = 100_000


class Sender:
    """Sending endpoint of one flow; owned by its host, engine-driven."""

    __slots__ = ("sim", "flow_id", "size", "route", "mode", "pias_thresholds",
                 "sjf_prio", "mss", "g", "min_rto", "max_rto", "dup_thresh",
                 "grace", "cwnd", "ssthresh", "alpha", "marked_bytes",
                 "acked_bytes", "window_end", "next_seq", "highest_acked",
                 "dup_acks", "prev_ack", "recover", "rto_cur",
                 "last_progress", "timer_armed", "completed", "pias_bytes",
                 "start_ns", "progress", "pending_rtx_seq",
                 "pending_rtx_deadline")

    def __init__(self, sim, flow_id: int, size: int, route: list, mode: int,
                 params: TransportParams, pias_thresholds):
        self.sim = sim
        self.flow_id = flow_id
        self.size = size
        self.route = route
        self.mode = mode
        self.pias_thresholds = pias_thresholds
        self.sjf_prio = sjf_band(size) if mode == MODE_SJF_IDEAL else 0
        self.mss = params.mss
        self.g = params.g
        self.min_rto = params.min_rto_ns
        self.max_rto = params.max_rto_ns
        self.dup_thresh = params.dupack_threshold
        self.grace = params.reorder_grace_ns
        self.cwnd = float(params.init_cwnd_mss * params.mss)
        self.ssthresh = float(1 << 60)
        self.alpha = 0.0
        self.marked_bytes = 0
        self.acked_bytes = 0
        self.window_end = 0
        self.next_seq = 0
        self.highest_acked = 0
        self.dup_acks = 0
        self.prev_ack = -1
        self.recover = 0
        self.rto_cur = params.min_rto_ns
        self.last_progress = 0
        self.timer_armed = False
        self.completed = False
        self.pias_bytes = 0
        self.start_ns = 0
        self.progress = None  # optional [(ns, acked_bytes)] log
        self.pending_rtx_seq = -1
        self.pending_rtx_deadline = 0

    def start(self, now: int) -> None:
        self.start_ns = now
        self.last_progress = now
        self._send_while_open(now)
        self.window_end = self.next_seq
        if not self.timer_armed:
            self.timer_armed = True
            self.sim.arm_timer(self, now + self.rto_cur)

    def _stamp_prio(self, payload: int) -> int:
        mode = self.mode
        if mode == MODE_PIAS:
            prio = pias_priority(self.pias_bytes, self.pias_thresholds)
            self.pias_bytes += payload
            return prio
        if mode == MODE_SJF_IDEAL:
            return self.sjf_prio
        return 0

    def _transmit(self, seq: int, now: int) -> None:
        payload = min(self.mss, self.size - seq)
        pkt = Packet(self.flow_id, seq, payload, False, self.route,
                     prio=self._stamp_prio(payload))
        pkt.sent_at = now
        self.sim.inject(pkt, now)

    def _send_while_open(self, now: int) -> None:
        cwnd = int(self.cwnd)
        while self.next_seq < self.size and self.next_seq - self.highest_acked < cwnd:
            self._transmit(self.next_seq, now)
            self.next_seq += min(self.mss, self.size - self.next_seq)

    def on_ack(self, pkt: Packet, now: int) -> None:
        if self.completed:
            return
        ack_no = pkt.ack_no
        if ack_no <= self.highest_acked:
            # Stale or duplicate: never touches window math beyond dup
            # counting.  Only a repeat of the previously seen ack number is
            # a duplicate; the first ack at a level starts the count.
            if self.next_seq > self.highest_acked and ack_no == self.prev_ack:
                self.dup_acks += 1
                if (self.dup_acks == self.dup_thresh
                        and self.highest_acked >= self.recover
                        and self.pending_rtx_seq < 0):
                    # Hold fire for the grace period; a reordering-induced
                    # gap fills itself and cancels this.
                    self.pending_rtx_seq = self.highest_acked
                    self.pending_rtx_deadline = now + self.grace
                    self.sim.arm_timer(self, self.pending_rtx_deadline)
            else:
                self.prev_ack = ack_no
                self.dup_acks = 0
            return
        newly = ack_no - self.highest_acked
        self.highest_acked = ack_no
        self.prev_ack = ack_no
        self.acked_bytes += newly
        if pkt.ece_echo:
            self.marked_bytes += newly
            if self.ssthresh > self.cwnd:
                # Congestion signal during slow start ends exponential
                # growth at once; the proportional cut still waits for the
                # window boundary.
                self.ssthresh = self.cwnd
        closing = ack_no >= self.window_end
        if closing:
            cut = self._close_window()
        else:
            cut = False
        if not cut:
            # A window answered with a proportional cut takes no growth;
            # otherwise slow start adds the acked bytes and congestion
            # avoidance about one segment per window.
            if self.cwnd < self.ssthresh:
                self.cwnd += newly
            else:
                self.cwnd += (self.mss * newly) / self.cwnd
        self.dup_acks = 0
        self.last_progress = now
        self.rto_cur = self.min_rto
        if self.pending_rtx_seq >= 0 and ack_no > self.pending_rtx_seq:
            self.pending_rtx_seq = -1  # gap filled: reordering, not loss
        if ack_no < self.recover:
            # Partial ack while recovering: the next hole is known lost;
            # resend it now rather than stalling into a timeout chain.
            self._transmit(ack_no, now)
        if self.progress is not None:
            self.progress.append((now, ack_no))
        if ack_no >= self.size:
            self.completed = True
            self.sim.flow_completed(self.flow_id, now)
            return
        self._send_while_open(now)
        if closing:
            # The next observation window spans what is now in flight; set
            # after refilling so one window approximates one RTT of data.
            self.window_end = self.next_seq

    def _close_window(self) -> bool:
        f = self.marked_bytes / self.acked_bytes
        self.alpha = (1.0 - self.g) * self.alpha + self.g * f
        if not 0.0 <= self.alpha <= 1.0:
            raise RuntimeError(f"alpha left [0,1]: {self.alpha}")
        cut = self.marked_bytes > 0
        if cut:
            self.cwnd = max(float(self.mss), self.cwnd * (1.0 - self.alpha / 2.0))
            self.ssthresh = max(2.0 * self.mss, self.cwnd)
        self.marked_bytes = 0
        self.acked_bytes = 0
        return cut

    def on_timer(self, now: int) -> None:
        if self.completed:
            self.timer_armed = False
            return
        if self.pending_rtx_seq >= 0 and now >= self.pending_rtx_deadline:
            seq = self.pending_rtx_seq
            self.pending_rtx_seq = -1
            if self.highest_acked <= seq:
                # Gap survived the grace period: treat as loss.
                self.recover = self.next_seq
                self.ssthresh = max(2.0 * self.mss, self.cwnd / 2.0)
                self.cwnd = self.ssthresh
                self.sim.note_fast_retransmit()
                self._transmit(seq, now)
                return
        deadline = self.last_progress + self.rto_cur
        if now < deadline:
            self.sim.arm_timer(self, deadline)
            return
        # Retransmission timeout: collapse the window, back off, resend the
        # first unacked segment.
        self.ssthresh = max(2.0 * self.mss, self.cwnd / 2.0)
        self.cwnd = float(self.mss)
        self.rto_cur = min(self.rto_cur * 2, self.max_rto)
        self.dup_acks = 0
        self.recover = self.next_seq
        self.last_progress = now
        self.sim.note_timeout()
        self._transmit(self.highest_acked, now)
        self.sim.arm_timer(self, now + self.rto_cur)


class Receiver:
    """Receiving endpoint: cumulative ACK per data packet, CE echoed."""

    __slots__ = ("sim", "flow_id", "size", "route", "recv_next", "buffered",
                 "max_start", "ack_prio", "counted", "reordered", "ofo")

    def __init__(self, sim, flow_id: int, size: int, route: list, mode: int,
                 counted: bool = True):
        self.sim = sim
        self.flow_id = flow_id
        self.size = size
        self.route = route
        self.recv_next = 0
        self.buffered: dict[int, int] = {}
        self.max_start = -1
        self.counted = counted  # inside the run's measurement window
        self.reordered = 0      # arrivals behind an already-seen higher seq
        self.ofo = 0            # arrivals that could not append in order
        # ACKs carry the mode's own stamp: under pias the receiver has sent
        # no data bytes so its stamp stays at the top level; under sjf they
        # ride in their flow's band.
        self.ack_prio = sjf_band(size) if mode == MODE_SJF_IDEAL else 0

    def on_data(self, pkt: Packet, now: int) -> None:
        seq = pkt.seq
        end = seq + pkt.payload
        if seq < self.max_start:
            self.reordered += 1
            if self.counted:
                self.sim.note_reordered()
        elif seq > self.max_start:
            self.max_start = seq
        if end > self.recv_next:
            if seq <= self.recv_next:
                self.recv_next = end
                buffered = self.buffered
                while self.recv_next in buffered:
                    self.recv_next = buffered.pop(self.recv_next)
            else:
                self.ofo += 1
                if self.counted:
                    self.sim.note_ofo()
                prev = self.buffered.get(seq, 0)
                if end > prev:
                    self.buffered[seq] = end
        ack = Packet(self.flow_id, self.recv_next, 0, True, self.route,
                     prio=self.ack_prio, ack_no=self.recv_next)
        ack.ece_echo = pkt.ce
        ack.sent_at = now
        self.sim.inject(ack, now)
