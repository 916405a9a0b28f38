"""Sender/receiver state machines against hand-computed expectations."""

import pytest

from tailsim.fabric import MODE_DCTCP_FIFO, MODE_PIAS, Packet
from tailsim.transport import Receiver, Sender, TransportParams

MSS = 1460


class FakeSim:
    """Collects transport output without a network."""

    def __init__(self):
        self.sent = []
        self.timers = []
        self.completed = []
        self.timeouts = 0
        self.fast_rtx = 0
        self.reordered = 0
        self.ofo = 0

    def inject(self, pkt, now):
        self.sent.append((now, pkt))

    def arm_timer(self, sender, fire_at):
        self.timers.append(fire_at)

    def flow_completed(self, flow_id, now):
        self.completed.append((flow_id, now))

    def note_timeout(self):
        self.timeouts += 1

    def note_fast_retransmit(self):
        self.fast_rtx += 1

    def note_reordered(self):
        self.reordered += 1

    def note_ofo(self):
        self.ofo += 1


def make_sender(size=10 * MSS, mode=MODE_DCTCP_FIFO, **params):
    sim = FakeSim()
    sender = Sender(sim, 0, size, route=[], mode=mode,
                    params=TransportParams(**params), pias_thresholds=(16_000, 128_000, 512_000))
    return sim, sender


def ack(ack_no, ece=False):
    pkt = Packet(0, ack_no, 0, True, route=[], ack_no=ack_no)
    pkt.ece_echo = ece
    return pkt


def test_initial_window_is_ten_segments():
    sim, snd = make_sender(size=100 * MSS)
    snd.start(0)
    assert len(sim.sent) == 10
    assert snd.next_seq == 10 * MSS
    assert snd.window_end == 10 * MSS


def test_alpha_update_hand_table():
    # alpha' = (1-g) alpha + g F, computed independently per case
    cases = []
    for alpha in (0.0, 0.125, 0.25, 0.5, 0.9375, 1.0):
        for f in (0.0, 0.5, 1.0):
            cases.append((alpha, f, 1 / 16))
    cases += [(0.5, 0.0, 1 / 8), (0.75, 1.0, 1 / 4)]
    assert len(cases) == 20
    for alpha0, f, g in cases:
        sim, snd = make_sender(size=100 * MSS, g=g)
        snd.start(0)
        snd.alpha = alpha0
        window = snd.window_end
        # ack the whole first window; echo-mark the fraction f of its bytes
        marked = int(round(f * window))
        if marked:
            snd.on_ack(ack(marked, ece=True), 1000)
        if marked < window:
            snd.on_ack(ack(window, ece=False), 2000)
        expected = (1 - g) * alpha0 + g * f
        assert snd.alpha == pytest.approx(expected, abs=1e-12)


def test_spec_arithmetic_examples():
    # (1 - 1/16) * 0.5 with no marks
    sim, snd = make_sender(size=100 * MSS)
    snd.start(0)
    snd.alpha = 0.5
    snd.on_ack(ack(snd.window_end), 100)
    assert snd.alpha == pytest.approx(0.46875)

    # fully marked first window from alpha 0: alpha' = 1/16,
    # cwnd 16 MSS -> 15.5 MSS
    sim, snd = make_sender(size=100 * MSS, init_cwnd_mss=16)
    snd.start(0)
    snd.ssthresh = float(16 * MSS)  # congestion avoidance: isolate the cut
    snd.on_ack(ack(snd.window_end, ece=True), 100)
    assert snd.alpha == pytest.approx(1 / 16)
    assert snd.cwnd / MSS == pytest.approx(16 * (1 - (1 / 16) / 2), rel=1e-3)


def test_alpha_decays_geometrically_without_marks():
    sim, snd = make_sender(size=100_000 * MSS)
    snd.start(0)
    snd.alpha = 0.8
    g = snd.g
    expected = 0.8
    for w in range(12):
        snd.on_ack(ack(snd.window_end), 1000 * (w + 1))
        expected *= (1 - g)
        assert snd.alpha == pytest.approx(expected, rel=1e-12)


def test_alpha_stays_in_unit_interval_for_random_patterns():
    import random
    rnd = random.Random(9)
    sim, snd = make_sender(size=10_000 * MSS)
    snd.start(0)
    t = 0
    for _ in range(300):
        t += 1000
        marked = rnd.random() < 0.5
        snd.on_ack(ack(min(snd.window_end, snd.size), ece=marked), t)
        assert 0.0 <= snd.alpha <= 1.0
        if snd.completed:
            break


def test_at_most_one_cut_per_window():
    sim, snd = make_sender(size=1000 * MSS)
    snd.start(0)
    snd.ssthresh = snd.cwnd
    before = snd.cwnd
    w = snd.window_end
    # two marked acks inside one window: only the boundary applies the cut
    snd.on_ack(ack(w // 2, ece=True), 100)
    mid = snd.cwnd
    assert mid >= before  # growth only; no cut yet
    snd.on_ack(ack(w, ece=True), 200)
    after_cut = snd.cwnd
    assert after_cut < mid


def test_slow_start_exits_on_first_echo():
    sim, snd = make_sender(size=1000 * MSS)
    snd.start(0)
    assert snd.ssthresh > 10 ** 12
    snd.on_ack(ack(MSS, ece=True), 50)
    assert snd.ssthresh == pytest.approx(10 * MSS)  # clamped pre-growth
    assert snd.ssthresh <= snd.cwnd


def test_rto_doubles_and_caps():
    sim, snd = make_sender(size=100 * MSS, min_rto_ns=10_000_000,
                           max_rto_ns=2_560_000_000)
    snd.start(0)
    assert snd.rto_cur == 10_000_000
    t = 10_000_001
    snd.on_timer(t)
    assert sim.timeouts == 1
    assert snd.rto_cur == 20_000_000
    snd.on_timer(t + 20_000_001)
    assert snd.rto_cur == 40_000_000
    assert snd.cwnd == float(MSS)


def test_timeout_retransmits_first_unacked():
    sim, snd = make_sender(size=100 * MSS)
    snd.start(0)
    sim.sent.clear()
    snd.on_timer(10_000_001)
    assert len(sim.sent) == 1
    assert sim.sent[0][1].seq == 0


def test_progress_resets_rto_backoff():
    sim, snd = make_sender(size=100 * MSS)
    snd.start(0)
    snd.on_timer(10_000_001)
    assert snd.rto_cur == 20_000_000
    snd.on_ack(ack(MSS), 10_500_000)
    assert snd.rto_cur == 10_000_000


def test_three_duplicate_acks_schedule_grace_then_retransmit():
    sim, snd = make_sender(size=100 * MSS, reorder_grace_ns=100_000)
    snd.start(0)
    snd.on_ack(ack(MSS), 100)           # advance once; prev_ack = MSS
    sim.sent.clear()
    for i in range(3):
        snd.on_ack(ack(MSS), 200 + i)   # three duplicates
    assert snd.pending_rtx_seq == MSS
    assert not sim.sent                 # holds fire during the grace window
    snd.on_timer(200 + 2 + 100_000)
    assert sim.fast_rtx == 1
    assert sim.sent and sim.sent[0][1].seq == MSS


def test_gap_filled_during_grace_cancels_retransmit():
    sim, snd = make_sender(size=100 * MSS, reorder_grace_ns=100_000)
    snd.start(0)
    snd.on_ack(ack(MSS), 100)
    for i in range(3):
        snd.on_ack(ack(MSS), 200 + i)
    assert snd.pending_rtx_seq == MSS
    snd.on_ack(ack(5 * MSS), 5_000)     # stragglers arrive: gap was reordering
    sim.sent.clear()
    snd.on_timer(200 + 2 + 100_000)
    assert sim.fast_rtx == 0
    assert not [p for _, p in sim.sent if p.seq == MSS]


def test_partial_ack_retransmits_next_hole_immediately():
    sim, snd = make_sender(size=100 * MSS)
    snd.start(0)
    snd.recover = 6 * MSS
    sim.sent.clear()
    snd.on_ack(ack(2 * MSS), 500)       # partial ack below recover
    assert sim.sent and sim.sent[0][1].seq == 2 * MSS


def test_completion_reported_once():
    sim, snd = make_sender(size=3 * MSS)
    snd.start(0)
    snd.on_ack(ack(3 * MSS), 900)
    snd.on_ack(ack(3 * MSS), 950)
    assert sim.completed == [(0, 900)]


def test_pias_stamp_follows_bytes_sent():
    sim, snd = make_sender(size=200 * MSS, mode=MODE_PIAS)
    snd.start(0)
    assert sim.sent[0][1].prio == 0
    # walk the flow past the first threshold (16 KB)
    t = 0
    while snd.pias_bytes <= 16_000 and not snd.completed:
        t += 1000
        snd.on_ack(ack(min(snd.highest_acked + MSS, snd.size)), t)
    later = sim.sent[-1][1]
    assert later.prio >= 1


# -- receiver ----------------------------------------------------------------

def make_receiver(size=10 * MSS):
    sim = FakeSim()
    recv = Receiver(sim, 0, size, route=[], mode=MODE_DCTCP_FIFO)
    return sim, recv


def data(seq, payload=MSS, ce=False):
    pkt = Packet(0, seq, payload, False, route=[])
    pkt.ce = ce
    return pkt


def test_echo_copies_ce_per_packet():
    sim, recv = make_receiver()
    recv.on_data(data(0, ce=True), 10)
    assert sim.sent[-1][1].ece_echo is True
    recv.on_data(data(MSS, ce=False), 20)
    assert sim.sent[-1][1].ece_echo is False


def test_in_order_single_packet_flow_completes_at_receiver():
    sim, recv = make_receiver(size=MSS)
    recv.on_data(data(0), 10)
    ackp = sim.sent[-1][1]
    assert ackp.is_ack and ackp.ack_no == MSS
    assert ackp.size == 40


def test_gap_produces_duplicate_cumulative_acks():
    sim, recv = make_receiver()
    recv.on_data(data(0), 10)
    recv.on_data(data(2 * MSS), 20)   # hole at MSS
    recv.on_data(data(3 * MSS), 30)
    acks = [p.ack_no for _, p in sim.sent]
    assert acks == [MSS, MSS, MSS]
    assert recv.ofo == 2


def test_buffered_segments_release_in_order():
    sim, recv = make_receiver()
    recv.on_data(data(MSS), 10)
    recv.on_data(data(0), 20)
    assert [p.ack_no for _, p in sim.sent] == [0, 2 * MSS]


def test_duplicate_data_is_reacked():
    sim, recv = make_receiver()
    recv.on_data(data(0), 10)
    recv.on_data(data(0), 20)
    assert [p.ack_no for _, p in sim.sent] == [MSS, MSS]


def test_late_arrival_counts_reordered_not_ofo():
    sim, recv = make_receiver()
    recv.on_data(data(MSS), 10)      # early: creates a gap -> ofo
    recv.on_data(data(0), 20)        # straggler: late -> reordered
    assert recv.ofo == 1
    assert recv.reordered == 1
