"""Run statistics: FCT records, queue-length distributions, mark censuses.

Everything here is observation-only; sinks never schedule events, so
toggling collection cannot change what the fabric does.  Queue occupancy
is accounted event-driven (every enqueue/dequeue boundary) and weighted by
holding time, which avoids the aliasing a periodic sampler would add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .fabric import QUEUE_BUCKET_BYTES
from .workload import CLASS_INCAST, CLASS_LONG, CLASS_SHORT, FlowSpec

MAX_MARK_BUCKET = 5  # per-flow census: packets marked at 0,1,2,3,4,5+ hops


# ---------------------------------------------------------------------------
# pure statistics
# ---------------------------------------------------------------------------

def percentile(samples, p: float) -> float:
    """Nearest-rank percentile: value at index ceil(p/100 * n) of the sort."""
    if not 0 < p <= 100:
        raise ValueError(f"percentile p must be in (0, 100], got {p}")
    n = len(samples)
    if n == 0:
        raise ValueError("percentile of empty sample set")
    rank = math.ceil(p * n / 100.0)
    return sorted(samples)[rank - 1]


def queue_cdf(samples, end_ns: int | None = None):
    """Holding-time-weighted empirical CDF from (time, occupancy) samples.

    Each sample holds from its timestamp to the next sample's (the last one
    to ``end_ns`` when given).  Returns ascending (occupancy, cum_prob)
    pairs.
    """
    if not samples:
        raise ValueError("queue_cdf of empty sample set")
    weights: dict[int, int] = {}
    for i, (t, occ) in enumerate(samples):
        t_next = samples[i + 1][0] if i + 1 < len(samples) else (end_ns if end_ns is not None else t)
        w = t_next - t
        if w > 0:
            weights[occ] = weights.get(occ, 0) + w
    if not weights:
        # zero-duration trace: fall back to unweighted occupancies
        for _, occ in samples:
            weights[occ] = weights.get(occ, 0) + 1
    total = sum(weights.values())
    out = []
    cum = 0
    for occ in sorted(weights):
        cum += weights[occ]
        out.append((occ, cum / total))
    return out


def cdf_percentile(cdf, p: float) -> float:
    """Smallest value whose cumulative probability reaches p/100."""
    target = p / 100.0
    for value, cum in cdf:
        if cum >= target - 1e-12:
            return value
    return cdf[-1][0]


def hist_percentile(hist: list[int], p: float, bucket: int = 1) -> int:
    """p-th percentile level (bucket lower edge) of a duration histogram."""
    total = sum(hist)
    if total == 0:
        return 0
    target = total * p / 100.0
    cum = 0
    for i, w in enumerate(hist):
        cum += w
        if cum >= target:
            return i * bucket
    return (len(hist) - 1) * bucket


def merge_hists(hists) -> list[int]:
    out: list[int] = []
    for h in hists:
        if len(h) > len(out):
            out.extend([0] * (len(h) - len(out)))
        for i, w in enumerate(h):
            out[i] += w
    return out


def convergence_time(series, fair_share: float, tol: float = 0.10,
                     stable_for: int = 3) -> float:
    """Index of the first sample after which the series stays within
    +-tol*fair_share for ``stable_for`` consecutive samples; inf if never."""
    lo = fair_share * (1.0 - tol)
    hi = fair_share * (1.0 + tol)
    run = 0
    for i, v in enumerate(series):
        if lo <= v <= hi:
            run += 1
            if run >= stable_for:
                return i - stable_for + 1
        else:
            run = 0
    return math.inf


@dataclass
class MarkCensusResult:
    fraction: float
    tail_packets: int
    low_confidence: bool


def multi_mark_fraction(mark_census,
                        fct_ns: dict[int, int],
                        tail_percentile: float = 95.0,
                        min_marks: int = 2,
                        min_tail_packets: int = 100) -> MarkCensusResult:
    """Fraction of tail-flow packets that were marked at >= min_marks hops.

    Tail flows are those whose completion time exceeds the
    ``tail_percentile`` of all completed flows; the census (indexed by flow
    id, one packet count per mark-count bucket) is per delivered data
    packet.  Results off fewer than ``min_tail_packets`` packets carry a
    low-confidence flag.
    """
    if not fct_ns:
        raise ValueError("no completed flows")
    cutoff = percentile(list(fct_ns.values()), tail_percentile)
    total = 0
    hit = 0
    for fid, fct in fct_ns.items():
        if fct <= cutoff:
            continue
        census = mark_census[fid]
        total += sum(census)
        hit += sum(census[min_marks:])
    frac = hit / total if total else 0.0
    return MarkCensusResult(frac, total, total < min_tail_packets)


def long_flow_throughput_bps(samples) -> float:
    """Mean of size*8/fct over completed long flows."""
    vals = [s.size * 8e9 / s.fct_ns for s in samples if s.cls == CLASS_LONG]
    if not vals:
        raise ValueError("no completed long flows")
    return sum(vals) / len(vals)


def per_rtt_throughput(progress, start_ns: int, rtt_ns: int) -> list[float]:
    """Bin a (time, cum_acked_bytes) log into per-RTT goodput (bits/s)."""
    if rtt_ns <= 0:
        raise ValueError("rtt_ns must be positive")
    series: list[float] = []
    prev_acked = 0.0
    # carry the acked count at the bin boundary via linear scan
    idx = 0
    n = len(progress)
    # acked bytes at start_ns
    while idx < n and progress[idx][0] <= start_ns:
        prev_acked = progress[idx][1]
        idx += 1
    t_edge = start_ns + rtt_ns
    last = prev_acked
    while idx < n:
        t, acked = progress[idx]
        while t > t_edge:
            series.append((last - prev_acked) * 8e9 / rtt_ns)
            prev_acked = last
            t_edge += rtt_ns
        last = acked
        idx += 1
    if last > prev_acked:
        series.append((last - prev_acked) * 8e9 / rtt_ns)
    return series


# ---------------------------------------------------------------------------
# run-attached sinks
# ---------------------------------------------------------------------------

@dataclass
class FctSample:
    flow_id: int
    cls: str
    size: int
    src: int
    dst: int
    arrive_ns: int
    fct_ns: int


@dataclass
class Metrics:
    """Counters and records one simulation run fills in."""

    n_flows: int
    pkt_sent: list[int] = field(default_factory=list)
    pkt_delivered: list[int] = field(default_factory=list)
    pkt_dropped: list[int] = field(default_factory=list)
    mark_census: list[list[int]] = field(default_factory=list)
    fct_ns: dict[int, int] = field(default_factory=dict)
    data_arrivals: int = 0
    reordered: int = 0
    ofo_arrivals: int = 0
    timeouts: int = 0
    fast_retransmits: int = 0
    drops: int = 0
    first_hop_prio_violations: int = 0
    delivered_payload_bytes: int = 0

    def __post_init__(self):
        self.pkt_sent = [0] * self.n_flows
        self.pkt_delivered = [0] * self.n_flows
        self.pkt_dropped = [0] * self.n_flows
        self.mark_census = [[0] * (MAX_MARK_BUCKET + 1) for _ in range(self.n_flows)]

    def record_mark(self, flow_id: int, marks: int) -> None:
        census = self.mark_census[flow_id]
        census[marks if marks < MAX_MARK_BUCKET else MAX_MARK_BUCKET] += 1

    def reordering_fraction(self) -> float:
        """Fraction of data arrivals that could not be appended in order."""
        return self.ofo_arrivals / self.data_arrivals if self.data_arrivals else 0.0

    def late_fraction(self) -> float:
        """Fraction of data arrivals behind an already-received higher offset."""
        return self.reordered / self.data_arrivals if self.data_arrivals else 0.0

    def fct_samples(self, flows: list[FlowSpec]) -> list[FctSample]:
        out = []
        for f in flows:
            fct = self.fct_ns.get(f.flow_id)
            if fct is not None:
                out.append(FctSample(f.flow_id, f.cls, f.size, f.src, f.dst,
                                     f.arrive_ns, fct))
        return out

    def conservation_ok(self) -> bool:
        for fid in range(self.n_flows):
            in_flight = self.pkt_sent[fid] - self.pkt_delivered[fid] - self.pkt_dropped[fid]
            if in_flight < 0:
                return False
        return True


def fct_mean_ns(samples, cls: str | None = None) -> float:
    vals = [s.fct_ns for s in samples if cls is None or s.cls == cls]
    if not vals:
        raise ValueError(f"no completed flows of class {cls}")
    return sum(vals) / len(vals)


def fct_percentile_ns(samples, p: float, cls: str | None = None) -> float:
    vals = [s.fct_ns for s in samples if cls is None or s.cls == cls]
    return percentile(vals, p)


__all__ = [
    "percentile", "queue_cdf", "cdf_percentile", "hist_percentile",
    "merge_hists", "convergence_time", "multi_mark_fraction",
    "MarkCensusResult", "long_flow_throughput_bps", "per_rtt_throughput",
    "FctSample", "Metrics", "fct_mean_ns", "fct_percentile_ns",
    "CLASS_SHORT", "CLASS_LONG", "CLASS_INCAST",
]
