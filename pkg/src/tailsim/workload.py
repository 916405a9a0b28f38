"""Traffic generation: Poisson web-search mix plus synchronized incast bursts.

Flows arrive as a Poisson process over the whole fabric; endpoints are
uniform over distinct host pairs.  A configurable fraction of flows are
long (fixed size); the rest draw uniformly from the short range.  The load
factor is the fraction of aggregate host-link capacity offered fabric-wide:

    arrival rate = load * host_rate * n_hosts / (8 * E[size])

Generation is pure: given (config, stream) the schedule is fixed before
the run starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rng import Stream
from .topology import Topology

CLASS_SHORT = "short"
CLASS_LONG = "long"
CLASS_INCAST = "incast"


@dataclass
class IncastSpec:
    degree: int = 32
    period_ns: int = 2_000_000
    response_bytes: int = 0  # 0: draw from the short-flow range


@dataclass
class WorkloadSpec:
    load: float = 0.6
    short_lo: int = 8_000
    short_hi: int = 32_000
    long_size: int = 1_000_000
    long_fraction: float = 0.30
    duration_ns: int = 0       # arrival window; 0 if n_flows drives it
    n_flows: int = 0           # alternative sizing: stop after this many
    incast: IncastSpec | None = None

    def validate(self) -> None:
        if not 0.0 < self.load < 1.0:
            raise ValueError("load must be in (0,1)")
        if self.short_lo > self.short_hi:
            raise ValueError("short flow range reversed")
        if self.duration_ns <= 0 and self.n_flows <= 0:
            raise ValueError("need duration_ns or n_flows")
        if self.incast is not None and self.incast.degree < 2:
            raise ValueError("incast degree must be >= 2")

    def mean_flow_size(self) -> float:
        short_mean = (self.short_lo + self.short_hi) / 2.0
        return (1.0 - self.long_fraction) * short_mean + self.long_fraction * self.long_size

    def arrival_rate_per_s(self, n_hosts: int, host_rate_bps: int) -> float:
        return self.load * host_rate_bps * n_hosts / (8.0 * self.mean_flow_size())


@dataclass
class FlowSpec:
    flow_id: int
    src: int
    dst: int
    size: int
    arrive_ns: int
    cls: str = CLASS_SHORT


def generate(spec: WorkloadSpec, topo: Topology, stream: Stream) -> list[FlowSpec]:
    """Poisson schedule; incast epochs are appended when configured."""
    spec.validate()
    rate = spec.arrival_rate_per_s(topo.n_hosts, topo.host_rate_bps)
    mean_gap_ns = 1e9 / rate
    flows: list[FlowSpec] = []
    t = 0.0
    fid = 0
    while True:
        t += stream.exponential(mean_gap_ns)
        arrive = int(t)
        if spec.n_flows > 0:
            if fid >= spec.n_flows:
                break
        elif arrive > spec.duration_ns:
            break
        if stream.uniform(0.0, 1.0) < spec.long_fraction:
            size, cls = spec.long_size, CLASS_LONG
        else:
            size, cls = int(stream.uniform(spec.short_lo, spec.short_hi + 1)), CLASS_SHORT
        src = stream.randint(0, topo.n_hosts - 1)
        dst = stream.choice_excluding(topo.n_hosts, src)
        flows.append(FlowSpec(fid, src, dst, size, arrive, cls))
        fid += 1
    if spec.incast is not None:
        flows.extend(generate_incast(spec, topo, stream, first_id=fid))
        flows.sort(key=lambda f: (f.arrive_ns, f.flow_id))
    return flows


def generate_incast(spec: WorkloadSpec, topo: Topology, stream: Stream,
                    first_id: int = 0) -> list[FlowSpec]:
    """Synchronized groups: degree distinct senders to one receiver per epoch."""
    inc = spec.incast
    if inc.degree > topo.n_hosts - 1:
        raise ValueError(f"incast degree {inc.degree} exceeds host count - 1")
    horizon = spec.duration_ns
    if horizon <= 0:
        # n_flows sizing: place bursts across the expected Poisson window
        rate = spec.arrival_rate_per_s(topo.n_hosts, topo.host_rate_bps)
        horizon = int(spec.n_flows * 1e9 / rate)
    flows: list[FlowSpec] = []
    fid = first_id
    epoch = inc.period_ns
    while epoch <= horizon:
        receiver = stream.randint(0, topo.n_hosts - 1)
        senders: set[int] = set()
        while len(senders) < inc.degree:
            senders.add(stream.choice_excluding(topo.n_hosts, receiver))
        for src in sorted(senders):
            size = inc.response_bytes or int(stream.uniform(spec.short_lo, spec.short_hi + 1))
            flows.append(FlowSpec(fid, src, receiver, size, epoch, CLASS_INCAST))
            fid += 1
        epoch += inc.period_ns
    return flows
