"""tailsim: packet-level leaf-spine fabric simulation with ECN-driven
tail-packet prioritization, plus DCTCP/PIAS/ideal-SJF comparators."""

__version__ = "0.1.0"

from .engine import Engine, RunSummary, SchedulingError
from .fabric import (MODE_NAMES, OutputPort, Packet, pias_priority, sjf_band)
from .network import Simulation, SwitchParams, RunOutcome
from .rng import Stream, draw_exponential, draw_uniform
from .telemetry import (Metrics, convergence_time, fct_mean_ns,
                        fct_percentile_ns, long_flow_throughput_bps,
                        multi_mark_fraction, per_rtt_throughput, percentile,
                        queue_cdf)
from .topology import (FlowKey, Topology, build_dumbbell, build_leaf_spine,
                       propagation_for_rtt, serialization_ns)
from .transport import Receiver, Sender, TransportParams
from .workload import (CLASS_INCAST, CLASS_LONG, CLASS_SHORT, FlowSpec,
                       IncastSpec, WorkloadSpec, generate, generate_incast)

__all__ = [
    "Engine", "RunSummary", "SchedulingError",
    "MODE_NAMES", "OutputPort", "Packet", "pias_priority", "sjf_band",
    "Simulation", "SwitchParams", "RunOutcome",
    "Stream", "draw_exponential", "draw_uniform",
    "Metrics", "convergence_time", "fct_mean_ns", "fct_percentile_ns",
    "long_flow_throughput_bps", "multi_mark_fraction", "per_rtt_throughput",
    "percentile", "queue_cdf",
    "FlowKey", "Topology", "build_dumbbell", "build_leaf_spine",
    "propagation_for_rtt", "serialization_ns",
    "Receiver", "Sender", "TransportParams",
    "CLASS_INCAST", "CLASS_LONG", "CLASS_SHORT", "FlowSpec", "IncastSpec",
    "WorkloadSpec", "generate", "generate_incast",
]
