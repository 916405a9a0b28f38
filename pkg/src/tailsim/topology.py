"""Fabric construction, link arithmetic, and flow-level ECMP routing.

Two topologies are supported: the standard two-tier leaf-spine fabric (every
leaf connects to every spine) and a four-host dumbbell used for convergence
studies.  Links are bidirectional but modeled as two independent directed
channels; propagation delay is uniform per link and normally back-computed
from an end-to-end RTT target, since that is the figure fabrics are quoted
by.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .rng import Stream

PROBE_BYTES = 40  # minimum wire size: bare header, used for RTT probes


class NodeKind(Enum):
    HOST = "host"
    LEAF = "leaf"
    SPINE = "spine"


@dataclass(frozen=True)
class NodeId:
    kind: NodeKind
    index: int


@dataclass(frozen=True)
class PortId:
    node_uid: int
    port_index: int


@dataclass(frozen=True)
class Link:
    a: PortId
    b: PortId
    rate_bps: int
    propagation_ns: int


@dataclass(frozen=True)
class FlowKey:
    """Identity a switch hashes on: stable for the lifetime of a flow."""

    src_host: int
    dst_host: int
    flow_id: int


class RoutingError(Exception):
    pass


def serialization_ns(size_bytes: int, rate_bps: int) -> int:
    """Wire time for size_bytes at rate_bps, rounded up to the next ns."""
    return (size_bytes * 8_000_000_000 + rate_bps - 1) // rate_bps


def propagation_for_rtt(rtt_ns: int, hops_one_way: int, rate_bps: int,
                        probe_bytes: int = PROBE_BYTES) -> int:
    """Uniform per-link propagation so a probe's unloaded RTT hits the target."""
    ser = serialization_ns(probe_bytes, rate_bps)
    per_link = (rtt_ns - 2 * hops_one_way * ser) // (2 * hops_one_way)
    if per_link < 0:
        raise ValueError("RTT target below pure serialization time")
    return per_link


def _mix64(x: int) -> int:
    # splitmix64 finalizer; adequate avalanche for ECMP spreading.
    x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


class Topology:
    """Immutable after build; shared read-only within a run.

    Node uids are dense ints: hosts first, then leaves, then spines.  Port
    layout per node:

    * host:  port 0 -> its leaf
    * leaf:  ports [0, hosts_per_leaf) -> hosts, then one port per spine
      (leaf-spine) or one trunk port (dumbbell)
    * spine: one port per leaf
    """

    def __init__(self, kind: str, n_leaf: int, n_spine: int, hosts_per_leaf: int,
                 host_rate_bps: int, uplink_rate_bps: int, propagation_ns: int,
                 seed: int = 0):
        if n_leaf < 1 or hosts_per_leaf < 1 or (kind == "leaf_spine" and n_spine < 1):
            raise ValueError("counts must be >= 1")
        if host_rate_bps <= 0 or uplink_rate_bps <= 0:
            raise ValueError("rates must be > 0")
        self.kind = kind
        self.n_leaf = n_leaf
        self.n_spine = n_spine
        self.hosts_per_leaf = hosts_per_leaf
        self.host_rate_bps = host_rate_bps
        self.uplink_rate_bps = uplink_rate_bps
        self.propagation_ns = propagation_ns
        self.n_hosts = n_leaf * hosts_per_leaf
        self._leaf_base = self.n_hosts
        self._spine_base = self.n_hosts + n_leaf
        self.n_nodes = self._spine_base + (n_spine if kind == "leaf_spine" else 0)
        salts = Stream(seed, "ecmp")
        self._salt = [salts.rand64() for _ in range(self.n_nodes)]
        self.links = self._build_links()

    # -- identity helpers -------------------------------------------------

    def host_uid(self, host_index: int) -> int:
        return host_index

    def leaf_uid(self, leaf_index: int) -> int:
        return self._leaf_base + leaf_index

    def spine_uid(self, spine_index: int) -> int:
        return self._spine_base + spine_index

    def node_id(self, uid: int) -> NodeId:
        if uid < self._leaf_base:
            return NodeId(NodeKind.HOST, uid)
        if uid < self._spine_base:
            return NodeId(NodeKind.LEAF, uid - self._leaf_base)
        return NodeId(NodeKind.SPINE, uid - self._spine_base)

    def is_host(self, uid: int) -> bool:
        return uid < self._leaf_base

    def leaf_of_host(self, host_index: int) -> int:
        return host_index // self.hosts_per_leaf

    @property
    def oversubscription(self) -> float:
        if self.kind != "leaf_spine":
            return 1.0
        return (self.hosts_per_leaf * self.host_rate_bps) / (self.n_spine * self.uplink_rate_bps)

    def inter_leaf_fraction(self) -> float:
        """Probability a uniform random host pair crosses the spine tier."""
        if self.n_hosts <= 1:
            return 0.0
        return (self.n_hosts - self.hosts_per_leaf) / (self.n_hosts - 1)

    def saturating_edge_load(self) -> float:
        """Edge-load fraction at which the tightest tier reaches capacity.

        On an oversubscribed fabric the spine tier saturates well before the
        host links do; offered load beyond this point has no steady state.
        Load sweeps that should span light-to-heavy congestion are scaled by
        this factor so their top end sits at saturation rather than far past
        it.
        """
        if self.kind != "leaf_spine":
            return 1.0
        frac = self.inter_leaf_fraction()
        if frac == 0.0:
            return 1.0
        core = self.n_leaf * self.n_spine * self.uplink_rate_bps
        edge = self.n_hosts * self.host_rate_bps
        return min(1.0, core / (edge * frac))

    # -- structure ---------------------------------------------------------

    def _build_links(self) -> list[Link]:
        links = []
        prop = self.propagation_ns
        for h in range(self.n_hosts):
            leaf = self.leaf_of_host(h)
            links.append(Link(PortId(self.host_uid(h), 0),
                              PortId(self.leaf_uid(leaf), h % self.hosts_per_leaf),
                              self.host_rate_bps, prop))
        if self.kind == "leaf_spine":
            for l in range(self.n_leaf):
                for s in range(self.n_spine):
                    links.append(Link(PortId(self.leaf_uid(l), self.hosts_per_leaf + s),
                                      PortId(self.spine_uid(s), l),
                                      self.uplink_rate_bps, prop))
        else:  # dumbbell: one trunk between the two switches
            links.append(Link(PortId(self.leaf_uid(0), self.hosts_per_leaf),
                              PortId(self.leaf_uid(1), self.hosts_per_leaf),
                              self.uplink_rate_bps, prop))
        return links

    def port_peer(self, port: PortId) -> int:
        """uid of the node at the far end of a port."""
        uid, idx = port.node_uid, port.port_index
        if self.is_host(uid):
            return self.leaf_uid(self.leaf_of_host(uid))
        nid = self.node_id(uid)
        if nid.kind is NodeKind.LEAF:
            if idx < self.hosts_per_leaf:
                return self.host_uid(nid.index * self.hosts_per_leaf + idx)
            if self.kind == "leaf_spine":
                return self.spine_uid(idx - self.hosts_per_leaf)
            return self.leaf_uid(1 - nid.index)
        return self.leaf_uid(idx)

    def port_rate(self, port: PortId) -> int:
        uid = port.node_uid
        if self.is_host(uid):
            return self.host_rate_bps
        nid = self.node_id(uid)
        if nid.kind is NodeKind.LEAF and port.port_index < self.hosts_per_leaf:
            return self.host_rate_bps
        return self.uplink_rate_bps

    # -- routing -----------------------------------------------------------

    def ecmp_route(self, key: FlowKey, at_uid: int) -> PortId:
        """Deterministic output port for a flow at a switch.

        Every packet of a flow takes the identical path; the choice among
        equal-cost uplinks is a salted 64-bit hash of the flow key, with the
        salt drawn per switch so distinct switches decorrelate.
        """
        if self.is_host(at_uid):
            raise RoutingError("hosts do not route")
        nid = self.node_id(at_uid)
        dst_leaf = self.leaf_of_host(key.dst_host)
        if nid.kind is NodeKind.LEAF:
            if dst_leaf == nid.index:
                return PortId(at_uid, key.dst_host % self.hosts_per_leaf)
            if self.kind == "dumbbell":
                return PortId(at_uid, self.hosts_per_leaf)
            h = self._salt[at_uid]
            h = _mix64(h ^ key.src_host)
            h = _mix64(h ^ key.dst_host)
            h = _mix64(h ^ key.flow_id)
            return PortId(at_uid, self.hosts_per_leaf + h % self.n_spine)
        # spine: one down-port per leaf
        return PortId(at_uid, dst_leaf)

    def route_ports(self, src_host: int, dst_host: int, flow_id: int) -> list[PortId]:
        """Output-port sequence from src host NIC to delivery at dst host."""
        if src_host == dst_host or not (0 <= src_host < self.n_hosts) \
                or not (0 <= dst_host < self.n_hosts):
            raise RoutingError(f"invalid host pair ({src_host}, {dst_host})")
        key = FlowKey(src_host, dst_host, flow_id)
        ports = [PortId(self.host_uid(src_host), 0)]
        at = self.leaf_uid(self.leaf_of_host(src_host))
        while True:
            port = self.ecmp_route(key, at)
            ports.append(port)
            nxt = self.port_peer(port)
            if self.is_host(nxt):
                return ports
            at = nxt

    def path_nodes(self, src_host: int, dst_host: int, flow_id: int) -> list[int]:
        """Node uids visited, endpoints included."""
        uids = [self.host_uid(src_host)]
        for port in self.route_ports(src_host, dst_host, flow_id)[1:]:
            uids.append(port.node_uid)
        uids.append(self.host_uid(dst_host))
        return uids

    def max_hops_one_way(self) -> int:
        return 4 if self.kind == "leaf_spine" else 3

    def unloaded_rtt_ns(self, probe_bytes: int = PROBE_BYTES) -> int:
        """Probe RTT over the longest (inter-leaf) path on an idle fabric."""
        hops = self.max_hops_one_way()
        ser = serialization_ns(probe_bytes, min(self.host_rate_bps, self.uplink_rate_bps))
        return 2 * hops * (ser + self.propagation_ns)


def build_leaf_spine(n_leaf: int, n_spine: int, hosts_per_leaf: int,
                     host_rate_bps: int, uplink_rate_bps: int,
                     propagation_ns: int | None = None,
                     rtt_target_ns: int = 80_000, seed: int = 0) -> Topology:
    """Full-mesh leaf-spine fabric.

    When ``propagation_ns`` is omitted it is back-computed so the unloaded
    host-to-host probe RTT across four hops lands on ``rtt_target_ns``.
    """
    if host_rate_bps <= 0 or uplink_rate_bps <= 0:
        raise ValueError("rates must be > 0")
    if propagation_ns is None:
        propagation_ns = propagation_for_rtt(rtt_target_ns, 4, min(host_rate_bps, uplink_rate_bps))
    return Topology("leaf_spine", n_leaf, n_spine, hosts_per_leaf,
                    host_rate_bps, uplink_rate_bps, propagation_ns, seed)


def build_dumbbell(hosts_per_side: int, host_rate_bps: int, trunk_rate_bps: int,
                   propagation_ns: int | None = None,
                   rtt_target_ns: int = 80_000, seed: int = 0) -> Topology:
    """Two switches joined by one trunk; hosts_per_side hosts on each."""
    if host_rate_bps <= 0 or trunk_rate_bps <= 0:
        raise ValueError("rates must be > 0")
    if propagation_ns is None:
        propagation_ns = propagation_for_rtt(rtt_target_ns, 3, min(host_rate_bps, trunk_rate_bps))
    return Topology("dumbbell", 2, 0, hosts_per_side,
                    host_rate_bps, trunk_rate_bps, propagation_ns, seed)
