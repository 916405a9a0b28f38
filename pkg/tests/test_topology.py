import collections

import pytest

from tailsim.topology import (FlowKey, NodeKind, RoutingError, build_dumbbell,
                              build_leaf_spine, propagation_for_rtt,
                              serialization_ns)

G = 10_000_000_000


def test_serialization_examples():
    assert serialization_ns(1500, G) == 1200          # 1.2 us
    assert serialization_ns(40, G) == 32
    # rounding is always up to the next nanosecond
    assert serialization_ns(1, G) == 1


def test_desk_fabric_dimensions_and_oversubscription():
    topo = build_leaf_spine(8, 4, 10, G, G)
    assert topo.n_hosts == 80
    assert topo.oversubscription == pytest.approx(2.5)
    topo2 = build_leaf_spine(8, 4, 8, G, G)
    assert topo2.n_hosts == 64
    assert topo2.oversubscription == pytest.approx(2.0)


def test_paper_scale_dimensions():
    topo = build_leaf_spine(20, 10, 20, G, G)
    assert topo.n_hosts == 400
    assert topo.oversubscription == pytest.approx(2.0)
    assert len([l for l in topo.links if l.rate_bps == G]) == 400 + 200


def test_minimal_fabric():
    topo = build_leaf_spine(1, 1, 2, G, G)
    assert topo.n_hosts == 2
    ports = topo.route_ports(0, 1, flow_id=9)
    # same leaf: host NIC then one leaf down-port, never a spine
    assert len(ports) == 2
    assert topo.node_id(ports[1].node_uid).kind is NodeKind.LEAF


def test_counts_must_be_positive():
    with pytest.raises(ValueError):
        build_leaf_spine(0, 4, 10, G, G)
    with pytest.raises(ValueError):
        build_leaf_spine(8, 4, 10, 0, G)


def test_rtt_target_hit_by_backcomputed_propagation():
    topo = build_leaf_spine(8, 4, 10, G, G, rtt_target_ns=80_000)
    assert abs(topo.unloaded_rtt_ns(40) - 80_000) <= 8  # one ns per hop rounding
    dumb = build_dumbbell(2, G, G, rtt_target_ns=80_000)
    assert abs(dumb.unloaded_rtt_ns(40) - 80_000) <= 6


def test_propagation_for_rtt_rejects_impossible_targets():
    with pytest.raises(ValueError):
        propagation_for_rtt(10, 4, G)


def test_ecmp_is_deterministic_per_flow():
    topo = build_leaf_spine(8, 4, 10, G, G)
    key = FlowKey(0, 75, 12345)
    at = topo.leaf_uid(0)
    first = topo.ecmp_route(key, at)
    for _ in range(1000):
        assert topo.ecmp_route(key, at) == first


def test_ecmp_spreads_uniformly_across_uplinks():
    topo = build_leaf_spine(8, 4, 10, G, G)
    at = topo.leaf_uid(0)
    counts = collections.Counter()
    n = 100_000
    for fid in range(n):
        counts[topo.ecmp_route(FlowKey(0, 75, fid), at).port_index] += 1
    assert len(counts) == 4
    for c in counts.values():
        assert abs(c - n / 4) / n < 0.02


def test_same_leaf_pairs_never_touch_a_spine():
    topo = build_leaf_spine(8, 4, 10, G, G)
    nodes = topo.path_nodes(3, 7, flow_id=5)
    kinds = [topo.node_id(u).kind for u in nodes]
    assert NodeKind.SPINE not in kinds


def test_paths_are_loop_free_and_bounded():
    topo = build_leaf_spine(8, 4, 10, G, G)
    for fid in range(250):
        src, dst = (fid * 7) % 80, (fid * 13 + 1) % 80
        if src == dst:
            continue
        nodes = topo.path_nodes(src, dst, fid)
        assert len(nodes) == len(set(nodes))
        assert len(nodes) <= 5  # host, leaf, spine, leaf, host


def test_path_consistency_forward_route_is_stable():
    topo = build_leaf_spine(8, 4, 10, G, G)
    a = topo.route_ports(5, 61, 17)
    b = topo.route_ports(5, 61, 17)
    assert a == b


def test_invalid_pairs_raise():
    topo = build_leaf_spine(8, 4, 10, G, G)
    with pytest.raises(RoutingError):
        topo.route_ports(3, 3, 1)
    with pytest.raises(RoutingError):
        topo.route_ports(0, 99, 1)
    with pytest.raises(RoutingError):
        topo.ecmp_route(FlowKey(0, 1, 1), topo.host_uid(0))


def test_saturating_edge_load_desk_scale():
    topo = build_leaf_spine(8, 4, 10, G, G)
    frac = topo.inter_leaf_fraction()
    assert frac == pytest.approx(70 / 79)
    expected = (8 * 4 * G) / (80 * G * frac)
    assert topo.saturating_edge_load() == pytest.approx(expected)
