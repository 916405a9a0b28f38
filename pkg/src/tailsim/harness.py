"""Config-driven experiment runner: single runs, sweeps, comparisons.

Every run is fully determined by (config, seed) and writes its own CSV
files plus a manifest; re-running a manifest reproduces the bytes.  Sweep
points are independent simulations, so they fan out over a process pool.

Load semantics: the sweep's load axis is, by default, normalized so that
1.0 offers exactly what the fabric's tightest tier can carry
(``Topology.saturating_edge_load``); this keeps a 0.4..0.9 sweep inside
the regime where queueing grows with load instead of sitting past
saturation at every point.  Set ``normalize_to_core = false`` to offer raw
fractions of aggregate host capacity instead.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, replace
from multiprocessing import Pool

from . import __version__
from .config import ExperimentConfig
from .network import Simulation, SwitchParams
from .telemetry import (fct_percentile_ns, hist_percentile, merge_hists,
                        multi_mark_fraction, per_rtt_throughput, percentile,
                        convergence_time)
from .topology import Topology, build_dumbbell, build_leaf_spine
from .transport import TransportParams
from .rng import Stream
from .workload import (CLASS_INCAST, CLASS_LONG, CLASS_SHORT, FlowSpec,
                       IncastSpec, WorkloadSpec, generate)

MS = 1_000_000
US = 1_000

SUMMARY_COLUMNS = [
    "experiment", "kind", "scheduler", "load", "ecn_frac", "incast_degree",
    "seed", "flows_measured", "flows_completed",
    "fct_short_mean_us", "fct_short_p99_us", "fct_incast_p99_us",
    "tput_long_gbps", "queue_p99_pkts", "opportunity_frac",
    "opportunity_tail_pkts", "opportunity_lowconf", "reorder_frac",
    "late_frac", "goodput_gbps", "drops", "timeouts", "fast_rtx",
    "demotions", "first_hop_prio_violations", "convergence_rtts",
    "fair_share_gbps", "events", "sim_end_ms", "wall_s",
]


def _fmt(v) -> str:
    if v is None:
        return "na"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return f"{v:.6g}"
    return str(v)


def build_topology(cfg: ExperimentConfig, seed: int) -> Topology:
    if cfg.topo_kind == "dumbbell":
        return build_dumbbell(2, int(cfg.host_gbps * 1e9), int(cfg.uplink_gbps * 1e9),
                              rtt_target_ns=int(cfg.rtt_us * US), seed=seed)
    return build_leaf_spine(cfg.n_leaf, cfg.n_spine, cfg.hosts_per_leaf,
                            int(cfg.host_gbps * 1e9), int(cfg.uplink_gbps * 1e9),
                            rtt_target_ns=int(cfg.rtt_us * US), seed=seed)


def switch_params(cfg: ExperimentConfig) -> SwitchParams:
    return SwitchParams(
        scheduler=cfg.scheduler,
        capacity_bytes=int(cfg.capacity_kb * 1000),
        ecn_threshold_frac=cfg.ecn_threshold_frac,
        pias_thresholds=tuple(int(t * 1000) for t in cfg.pias_thresholds_kb),
        pias_queue_cap_bytes=int(cfg.pias_queue_cap_kb * 1000),
        sjf_bands=cfg.sjf_bands)


def transport_params(cfg: ExperimentConfig) -> TransportParams:
    return TransportParams(
        mss=cfg.mss, g=cfg.g, init_cwnd_mss=cfg.init_cwnd_mss,
        min_rto_ns=int(cfg.min_rto_ms * MS),
        reorder_grace_ns=int(cfg.reorder_grace_us * US))


def effective_load(cfg: ExperimentConfig, topo: Topology) -> float:
    if cfg.normalize_to_core:
        return cfg.load * topo.saturating_edge_load()
    return cfg.load


def workload_spec(cfg: ExperimentConfig, topo: Topology) -> WorkloadSpec:
    incast = None
    if cfg.incast_degree > 0:
        incast = IncastSpec(degree=cfg.incast_degree,
                            period_ns=int(cfg.incast_period_ms * MS),
                            response_bytes=int(cfg.incast_response_kb * 1000))
    return WorkloadSpec(
        load=effective_load(cfg, topo),
        short_lo=int(cfg.short_kb_min * 1000),
        short_hi=int(cfg.short_kb_max * 1000),
        long_size=int(cfg.long_kb * 1000),
        long_fraction=cfg.long_fraction,
        duration_ns=int((cfg.warmup_ms + cfg.window_ms) * MS),
        incast=incast)


# ---------------------------------------------------------------------------
# single runs
# ---------------------------------------------------------------------------

def run_fabric(cfg: ExperimentConfig, seed: int) -> dict:
    t0 = time.time()
    topo = build_topology(cfg, seed)
    spec = workload_spec(cfg, topo)
    flows = generate(spec, topo, Stream(seed, "workload"))
    warm = int(cfg.warmup_ms * MS)
    window = (warm, spec.duration_ns)
    sim = Simulation(topo, flows, switch_params(cfg), transport_params(cfg),
                     measure_window=window)
    outcome = sim.run()
    m = outcome.metrics
    meas = [f for f in flows if sim.measured[f.flow_id]]
    samples = m.fct_samples(meas)
    shortish = [s.fct_ns for s in samples if s.cls != CLASS_LONG]
    incast_fct = [s.fct_ns for s in samples if s.cls == CLASS_INCAST]
    long_tputs = [s.size * 8e9 / s.fct_ns for s in samples if s.cls == CLASS_LONG]
    fct_short_tail = {s.flow_id: s.fct_ns for s in samples if s.cls != CLASS_LONG}
    row = {
        "experiment": cfg.name, "kind": cfg.kind, "scheduler": cfg.scheduler,
        "load": cfg.load, "ecn_frac": cfg.ecn_threshold_frac,
        "incast_degree": cfg.incast_degree, "seed": seed,
        "flows_measured": len(meas), "flows_completed": len(samples),
        "fct_short_mean_us": (sum(shortish) / len(shortish) / US) if shortish else None,
        "fct_short_p99_us": percentile(shortish, 99) / US if shortish else None,
        "fct_incast_p99_us": percentile(incast_fct, 99) / US if incast_fct else None,
        "tput_long_gbps": (sum(long_tputs) / len(long_tputs) / 1e9) if long_tputs else None,
        "reorder_frac": m.reordering_fraction(),
        "late_frac": m.late_fraction(),
        "goodput_gbps": m.delivered_payload_bytes * 8 / (cfg.window_ms * MS),
        "drops": m.drops, "timeouts": m.timeouts, "fast_rtx": m.fast_retransmits,
        "demotions": sum(p.demotions for p in sim.switch_ports()),
        "first_hop_prio_violations": m.first_hop_prio_violations,
        "convergence_rtts": None, "fair_share_gbps": None,
        "events": sim.engine.total_events,
        "sim_end_ms": sim.engine.clock / MS,
    }
    merged = merge_hists(h for p in sim.switch_ports() if p.hist for h in p.hist)
    row["queue_p99_pkts"] = hist_percentile(merged, 99) if merged else None
    if fct_short_tail:
        mm = multi_mark_fraction(m.mark_census, fct_short_tail,
                                 tail_percentile=cfg.tail_percentile)
        row["opportunity_frac"] = mm.fraction
        row["opportunity_tail_pkts"] = mm.tail_packets
        row["opportunity_lowconf"] = int(mm.low_confidence)
    else:
        row["opportunity_frac"] = row["opportunity_tail_pkts"] = None
        row["opportunity_lowconf"] = None
    row["wall_s"] = time.time() - t0
    row["_samples"] = samples
    row["_queue_hist"] = merged
    return row


def convergence_flows(cfg: ExperimentConfig, topo: Topology) -> tuple[list[FlowSpec], int, float]:
    """Fixed scenario: hosts A,B behind one switch, C,D behind the other.

    A long flow A->C runs alone first; after a fixed delay the competing
    cohort starts B->D, so every flow shares the one trunk bottleneck and
    the fair share is rate/(competitors+1).  The cohort enters in slow
    start, overshoots, and converges down to its share; the convergence
    count is how many RTTs its mean per-flow goodput needs to settle into
    the fair-share band.  With the default ``cross`` variant, C fires a
    short pulse at D every other RTT once the cohort starts: the pulses
    put a transient queue on the cohort's second hop, giving packets
    marked at the trunk something to be prioritized past; ``same``
    disables them, which makes the two-queue scheme indistinguishable from
    the FIFO baseline here.

    The pulses ride the yielding flow's second hop (the C downlink): under
    the marking-priority scheme the yielding flow's trunk-marked packets
    bypass them, so its ACK clock and window turnover stay fast and it
    hands over its share sooner.
    """
    rtt = topo.unloaded_rtt_ns()
    start = int(cfg.start_after_rtts) * rtt
    size = int(cfg.flow_mb * 1_000_000)
    a, b, c, d = 0, 1, 2, 3
    flows = [FlowSpec(0, a, c, size, 0, CLASS_LONG)]
    fid = 1
    for _ in range(cfg.competitors):
        flows.append(FlowSpec(fid, b, d, size, start, CLASS_LONG))
        fid += 1
    if cfg.competitor_split == "cross":
        pulse_bytes = 42_000
        horizon = start + (cfg.measure_rtts + 5) * rtt
        t = start
        while t < horizon:
            flows.append(FlowSpec(fid, d, c, pulse_bytes, t, CLASS_INCAST))
            fid += 1
            t += 2 * rtt
    fair_share = topo.uplink_rate_bps / (1 + cfg.competitors)
    return flows, start, fair_share


def run_convergence(cfg: ExperimentConfig, seed: int) -> dict:
    t0 = time.time()
    cfg = replace(cfg, topo_kind="dumbbell")
    topo = build_topology(cfg, seed)
    flows, comp_start, fair_share = convergence_flows(cfg, topo)
    rtt = topo.unloaded_rtt_ns()
    horizon = comp_start + (cfg.measure_rtts + 5) * rtt
    cohort = {f.flow_id for f in flows
              if f.arrive_ns == comp_start and f.cls == CLASS_LONG}
    sim = Simulation(topo, flows, switch_params(cfg), transport_params(cfg),
                     track_queues=False, track_progress_flows=cohort | {0})
    sim.run(horizon_ns=horizon)
    per_flow = []
    for fid in sorted(cohort):
        progress = sim.senders[fid].progress if sim.senders[fid] else None
        series = per_rtt_throughput(progress or [], comp_start, rtt)
        per_flow.append(series)
    n_bins = cfg.measure_rtts
    series_bps = []
    for i in range(n_bins):
        vals = [s[i] if i < len(s) else 0.0 for s in per_flow]
        series_bps.append(sum(vals) / len(vals) if vals else 0.0)
    rtts = convergence_time(series_bps, fair_share, tol=cfg.tolerance)
    row = {
        "experiment": cfg.name, "kind": cfg.kind, "scheduler": cfg.scheduler,
        "load": cfg.load, "ecn_frac": cfg.ecn_threshold_frac,
        "incast_degree": 0, "seed": seed,
        "flows_measured": 1, "flows_completed": len(sim.metrics.fct_ns),
        "fct_short_mean_us": None, "fct_short_p99_us": None,
        "fct_incast_p99_us": None, "tput_long_gbps": None,
        "queue_p99_pkts": None, "opportunity_frac": None,
        "opportunity_tail_pkts": None, "opportunity_lowconf": None,
        "reorder_frac": sim.metrics.reordering_fraction(),
        "late_frac": sim.metrics.late_fraction(),
        "goodput_gbps": None,
        "drops": sim.metrics.drops, "timeouts": sim.metrics.timeouts,
        "fast_rtx": sim.metrics.fast_retransmits, "demotions": 0,
        "first_hop_prio_violations": sim.metrics.first_hop_prio_violations,
        "convergence_rtts": float(rtts) if rtts != math.inf else math.inf,
        "fair_share_gbps": fair_share / 1e9,
        "events": sim.engine.total_events,
        "sim_end_ms": sim.engine.clock / MS,
        "wall_s": time.time() - t0,
        "_series_gbps": [v / 1e9 for v in series_bps],
    }
    return row


def run_single(cfg: ExperimentConfig, seed: int) -> dict:
    if cfg.kind == "convergence":
        return run_convergence(cfg, seed)
    return run_fabric(cfg, seed)


# ---------------------------------------------------------------------------
# file emission
# ---------------------------------------------------------------------------

def write_summary_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(col)) for col in SUMMARY_COLUMNS) + "\n")


def write_run_files(outdir: str, cfg: ExperimentConfig, seed: int, row: dict,
                    config_text: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    samples = row.pop("_samples", None)
    queue_hist = row.pop("_queue_hist", None)
    series = row.pop("_series_gbps", None)
    if samples is not None:
        with open(os.path.join(outdir, "fct.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("flow_id,class,size_bytes,src,dst,arrive_ns,fct_ns\n")
            for s in sorted(samples, key=lambda x: x.flow_id):
                fh.write(f"{s.flow_id},{s.cls},{s.size},{s.src},{s.dst},"
                         f"{s.arrive_ns},{s.fct_ns}\n")
    if queue_hist:
        total = sum(queue_hist)
        with open(os.path.join(outdir, "queue_cdf.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("queue_pkts,cum_prob\n")
            cum = 0
            for pkts, weight in enumerate(queue_hist):
                if weight:
                    cum += weight
                    fh.write(f"{pkts},{_fmt(cum / total)}\n")
    if series is not None:
        with open(os.path.join(outdir, "convergence.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("rtt_index,throughput_gbps\n")
            for i, v in enumerate(series):
                fh.write(f"{i},{_fmt(v)}\n")
    write_summary_csv(os.path.join(outdir, "summary.csv"), [row])
    manifest = {
        "experiment": cfg.name,
        "kind": cfg.kind,
        "seed": seed,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "version": __version__,
        "params": asdict(cfg),
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def sweep_points(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    loads = cfg.loads or (cfg.load,)
    schedulers = cfg.schedulers or (cfg.scheduler,)
    fracs = cfg.ecn_threshold_fracs or (cfg.ecn_threshold_frac,)
    degrees = cfg.incast_degrees or (cfg.incast_degree,)
    points = []
    for sched in schedulers:
        for load in loads:
            for frac in fracs:
                for deg in degrees:
                    points.append(replace(cfg, scheduler=sched, load=load,
                                          ecn_threshold_frac=frac,
                                          incast_degree=deg,
                                          loads=(), schedulers=(),
                                          ecn_threshold_fracs=(),
                                          incast_degrees=()))
    return points


def point_label(point: ExperimentConfig) -> str:
    return (f"{point.scheduler}_load{point.load:g}_k{point.ecn_threshold_frac:g}"
            f"_deg{point.incast_degree}")


def _run_point(args):
    point_dict, seed, outdir, config_text = args
    cfg = ExperimentConfig(**point_dict)
    row = run_single(cfg, seed)
    write_run_files(outdir, cfg, seed, row, config_text)
    return row


def run_sweep(cfg: ExperimentConfig, outdir: str, jobs: int = 0,
              base_seed: int = 1, config_text: str = "",
              progress=None) -> list[dict]:
    """Cartesian sweep; one process per run up to ``jobs`` workers."""
    os.makedirs(outdir, exist_ok=True)
    points = sweep_points(cfg)
    tasks = []
    for point in points:
        for i in range(cfg.seeds):
            seed = base_seed + i
            subdir = os.path.join(outdir, point_label(point), f"seed{seed}")
            tasks.append((asdict(point), seed, subdir, config_text))
    jobs = jobs or cfg.jobs or os.cpu_count() or 1
    rows = []
    if jobs > 1 and len(tasks) > 1:
        with Pool(processes=min(jobs, len(tasks))) as pool:
            for row in pool.imap(_run_point, tasks):
                rows.append(row)
                if progress:
                    progress(row)
    else:
        for task in tasks:
            row = _run_point(task)
            rows.append(row)
            if progress:
                progress(row)
    rows.sort(key=lambda r: (r["scheduler"], r["load"], r["ecn_frac"],
                             r["incast_degree"], r["seed"]))
    for row in rows:
        row.pop("_samples", None)
        row.pop("_queue_hist", None)
        row.pop("_series_gbps", None)
    write_summary_csv(os.path.join(outdir, "sweep_summary.csv"), rows)
    manifest = {
        "experiment": cfg.name,
        "kind": cfg.kind,
        "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
        "version": __version__,
        "seeds": list(range(base_seed, base_seed + cfg.seeds)),
        "points": [point_label(p) for p in points],
    }
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rows


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------

_AXIS_COLS = ("load", "ecn_frac", "incast_degree")
_RATIO_COLS = ("fct_short_mean_us", "fct_short_p99_us", "fct_incast_p99_us",
               "tput_long_gbps", "queue_p99_pkts", "reorder_frac",
               "opportunity_frac", "goodput_gbps")


def read_summary(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            rows.append(dict(zip(header, parts)))
    return rows


def _points(dirname: str, scheduler: str | None):
    path = os.path.join(dirname, "sweep_summary.csv")
    if not os.path.exists(path):
        path = os.path.join(dirname, "summary.csv")
    rows = read_summary(path)
    if scheduler:
        rows = [r for r in rows if r["scheduler"] == scheduler]
    by_axis: dict[tuple, dict[str, list[float]]] = {}
    for r in rows:
        key = tuple(r[c] for c in _AXIS_COLS)
        acc = by_axis.setdefault(key, {c: [] for c in _RATIO_COLS})
        for c in _RATIO_COLS:
            v = r.get(c, "na")
            if v not in ("na", "", "inf"):
                acc[c].append(float(v))
    return {k: {c: (sum(v) / len(v) if v else None) for c, v in acc.items()}
            for k, acc in by_axis.items()}


def compare(dir_a: str, dir_b: str, out_path: str | None = None) -> list[str]:
    """Per-axis-point ratio table: metric_a / metric_b, seeds averaged.

    Directory arguments accept a ``DIR:scheduler`` suffix to select one
    scheduler from a multi-scheduler sweep.
    """
    name_a, _, sched_a = dir_a.partition(":")
    name_b, _, sched_b = dir_b.partition(":")
    a = _points(name_a, sched_a or None)
    b = _points(name_b, sched_b or None)
    shared = sorted(set(a) & set(b))
    if not shared:
        raise ValueError("result sets share no axis points")
    lines = [",".join(_AXIS_COLS) + ","
             + ",".join(f"{c}_ratio" for c in _RATIO_COLS)]
    for key in shared:
        vals = []
        for c in _RATIO_COLS:
            va, vb = a[key][c], b[key][c]
            vals.append(_fmt(va / vb) if (va is not None and vb not in (None, 0.0)) else "na")
        lines.append(",".join(key) + "," + ",".join(vals))
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return lines
