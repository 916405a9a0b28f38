"""Experiment configuration: INI-style files with validated, typed fields.

The parser is deliberately small so errors can carry line numbers: sections
in brackets, key = value pairs, # or ; comments.  Unknown sections or keys
are hard errors; absent keys fall back to the documented defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .fabric import MODE_NAMES


class ConfigError(Exception):
    pass


def _parse_ini(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{current}]")
        sections[current][key] = (value.split("#")[0].split(";")[0].strip(), lineno)
    return sections


_SCHEMA = {
    "experiment": {"name", "kind", "warmup_ms", "window_ms", "tail_percentile"},
    "topology": {"kind", "n_leaf", "n_spine", "hosts_per_leaf", "host_gbps",
                 "uplink_gbps", "rtt_us"},
    "workload": {"load", "normalize_to_core", "short_kb_min", "short_kb_max",
                 "long_kb", "long_fraction", "incast_degree",
                 "incast_period_ms", "incast_response_kb"},
    "switch": {"scheduler", "capacity_kb", "ecn_threshold_frac",
               "pias_thresholds_kb", "pias_queue_cap_kb", "sjf_bands"},
    "transport": {"mss", "g", "init_cwnd_mss", "min_rto_ms",
                  "reorder_grace_us"},
    "convergence": {"competitors", "start_after_rtts", "competitor_split",
                    "flow_mb", "measure_rtts", "tolerance"},
    "sweep": {"seeds", "loads", "schedulers", "ecn_threshold_fracs",
              "incast_degrees", "jobs"},
}


@dataclass
class ExperimentConfig:
    # experiment
    name: str = "run"
    kind: str = "fabric"              # fabric | convergence
    warmup_ms: float = 10.0
    window_ms: float = 20.0
    tail_percentile: float = 95.0
    # topology
    topo_kind: str = "leaf_spine"
    n_leaf: int = 8
    n_spine: int = 4
    hosts_per_leaf: int = 10
    host_gbps: float = 10.0
    uplink_gbps: float = 10.0
    rtt_us: float = 80.0
    # workload
    load: float = 0.6
    normalize_to_core: bool = True
    short_kb_min: float = 8.0
    short_kb_max: float = 32.0
    long_kb: float = 1000.0
    long_fraction: float = 0.30
    incast_degree: int = 0
    incast_period_ms: float = 8.0
    incast_response_kb: float = 0.0   # 0: draw from the short range
    # switch
    scheduler: str = "ecn_prio"
    capacity_kb: float = 450.0
    ecn_threshold_frac: float = 0.25
    pias_thresholds_kb: tuple = (16.0, 128.0, 512.0)
    pias_queue_cap_kb: float = 150.0
    sjf_bands: int = 8
    # transport
    mss: int = 1460
    g: float = 1.0 / 16.0
    init_cwnd_mss: int = 10
    min_rto_ms: float = 10.0
    reorder_grace_us: float = 100.0
    # convergence
    competitors: int = 20
    start_after_rtts: int = 10
    competitor_split: str = "cross"   # cross | same
    flow_mb: float = 25.0
    measure_rtts: int = 60
    tolerance: float = 0.2
    # sweep
    seeds: int = 5
    loads: tuple = ()
    schedulers: tuple = ()
    ecn_threshold_fracs: tuple = ()
    incast_degrees: tuple = ()
    jobs: int = 0                     # 0: use cpu count


def _typed(value: str, lineno: int, key: str, kind: str):
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
        if kind == "bool":
            if value.lower() in ("true", "yes", "1", "on"):
                return True
            if value.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(value)
        if kind == "floats":
            return tuple(float(v.strip()) for v in value.split(",") if v.strip())
        if kind == "ints":
            return tuple(int(v.strip()) for v in value.split(",") if v.strip())
        if kind == "strs":
            return tuple(v.strip() for v in value.split(",") if v.strip())
        return value
    except ValueError:
        raise ConfigError(f"line {lineno}: invalid {kind} for {key!r}: {value!r}") from None


_FIELD_TYPES = {
    ("experiment", "name"): ("name", "str"),
    ("experiment", "kind"): ("kind", "str"),
    ("experiment", "warmup_ms"): ("warmup_ms", "float"),
    ("experiment", "window_ms"): ("window_ms", "float"),
    ("experiment", "tail_percentile"): ("tail_percentile", "float"),
    ("topology", "kind"): ("topo_kind", "str"),
    ("topology", "n_leaf"): ("n_leaf", "int"),
    ("topology", "n_spine"): ("n_spine", "int"),
    ("topology", "hosts_per_leaf"): ("hosts_per_leaf", "int"),
    ("topology", "host_gbps"): ("host_gbps", "float"),
    ("topology", "uplink_gbps"): ("uplink_gbps", "float"),
    ("topology", "rtt_us"): ("rtt_us", "float"),
    ("workload", "load"): ("load", "float"),
    ("workload", "normalize_to_core"): ("normalize_to_core", "bool"),
    ("workload", "short_kb_min"): ("short_kb_min", "float"),
    ("workload", "short_kb_max"): ("short_kb_max", "float"),
    ("workload", "long_kb"): ("long_kb", "float"),
    ("workload", "long_fraction"): ("long_fraction", "float"),
    ("workload", "incast_degree"): ("incast_degree", "int"),
    ("workload", "incast_period_ms"): ("incast_period_ms", "float"),
    ("workload", "incast_response_kb"): ("incast_response_kb", "float"),
    ("switch", "scheduler"): ("scheduler", "str"),
    ("switch", "capacity_kb"): ("capacity_kb", "float"),
    ("switch", "ecn_threshold_frac"): ("ecn_threshold_frac", "float"),
    ("switch", "pias_thresholds_kb"): ("pias_thresholds_kb", "floats"),
    ("switch", "pias_queue_cap_kb"): ("pias_queue_cap_kb", "float"),
    ("switch", "sjf_bands"): ("sjf_bands", "int"),
    ("transport", "mss"): ("mss", "int"),
    ("transport", "g"): ("g", "float"),
    ("transport", "init_cwnd_mss"): ("init_cwnd_mss", "int"),
    ("transport", "min_rto_ms"): ("min_rto_ms", "float"),
    ("transport", "reorder_grace_us"): ("reorder_grace_us", "float"),
    ("convergence", "competitors"): ("competitors", "int"),
    ("convergence", "start_after_rtts"): ("start_after_rtts", "int"),
    ("convergence", "competitor_split"): ("competitor_split", "str"),
    ("convergence", "flow_mb"): ("flow_mb", "float"),
    ("convergence", "measure_rtts"): ("measure_rtts", "int"),
    ("convergence", "tolerance"): ("tolerance", "float"),
    ("sweep", "seeds"): ("seeds", "int"),
    ("sweep", "loads"): ("loads", "floats"),
    ("sweep", "schedulers"): ("schedulers", "strs"),
    ("sweep", "ecn_threshold_fracs"): ("ecn_threshold_fracs", "floats"),
    ("sweep", "incast_degrees"): ("incast_degrees", "ints"),
    ("sweep", "jobs"): ("jobs", "int"),
}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; errors carry the offending line number."""
    sections = _parse_ini(text)
    cfg = ExperimentConfig()
    for section, keys in sections.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, (value, lineno) in keys.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
            attr, kind = _FIELD_TYPES[(section, key)]
            setattr(cfg, attr, _typed(value, lineno, key, kind))
    _validate(cfg, sections)
    return cfg


def _lineof(sections, section, key, default=0):
    try:
        return sections[section][key][1]
    except KeyError:
        return default


def _validate(cfg: ExperimentConfig, sections) -> None:
    if cfg.kind not in ("fabric", "convergence"):
        raise ConfigError(f"line {_lineof(sections,'experiment','kind')}: "
                          f"kind must be fabric or convergence")
    if cfg.topo_kind not in ("leaf_spine", "dumbbell"):
        raise ConfigError(f"line {_lineof(sections,'topology','kind')}: "
                          f"topology kind must be leaf_spine or dumbbell")
    for load in (cfg.load, *cfg.loads):
        if not 0.0 < load < 1.0:
            lineno = _lineof(sections, "workload", "load") or _lineof(sections, "sweep", "loads")
            raise ConfigError(f"line {lineno}: load must be in (0,1), got {load}")
    for sched in (cfg.scheduler, *cfg.schedulers):
        if sched not in MODE_NAMES:
            lineno = _lineof(sections, "switch", "scheduler") or _lineof(sections, "sweep", "schedulers")
            raise ConfigError(f"line {lineno}: unknown scheduler {sched!r}; "
                              f"one of {sorted(MODE_NAMES)}")
    for frac in (cfg.ecn_threshold_frac, *cfg.ecn_threshold_fracs):
        if not 0.0 < frac < 1.0:
            raise ConfigError(f"line {_lineof(sections,'switch','ecn_threshold_frac')}: "
                              f"ecn_threshold_frac must be in (0,1), got {frac}")
    if cfg.short_kb_min > cfg.short_kb_max:
        raise ConfigError(f"line {_lineof(sections,'workload','short_kb_min')}: "
                          f"short flow range reversed")
    if list(cfg.pias_thresholds_kb) != sorted(cfg.pias_thresholds_kb):
        raise ConfigError(f"line {_lineof(sections,'switch','pias_thresholds_kb')}: "
                          f"pias thresholds must ascend")
    if cfg.seeds < 1:
        raise ConfigError(f"line {_lineof(sections,'sweep','seeds')}: need at least one seed")
    if cfg.competitor_split not in ("cross", "same"):
        raise ConfigError(f"line {_lineof(sections,'convergence','competitor_split')}: "
                          f"competitor_split must be cross or same")
    if cfg.window_ms <= 0 or cfg.warmup_ms < 0:
        raise ConfigError(f"line {_lineof(sections,'experiment','window_ms')}: "
                          f"bad measurement window")


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
