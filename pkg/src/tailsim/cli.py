"""Command line entry points: run one experiment, sweep axes, compare results."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .config import ConfigError, load_config
from .harness import compare, run_single, run_sweep, write_run_files

FULL_SCALE = dict(n_leaf=20, n_spine=10, hosts_per_leaf=20)


def _load(path: str, scale: str):
    cfg = load_config(path)
    if scale == "full":
        cfg = replace(cfg, **FULL_SCALE)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return cfg, text


def _cmd_run(args) -> int:
    cfg, text = _load(args.config, args.scale)
    seeds = [args.seed] if args.seed is not None else list(range(1, cfg.seeds + 1))
    for seed in seeds:
        row = run_single(cfg, seed)
        outdir = os.path.join(args.out_dir, f"seed{seed}")
        write_run_files(outdir, cfg, seed, dict(row), text)
        print(f"{cfg.name} scheduler={cfg.scheduler} load={cfg.load:g} seed={seed}: "
              f"events={row['events']:,} wall={row['wall_s']:.1f}s -> {outdir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg, text = _load(args.config, args.scale)
    done = []

    def progress(row):
        done.append(row)
        print(f"[{len(done)}] {row['scheduler']} load={row['load']} "
              f"k={row['ecn_frac']} deg={row['incast_degree']} seed={row['seed']} "
              f"wall={row['wall_s']:.1f}s", flush=True)

    run_sweep(cfg, args.out_dir, jobs=args.jobs, base_seed=args.seed or 1,
              config_text=text, progress=progress)
    print(f"{len(done)} runs -> {os.path.join(args.out_dir, 'sweep_summary.csv')}")
    return 0


def _cmd_compare(args) -> int:
    lines = compare(args.dirs[0], args.dirs[1], args.out)
    if not args.out:
        for line in lines:
            print(line)
    else:
        print(f"comparison -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tailsim",
        description="Packet-level leaf-spine fabric simulator with "
                    "ECN-driven tail-packet prioritization.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment point per seed")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out-dir", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--scale", choices=("desk", "full"), default="desk")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run the cartesian sweep in the config")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out-dir", required=True)
    p_sweep.add_argument("--seed", type=int, default=None, help="base seed")
    p_sweep.add_argument("--jobs", type=int, default=0)
    p_sweep.add_argument("--scale", choices=("desk", "full"), default="desk")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cmp = sub.add_parser("compare", help="ratio table between two result dirs")
    p_cmp.add_argument("dirs", nargs=2, metavar="DIR[:scheduler]")
    p_cmp.add_argument("--out", default=None)
    p_cmp.set_defaults(func=_cmd_compare)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
