"""Command line front end.

Subcommands: train one policy, route a packet batch with a checkpoint,
run a full experiment grid, compare finished runs, export delay
histograms. Configs are JSON files mirroring ExperimentConfig.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .harness import (RUN_COLUMNS, TRAIN_COLUMNS, ExperimentConfig,
                      build_world, compare_algorithms, compare_report,
                      default_delay_edges, experiment_from_dict,
                      experiment_to_dict, export_histogram, packet_rows,
                      route_phase, run_experiment, write_csv, write_paths)
from .mappo import PolicyBundle, make_streams, train
from .nn import load_params, save_params
from .routing import DELIVERED

FULL_SCALE_ITERATIONS = 5000


def _load_experiment(path: Optional[Path]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        return experiment_from_dict(json.load(fh))


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def cmd_train(args: argparse.Namespace) -> int:
    exp = _load_experiment(args.config)
    algorithm = args.algorithm or exp.algorithms[0]
    seed = args.seed if args.seed is not None else exp.seeds[0]
    iterations = args.iterations if args.iterations is not None else exp.iterations
    world = build_world(exp, seed)
    streams = make_streams(seed)
    policy = PolicyBundle(algorithm, exp.node_count, exp.train,
                          streams["policy_init"])
    _progress(f"training {algorithm} seed={seed} ({iterations} iterations)")
    rows = train(world, policy, exp.train, exp.weights, streams,
                 iterations=iterations)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"{algorithm}_s{seed}"
    write_csv(out / f"train_{tag}.csv", rows, TRAIN_COLUMNS)
    params = policy.checkpoint_params()
    params["__mode__"] = np.array(algorithm)
    params["__node_count__"] = np.array(exp.node_count)
    save_params(str(out / f"checkpoint_{tag}.npz"), params)
    final = rows[-1]["mean_reward"] if rows else float("nan")
    print(json.dumps({"algorithm": algorithm, "seed": seed,
                      "iterations": iterations, "final_mean_reward": final,
                      "checkpoint": str(out / f"checkpoint_{tag}.npz")}))
    return 0


def cmd_route(args: argparse.Namespace) -> int:
    exp = _load_experiment(args.config)
    seed = args.seed if args.seed is not None else exp.seeds[0]
    params = load_params(str(args.checkpoint))
    try:
        mode = str(params.pop("__mode__").item())
        ck_nodes = int(params.pop("__node_count__"))
    except KeyError:
        raise ValueError("checkpoint lacks mode/node-count metadata; "
                         "was it written by `uasnsim train`?")
    if ck_nodes != exp.node_count:
        raise ValueError(f"checkpoint trained on {ck_nodes} nodes but config "
                         f"asks for {exp.node_count}")
    world = build_world(exp, seed)
    policy = PolicyBundle(mode, exp.node_count, exp.train,
                          make_streams(seed)["policy_init"])
    policy.load_checkpoint_params(params)
    _progress(f"routing {mode} seed={seed} ({exp.n_packets} packets)")
    metrics, engine = route_phase(world, policy, exp, seed)
    out = Path(args.out)
    tag = f"{mode}_s{seed}"
    write_csv(out / f"run_{tag}.csv", packet_rows(engine.packets), RUN_COLUMNS)
    write_paths(out / f"paths_{tag}.txt", engine.packets)
    print(json.dumps({"algorithm": mode, "seed": seed,
                      "created": metrics.created,
                      "delivered": metrics.delivered,
                      "delivery_ratio": metrics.delivery_ratio,
                      "mean_delay_s": metrics.mean_delay_s,
                      "interrupts": metrics.interrupt_count}))
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    exp = _load_experiment(args.config)
    if args.full_scale:
        exp.iterations = FULL_SCALE_ITERATIONS
    result = run_experiment(exp, out_dir=Path(args.out), progress=_progress)
    report = compare_algorithms(result)
    (Path(args.out) / "compare.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps({
        "runs": len(result.runs),
        "out": str(args.out),
        "delay_ordered": report.get("delay_ordered"),
        "convergence_ordered_seeds": report.get("convergence_ordered_seeds"),
        "delivery_i_beats_ma_all_seeds":
            report.get("delivery_i_beats_ma_all_seeds"),
    }))
    return 0


def _read_summary_rows(results_dir: Path) -> List[Dict]:
    summary = results_dir / "summary.csv"
    if not summary.exists():
        raise ValueError(f"no summary.csv under {results_dir}")
    fingerprints: Dict[str, str] = {}
    meta_path = results_dir / "metadata.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        fingerprints = meta.get("scenario_fingerprints", {})
    entries = []
    with open(summary, newline="") as fh:
        for row in csv.DictReader(fh):
            algo, seed = row["algorithm"], int(row["seed"])
            entries.append({
                "algorithm": algo,
                "seed": seed,
                "delivery_ratio": float(row["delivery_ratio"]),
                "mean_delay_s": (float(row["mean_delay_s"])
                                 if row["mean_delay_s"] else None),
                "final_decile_reward": float(row["final_decile_reward"]),
                "fingerprint": fingerprints.get(f"{algo}_s{seed}"),
            })
    return entries


def cmd_compare(args: argparse.Namespace) -> int:
    entries = _read_summary_rows(Path(args.results))
    report = compare_report(entries)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.strict:
        ok = (report.get("delay_ordered", False)
              and report.get("delivery_i_beats_ma_all_seeds", False))
        if not ok:
            print("orderings violated", file=sys.stderr)
            return 3
    return 0


def cmd_export_hist(args: argparse.Namespace) -> int:
    delays: List[float] = []
    for path in args.run_csv:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row["status"] == DELIVERED:
                    delays.append(float(row["delay_s"]))
    if args.edges:
        edges = [float(e) for e in args.edges.split(",")]
    else:
        edges = list(default_delay_edges(args.node_count))
    edge_arr, props = export_histogram(delays, edges)
    rows = [{"bin_low": lo, "bin_high": hi, "proportion": p}
            for lo, hi, p in zip(edge_arr[:-1], edge_arr[1:], props)]
    write_csv(Path(args.out), rows, ("bin_low", "bin_high", "proportion"))
    print(json.dumps({"delays": len(delays), "out": str(args.out),
                      "proportions": [float(p) for p in props]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uasnsim",
        description="underwater acoustic sensor network routing simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one policy and save a checkpoint")
    p.add_argument("--config", type=Path, default=None,
                   help="experiment JSON (defaults used if omitted)")
    p.add_argument("--algorithm", default=None,
                   help="mappo | ma_mappo | ma_mappo_i")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("route", help="route a packet batch with a checkpoint")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_route)

    p = sub.add_parser("experiment",
                       help="full algorithm x seed grid with artifacts")
    p.add_argument("--config", type=Path, default=None)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--full-scale", action="store_true",
                   help=f"train {FULL_SCALE_ITERATIONS} iterations per run")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("compare", help="ordering report from finished runs")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--strict", action="store_true",
                   help="exit 3 when expected orderings are violated")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-hist", help="delay histogram from run CSVs")
    p.add_argument("--run-csv", type=Path, action="append", required=True)
    p.add_argument("--edges", default=None,
                   help="comma separated bin edges, e.g. 0,9,12,15,18,inf")
    p.add_argument("--node-count", type=int, default=64)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_export_hist)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
