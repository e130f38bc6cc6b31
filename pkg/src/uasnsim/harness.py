"""Experiment orchestration: train, route, summarize, compare.

One run = (algorithm, seed). Within a seed, every algorithm sees the same
static scenario, the same route-time starting positions, the same failure
waves and the same mobility, so per-seed comparisons are apples to apples.
Run artifacts are deterministic byte for byte; wall-clock timing appears
only in the training CSV.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import __version__
from .mappo import (MODES, PolicyBundle, TrainConfig, fine_tune, make_streams,
                    train)
from .rewards import RewardWeights
from .routing import DELIVERED, Packet, TaskMetrics, run_routing_task
from .world import World, WorldConfig

# salts separating route-phase randomness from training streams, so the
# route task is identical across algorithms sharing a seed
_ROUTE_SALT = 0x507E
_FINETUNE_SALT = 0xF17E
_RESET_SALT = 0x9E5E

TRAIN_COLUMNS = ("iteration", "mean_reward", "actor_loss", "critic_loss",
                 "masked_fraction", "ratio_dev_pre_update", "mask_violations",
                 "policy_sum_dev", "wall_ms")
RUN_COLUMNS = ("packet_id", "status", "hops", "delay_s", "created_tick",
               "delivered_tick", "interrupts")
SUMMARY_COLUMNS = ("algorithm", "seed", "created", "delivered", "lost",
                   "orphaned", "delivery_ratio", "mean_delay_s", "total_ticks",
                   "interrupt_count", "fine_tune_calls", "final_decile_reward")


@dataclass
class ExperimentConfig:
    algorithms: Tuple[str, ...] = tuple(MODES)
    seeds: Tuple[int, ...] = (0, 1, 2, 3, 4)
    node_count: int = 64
    ca_count: int = 1
    iterations: int = 500
    n_packets: int = 500
    packets_per_tick: int = 10
    route_tick_cap: int = 300
    route_failure_rate: float = 0.10
    failure_waves: int = 3
    train: TrainConfig = field(default_factory=TrainConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    world_overrides: Dict = field(default_factory=dict)

    def __post_init__(self):
        for a in self.algorithms:
            if a not in MODES:
                raise ValueError(f"unknown algorithm {a!r}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("duplicate seeds")
        if self.n_packets < 1 or self.packets_per_tick < 1:
            raise ValueError("packet counts must be positive")
        if self.route_tick_cap < 1:
            raise ValueError("route_tick_cap must be positive")
        if not 0.0 <= self.route_failure_rate < 1.0:
            raise ValueError("route_failure_rate must be in [0, 1)")


@dataclass
class RunResult:
    algorithm: str
    seed: int
    metrics: TaskMetrics
    train_rows: List[Dict[str, float]]
    packets: List[Packet]
    summary: Dict
    fingerprint: str
    audit_rows: List[Dict[str, int]]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: Dict[Tuple[str, int], RunResult]
    summary_rows: List[Dict]
    aggregates: Dict[str, Dict[str, float]]


def build_world(exp: ExperimentConfig, seed: int) -> World:
    cfg = WorldConfig(node_count=exp.node_count, ca_count=exp.ca_count,
                      seed=seed, **exp.world_overrides)
    return World.init_scenario(cfg)


def scenario_fingerprint(world: World) -> str:
    """Hash of the static scenario: anchors, roles, subnets, noise field."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(world.anchors).tobytes())
    h.update(np.asarray(sorted(world.ca_ids), dtype=np.int64).tobytes())
    h.update(np.asarray([world.source_id, world.sink_id], dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(world.subnet_of).tobytes())
    h.update(np.ascontiguousarray(world.spl_db).tobytes())
    return h.hexdigest()[:16]


def final_decile_reward(train_rows: Sequence[Dict[str, float]]) -> float:
    """Mean training reward over the last tenth of iterations."""
    if not train_rows:
        return float("nan")
    k = max(1, len(train_rows) // 10)
    return float(np.mean([r["mean_reward"] for r in train_rows[-k:]]))


def _route_streams(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence([seed, _ROUTE_SALT]).spawn(4)
    names = ("episode", "failures", "sampling", "shuffle")
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def route_phase(world: World, policy: PolicyBundle, exp: ExperimentConfig,
                seed: int):
    """Reset the world to the seed's canonical route-time state and drain
    the packet batch. Identical across algorithms sharing a seed."""
    world.reset_for_episode(
        np.random.default_rng(np.random.SeedSequence([seed, _RESET_SALT])),
        rejitter=True, revive=True, reset_energy=True)
    ft_seq = np.random.SeedSequence([seed, _FINETUNE_SALT])
    hook = None
    if policy.mode == "ma_mappo_i" and exp.train.fine_tune_iterations > 0:
        def hook(live_world: World, holders) -> None:
            fine_tune(live_world, policy, exp.train, exp.weights, ft_seq,
                      exp.train.fine_tune_iterations, origins=holders)
    return run_routing_task(
        world, policy, exp.train, exp.weights,
        n_packets=exp.n_packets, packets_per_tick=exp.packets_per_tick,
        tick_cap=exp.route_tick_cap, failure_rate=exp.route_failure_rate,
        streams=_route_streams(seed), fine_tune_hook=hook,
        failure_waves=exp.failure_waves, algorithm=policy.mode, seed=seed)


def run_single(algorithm: str, seed: int, exp: ExperimentConfig,
               out_dir: Optional[Path] = None,
               progress: Optional[Callable[[str], None]] = None) -> RunResult:
    """Train one policy from scratch, then route the full packet batch."""
    if algorithm not in MODES:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    world = build_world(exp, seed)
    fingerprint = scenario_fingerprint(world)
    streams = make_streams(seed)
    policy = PolicyBundle(algorithm, exp.node_count, exp.train,
                          streams["policy_init"])
    if progress:
        progress(f"training {algorithm} seed={seed} "
                 f"({exp.iterations} iterations)")
    train_rows = train(world, policy, exp.train, exp.weights, streams,
                       iterations=exp.iterations)

    if progress:
        progress(f"routing {algorithm} seed={seed} ({exp.n_packets} packets)")
    metrics, engine = route_phase(world, policy, exp, seed)
    metrics.reward_curve = [float(r["mean_reward"]) for r in train_rows]

    summary = {
        "algorithm": algorithm,
        "seed": seed,
        "created": metrics.created,
        "delivered": metrics.delivered,
        "lost": metrics.lost,
        "orphaned": metrics.orphaned,
        "delivery_ratio": metrics.delivery_ratio,
        "mean_delay_s": metrics.mean_delay_s,
        "total_ticks": metrics.total_ticks,
        "interrupt_count": metrics.interrupt_count,
        "fine_tune_calls": metrics.fine_tune_calls,
        "final_decile_reward": final_decile_reward(train_rows),
    }
    result = RunResult(algorithm=algorithm, seed=seed, metrics=metrics,
                       train_rows=train_rows, packets=engine.packets,
                       summary=summary, fingerprint=fingerprint,
                       audit_rows=engine.audit_rows)
    if out_dir is not None:
        write_run_artifacts(result, Path(out_dir))
    return result


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, rows: Sequence[Dict], columns: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def packet_rows(packets: Sequence[Packet]) -> List[Dict]:
    rows = []
    for p in sorted(packets, key=lambda q: q.packet_id):
        rows.append({
            "packet_id": p.packet_id,
            "status": p.status,
            "hops": len(p.hop_trace) - 1,
            "delay_s": p.accumulated_delay_s,
            "created_tick": p.created_tick,
            "delivered_tick": p.delivered_tick,
            "interrupts": p.interrupts,
        })
    return rows


def write_paths(path: Path, packets: Sequence[Packet]) -> None:
    """Delivered routes, one per line: id, node chain, hop count, delay."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for p in sorted(packets, key=lambda q: q.packet_id):
        if p.status != DELIVERED:
            continue
        chain = " -> ".join(str(n) for n in p.hop_trace)
        lines.append(f"{p.packet_id}: {chain} | hops={len(p.hop_trace) - 1} "
                     f"delay_s={p.accumulated_delay_s!r}")
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def write_run_artifacts(result: RunResult, out_dir: Path) -> None:
    tag = f"{result.algorithm}_s{result.seed}"
    write_csv(out_dir / f"train_{tag}.csv", result.train_rows, TRAIN_COLUMNS)
    write_csv(out_dir / f"run_{tag}.csv", packet_rows(result.packets),
              RUN_COLUMNS)
    write_paths(out_dir / f"paths_{tag}.txt", result.packets)


def confidence_interval(values: Sequence[float],
                        level: float = 0.95) -> Tuple[float, float, float]:
    """Student-t interval for the mean: (mean, low, high)."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise ValueError("no values")
    mean = float(vals.mean())
    if vals.size == 1:
        return mean, math.nan, math.nan
    half = float(stats.t.ppf(0.5 + level / 2.0, df=vals.size - 1)
                 * vals.std(ddof=1) / math.sqrt(vals.size))
    return mean, mean - half, mean + half


def aggregate_runs(runs: Dict[Tuple[str, int], RunResult],
                   algorithms: Sequence[str]) -> Dict[str, Dict[str, float]]:
    out: Dict[str, Dict[str, float]] = {}
    for algo in algorithms:
        mine = [r for (a, _), r in sorted(runs.items()) if a == algo]
        if not mine:
            continue
        deliveries = [r.metrics.delivery_ratio for r in mine]
        delays = [r.metrics.mean_delay_s for r in mine
                  if r.metrics.mean_delay_s is not None]
        rewards = [final_decile_reward(r.train_rows) for r in mine]
        d_mean, d_lo, d_hi = confidence_interval(deliveries)
        row = {"runs": len(mine),
               "delivery_mean": d_mean, "delivery_ci_low": d_lo,
               "delivery_ci_high": d_hi}
        if delays:
            t_mean, t_lo, t_hi = confidence_interval(delays)
            row.update(delay_mean=t_mean, delay_ci_low=t_lo, delay_ci_high=t_hi)
        r_mean, r_lo, r_hi = confidence_interval(rewards)
        row.update(reward_mean=r_mean, reward_ci_low=r_lo, reward_ci_high=r_hi)
        out[algo] = row
    return out


def run_experiment(exp: ExperimentConfig, out_dir: Optional[Path] = None,
                   progress: Optional[Callable[[str], None]] = None
                   ) -> ExperimentResult:
    """All (algorithm, seed) runs, sequential and deterministic."""
    out_path = Path(out_dir) if out_dir is not None else None
    runs: Dict[Tuple[str, int], RunResult] = {}
    summary_rows: List[Dict] = []
    for algorithm in exp.algorithms:
        for seed in exp.seeds:
            result = run_single(algorithm, seed, exp, out_dir=out_path,
                                progress=progress)
            runs[(algorithm, seed)] = result
            summary_rows.append(result.summary)
    aggregates = aggregate_runs(runs, exp.algorithms)
    if out_path is not None:
        write_csv(out_path / "summary.csv", summary_rows, SUMMARY_COLUMNS)
        agg_rows = [dict(algorithm=a, **vals) for a, vals in aggregates.items()]
        agg_cols = ["algorithm"] + sorted(
            {k for row in agg_rows for k in row if k != "algorithm"})
        write_csv(out_path / "aggregates.csv", agg_rows, agg_cols)
        write_metadata(out_path / "metadata.json", exp, runs)
    return ExperimentResult(config=exp, runs=runs, summary_rows=summary_rows,
                            aggregates=aggregates)


def write_metadata(path: Path, exp: ExperimentConfig,
                   runs: Dict[Tuple[str, int], RunResult]) -> None:
    """Everything needed to re-run the experiment, plus scenario hashes."""
    payload = {
        "package_version": __version__,
        "experiment": experiment_to_dict(exp),
        "scenario_fingerprints": {
            f"{a}_s{s}": r.fingerprint for (a, s), r in sorted(runs.items())},
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def experiment_to_dict(exp: ExperimentConfig) -> Dict:
    d = dataclasses.asdict(exp)
    d["algorithms"] = list(exp.algorithms)
    d["seeds"] = list(exp.seeds)
    return d


def experiment_from_dict(d: Dict) -> ExperimentConfig:
    d = dict(d)
    if "train" in d and isinstance(d["train"], dict):
        d["train"] = TrainConfig(**d["train"])
    if "weights" in d and isinstance(d["weights"], dict):
        w = dict(d["weights"])
        if "theta" in w:
            w["theta"] = tuple(w["theta"])
        d["weights"] = RewardWeights(**w)
    for key in ("algorithms", "seeds"):
        if key in d:
            d[key] = tuple(d[key])
    return ExperimentConfig(**d)


def compare_report(entries: Sequence[Dict]) -> Dict:
    """Pairwise ordering report from per-run rows.

    Each entry needs: algorithm, seed, delivery_ratio, mean_delay_s (may be
    None), final_decile_reward, and optionally fingerprint. Raises if any
    seed's runs disagree on the underlying scenario fingerprint.
    """
    by_seed: Dict[int, Dict[str, Dict]] = {}
    for e in entries:
        group = by_seed.setdefault(int(e["seed"]), {})
        if e["algorithm"] in group:
            raise ValueError(
                f"duplicate run {e['algorithm']!r} at seed {e['seed']}")
        group[e["algorithm"]] = e
    for seed, group in sorted(by_seed.items()):
        prints = {a: e.get("fingerprint") for a, e in group.items()
                  if e.get("fingerprint")}
        if len(set(prints.values())) > 1:
            raise ValueError(f"scenario mismatch at seed {seed}: {prints}")

    per_seed = []
    for seed, group in sorted(by_seed.items()):
        entry = {"seed": seed,
                 "delivery": {a: e["delivery_ratio"]
                              for a, e in group.items()},
                 "mean_delay_s": {a: e["mean_delay_s"]
                                  for a, e in group.items()},
                 "final_decile_reward": {a: e["final_decile_reward"]
                                         for a, e in group.items()}}
        if {"ma_mappo", "ma_mappo_i"} <= group.keys():
            entry["delivery_i_beats_ma"] = (
                entry["delivery"]["ma_mappo_i"] > entry["delivery"]["ma_mappo"])
        if set(MODES) <= group.keys():
            fr = entry["final_decile_reward"]
            entry["convergence_ordered"] = (
                fr["ma_mappo_i"] >= fr["ma_mappo"] >= fr["mappo"])
        per_seed.append(entry)

    report: Dict = {"per_seed": per_seed}
    algos = {e["algorithm"] for e in entries}
    if set(MODES) <= algos:
        dm = {}
        for a in MODES:
            vals = [e["mean_delay_s"] for e in entries
                    if e["algorithm"] == a and e["mean_delay_s"] is not None]
            dm[a] = float(np.mean(vals)) if vals else None
        report["delay_means"] = dm
        if all(v is not None for v in dm.values()):
            report["delay_ordered"] = (dm["ma_mappo_i"] <= dm["ma_mappo"]
                                       <= dm["mappo"])
        report["convergence_ordered_seeds"] = sum(
            1 for e in per_seed if e.get("convergence_ordered"))
        report["delivery_i_beats_ma_all_seeds"] = all(
            e.get("delivery_i_beats_ma", False) for e in per_seed)
    return report


def compare_algorithms(result: ExperimentResult) -> Dict:
    """Ordering report for a completed in-memory experiment."""
    entries = []
    for (algo, seed), run in sorted(result.runs.items()):
        entries.append({
            "algorithm": algo,
            "seed": seed,
            "delivery_ratio": run.metrics.delivery_ratio,
            "mean_delay_s": run.metrics.mean_delay_s,
            "final_decile_reward": final_decile_reward(run.train_rows),
            "fingerprint": run.fingerprint,
        })
    return compare_report(entries)


def default_delay_edges(node_count: int = 64) -> Tuple[float, ...]:
    """Histogram bin edges in seconds; denser grids shift bins downward."""
    base = (9.0, 12.0, 15.0, 18.0)
    scale = (64.0 / node_count) ** (1.0 / 3.0)
    return (0.0,) + tuple(e * scale for e in base) + (math.inf,)


def export_histogram(delays: Sequence[float],
                     edges: Optional[Sequence[float]] = None,
                     node_count: int = 64
                     ) -> Tuple[np.ndarray, np.ndarray]:
    """Delay distribution as bin proportions; proportions sum to one."""
    edge_arr = np.asarray(edges if edges is not None
                          else default_delay_edges(node_count), dtype=float)
    if edge_arr.ndim != 1 or edge_arr.size < 2:
        raise ValueError("need at least two bin edges")
    if not np.all(np.diff(edge_arr) > 0):
        raise ValueError("edges must be strictly increasing")
    vals = np.asarray(list(delays), dtype=float)
    counts, _ = np.histogram(vals, bins=edge_arr)
    total = counts.sum()
    props = counts / total if total > 0 else np.zeros_like(counts, dtype=float)
    return edge_arr, props
