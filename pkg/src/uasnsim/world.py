"""Deployment volume, node state and acoustic link physics.

A World owns every mutable per-node quantity (position, velocity, energy,
liveness, ambient noise) plus static link attributes (bandwidth draws,
delivery history EMA). All state lives in numpy arrays indexed by node id;
(config, seed) fully determines every trajectory.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import noise as noise_mod
from .noise import NoiseSourceParams

ROLE_DR = "DR"
ROLE_CA = "CA"
ROLE_SOURCE = "source"
ROLE_SINK = "sink"

_STANDARD_SIZES = (64, 125, 216)


class StateError(RuntimeError):
    """Raised when an operation targets a node in an illegal state."""


@dataclass(frozen=True)
class WorldConfig:
    node_count: int = 64
    ca_count: int = 1
    cube_edge_m: float = 10_000.0
    min_dr_spacing_m: float = 1_000.0
    min_ca_spacing_m: float = 10_000.0
    mobility_sigma_m: float = 25.0
    sound_speed_mps: float = 1_500.0
    comm_range_m: float = 6_000.0
    # slack on the range check at transmission time so that small mobility
    # drift between view refreshes does not fail otherwise healthy links
    range_tolerance: float = 0.2
    # generous enough that no node depletes during a 500-packet task even
    # under heavy flow concentration; depletion death stays testable by
    # configuring a small budget
    initial_energy: float = 5_000.0
    tx_cost: float = 1.0
    rx_cost: float = 0.5
    source_level_db: float = 170.0
    source_sink_min_dist_m: float = 10_000.0
    bandwidth_low: float = 1.0
    bandwidth_high: float = 10.0
    ema_coeff: float = 0.3
    # failure victims are drawn with probability tilted toward the traffic
    # corridor between source and sink, where interference and adversarial
    # pressure concentrate; 0 = uniform draw
    failure_corridor_bias: float = 8.0
    failure_corridor_sigma_m: float = 2_000.0
    seed: int = 0
    allow_nonstandard_size: bool = False
    noise: NoiseSourceParams = field(default_factory=NoiseSourceParams)

    def __post_init__(self):
        if self.node_count < 2:
            raise ValueError("need at least two nodes")
        if self.ca_count not in (1, 2, 4):
            raise ValueError(f"ca_count must be 1, 2 or 4, got {self.ca_count}")
        for name in ("cube_edge_m", "sound_speed_mps", "comm_range_m",
                     "initial_energy", "tx_cost", "rx_cost", "bandwidth_low",
                     "bandwidth_high"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.mobility_sigma_m < 0.0:
            raise ValueError("mobility_sigma_m must be non-negative")
        if not 0.0 < self.ema_coeff <= 1.0:
            raise ValueError("ema_coeff must lie in (0, 1]")
        if self.bandwidth_high < self.bandwidth_low:
            raise ValueError("bandwidth_high must be >= bandwidth_low")
        if self.failure_corridor_bias < 0.0:
            raise ValueError("failure_corridor_bias must be non-negative")
        if self.failure_corridor_sigma_m <= 0.0:
            raise ValueError("failure_corridor_sigma_m must be positive")

    def validate_grid(self) -> None:
        """Checks that only apply to grid deployments built by init_scenario."""
        g = round(self.node_count ** (1.0 / 3.0))
        if g ** 3 != self.node_count:
            raise ValueError(f"node_count must be a perfect cube, got {self.node_count}")
        if self.node_count not in _STANDARD_SIZES and not self.allow_nonstandard_size:
            raise ValueError(
                f"node_count {self.node_count} is not one of {_STANDARD_SIZES}; "
                "set allow_nonstandard_size to override")
        if self.min_dr_spacing_m > self.grid_spacing_m:
            raise ValueError(
                f"min_dr_spacing_m {self.min_dr_spacing_m} exceeds grid "
                f"spacing {self.grid_spacing_m:.1f}")

    @property
    def grid_side(self) -> int:
        return round(self.node_count ** (1.0 / 3.0))

    @property
    def grid_spacing_m(self) -> float:
        return self.cube_edge_m / (self.grid_side - 1)


@dataclass
class NodeState:
    node_id: int
    role: str
    position: np.ndarray
    velocity: np.ndarray
    energy: float
    alive: bool
    spl_total_db: float
    subnet_ca: int


@dataclass(frozen=True)
class LinkMetrics:
    distance_m: float
    delay_s: float
    signal_db: float
    bandwidth: float
    success_history: float


@dataclass(frozen=True)
class IndicatorBounds:
    d_max: float
    s_min: float
    s_max: float
    b_min: float
    b_max: float
    e_min: float
    e_max: float


def _reflect(values: np.ndarray, edge: float) -> np.ndarray:
    """Fold coordinates back into [0, edge] by mirror reflection."""
    period = 2.0 * edge
    q = np.mod(values, period)
    return np.minimum(q, period - q)


class World:
    """Mutable simulation state; single-owner, no internal threading."""

    def __init__(self, config: WorldConfig, positions: np.ndarray,
                 roles: List[str], anchors: Optional[np.ndarray] = None):
        n = config.node_count
        if positions.shape != (n, 3):
            raise ValueError(f"positions must be ({n}, 3)")
        if len(roles) != n:
            raise ValueError("one role per node required")
        self.config = config
        self.n = n
        self.positions = positions.astype(np.float64)
        self.anchors = (anchors if anchors is not None else positions).astype(np.float64)
        self.roles = list(roles)
        self.velocity = np.zeros((n, 3))
        self.energy = np.full(n, config.initial_energy, dtype=np.float64)
        self.failed = np.zeros(n, dtype=bool)
        self.alive = np.ones(n, dtype=bool)
        self.spl_db = np.zeros(n, dtype=np.float64)
        self.bandwidth = np.zeros((n, n), dtype=np.float64)
        self.success_ema = np.ones((n, n), dtype=np.float64)
        self.tx_count = np.zeros(n, dtype=np.int64)
        self.rx_count = np.zeros(n, dtype=np.int64)
        self.ca_ids: List[int] = [i for i, r in enumerate(roles) if r == ROLE_CA]
        self.source_id: int = next((i for i, r in enumerate(roles) if r == ROLE_SOURCE), -1)
        self.sink_id: int = next((i for i, r in enumerate(roles) if r == ROLE_SINK), -1)
        self.subnet_of = np.zeros(n, dtype=np.int64)
        self.tick = 0
        self.warnings: List[str] = []
        self.views: Dict[int, object] = {}
        self._pos_version = 0
        self._life_version = 0
        self._energy_version = 0
        self._dist_cache: Tuple[int, np.ndarray] | None = None
        self._bounds_cache = None
        self._bfs_cache = None
        self._tbounds_cache = None

    # ---------------------------------------------------------------- setup

    @classmethod
    def init_scenario(cls, config: WorldConfig) -> "World":
        """Deterministic deployment: jittered grid, CA/source/sink roles."""
        config.validate_grid()
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xA11CE]))
        g = config.grid_side
        spacing = config.grid_spacing_m
        axis = np.arange(g) * spacing
        gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
        anchors = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
        jitter = rng.uniform(-spacing / 4.0, spacing / 4.0, size=anchors.shape)
        positions = np.clip(anchors + jitter, 0.0, config.cube_edge_m)

        roles = [ROLE_DR] * config.node_count
        ca_ids = cls._select_cas(config, positions)
        for ca in ca_ids:
            roles[ca] = ROLE_CA
        src, snk = cls._select_source_sink(config, positions, set(ca_ids), rng)
        roles[src] = ROLE_SOURCE
        roles[snk] = ROLE_SINK

        world = cls(config, positions, roles, anchors=anchors)
        world._assign_subnets()
        world._check_ca_spacing()
        world._draw_static_attributes(rng)
        return world

    @staticmethod
    def _select_cas(config: WorldConfig, positions: np.ndarray) -> List[int]:
        edge = config.cube_edge_m
        if config.ca_count == 1:
            centers = [(edge / 2, edge / 2, edge / 2)]
        elif config.ca_count == 2:
            centers = [(edge / 4, edge / 2, edge / 2), (3 * edge / 4, edge / 2, edge / 2)]
        else:
            centers = [(fx * edge, fy * edge, edge / 2)
                       for fx in (0.25, 0.75) for fy in (0.25, 0.75)]
        ca_ids: List[int] = []
        for c in centers:
            d = np.linalg.norm(positions - np.asarray(c), axis=1)
            d[ca_ids] = np.inf  # a node hosts at most one CA role
            ca_ids.append(int(np.argmin(d)))
        return ca_ids

    @staticmethod
    def _select_source_sink(config: WorldConfig, positions: np.ndarray,
                            exclude: set, rng: np.random.Generator) -> Tuple[int, int]:
        n = config.node_count
        candidates = [i for i in range(n) if i not in exclude]
        pairs = []
        for a_idx in range(len(candidates)):
            for b_idx in range(a_idx + 1, len(candidates)):
                a, b = candidates[a_idx], candidates[b_idx]
                if np.linalg.norm(positions[a] - positions[b]) >= config.source_sink_min_dist_m:
                    pairs.append((a, b))
        if not pairs:
            raise ValueError(
                f"no node pair satisfies source_sink_min_dist_m={config.source_sink_min_dist_m}")
        a, b = pairs[int(rng.integers(len(pairs)))]
        return a, b

    def _assign_subnets(self) -> None:
        ca_pos = self.positions[self.ca_ids]
        d = np.linalg.norm(self.positions[:, None, :] - ca_pos[None, :, :], axis=2)
        nearest = np.argmin(d, axis=1)
        self.subnet_of = np.asarray([self.ca_ids[k] for k in nearest], dtype=np.int64)

    def _check_ca_spacing(self) -> None:
        if len(self.ca_ids) < 2:
            return
        pos = self.positions[self.ca_ids]
        dists = [float(np.linalg.norm(pos[a] - pos[b]))
                 for a in range(len(pos)) for b in range(a + 1, len(pos))]
        achieved = min(dists)
        if achieved < self.config.min_ca_spacing_m:
            self.warnings.append(
                f"min_ca_spacing_m {self.config.min_ca_spacing_m:.0f} infeasible for "
                f"ca_count={self.config.ca_count}; clamped to achieved {achieved:.0f}")

    def _draw_static_attributes(self, rng: np.random.Generator) -> None:
        base = self.config.noise
        # per-node ambient variation: density log-uniform x3, speeds +-20%
        density_f = np.exp(rng.uniform(-math.log(3.0), math.log(3.0), self.n))
        speed_f = rng.uniform(0.8, 1.25, self.n)
        wind_f = rng.uniform(0.8, 1.25, self.n)
        turb_f = rng.uniform(0.8, 1.25, self.n)
        for i in range(self.n):
            params = base.scaled(vehicle_density=density_f[i],
                                 vehicle_speed=speed_f[i],
                                 wind_speed=wind_f[i],
                                 turbulence_speed=turb_f[i])
            self.spl_db[i] = noise_mod.ambient_spl(params)
        bw = rng.uniform(self.config.bandwidth_low, self.config.bandwidth_high,
                         size=(self.n, self.n))
        upper = np.triu(bw, k=1)
        self.bandwidth = upper + upper.T

    # ------------------------------------------------------------- mutation

    def _bump_positions(self) -> None:
        self._pos_version += 1
        self._dist_cache = None
        self._bounds_cache = None
        self._bfs_cache = None
        self._tbounds_cache = None

    def _bump_life(self) -> None:
        self._life_version += 1
        self._bounds_cache = None
        self._bfs_cache = None
        self._tbounds_cache = None

    def step_mobility(self, rng: np.random.Generator) -> None:
        """Isotropic Gaussian displacement of alive nodes, reflected walls."""
        step = rng.normal(0.0, self.config.mobility_sigma_m, size=(self.n, 3))
        step[~self.alive] = 0.0
        new_pos = _reflect(self.positions + step, self.config.cube_edge_m)
        self.velocity = new_pos - self.positions
        self.positions = new_pos
        self._bump_positions()

    def consume_energy(self, node_id: int, event: str) -> None:
        """Charge a transmit or receive event against a node's budget."""
        if not self.alive[node_id]:
            raise StateError(f"energy event on dead node {node_id}")
        if event == "tx":
            cost = self.config.tx_cost
            self.tx_count[node_id] += 1
        elif event == "rx":
            cost = self.config.rx_cost
            self.rx_count[node_id] += 1
        else:
            raise ValueError(f"unknown energy event {event!r}")
        self.energy[node_id] = max(0.0, self.energy[node_id] - cost)
        self._energy_version += 1
        self._bounds_cache = None
        if self.energy[node_id] <= 0.0:
            self.alive[node_id] = False
            self._bump_life()

    def corridor_distance(self) -> np.ndarray:
        """Per-node distance to the source-sink segment, in meters."""
        a = self.positions[self.source_id]
        b = self.positions[self.sink_id]
        ab = b - a
        denom = float(ab @ ab)
        if denom <= 0.0:
            return np.linalg.norm(self.positions - a, axis=1)
        t = np.clip((self.positions - a) @ ab / denom, 0.0, 1.0)
        nearest = a + t[:, None] * ab
        return np.linalg.norm(self.positions - nearest, axis=1)

    def inject_failure(self, rate: Optional[float] = None,
                       node_ids: Optional[List[int]] = None,
                       rng: Optional[np.random.Generator] = None) -> List[int]:
        """Mark nodes failed. Protected roles (CA, source, sink) never fail."""
        protected = set(self.ca_ids) | {self.source_id, self.sink_id}
        if node_ids is not None:
            bad = [i for i in node_ids if i in protected]
            if bad:
                raise ValueError(f"cannot fail protected nodes {bad}")
            chosen = [i for i in node_ids if self.alive[i]]
        else:
            if rate is None or rng is None:
                raise ValueError("need either node_ids or (rate, rng)")
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate must be in [0, 1], got {rate}")
            # per-node probability keeps mean rate but tilts toward the
            # source-sink corridor regardless of which routes carry traffic
            d_perp = self.corridor_distance()
            sigma = self.config.failure_corridor_sigma_m
            weights = 1.0 + self.config.failure_corridor_bias * np.exp(
                -0.5 * (d_perp / sigma) ** 2)
            eligible = np.array([self.alive[i] and i not in protected
                                 for i in range(self.n)])
            probs = np.zeros(self.n)
            if eligible.any():
                w = weights * eligible
                probs = np.minimum(rate * w * eligible.sum() / w.sum(), 1.0)
            draw = rng.random(self.n) < probs
            chosen = [i for i in range(self.n) if draw[i] and eligible[i]]
        for i in chosen:
            self.failed[i] = True
            self.alive[i] = False
        if chosen:
            self._bump_life()
        return chosen

    def revive_failed(self) -> None:
        """Clear injected failures (training episode reset)."""
        self.failed[:] = False
        self.alive = ~self.failed & (self.energy > 0.0)
        self._bump_life()

    def reset_for_episode(self, rng: Optional[np.random.Generator],
                          rejitter: bool = True, revive: bool = True,
                          reset_energy: bool = True) -> None:
        """Restore a fresh episode state for training rollouts."""
        if rejitter:
            if rng is None:
                raise ValueError("rejitter requires an rng")
            spacing = self.config.grid_spacing_m
            jitter = rng.uniform(-spacing / 4.0, spacing / 4.0, size=self.anchors.shape)
            self.positions = np.clip(self.anchors + jitter, 0.0, self.config.cube_edge_m)
            self.velocity[:] = 0.0
            self._bump_positions()
        if reset_energy:
            self.energy[:] = self.config.initial_energy
            self._energy_version += 1
            self._bounds_cache = None
        if revive:
            self.revive_failed()
            # fresh deployment: link history about nodes that no longer exist
            # in that failed state would be stale world knowledge
            self.success_ema[:] = 1.0
        else:
            self.alive = ~self.failed & (self.energy > 0.0)
            self._bump_life()

    def record_attempt(self, i: int, j: int, success: bool) -> None:
        """Update the directional delivery-history EMA for link i->j."""
        a = self.config.ema_coeff
        self.success_ema[i, j] = (1.0 - a) * self.success_ema[i, j] + a * (1.0 if success else 0.0)

    def clone(self) -> "World":
        other = World(self.config, self.positions.copy(), list(self.roles),
                      anchors=self.anchors.copy())
        other.velocity = self.velocity.copy()
        other.energy = self.energy.copy()
        other.failed = self.failed.copy()
        other.alive = self.alive.copy()
        other.spl_db = self.spl_db.copy()
        other.bandwidth = self.bandwidth.copy()
        other.success_ema = self.success_ema.copy()
        other.tx_count = self.tx_count.copy()
        other.rx_count = self.rx_count.copy()
        other.subnet_of = self.subnet_of.copy()
        other.tick = self.tick
        other.warnings = list(self.warnings)
        return other

    # --------------------------------------------------------------- access

    def node_state(self, node_id: int) -> NodeState:
        return NodeState(
            node_id=node_id,
            role=self.roles[node_id],
            position=self.positions[node_id].copy(),
            velocity=self.velocity[node_id].copy(),
            energy=float(self.energy[node_id]),
            alive=bool(self.alive[node_id]),
            spl_total_db=float(self.spl_db[node_id]),
            subnet_ca=int(self.subnet_of[node_id]),
        )

    @property
    def dist_matrix(self) -> np.ndarray:
        if self._dist_cache is None or self._dist_cache[0] != self._pos_version:
            diff = self.positions[:, None, :] - self.positions[None, :, :]
            self._dist_cache = (self._pos_version, np.linalg.norm(diff, axis=2))
        return self._dist_cache[1]

    def distance(self, i: int, j: int) -> float:
        return float(self.dist_matrix[i, j])

    def in_range_ids(self, node_id: int, include_dead: bool = True) -> np.ndarray:
        """Node ids within comm range of node_id, excluding itself."""
        row = self.dist_matrix[node_id]
        mask = (row <= self.config.comm_range_m)
        mask[node_id] = False
        if not include_dead:
            mask &= self.alive
        return np.flatnonzero(mask)

    def signal_db(self, i: int, j: int) -> float:
        """Received signal margin on i->j against ambient noise at j."""
        d = max(self.distance(i, j), 1e-6)
        return self.config.source_level_db - 20.0 * math.log10(d) - self.spl_db[j]

    def link_metrics(self, i: int, j: int) -> LinkMetrics:
        if i == j:
            raise ValueError("link requires two distinct nodes")
        d = self.distance(i, j)
        return LinkMetrics(
            distance_m=d,
            delay_s=d / self.config.sound_speed_mps,
            signal_db=self.signal_db(i, j),
            bandwidth=float(self.bandwidth[i, j]),
            success_history=float(self.success_ema[i, j]),
        )

    def link_delay(self, i: int, j: int) -> float:
        return self.distance(i, j) / self.config.sound_speed_mps

    # ------------------------------------------------------- derived fields

    def indicator_bounds(self) -> IndicatorBounds:
        key = (self._pos_version, self._life_version, self._energy_version)
        if self._bounds_cache is not None and self._bounds_cache[0] == key:
            return self._bounds_cache[1]
        d_max = math.sqrt(3.0) * self.config.cube_edge_m
        alive_idx = np.flatnonzero(self.alive)
        dist = self.dist_matrix
        s_vals: List[float] = []
        b_vals: List[float] = []
        if alive_idx.size >= 2:
            sub = dist[np.ix_(alive_idx, alive_idx)]
            ii, jj = np.nonzero((sub <= self.config.comm_range_m) & (sub > 0.0))
            if ii.size:
                gi, gj = alive_idx[ii], alive_idx[jj]
                d_safe = np.maximum(sub[ii, jj], 1e-6)
                s = (self.config.source_level_db - 20.0 * np.log10(d_safe)
                     - self.spl_db[gj])
                s_vals = [float(s.min()), float(s.max())]
                b = self.bandwidth[gi, gj]
                b_vals = [float(b.min()), float(b.max())]
        e_alive = self.energy[alive_idx] if alive_idx.size else np.array([0.0])
        bounds = IndicatorBounds(
            d_max=d_max,
            s_min=s_vals[0] if s_vals else 0.0,
            s_max=s_vals[1] if s_vals else 0.0,
            b_min=b_vals[0] if b_vals else 0.0,
            b_max=b_vals[1] if b_vals else 0.0,
            e_min=float(e_alive.min()),
            e_max=float(e_alive.max()),
        )
        self._bounds_cache = (key, bounds)
        return bounds

    def hops_to_sink(self) -> np.ndarray:
        """BFS hop distance to the sink over the alive in-range graph; -1 if cut off."""
        key = (self._pos_version, self._life_version)
        if self._bfs_cache is not None and self._bfs_cache[0] == key:
            return self._bfs_cache[1]
        hops = np.full(self.n, -1, dtype=np.int64)
        adj = (self.dist_matrix <= self.config.comm_range_m) & self.alive[None, :] & self.alive[:, None]
        np.fill_diagonal(adj, False)
        if self.alive[self.sink_id]:
            hops[self.sink_id] = 0
            frontier = np.zeros(self.n, dtype=bool)
            frontier[self.sink_id] = True
            depth = 0
            while frontier.any():
                depth += 1
                reachable = adj[frontier].any(axis=0) & (hops < 0)
                hops[reachable] = depth
                frontier = reachable
        self._bfs_cache = (key, hops)
        return hops

    def delay_bounds_to_sink(self) -> Tuple[float, float]:
        """Min and max straight-line propagation delay to the sink over alive nodes."""
        key = (self._pos_version, self._life_version)
        if self._tbounds_cache is not None and self._tbounds_cache[0] == key:
            return self._tbounds_cache[1]
        alive_idx = np.flatnonzero(self.alive)
        d = self.dist_matrix[alive_idx, self.sink_id] / self.config.sound_speed_mps
        bounds = (float(d.min()), float(d.max())) if d.size else (0.0, 0.0)
        self._tbounds_cache = (key, bounds)
        return bounds

    def delay_to_sink(self, i: int) -> float:
        return self.distance(i, self.sink_id) / self.config.sound_speed_mps

    # --------------------------------------------------------- serialization

    def to_scenario_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["noise"] = asdict(self.config.noise)
        nodes = []
        for i in range(self.n):
            nodes.append({
                "id": i,
                "role": self.roles[i],
                "position": [float(x) for x in self.positions[i]],
                "anchor": [float(x) for x in self.anchors[i]],
                "energy": float(self.energy[i]),
                "failed": bool(self.failed[i]),
                "spl_db": float(self.spl_db[i]),
                "subnet_ca": int(self.subnet_of[i]),
            })
        links = [{"i": i, "j": j, "bandwidth": float(self.bandwidth[i, j])}
                 for i in range(self.n) for j in range(i + 1, self.n)]
        ema = [[int(i), int(j), float(self.success_ema[i, j])]
               for i in range(self.n) for j in range(self.n)
               if i != j and self.success_ema[i, j] != 1.0]
        return {"config": cfg, "tick": self.tick, "nodes": nodes,
                "links": links, "success_ema": ema}

    def export_scenario(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_scenario_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_scenario_dict(cls, doc: dict) -> "World":
        cfg_d = dict(doc["config"])
        cfg_d["noise"] = NoiseSourceParams(**cfg_d["noise"])
        config = WorldConfig(**cfg_d)
        nodes = sorted(doc["nodes"], key=lambda r: r["id"])
        positions = np.array([r["position"] for r in nodes], dtype=np.float64)
        anchors = np.array([r["anchor"] for r in nodes], dtype=np.float64)
        roles = [r["role"] for r in nodes]
        world = cls(config, positions, roles, anchors=anchors)
        world.tick = int(doc.get("tick", 0))
        for r in nodes:
            i = r["id"]
            world.energy[i] = r["energy"]
            world.failed[i] = r["failed"]
            world.spl_db[i] = r["spl_db"]
            world.subnet_of[i] = r["subnet_ca"]
        world.alive = ~world.failed & (world.energy > 0.0)
        for row in doc["links"]:
            world.bandwidth[row["i"], row["j"]] = row["bandwidth"]
            world.bandwidth[row["j"], row["i"]] = row["bandwidth"]
        for i, j, v in doc.get("success_ema", []):
            world.success_ema[i, j] = v
        world._bump_positions()
        world._bump_life()
        return world

    @classmethod
    def import_scenario(cls, path: str) -> "World":
        with open(path) as fh:
            return cls.from_scenario_dict(json.load(fh))
