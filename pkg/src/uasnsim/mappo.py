"""Multi-agent PPO with attention-based action masking.

One shared actor scores candidate next hops (parameter sharing across all
forwarding nodes); one centralized critic values the global state during
training. Three modes share the machinery:

  mappo       no mask, candidates are whatever is physically in range
  ma_mappo    attention mask over view-reachable candidates
  ma_mappo_i  ma_mappo plus interrupted-routing recovery (engine-side)

Advantages come from generalized advantage estimation over each packet's
hop chain; the critic regresses on one-step bootstrapped targets from a
Polyak-averaged target network.
"""
from __future__ import annotations

import copy
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .masking import ActionMask, MaskModel, attention_scores, apply_mask, token_features
from .nn import MLP, Adam, polyak_update
from .rewards import RewardWeights
from .world import World

ACTION_FEATURE_DIM = 12

MODES = ("mappo", "ma_mappo", "ma_mappo_i")


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 500
    lr: float = 3e-3
    # late-training step sizes anneal linearly to lr * lr_min_factor, so
    # converged policies stop random-walking between equally good optima
    lr_min_factor: float = 0.1
    gamma: float = 0.95
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    polyak: float = 1e-2
    hidden: int = 64
    epochs: int = 4
    minibatch: int = 32
    packets_per_iteration: int = 10
    episode_tick_cap: int = 60
    hop_cap: int = 20
    view_interval: int = 3
    train_failure_rate: float = 0.10
    failure_tick_low: int = 1
    failure_tick_high: int = 6
    fine_tune_iterations: int = 30
    # adaptation bursts run at a damped, fixed step size: large enough to
    # specialize on the observed damage, small enough not to blur the
    # converged policy
    fine_tune_lr_factor: float = 0.5

    def __post_init__(self):
        if self.iterations < 0 or self.hidden < 1:
            raise ValueError("iterations must be >= 0 and hidden >= 1")
        if not 0.0 < self.lr_min_factor <= 1.0:
            raise ValueError("lr_min_factor must lie in (0, 1]")
        if self.fine_tune_lr_factor <= 0.0:
            raise ValueError("fine_tune_lr_factor must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.clip_epsilon <= 0.0:
            raise ValueError("clip_epsilon must be positive")
        if not 0.0 < self.polyak <= 1.0:
            raise ValueError("polyak must lie in (0, 1]")
        if not 0.0 <= self.train_failure_rate <= 1.0:
            raise ValueError("train_failure_rate must lie in [0, 1]")
        if self.hop_cap < 1 or self.view_interval < 1:
            raise ValueError("hop_cap and view_interval must be >= 1")


@dataclass
class Transition:
    state: np.ndarray                 # critic features at decision time
    cand_features: np.ndarray         # (K, ACTION_FEATURE_DIM)
    mask_binary: np.ndarray           # (K,) int8
    action: int
    log_prob: float
    value: float
    reward: float
    done: bool
    next_value: float                 # bootstrap value of the next state
    state_next: Optional[np.ndarray]  # critic features after the hop, None if terminal
    packet_id: int
    agent_id: int
    masked_fraction: float


@dataclass
class Decision:
    index: int
    log_prob: float
    probs: np.ndarray
    mask: ActionMask
    cand_features: np.ndarray
    state_features: np.ndarray
    value: float
    masked_fraction: float


def masked_policy(logits: np.ndarray, mask_binary: np.ndarray) -> np.ndarray:
    """Renormalized policy pi'(a) = pi(a) * m(a) / sum(pi * m).

    Masked actions get exactly zero probability. Raises if everything is
    masked (callers must apply the fallback before sampling).
    """
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask_binary)
    if logits.shape != mask.shape:
        raise ValueError("logits and mask shapes differ")
    if mask.sum() == 0:
        raise ValueError("all actions masked; no distribution exists")
    shifted = logits - logits.max()
    pi = np.exp(shifted)
    pi = pi / pi.sum()
    weighted = pi * mask
    return weighted / weighted.sum()


def gae_advantages(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                   gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over one trajectory.

    values has length T+1 (the trailing entry is the bootstrap value of the
    state after the last transition; ignored when the last step is done).
    Returns raw (unnormalized) advantages and returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    t_len = len(rewards)
    if len(values) != t_len + 1 or len(dones) != t_len:
        raise ValueError("values must have length T+1 and dones length T")
    adv = np.zeros(t_len)
    last = 0.0
    for t in range(t_len - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
    return adv, adv + values[:-1]


def action_features(world: World, holder: int, candidates: np.ndarray) -> np.ndarray:
    """(K, ACTION_FEATURE_DIM) actor input rows for candidate next hops."""
    from .masking import indicator_matrix
    cands = np.asarray(candidates, dtype=np.int64)
    ind = indicator_matrix(world, holder, cands)
    b = world.indicator_bounds()
    sink = world.sink_id
    d_cs = world.dist_matrix[cands, sink] / b.d_max
    d_hs = np.full(len(cands), world.dist_matrix[holder, sink] / b.d_max)
    d_hc = world.dist_matrix[holder, cands] / world.config.comm_range_m
    spl_c = world.spl_db[cands] / 100.0
    progress = (world.dist_matrix[holder, sink] - world.dist_matrix[cands, sink]) \
        / world.config.comm_range_m
    energy_c = world.energy[cands] / world.config.initial_energy
    bias = np.ones(len(cands))
    return np.column_stack([ind, d_cs, d_hs, d_hc, spl_c, progress, energy_c, bias])


def critic_features(world: World, holder: int, trace_len: int,
                    hop_cap: int) -> np.ndarray:
    """Centralized state: holder context plus per-node liveness block."""
    b = world.indicator_bounds()
    edge = world.config.cube_edge_m
    head = np.array([
        world.positions[holder, 0] / edge,
        world.positions[holder, 1] / edge,
        world.positions[holder, 2] / edge,
        world.dist_matrix[holder, world.sink_id] / b.d_max,
        world.spl_db[holder] / 100.0,
        world.energy[holder] / world.config.initial_energy,
        trace_len / hop_cap,
        1.0,
    ])
    block = np.column_stack([
        world.alive.astype(np.float64),
        world.energy / world.config.initial_energy,
        world.spl_db / 100.0,
    ]).ravel()
    return np.concatenate([head, block])


def critic_dim(node_count: int) -> int:
    return 8 + 3 * node_count


class PolicyBundle:
    """Shared actor + centralized critic + optional mask model for one mode."""

    def __init__(self, mode: str, node_count: int, cfg: TrainConfig,
                 rng: np.random.Generator):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
        self.mode = mode
        self.cfg = cfg
        self.actor = MLP([ACTION_FEATURE_DIM, cfg.hidden, 1], rng)
        self.critic = MLP([critic_dim(node_count), cfg.hidden, 1], rng)
        self.critic_target = copy.deepcopy(self.critic.params)
        self.mask_model: Optional[MaskModel] = None
        if mode != "mappo":
            self.mask_model = MaskModel(rng)
        self.opt_actor = Adam(self.actor.params, lr=cfg.lr)
        self.opt_critic = Adam(self.critic.params, lr=cfg.lr)

    # ------------------------------------------------------------ inference

    def state_value(self, world: World, holder: int, trace_len: int) -> Tuple[float, np.ndarray]:
        feats = critic_features(world, holder, trace_len, self.cfg.hop_cap)
        value = float(self.critic.forward(feats)[0])
        return value, feats

    def decide(self, world: World, holder: int, candidates: np.ndarray,
               trace_len: int, rng: np.random.Generator,
               greedy: bool = False) -> Decision:
        cands = np.asarray(candidates, dtype=np.int64)
        feats = action_features(world, holder, cands)
        k = len(cands)
        if self.mask_model is not None:
            tokens = token_features(world, holder, cands)
            scores = attention_scores(tokens, self.mask_model)
            mask = apply_mask(scores, self.mask_model.action_threshold(k))
        else:
            mask = ActionMask(scores=np.full(k, 1.0 / k),
                              binary=np.ones(k, dtype=np.int8), threshold=0.0)
        logits = np.atleast_2d(self.actor.forward(feats))[:, 0]
        probs = masked_policy(logits, mask.binary)
        index = int(np.argmax(probs)) if greedy else int(rng.choice(k, p=probs))
        value, state_feats = self.state_value(world, holder, trace_len)
        return Decision(
            index=index,
            log_prob=float(np.log(probs[index])),
            probs=probs,
            mask=mask,
            cand_features=feats,
            state_features=state_feats,
            value=value,
            masked_fraction=1.0 - float(mask.binary.sum()) / k,
        )

    # -------------------------------------------------------- serialization

    def checkpoint_params(self) -> Dict[str, np.ndarray]:
        out: Dict[str, np.ndarray] = {}
        for k, v in self.actor.params.items():
            out[f"actor/{k}"] = v
        for k, v in self.critic.params.items():
            out[f"critic/{k}"] = v
        for k, v in self.critic_target.items():
            out[f"critic_target/{k}"] = v
        if self.mask_model is not None:
            for k, v in self.mask_model.params.items():
                out[f"mask/{k}"] = v
        return out

    def load_checkpoint_params(self, params: Dict[str, np.ndarray]) -> None:
        for key, value in params.items():
            scope, name = key.split("/", 1)
            if scope == "actor":
                self.actor.params[name] = value.copy()
            elif scope == "critic":
                self.critic.params[name] = value.copy()
            elif scope == "critic_target":
                self.critic_target[name] = value.copy()
            elif scope == "mask":
                if self.mask_model is None:
                    raise ValueError("checkpoint has mask params but mode is mappo")
                if name == "head":
                    self.mask_model.head = value.copy()
                else:
                    self.mask_model.attention.params[name] = value.copy()
            else:
                raise ValueError(f"unknown checkpoint scope {scope!r}")


# ------------------------------------------------------------------ updates


def policy_loss_and_grads(actor: MLP, batch: List[Transition],
                          advantages: np.ndarray, clip_epsilon: float
                          ) -> Tuple[float, Dict[str, np.ndarray], np.ndarray]:
    """PPO-clip surrogate loss and analytic gradients for the actor.

    Gradients flow only through admitted (unmasked) candidate logits; the
    renormalized policy gives masked candidates exactly zero probability and
    zero gradient. Returns (loss, grads, ratios).
    """
    rows = np.vstack([t.cand_features for t in batch])
    offsets = np.cumsum([0] + [len(t.cand_features) for t in batch])
    logits_all, cache = actor.forward_cache(rows)
    logits_all = np.atleast_2d(logits_all)[:, 0]

    n = len(batch)
    new_logp = np.zeros(n)
    probs_seg: List[np.ndarray] = []
    for s, t in enumerate(batch):
        seg = logits_all[offsets[s]:offsets[s + 1]]
        p = masked_policy(seg, t.mask_binary)
        probs_seg.append(p)
        new_logp[s] = np.log(p[t.action])

    old_logp = np.array([t.log_prob for t in batch])
    ratios = np.exp(new_logp - old_logp)
    unclipped = ratios * advantages
    clipped = np.clip(ratios, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * advantages
    objective = np.minimum(unclipped, clipped)
    loss = -float(objective.mean())

    # d loss / d new_logp: active only where the unclipped branch is the min
    active = (unclipped <= clipped).astype(np.float64)
    dlogp = -(ratios * advantages * active) / n

    dlogits = np.zeros_like(logits_all)
    for s, t in enumerate(batch):
        p = probs_seg[s]
        grad_seg = -p * dlogp[s]
        grad_seg[t.action] += dlogp[s]
        # zero for masked candidates: p already zero there, but the one-hot
        # term must not leak onto a masked action (actions are admitted ones)
        grad_seg = grad_seg * (t.mask_binary > 0)
        dlogits[offsets[s]:offsets[s + 1]] = grad_seg

    grads, _ = actor.backward(cache, dlogits[:, None])
    return loss, grads, ratios


def critic_loss_and_grads(critic: MLP, states: np.ndarray, targets: np.ndarray
                          ) -> Tuple[float, Dict[str, np.ndarray]]:
    """Mean squared error against fixed targets, with gradients."""
    pred, cache = critic.forward_cache(states)
    pred = np.atleast_2d(pred)[:, 0]
    err = pred - targets
    loss = float(np.mean(err ** 2))
    dpred = (2.0 * err / len(targets))[:, None]
    grads, _ = critic.backward(cache, dpred)
    return loss, grads


def critic_targets(policy: PolicyBundle, batch: List[Transition],
                   gamma: float) -> np.ndarray:
    """One-step bootstrap r + gamma * V_target(s'); terminal states use r."""
    targets = np.array([t.reward for t in batch], dtype=np.float64)
    open_idx = [i for i, t in enumerate(batch)
                if not t.done and t.state_next is not None]
    if open_idx:
        nxt = np.vstack([batch[i].state_next for i in open_idx])
        v_next = MLP.forward_with(policy.critic_target,
                                  policy.critic.n_layers, nxt)[:, 0]
        for pos, i in enumerate(open_idx):
            targets[i] += gamma * v_next[pos]
    return targets


def ppo_policy_update(policy: PolicyBundle, batch: List[Transition],
                      advantages: np.ndarray, cfg: TrainConfig,
                      rng: np.random.Generator) -> Dict[str, float]:
    """Minibatched PPO-clip epochs over one iteration's transitions."""
    n = len(batch)
    if n == 0:
        return {"actor_loss": 0.0, "ratio_dev_pre_update": 0.0}
    # pre-update audit: freshly collected transitions must have ratio == 1
    _, _, ratios0 = policy_loss_and_grads(policy.actor, batch, advantages,
                                          cfg.clip_epsilon)
    ratio_dev = float(np.max(np.abs(ratios0 - 1.0)))
    last_loss = 0.0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.minibatch):
            take = order[start:start + cfg.minibatch]
            mb = [batch[i] for i in take]
            loss, grads, _ = policy_loss_and_grads(
                policy.actor, mb, advantages[take], cfg.clip_epsilon)
            policy.opt_actor.step(policy.actor.params, grads)
            losses.append(loss)
        last_loss = float(np.mean(losses))
    return {"actor_loss": last_loss, "ratio_dev_pre_update": ratio_dev}


def critic_update(policy: PolicyBundle, batch: List[Transition],
                  cfg: TrainConfig, rng: np.random.Generator) -> float:
    """Regress the critic on bootstrapped targets, then move the target net."""
    if not batch:
        return 0.0
    states = np.vstack([t.state for t in batch])
    targets = critic_targets(policy, batch, cfg.gamma)
    n = len(batch)
    last_loss = 0.0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.minibatch):
            take = order[start:start + cfg.minibatch]
            loss, grads = critic_loss_and_grads(policy.critic, states[take],
                                                targets[take])
            policy.opt_critic.step(policy.critic.params, grads)
            losses.append(loss)
        last_loss = float(np.mean(losses))
    polyak_update(policy.critic_target, policy.critic.params, cfg.polyak)
    return last_loss


def assemble_advantages(batch: List[Transition], cfg: TrainConfig) -> np.ndarray:
    """Per-packet GAE chains, then batch-normalized advantages."""
    adv = np.zeros(len(batch))
    by_packet: Dict[int, List[int]] = {}
    for idx, t in enumerate(batch):
        by_packet.setdefault(t.packet_id, []).append(idx)
    for indices in by_packet.values():
        chain = [batch[i] for i in indices]
        rewards = np.array([t.reward for t in chain])
        values = np.array([t.value for t in chain] + [chain[-1].next_value])
        dones = np.array([t.done for t in chain])
        a, _ = gae_advantages(rewards, values, dones, cfg.gamma, cfg.gae_lambda)
        adv[indices] = a
    std = adv.std()
    if len(batch) > 1 and std > 0.0:
        adv = (adv - adv.mean()) / (std + 1e-8)
    return adv


# ----------------------------------------------------------------- training


class TransitionCollector:
    """Accumulates transitions and per-packet reward sums during rollouts."""

    def __init__(self) -> None:
        self.transitions: List[Transition] = []
        self.packet_rewards: Dict[int, float] = {}
        self.mask_violations = 0
        self.masked_fractions: List[float] = []
        self.policy_sum_dev = 0.0

    def note_policy_sum(self, total: float) -> None:
        """Track the worst |sum(pi') - 1| seen across sampled distributions."""
        dev = abs(total - 1.0)
        if dev > self.policy_sum_dev:
            self.policy_sum_dev = dev

    def record(self, transition: Transition) -> None:
        if transition.mask_binary[transition.action] == 0:
            self.mask_violations += 1
        self.transitions.append(transition)
        self.packet_rewards[transition.packet_id] = (
            self.packet_rewards.get(transition.packet_id, 0.0) + transition.reward)
        self.masked_fractions.append(transition.masked_fraction)

    def close_packet_chain(self, packet_id: int) -> None:
        """Mark the last stored transition of a packet terminal (truncation)."""
        for t in reversed(self.transitions):
            if t.packet_id == packet_id:
                t.done = True
                break


def make_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent named RNG streams for one (algorithm, seed) run."""
    root = np.random.SeedSequence(seed)
    names = ["episode", "failures", "sampling", "shuffle", "policy_init",
             "finetune", "world_extra"]
    children = root.spawn(len(names))
    return {name: np.random.default_rng(child)
            for name, child in zip(names, children)}


def train_iteration(world: World, policy: PolicyBundle, cfg: TrainConfig,
                    weights: RewardWeights,
                    streams: Dict[str, np.random.Generator],
                    failure_rate: Optional[float] = None,
                    reset_world: bool = True,
                    inject_origins: Optional[Sequence[int]] = None) -> Dict[str, float]:
    """One rollout-and-update cycle; returns a metrics row (without timing)."""
    from . import routing

    rate = cfg.train_failure_rate if failure_rate is None else failure_rate
    if reset_world:
        world.reset_for_episode(streams["episode"], rejitter=True, revive=True,
                                reset_energy=True)
    if policy.mask_model is not None:
        from .masking import refresh_all_views
        refresh_all_views(world, policy.mask_model)

    failure_tick = int(streams["failures"].integers(cfg.failure_tick_low,
                                                    cfg.failure_tick_high + 1))
    collector = TransitionCollector()
    routing.run_rollout(
        world, policy, cfg, weights,
        n_packets=cfg.packets_per_iteration,
        packets_per_tick=1,
        tick_cap=cfg.episode_tick_cap,
        failure_schedule={failure_tick: rate},
        streams=streams,
        collector=collector,
        inject_origins=inject_origins,
    )

    batch = collector.transitions
    mean_reward = (float(np.mean(list(collector.packet_rewards.values())))
                   if collector.packet_rewards else 0.0)
    if not batch:
        return {"mean_reward": mean_reward, "actor_loss": 0.0,
                "critic_loss": 0.0, "masked_fraction": 0.0,
                "ratio_dev_pre_update": 0.0, "mask_violations": 0.0,
                "policy_sum_dev": 0.0}

    advantages = assemble_advantages(batch, cfg)
    actor_stats = ppo_policy_update(policy, batch, advantages, cfg,
                                    streams["shuffle"])
    critic_loss = critic_update(policy, batch, cfg, streams["shuffle"])
    return {
        "mean_reward": mean_reward,
        "actor_loss": actor_stats["actor_loss"],
        "critic_loss": critic_loss,
        "masked_fraction": float(np.mean(collector.masked_fractions)),
        "ratio_dev_pre_update": actor_stats["ratio_dev_pre_update"],
        "mask_violations": float(collector.mask_violations),
        "policy_sum_dev": collector.policy_sum_dev,
    }


def annealed_lr(cfg: TrainConfig, iteration: int, total: int) -> float:
    """Linear decay from cfg.lr down to cfg.lr * lr_min_factor."""
    if total <= 1:
        return cfg.lr
    frac = iteration / (total - 1)
    return cfg.lr * (1.0 - (1.0 - cfg.lr_min_factor) * frac)


def train(world: World, policy: PolicyBundle, cfg: TrainConfig,
          weights: RewardWeights, streams: Dict[str, np.random.Generator],
          iterations: Optional[int] = None) -> List[Dict[str, float]]:
    """Full training run; one metrics row per iteration (wall_ms included)."""
    rows: List[Dict[str, float]] = []
    n_iter = cfg.iterations if iterations is None else iterations
    for it in range(n_iter):
        t0 = time.perf_counter()
        lr_t = annealed_lr(cfg, it, n_iter)
        policy.opt_actor.lr = lr_t
        policy.opt_critic.lr = lr_t
        row = train_iteration(world, policy, cfg, weights, streams)
        row["iteration"] = it
        row["wall_ms"] = (time.perf_counter() - t0) * 1000.0
        rows.append(row)
    return rows


def fine_tune(world: World, policy: PolicyBundle, cfg: TrainConfig,
              weights: RewardWeights, rng_seed_seq: np.random.SeedSequence,
              iterations: int,
              origins: Optional[Sequence[int]] = None) -> None:
    """Short adaptation burst on a frozen copy of the live world.

    Used by the CA on interrupt requests: trains against the current
    topology (failures kept, no re-jitter) without touching task state.
    When the requesters' node ids are known they seed the rollout origins,
    so the update concentrates on the exact states the stalled packets
    will route from.
    """
    if iterations <= 0:
        return
    children = rng_seed_seq.spawn(4)
    streams = {
        "episode": np.random.default_rng(children[0]),
        "failures": np.random.default_rng(children[1]),
        "sampling": np.random.default_rng(children[2]),
        "shuffle": np.random.default_rng(children[3]),
    }
    scratch = world.clone()
    scratch.views = {ca: v for ca, v in world.views.items()}
    live_origins: Optional[List[int]] = None
    if origins:
        live_origins = [int(o) for o in origins if scratch.alive[int(o)]]
        # most of the remaining traffic is still source-rooted, so the
        # adaptation must cover the main flow as well as the stalled states
        live_origins.append(scratch.source_id)
    policy.opt_actor.lr = cfg.lr * cfg.fine_tune_lr_factor
    policy.opt_critic.lr = cfg.lr * cfg.fine_tune_lr_factor
    for _ in range(iterations):
        scratch_run = scratch.clone()
        # keep depleted batteries depleted: adaptation must see the world
        # exactly as the interrupted packets do
        scratch_run.reset_for_episode(None, rejitter=False, revive=False,
                                      reset_energy=False)
        train_iteration(scratch_run, policy, cfg, weights, streams,
                        failure_rate=0.0, reset_world=False,
                        inject_origins=live_origins)
