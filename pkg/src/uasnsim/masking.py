"""Reachability indicators, attention-based action masking and CA views.

Five normalized indicators describe how viable a link is (geometry, signal
margin, bandwidth, energy, delivery history). A multi-head attention block
over candidate tokens produces per-candidate scores; thresholding yields a
binary action mask. The same attention parameters score node pairs for the
CA's network view, a symmetric boolean reachability matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .nn import MultiHeadAttention, init_matrix
from .world import World

# indicators (5) + link/candidate/holder context features fed to the tokens
TOKEN_FEATURE_DIM = 11


@dataclass(frozen=True)
class IndicatorVector:
    """Per-link reachability indicators, each in [0, 1], higher is better."""
    i_geo: float
    i_signal: float
    i_bandwidth: float
    i_energy: float
    i_success: float

    def as_array(self) -> np.ndarray:
        return np.array([self.i_geo, self.i_signal, self.i_bandwidth,
                         self.i_energy, self.i_success])

    def __post_init__(self):
        for name in ("i_geo", "i_signal", "i_bandwidth", "i_energy", "i_success"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} out of [0,1]: {v}")


@dataclass
class ActionMask:
    scores: np.ndarray       # softmax scores over candidates, sums to 1
    binary: np.ndarray       # int8 vector, 1 = action admitted
    threshold: float
    fallback_used: bool = False


@dataclass
class NetworkView:
    """A CA's snapshot of pairwise reachability inside its subnet."""
    ca_id: int
    node_ids: np.ndarray           # sorted subnet member ids
    reachability: np.ndarray       # boolean, symmetric, False diagonal
    version: int = 0
    updated_at: int = 0
    index_of: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index_of = {int(nid): k for k, nid in enumerate(self.node_ids)}

    def reachable_from(self, node_id: int) -> np.ndarray:
        """Subnet node ids currently marked reachable from node_id."""
        k = self.index_of[node_id]
        return self.node_ids[self.reachability[k]]

    def is_reachable(self, i: int, j: int) -> bool:
        return bool(self.reachability[self.index_of[i], self.index_of[j]])

    def dump_text(self) -> str:
        lines = [f"version {self.version}",
                 f"updated_at {self.updated_at}",
                 f"ca {self.ca_id}",
                 "nodes " + " ".join(str(int(i)) for i in self.node_ids)]
        for row in self.reachability.astype(int):
            lines.append("".join(str(v) for v in row))
        return "\n".join(lines) + "\n"


def _normalize(value, lo, hi):
    """(v - lo) / (hi - lo) clipped to [0,1]; degenerate bounds give 1.0."""
    span = hi - lo
    if np.isscalar(value):
        if span <= 0.0:
            return 1.0
        return float(np.clip((value - lo) / span, 0.0, 1.0))
    if span <= 0.0:
        return np.ones_like(np.asarray(value, dtype=np.float64))
    return np.clip((np.asarray(value, dtype=np.float64) - lo) / span, 0.0, 1.0)


def indicator_matrix(world: World, holder: int, candidates: np.ndarray) -> np.ndarray:
    """(K, 5) indicator rows for links holder -> candidates."""
    b = world.indicator_bounds()
    cands = np.asarray(candidates, dtype=np.int64)
    d = world.dist_matrix[holder, cands]
    i_geo = np.clip(1.0 - d / b.d_max, 0.0, 1.0)
    d_safe = np.maximum(d, 1e-6)
    s = world.config.source_level_db - 20.0 * np.log10(d_safe) - world.spl_db[cands]
    i_sig = _normalize(s, b.s_min, b.s_max)
    i_bw = _normalize(world.bandwidth[holder, cands], b.b_min, b.b_max)
    pair_energy = np.minimum(world.energy[holder], world.energy[cands])
    i_en = _normalize(pair_energy, b.e_min, b.e_max)
    i_succ = np.clip(world.success_ema[holder, cands], 0.0, 1.0)
    return np.column_stack([i_geo, i_sig, i_bw, i_en, i_succ])


def compute_indicators(world: World, i: int, j: int) -> IndicatorVector:
    if i == j:
        raise ValueError("indicators need two distinct nodes")
    row = indicator_matrix(world, i, np.array([j]))[0]
    return IndicatorVector(*[float(v) for v in row])


def token_features(world: World, holder: int, candidates: np.ndarray) -> np.ndarray:
    """(K, TOKEN_FEATURE_DIM) attention input: indicators + link context."""
    cands = np.asarray(candidates, dtype=np.int64)
    ind = indicator_matrix(world, holder, cands)
    b = world.indicator_bounds()
    k = len(cands)
    dist_frac = world.dist_matrix[holder, cands] / world.config.comm_range_m
    cand_sink = world.dist_matrix[cands, world.sink_id] / b.d_max
    holder_spl = np.full(k, world.spl_db[holder] / 100.0)
    holder_energy = np.full(k, world.energy[holder] / world.config.initial_energy)
    holder_sink = np.full(k, world.dist_matrix[holder, world.sink_id] / b.d_max)
    bias = np.ones(k)
    return np.column_stack([ind, dist_frac, cand_sink, holder_spl,
                            holder_energy, holder_sink, bias])


def action_prior(feature_dim: int = TOKEN_FEATURE_DIM) -> np.ndarray:
    """Fixed skip-connection weights for next-hop candidate scoring.

    The attention stack starts from a random projection, which by itself
    ranks candidates arbitrarily. This prior anchors the candidate ranking
    in sink progress: candidates closer to the sink dominate, with mild
    bonuses for short, clean, well-powered links. Delivery history is
    deliberately left out so liveness knowledge flows only through CA view
    refreshes, not through per-link memory.
    """
    prior = np.zeros(feature_dim)
    prior[0] = 0.5    # i_geo: mild short-link bonus
    prior[1] = 0.5    # i_signal
    prior[3] = 0.5    # i_energy
    prior[6] = -9.0   # candidate distance to sink: progress dominates
    return prior


def pair_prior(feature_dim: int = TOKEN_FEATURE_DIM) -> np.ndarray:
    """Fixed skip-connection weights for pairwise link viability.

    The view asks a different question than the action mask: not which hop
    a packet should prefer, but whether a link is usable at all. Viability
    rests on link geometry, signal margin and energy headroom; the sink
    term would wrongly mark far-from-sink links unusable, so it is absent.
    """
    prior = np.zeros(feature_dim)
    prior[0] = 9.0    # i_geo: in-range links clear the gate comfortably
    prior[1] = 0.5    # i_signal
    prior[3] = 0.5    # i_energy
    prior[5] = -0.5   # hop length fraction
    return prior


class MaskModel:
    """Attention scorer shared by the per-action mask and pairwise view checks."""

    def __init__(self, rng: np.random.Generator, feature_dim: int = TOKEN_FEATURE_DIM,
                 head_count: int = 4, d_k: int = 16,
                 tau_action: Optional[float] = None, tau_pair: float = 0.25):
        self.attention = MultiHeadAttention(feature_dim, head_count, d_k, rng)
        # small head scale keeps the seeded attention contribution from
        # drowning the structural priors' candidate ranking
        self.head = 0.25 * init_matrix(rng, head_count * d_k, 1)[:, 0]
        self.prior_action = action_prior(feature_dim)
        self.prior_pair = pair_prior(feature_dim)
        self.tau_action = tau_action      # None -> 0.5 / candidate_count rule
        self.tau_pair = tau_pair

    @property
    def params(self) -> dict:
        return {"w_q": self.attention.params["w_q"],
                "w_k": self.attention.params["w_k"],
                "w_v": self.attention.params["w_v"],
                "head": self.head}

    def load_params(self, params: dict) -> None:
        for key in ("w_q", "w_k", "w_v"):
            self.attention.params[key] = params[key].copy()
        self.head = params["head"].copy()

    def raw_scores(self, tokens: np.ndarray, pair: bool = False) -> np.ndarray:
        """Scalar head over attention outputs plus a fixed structural prior.

        tokens (T,F) or (B,T,F). The attention parameters are shared between
        both uses; only the constant prior differs (hop preference vs link
        viability).
        """
        out = self.attention.forward(tokens)
        prior = self.prior_pair if pair else self.prior_action
        return out @ self.head + tokens @ prior

    def action_threshold(self, candidate_count: int) -> float:
        if self.tau_action is not None:
            return self.tau_action
        return 0.5 / candidate_count


def attention_scores(tokens: np.ndarray, model: MaskModel) -> np.ndarray:
    """Softmax score vector over candidate tokens; sums to one."""
    tokens = np.asarray(tokens, dtype=np.float64)
    if tokens.ndim != 2 or tokens.shape[0] < 1:
        raise ValueError("tokens must be a non-empty (K, F) matrix")
    raw = model.raw_scores(tokens)
    shifted = raw - raw.max()
    e = np.exp(shifted)
    return e / e.sum()


def apply_mask(scores: np.ndarray, tau: float) -> ActionMask:
    """Binary mask: admitted iff score >= tau; all-below falls back to argmax."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty score vector")
    binary = (scores >= tau).astype(np.int8)
    fallback = False
    if binary.sum() == 0:
        binary[int(np.argmax(scores))] = 1
        fallback = True
    return ActionMask(scores=scores, binary=binary, threshold=tau,
                      fallback_used=fallback)


def pair_scores(world: World, pairs_i: np.ndarray, pairs_j: np.ndarray,
                model: MaskModel) -> np.ndarray:
    """Sigmoid-squashed attention score for each directed pair (i, j)."""
    feats = np.stack([token_features(world, int(i), np.array([int(j)]))[0]
                      for i, j in zip(pairs_i, pairs_j)])
    raw = model.raw_scores(feats[:, None, :], pair=True)[:, 0]
    return 1.0 / (1.0 + np.exp(-raw))


def _pair_score_matrix(world: World, ids: np.ndarray, model: MaskModel) -> np.ndarray:
    """All-pairs sigmoid scores inside a subnet, vectorized token build."""
    n = len(ids)
    b = world.indicator_bounds()
    sub_d = world.dist_matrix[np.ix_(ids, ids)]
    i_geo = np.clip(1.0 - sub_d / b.d_max, 0.0, 1.0)
    d_safe = np.maximum(sub_d, 1e-6)
    s = world.config.source_level_db - 20.0 * np.log10(d_safe) - world.spl_db[ids][None, :]
    i_sig = _normalize(s, b.s_min, b.s_max)
    i_bw = _normalize(world.bandwidth[np.ix_(ids, ids)], b.b_min, b.b_max)
    energy = world.energy[ids]
    i_en = _normalize(np.minimum(energy[:, None], energy[None, :]), b.e_min, b.e_max)
    i_succ = np.clip(world.success_ema[np.ix_(ids, ids)], 0.0, 1.0)
    dist_frac = sub_d / world.config.comm_range_m
    sink_dist = world.dist_matrix[ids, world.sink_id] / b.d_max
    cand_sink = np.broadcast_to(sink_dist[None, :], (n, n))
    holder_spl = np.broadcast_to((world.spl_db[ids] / 100.0)[:, None], (n, n))
    holder_en = np.broadcast_to((energy / world.config.initial_energy)[:, None], (n, n))
    holder_sink = np.broadcast_to(sink_dist[:, None], (n, n))
    feats = np.stack([i_geo, i_sig, i_bw, i_en, i_succ, dist_frac, cand_sink,
                      holder_spl, holder_en, holder_sink, np.ones((n, n))], axis=-1)
    raw = model.raw_scores(feats.reshape(n * n, 1, TOKEN_FEATURE_DIM), pair=True)[:, 0]
    return 1.0 / (1.0 + np.exp(-raw.reshape(n, n)))


def assess_reachability(world: World, i: int, j: int, model: MaskModel,
                        tau: Optional[float] = None) -> bool:
    """Pairwise gate: learned score clears tau AND in range AND both alive."""
    if i == j:
        return False
    tau = model.tau_pair if tau is None else tau
    if not (world.alive[i] and world.alive[j]):
        return False
    if world.distance(i, j) > world.config.comm_range_m:
        return False
    score = float(pair_scores(world, np.array([i]), np.array([j]), model)[0])
    return score >= tau


def subnet_members(world: World, ca_id: int) -> np.ndarray:
    return np.flatnonzero(world.subnet_of == ca_id)


def update_network_view(world: World, ca_id: int, model: MaskModel,
                        tau: Optional[float] = None) -> NetworkView:
    """Recompute a CA's reachability matrix; symmetric AND, False diagonal."""
    if ca_id not in world.ca_ids:
        raise ValueError(f"node {ca_id} is not a CA")
    tau = model.tau_pair if tau is None else tau
    ids = subnet_members(world, ca_id)
    scores = _pair_score_matrix(world, ids, model)
    sub_d = world.dist_matrix[np.ix_(ids, ids)]
    alive = world.alive[ids]
    reach = ((scores >= tau)
             & (sub_d <= world.config.comm_range_m)
             & alive[None, :] & alive[:, None])
    reach &= reach.T  # symmetric AND of both directions
    np.fill_diagonal(reach, False)
    old = world.views.get(ca_id)
    view = NetworkView(ca_id=ca_id, node_ids=ids, reachability=reach,
                       version=(old.version + 1 if old is not None else 1),
                       updated_at=world.tick)
    world.views[ca_id] = view
    return view


def refresh_all_views(world: World, model: MaskModel) -> None:
    for ca in world.ca_ids:
        update_network_view(world, ca, model)
