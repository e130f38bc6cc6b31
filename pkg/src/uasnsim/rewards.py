"""Scalar reward family for routing decisions.

Four components: forwarding outcome, ambient noise exposure, remaining hop
count and normalized residual propagation delay, combined by a weighted sum.
All weights are configurable and recorded in run metadata.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RewardWeights:
    # component weights for (forwarding, noise, hop, delay)
    theta: Sequence[float] = (0.4, 0.2, 0.2, 0.2)
    gamma_forward: float = 1.0
    # a dropped packet must cost more than finishing its remaining path,
    # or truncating the chain by dying becomes the cheap outcome
    gamma_loss: float = 6.0
    # sized so the weighted noise penalty outweighs the per-hop positives:
    # otherwise maximizing return means orbiting forever instead of delivering
    chi: float = 0.08
    varsigma: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    omega: float = 1.0
    snr_midpoint_db: float = 10.0
    snr_slope: float = 0.5

    def __post_init__(self):
        if len(self.theta) != 4:
            raise ValueError("theta must have 4 entries")
        if any(t < 0.0 for t in self.theta):
            raise ValueError("theta entries must be non-negative")
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        if self.chi < 0.0:
            raise ValueError("chi must be non-negative")


def snr_to_probability(snr_db: float, midpoint_db: float = 10.0,
                       slope: float = 0.5) -> float:
    """Logistic map from signal margin to delivery probability."""
    return 1.0 / (1.0 + math.exp(-slope * (snr_db - midpoint_db)))


def forwarding_reward(success: bool, p_forward: float, p_loss: float,
                      gamma_forward: float, gamma_loss: float) -> float:
    """+gamma_f * sqrt(p_forward) on success, -gamma_l * sqrt(p_loss) on loss."""
    if not 0.0 <= p_forward <= 1.0 or not 0.0 <= p_loss <= 1.0:
        raise ValueError("probabilities must lie in [0, 1]")
    if success:
        return gamma_forward * math.sqrt(p_forward)
    return -gamma_loss * math.sqrt(p_loss)


def noise_reward(spl_total_db: float, chi: float, varsigma: float) -> float:
    """-chi * SPL^varsigma with the SPL floored at zero dB."""
    spl = max(spl_total_db, 0.0)
    return -chi * spl ** varsigma


def hop_reward(h_hops: int, alpha: float, beta: float) -> float:
    """alpha / (beta + h); strictly decreasing in the remaining hop count."""
    if h_hops < 0:
        raise ValueError(f"hop count must be non-negative, got {h_hops}")
    return alpha / (beta + h_hops)


def delay_reward(t_delay: float, t_min: float, t_max: float, omega: float) -> float:
    """omega - (t - t_min)/(t_max - t_min); degenerate bounds give omega."""
    if t_max < t_min:
        raise ValueError("t_max must be >= t_min")
    if t_max == t_min:
        return omega
    t = min(max(t_delay, t_min), t_max)
    return omega - (t - t_min) / (t_max - t_min)


def total_reward(components: Sequence[float], weights: RewardWeights) -> float:
    """Weighted sum theta . (r_forward, r_noise, r_hop, r_delay)."""
    if len(components) != 4:
        raise ValueError("expected 4 reward components")
    return float(sum(t * c for t, c in zip(weights.theta, components)))
