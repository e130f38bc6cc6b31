"""Deterministic simulator of software-defined underwater acoustic sensor
networks with an embedded multi-agent RL routing engine.

Three routing policies share one training stack: plain shared-actor PPO
(``mappo``), the same policy behind an attention-derived action mask
(``ma_mappo``), and the masked policy with interrupted-routing recovery
(``ma_mappo_i``).
"""

__version__ = "0.1.0"

from .mappo import MODES, PolicyBundle, TrainConfig, make_streams, train
from .masking import MaskModel, NetworkView, refresh_all_views
from .rewards import RewardWeights
from .routing import Packet, TaskMetrics, run_routing_task
from .world import World, WorldConfig

__all__ = [
    "MODES",
    "MaskModel",
    "NetworkView",
    "Packet",
    "PolicyBundle",
    "RewardWeights",
    "TaskMetrics",
    "TrainConfig",
    "World",
    "WorldConfig",
    "__version__",
    "make_streams",
    "refresh_all_views",
    "run_routing_task",
    "train",
]
