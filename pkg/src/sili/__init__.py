"""Multi-agent interaction lab: latent opponent strategies, stability-shaped
rewards, HiP-MDP environments, and an experiment harness."""

from .core import (
    InteractionTrajectory,
    LatentStrategy,
    ReplayBuffer,
    Transition,
    pairwise_stable,
    sample_consecutive_pairs,
)
from .stability import StabilityConfig, beta_at, stability_reward, total_reward

__all__ = [
    "InteractionTrajectory",
    "LatentStrategy",
    "ReplayBuffer",
    "Transition",
    "pairwise_stable",
    "sample_consecutive_pairs",
    "StabilityConfig",
    "beta_at",
    "stability_reward",
    "total_reward",
]

__version__ = "0.1.0"
