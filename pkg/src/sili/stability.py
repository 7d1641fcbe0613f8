"""Stability rewards for the three latent settings and the beta blend."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CHANGE_FLAG, CONTINUOUS, DISCRETE, LatentStrategy
from .errors import InvalidArgumentError

EUCLIDEAN = "euclidean"
DISCRETE_METRIC = "discrete"
PARTIAL = "partial"

_METRIC_VARIANT = {EUCLIDEAN: CONTINUOUS, DISCRETE_METRIC: DISCRETE, PARTIAL: CHANGE_FLAG}


@dataclass(frozen=True)
class AnnealSchedule:
    start_beta: float
    end_beta: float
    interactions: int

    def __post_init__(self):
        for b in (self.start_beta, self.end_beta):
            if not 0.0 <= b <= 1.0:
                raise InvalidArgumentError(f"anneal beta endpoint {b} outside [0, 1]")
        if self.interactions < 1:
            raise InvalidArgumentError("anneal window must span >= 1 interaction")


@dataclass(frozen=True)
class StabilityConfig:
    beta: float
    metric: str = DISCRETE_METRIC
    anneal: Optional[AnnealSchedule] = None

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidArgumentError(f"beta {self.beta} outside [0, 1]")
        if self.metric not in _METRIC_VARIANT:
            raise InvalidArgumentError(f"unknown stability metric {self.metric!r}")


def stability_reward(z: LatentStrategy, z_prev: LatentStrategy, cfg: StabilityConfig) -> float:
    """Negative distance between consecutive latents; always <= 0."""
    want = _METRIC_VARIANT[cfg.metric]
    if z.variant != want or z_prev.variant != want:
        raise InvalidArgumentError(
            f"metric {cfg.metric!r} expects {want} latents, got {z.variant}/{z_prev.variant}"
        )
    if cfg.metric == EUCLIDEAN:
        if z.vector.shape != z_prev.vector.shape:
            raise InvalidArgumentError("latent dimensions differ")
        return -float(np.linalg.norm(z.vector - z_prev.vector))
    if cfg.metric == DISCRETE_METRIC:
        return 0.0 if np.array_equal(z.vector, z_prev.vector) else -1.0
    # partial observation: penalize the change flag of the current step
    return 0.0 if z.flag == z_prev.flag else -1.0


def change_flag_reward(changed: bool) -> float:
    """Partial-observation stability reward for one timestep: -1 on a change."""
    return -1.0 if changed else 0.0


def total_reward(r_task: float, r_stable: float, beta: float) -> float:
    """Affine blend (1 - beta) * r_task + beta * r_stable."""
    if not 0.0 <= beta <= 1.0:
        raise InvalidArgumentError(f"beta {beta} outside [0, 1]")
    return (1.0 - beta) * r_task + beta * r_stable


def beta_at(cfg: StabilityConfig, interaction: int) -> float:
    """Beta for interaction j: constant, or linearly annealed then clamped."""
    if interaction < 1:
        raise InvalidArgumentError(f"interaction index must be >= 1, got {interaction}")
    if cfg.anneal is None:
        return cfg.beta
    a = cfg.anneal
    frac = min(1.0, (interaction - 1) / max(1, a.interactions - 1))
    return a.start_beta + frac * (a.end_beta - a.start_beta)
