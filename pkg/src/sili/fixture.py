"""Synthetic circle-environment dataset for representation-learning checks.

A scripted ego performs a noisy walk tethered to an off-center point while the
opponent's goal advances round-robin, producing a balanced 200-interaction
corpus where each goal leaves a distinct reward signature. A walk centered at
the origin would not work: the three goals are equidistant from the center,
so near-center trajectories carry almost no goal information.
"""

from __future__ import annotations

from collections import Counter
from typing import Optional

import numpy as np

from .core import InteractionTrajectory, ReplayBuffer, Transition
from .envs import circle3
from . import latent as lt

TETHER = np.array([4.0, 2.5])
PULL = 0.3
NOISE_SCALE = 0.4
FIXTURE_INTERACTIONS = 200
FIXTURE_SEED = 0


def scripted_action(env, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One step of the tethered random walk."""
    return np.clip(
        PULL * (TETHER - obs[:2])
        + rng.uniform(-env.action_bound, env.action_bound, 2) * NOISE_SCALE,
        -env.action_bound,
        env.action_bound,
    )


def run_scripted_interaction(env, index: int, rng: np.random.Generator) -> InteractionTrajectory:
    obs = env.reset_interaction()
    transitions = []
    for _ in range(env.horizon):
        action = scripted_action(env, obs, rng)
        next_obs, reward, flag = env.step(action)
        transitions.append(Transition(obs, action, reward, next_obs, flag))
        obs = next_obs
    return InteractionTrajectory(index, transitions)


def build_fixture(n_interactions: int = FIXTURE_INTERACTIONS,
                  seed: int = FIXTURE_SEED):
    """Returns (buffer, strategy_ids); strategy_ids[j-1] labels interaction j."""
    rng = np.random.default_rng(seed)
    env = circle3()
    buffer = ReplayBuffer(capacity=n_interactions)
    strategy_ids = []
    for j in range(1, n_interactions + 1):
        strategy_ids.append(env.strategy_id())
        traj = run_scripted_interaction(env, j, rng)
        buffer.add(traj)
        env.end_interaction(traj)
    return buffer, strategy_ids


def fixed_strategy_trajectories(goal: int, count: int = 20,
                                seed: Optional[int] = None) -> list[InteractionTrajectory]:
    """Scripted trajectories with the opponent's goal held fixed.

    The strategy update at the end of each interaction is skipped, so every
    trajectory is generated under exactly the requested goal.
    """
    env = circle3(initial_index=goal)
    rng = np.random.default_rng(goal * 1000 + 100 if seed is None else seed)
    return [run_scripted_interaction(env, m, rng) for m in range(1, count + 1)]


def cluster_purity(model, labeled_trajectories) -> float:
    """Purity of noise-free discrete encodings against ground-truth labels.

    labeled_trajectories is an iterable of (trajectory, label) pairs. Each
    cluster (argmax latent index) is credited with its majority label.
    """
    by_cluster: dict[int, Counter] = {}
    total = 0
    for traj, label in labeled_trajectories:
        z, _ = lt.encode(model, traj, rng=None)
        cluster = int(np.argmax(z.vector))
        by_cluster.setdefault(cluster, Counter())[label] += 1
        total += 1
    correct = sum(max(counts.values()) for counts in by_cluster.values())
    return correct / total
