"""Domain types shared by all modules: transitions, trajectories, latent
strategies, the pairwise stability predicate, and interaction replay storage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyBufferError, InvalidArgumentError

CONTINUOUS = "continuous"
DISCRETE = "discrete"
CHANGE_FLAG = "change_flag"


@dataclass(frozen=True)
class Transition:
    """One timestep: (s, a, r_task, s') plus the optional strategy-change flag."""

    state: np.ndarray
    action: np.ndarray
    task_reward: float
    next_state: np.ndarray
    change_flag: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "state", np.asarray(self.state, dtype=np.float64))
        object.__setattr__(self, "action", np.asarray(self.action, dtype=np.float64))
        object.__setattr__(self, "next_state", np.asarray(self.next_state, dtype=np.float64))


class InteractionTrajectory:
    """A complete interaction: exactly H chained transitions, indexed by j >= 1."""

    def __init__(self, index: int, transitions: Sequence[Transition]):
        if index < 1:
            raise InvalidArgumentError(f"interaction index must be >= 1, got {index}")
        if not transitions:
            raise InvalidArgumentError("trajectory must contain at least one transition")
        for a, b in zip(transitions, transitions[1:]):
            if not np.array_equal(a.next_state, b.state):
                raise InvalidArgumentError(
                    "transitions do not chain: next_state != following state"
                )
        self.index = index
        self.transitions = tuple(transitions)
        # Dense views used by the learning code.
        self.states = np.stack([t.state for t in transitions])
        self.actions = np.stack([t.action for t in transitions])
        self.rewards = np.array([t.task_reward for t in transitions], dtype=np.float64)
        self.next_states = np.stack([t.next_state for t in transitions])
        flags = [t.change_flag for t in transitions]
        self.change_flags = (
            None if all(f is None for f in flags) else np.array([bool(f) for f in flags])
        )

    def __len__(self) -> int:
        return len(self.transitions)


@dataclass(frozen=True)
class LatentStrategy:
    """An opponent strategy: continuous vector, discrete one-hot, or change flag."""

    variant: str
    vector: Optional[np.ndarray] = None
    flag: Optional[bool] = None

    def __post_init__(self):
        if self.variant not in (CONTINUOUS, DISCRETE, CHANGE_FLAG):
            raise InvalidArgumentError(f"unknown latent variant {self.variant!r}")
        if self.variant == CHANGE_FLAG:
            if self.flag is None:
                raise InvalidArgumentError("change-flag latent needs a boolean flag")
            return
        if self.vector is None:
            raise InvalidArgumentError(f"{self.variant} latent needs a vector")
        vec = np.asarray(self.vector, dtype=np.float64)
        object.__setattr__(self, "vector", vec)
        if not np.all(np.isfinite(vec)):
            raise InvalidArgumentError("latent vector has non-finite components")
        if self.variant == DISCRETE:
            if not (np.count_nonzero(vec) == 1 and np.isclose(vec.sum(), 1.0)
                    and np.isclose(vec.max(), 1.0)):
                raise InvalidArgumentError("discrete latent must be exactly one-hot")

    @staticmethod
    def continuous(vector) -> "LatentStrategy":
        return LatentStrategy(CONTINUOUS, vector=np.asarray(vector, dtype=np.float64))

    @staticmethod
    def one_hot(index: int, k: int) -> "LatentStrategy":
        vec = np.zeros(k)
        vec[index] = 1.0
        return LatentStrategy(DISCRETE, vector=vec)

    @staticmethod
    def change(flag: bool) -> "LatentStrategy":
        return LatentStrategy(CHANGE_FLAG, flag=bool(flag))


def euclidean_metric(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b))


def discrete_metric(a: np.ndarray, b: np.ndarray) -> float:
    return 0.0 if np.array_equal(a, b) else 1.0


def pairwise_stable(
    z: LatentStrategy,
    z_prev: LatentStrategy,
    metric: Callable[[np.ndarray, np.ndarray], float],
    eps: float,
) -> bool:
    """True iff d(z, z_prev) < eps (strict) under the given metric."""
    if eps <= 0:
        raise InvalidArgumentError(f"eps must be > 0, got {eps}")
    if z.variant != z_prev.variant:
        raise InvalidArgumentError(
            f"latent variants differ: {z.variant} vs {z_prev.variant}"
        )
    if z.variant == CHANGE_FLAG:
        d = 0.0 if z.flag == z_prev.flag else 1.0
    else:
        if z.vector.shape != z_prev.vector.shape:
            raise InvalidArgumentError("latent dimensions differ")
        d = metric(z.vector, z_prev.vector)
    return d < eps


class ReplayBuffer:
    """Ring buffer of whole interactions; consecutive pairs stay recoverable.

    Interactions must be inserted with consecutive indices (1, 2, 3, ...); the
    oldest interaction is evicted when the buffer is full.
    """

    def __init__(self, capacity: int, rng_seed: int = 0):
        if capacity < 1:
            raise InvalidArgumentError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.rng_seed = rng_seed
        self._rng = np.random.default_rng(rng_seed)
        self._interactions: list[InteractionTrajectory] = []
        self._first_index: Optional[int] = None  # index j of the oldest stored

    def __len__(self) -> int:
        return len(self._interactions)

    def add(self, traj: InteractionTrajectory) -> None:
        if self._interactions:
            expected = self._interactions[-1].index + 1
            if traj.index != expected:
                raise InvalidArgumentError(
                    f"expected interaction index {expected}, got {traj.index}"
                )
        if len(self._interactions) == self.capacity:
            self._interactions.pop(0)
        self._interactions.append(traj)
        self._first_index = self._interactions[0].index

    def contains(self, index: int) -> bool:
        return bool(
            self._interactions
            and self._first_index <= index <= self._interactions[-1].index
        )

    def get(self, index: int) -> InteractionTrajectory:
        if not self.contains(index):
            raise InvalidArgumentError(f"interaction {index} is not stored")
        return self._interactions[index - self._first_index]

    @property
    def latest_index(self) -> Optional[int]:
        return self._interactions[-1].index if self._interactions else None

    def stored_indices(self) -> range:
        if not self._interactions:
            return range(0)
        return range(self._first_index, self._interactions[-1].index + 1)


def sample_consecutive_pairs(
    buffer: ReplayBuffer,
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
) -> list[tuple[InteractionTrajectory, InteractionTrajectory]]:
    """Uniform-with-replacement sample of stored (tau^{j-1}, tau^j) pairs."""
    if batch_size < 1:
        raise InvalidArgumentError(f"batch_size must be >= 1, got {batch_size}")
    indices = buffer.stored_indices()
    n_pairs = max(0, len(indices) - 1)
    if n_pairs == 0:
        raise EmptyBufferError("need >= 2 stored interactions to form a pair")
    rng = rng if rng is not None else buffer._rng
    picks = rng.integers(0, n_pairs, size=batch_size)
    first = indices.start
    return [(buffer.get(first + p), buffer.get(first + p + 1)) for p in picks]


def write_trajectory_log(path, trajectories: Iterable[InteractionTrajectory]) -> None:
    """Newline-delimited JSON, one object per interaction."""
    with open(path, "w") as fh:
        for traj in trajectories:
            steps = []
            for t in traj.transitions:
                rec = {
                    "s": t.state.tolist(),
                    "a": t.action.tolist(),
                    "r": t.task_reward,
                    "s2": t.next_state.tolist(),
                }
                if t.change_flag is not None:
                    rec["flag"] = bool(t.change_flag)
                steps.append(rec)
            fh.write(json.dumps({"index": traj.index, "transitions": steps}) + "\n")


def read_trajectory_log(path) -> list[InteractionTrajectory]:
    out = []
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            transitions = [
                Transition(
                    state=np.array(rec["s"]),
                    action=np.array(rec["a"]),
                    task_reward=float(rec["r"]),
                    next_state=np.array(rec["s2"]),
                    change_flag=rec.get("flag"),
                )
                for rec in obj["transitions"]
            ]
            out.append(InteractionTrajectory(obj["index"], transitions))
    return out
