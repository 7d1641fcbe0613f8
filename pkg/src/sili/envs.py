"""HiP-MDP environments with scripted opponents.

Seven tasks: Circle Point Mass (3 Goals, 8 Goals, Continuous, Unequal),
Driving, Reach3D (kinematic end-effector surrogate), and Detour
Speaker-Listener. Each environment keeps a hidden opponent strategy that is
fixed within an interaction (Speaker-Listener excepted) and evolves at
interaction boundaries as a function of the ego agent's trajectory.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from .core import InteractionTrajectory
from .errors import ConfigError, InvalidArgumentError, ProtocolError

_IDLE, _RUNNING, _DONE = "idle", "running", "done"


class HiPMDPEnv:
    """Protocol: reset_interaction() -> obs, step(a) x H, end_interaction(traj)."""

    obs_dim: int
    action_dim: int
    horizon: int
    action_bound: np.ndarray  # per-component |a_i| bound

    def __init__(self):
        self._phase = _IDLE
        self._steps = 0

    # -- protocol plumbing ---------------------------------------------------
    def reset_interaction(self) -> np.ndarray:
        if self._phase == _RUNNING:
            raise ProtocolError("reset_interaction called mid-interaction")
        self._phase = _RUNNING
        self._steps = 0
        return self._reset()

    def step(self, action: np.ndarray):
        if self._phase != _RUNNING:
            raise ProtocolError("step called outside an interaction")
        if self._steps >= self.horizon:
            raise ProtocolError(f"interaction already ran {self.horizon} steps")
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.action_dim,):
            raise InvalidArgumentError(
                f"action shape {action.shape} != ({self.action_dim},)"
            )
        action = np.clip(action, -self.action_bound, self.action_bound)
        obs, reward, flag = self._step(action)
        self._steps += 1
        if self._steps == self.horizon:
            self._phase = _DONE
        return obs, reward, flag

    def end_interaction(self, traj: InteractionTrajectory) -> None:
        if self._phase != _DONE:
            raise ProtocolError("end_interaction requires a completed interaction")
        if len(traj) != self.horizon:
            raise InvalidArgumentError("trajectory length != horizon")
        self._apply_strategy_dynamics(traj)
        self._phase = _IDLE

    # -- per-env hooks -------------------------------------------------------
    def _reset(self) -> np.ndarray:
        raise NotImplementedError

    def _step(self, action: np.ndarray):
        raise NotImplementedError

    def _apply_strategy_dynamics(self, traj: InteractionTrajectory) -> None:
        raise NotImplementedError

    def true_strategy_vector(self) -> np.ndarray:
        """Ground-truth strategy encoding (Oracle observation / metrics only)."""
        raise NotImplementedError

    def strategy_id(self):
        """Hashable ground-truth strategy identifier (metrics only)."""
        raise NotImplementedError

    @property
    def oracle_dim(self) -> int:
        return len(self.true_strategy_vector())


def _norm_clamp(v: np.ndarray, limit: float) -> np.ndarray:
    n = float(np.linalg.norm(v))
    return v if n <= limit or n == 0.0 else v * (limit / n)


# --------------------------------------------------------------------------
# Circle Point Mass
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CircleConfig:
    radius: float = 10.0
    n_goals: int = 3            # 0 means the continuous variant
    stable_index: int = 0       # the "red" goal (angle for the continuous variant)
    ego_start: tuple = (0.0, 0.0)
    max_speed: float = 1.0
    horizon: int = 50
    advance_radians: float = 1.0  # continuous-variant counterclockwise jump
    snap_to_red: bool = True    # ending outside: snap to red vs keep current
    initial_index: int = 0


class CircleEnv(HiPMDPEnv):
    """Pursuit on a circle: the hidden goal jumps counterclockwise unless the
    ego agent ends the interaction outside the circle, which pins it at the
    red goal."""

    def __init__(self, cfg: CircleConfig = CircleConfig()):
        super().__init__()
        self.cfg = cfg
        self.obs_dim = 2
        self.action_dim = 2
        self.horizon = cfg.horizon
        self.action_bound = np.array([cfg.max_speed, cfg.max_speed])
        self._continuous = cfg.n_goals == 0
        if self._continuous:
            self._angle = float(cfg.initial_index)  # radians
        else:
            self._index = cfg.initial_index % cfg.n_goals
        self._pos = np.array(cfg.ego_start, dtype=np.float64)

    def _goal_angle(self) -> float:
        if self._continuous:
            return self._angle
        return 2.0 * np.pi * self._index / self.cfg.n_goals

    def goal_position(self) -> np.ndarray:
        th = self._goal_angle()
        return self.cfg.radius * np.array([np.cos(th), np.sin(th)])

    def _reset(self) -> np.ndarray:
        self._pos = np.array(self.cfg.ego_start, dtype=np.float64)
        return self._pos.copy()

    def _step(self, action):
        self._pos = self._pos + _norm_clamp(action, self.cfg.max_speed)
        reward = -float(np.linalg.norm(self._pos - self.goal_position()))
        return self._pos.copy(), reward, None

    def _apply_strategy_dynamics(self, traj):
        final = traj.next_states[-1]
        inside = float(np.linalg.norm(final)) < self.cfg.radius
        if inside:
            if self._continuous:
                self._angle += self.cfg.advance_radians
            else:
                self._index = (self._index + 1) % self.cfg.n_goals
        elif self.cfg.snap_to_red:
            if self._continuous:
                self._angle = float(self.cfg.stable_index)
            else:
                self._index = self.cfg.stable_index
        # else: keep the current strategy

    def true_strategy_vector(self) -> np.ndarray:
        return self.goal_position()

    def strategy_id(self):
        return round(self._angle, 12) if self._continuous else self._index


def circle3(**overrides) -> CircleEnv:
    return CircleEnv(replace(CircleConfig(), **overrides))


def circle8(**overrides) -> CircleEnv:
    return CircleEnv(replace(CircleConfig(n_goals=8), **overrides))


def circle_continuous(**overrides) -> CircleEnv:
    return CircleEnv(replace(CircleConfig(n_goals=0), **overrides))


def circle_unequal(**overrides) -> CircleEnv:
    # Ego begins closer to the two non-red goals: 60% of the radius toward the
    # midpoint of goals 1 and 2 (for red goal 0 at angle 0, that is (-6, 0)).
    cfg = CircleConfig()
    a1 = 2.0 * np.pi / 3.0
    a2 = 4.0 * np.pi / 3.0
    mid = 0.5 * (np.array([np.cos(a1), np.sin(a1)]) + np.array([np.cos(a2), np.sin(a2)]))
    mid = mid / np.linalg.norm(mid)
    params = {"ego_start": tuple(0.6 * cfg.radius * mid), **overrides}
    return CircleEnv(replace(cfg, **params))


# --------------------------------------------------------------------------
# Driving
# --------------------------------------------------------------------------

LANE_X = (-1.0, 0.0, 1.0)  # left, center, right


@dataclass(frozen=True)
class DrivingConfig:
    ego_speed: float = 2.0
    opp_speed: float = 1.0
    red_line_y: float = 3.0
    hazard_y: float = 6.0
    collision_threshold: float = 0.5
    lateral_bound: float = 0.5
    horizon: int = 10
    ego_start: tuple = (0.0, 0.0)
    opp_start: tuple = (0.0, 2.0)
    initial_lane: int = 1  # center


class DrivingEnv(HiPMDPEnv):
    """Three-lane passing task. Merging left before the red line teaches the
    opponent to yield right; otherwise it cuts off the ego agent's passing
    lane in the next interaction."""

    def __init__(self, cfg: DrivingConfig = DrivingConfig()):
        super().__init__()
        self.cfg = cfg
        self.obs_dim = 4
        self.action_dim = 1
        self.horizon = cfg.horizon
        self.action_bound = np.array([cfg.lateral_bound])
        self._lane = cfg.initial_lane  # opponent strategy: intended lane index
        self._ego = np.array(cfg.ego_start, dtype=np.float64)
        self._opp = np.array(cfg.opp_start, dtype=np.float64)
        self._merged_left = False
        self._overtake_lane: Optional[int] = None

    def _reset(self):
        self._ego = np.array(self.cfg.ego_start, dtype=np.float64)
        self._opp = np.array(self.cfg.opp_start, dtype=np.float64)
        self._merged_left = False
        self._overtake_lane = None
        return self._obs()

    def _obs(self):
        return np.array([self._ego[0], self._ego[1], self._opp[0], self._opp[1]])

    def _opp_target_x(self) -> float:
        target = LANE_X[self._lane]
        # hazard in the center lane forces the merge (default to the right)
        if target == 0.0 and self._opp[1] >= self.cfg.hazard_y - 2.0:
            target = LANE_X[2]
        return target

    def _step(self, action):
        cfg = self.cfg
        overtaken_before = self._ego[1] > self._opp[1]
        self._ego[0] += float(action[0])
        self._ego[1] += cfg.ego_speed
        dx = np.clip(self._opp_target_x() - self._opp[0], -cfg.lateral_bound,
                     cfg.lateral_bound)
        self._opp[0] += dx
        self._opp[1] += cfg.opp_speed
        if self._ego[0] <= -0.5 and self._ego[1] < cfg.red_line_y:
            self._merged_left = True
        if not overtaken_before and self._ego[1] > self._opp[1] \
                and self._overtake_lane is None:
            self._overtake_lane = int(np.argmin([abs(self._ego[0] - x) for x in LANE_X]))
        collided = (abs(self._ego[0] - self._opp[0]) < cfg.collision_threshold
                    and abs(self._ego[1] - self._opp[1]) < cfg.collision_threshold)
        return self._obs(), (-1.0 if collided else 0.0), None

    def _apply_strategy_dynamics(self, traj):
        if self._merged_left:
            self._lane = 2  # yields: faster vehicles pass on the left
        elif self._overtake_lane is not None:
            self._lane = self._overtake_lane  # cut off the ego agent's lane
        # never overtook: the opponent keeps its current strategy

    def true_strategy_vector(self) -> np.ndarray:
        vec = np.zeros(3)
        vec[self._lane] = 1.0
        return vec

    def strategy_id(self):
        return self._lane


# --------------------------------------------------------------------------
# Reach3D (kinematic Sawyer-Reach surrogate)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReachConfig:
    goals: tuple = ((0.5, 0.5, 0.0), (-0.5, 0.5, 0.0), (0.0, -0.5, 0.0))
    z_threshold: float = 0.3
    max_speed: float = 0.1
    horizon: int = 50
    ego_start: tuple = (0.0, 0.0, 0.5)
    initial_index: int = 0


class ReachEnv(HiPMDPEnv):
    """Velocity-limited 3D point end-effector reaching a hidden table goal.

    Ending the interaction above the z threshold keeps the opponent's goal
    fixed; ending below it advances the goal cyclically.
    """

    def __init__(self, cfg: ReachConfig = ReachConfig()):
        super().__init__()
        if len(set(cfg.goals)) != len(cfg.goals):
            raise InvalidArgumentError("reach goals must be distinct")
        if any(g[2] != 0.0 for g in cfg.goals):
            raise InvalidArgumentError("reach goals must lie on the table plane z=0")
        self.cfg = cfg
        self.obs_dim = 3
        self.action_dim = 3
        self.horizon = cfg.horizon
        self.action_bound = np.array([cfg.max_speed] * 3)
        self._index = cfg.initial_index % len(cfg.goals)
        self._pos = np.array(cfg.ego_start, dtype=np.float64)

    def goal_position(self) -> np.ndarray:
        return np.array(self.cfg.goals[self._index], dtype=np.float64)

    def _reset(self):
        self._pos = np.array(self.cfg.ego_start, dtype=np.float64)
        return self._pos.copy()

    def _step(self, action):
        self._pos = np.clip(self._pos + _norm_clamp(action, self.cfg.max_speed),
                            -1.0, 1.0)
        reward = -float(np.linalg.norm(self._pos - self.goal_position()))
        return self._pos.copy(), reward, None

    def _apply_strategy_dynamics(self, traj):
        if traj.next_states[-1][2] < self.cfg.z_threshold:
            self._index = (self._index + 1) % len(self.cfg.goals)

    def true_strategy_vector(self) -> np.ndarray:
        return self.goal_position()

    def strategy_id(self):
        return self._index


# --------------------------------------------------------------------------
# Detour Speaker-Listener
# --------------------------------------------------------------------------

_PERMUTATIONS = tuple(itertools.permutations(range(3)))


@dataclass(frozen=True)
class SpeakerListenerConfig:
    landmarks: tuple = ((-0.8, 0.6), (-0.8, -0.6), (0.8, -0.6))
    speaker: tuple = (0.9, 0.9)
    speaker_radius: float = 0.3
    change_probability: float = 0.0137  # per-timestep; ~0.5 per interaction
    max_speed: float = 0.1
    horizon: int = 50
    ego_start: tuple = (0.0, 0.0)
    initial_permutation: int = 0


class SpeakerListenerEnv(HiPMDPEnv):
    """Emergent-communication task where the speaker's goal-to-symbol mapping
    drifts per timestep unless the listener detours to the speaker.

    Observation: (ego position, one-hot message of 3). The per-timestep change
    flag is returned alongside the reward.
    """

    def __init__(self, cfg: SpeakerListenerConfig = SpeakerListenerConfig(),
                 rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.cfg = cfg
        self.obs_dim = 5
        self.action_dim = 2
        self.horizon = cfg.horizon
        self.action_bound = np.array([cfg.max_speed, cfg.max_speed])
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self._perm = cfg.initial_permutation % 6
        self._pos = np.array(cfg.ego_start, dtype=np.float64)
        self._goal = 0
        self._locked = False       # carried lock from a visit last interaction
        self._visited = False      # ego reached the speaker this interaction
        self._lock_next = False

    def _message(self) -> np.ndarray:
        msg = np.zeros(3)
        msg[_PERMUTATIONS[self._perm][self._goal]] = 1.0
        return msg

    def _obs(self):
        return np.concatenate([self._pos, self._message()])

    def _reset(self):
        self._pos = np.array(self.cfg.ego_start, dtype=np.float64)
        self._goal = int(self._rng.integers(0, 3))
        self._locked = self._lock_next
        self._lock_next = False
        self._visited = False
        return self._obs()

    def _step(self, action):
        cfg = self.cfg
        changed = False
        if not self._locked and not self._visited:
            if self._rng.random() < cfg.change_probability:
                # a random *new* strategy: uniform over the other five
                others = [p for p in range(6) if p != self._perm]
                self._perm = others[int(self._rng.integers(0, 5))]
                changed = True
        self._pos = np.clip(self._pos + _norm_clamp(action, cfg.max_speed), -1.0, 1.0)
        if np.linalg.norm(self._pos - np.array(cfg.speaker)) <= cfg.speaker_radius:
            self._visited = True
            self._lock_next = True
        goal_pos = np.array(cfg.landmarks[self._goal])
        reward = -float(np.linalg.norm(self._pos - goal_pos))
        return self._obs(), reward, changed

    def _apply_strategy_dynamics(self, traj):
        # strategy drift happens per timestep inside _step; the visit lock was
        # recorded there and takes effect at the next reset
        pass

    def true_strategy_vector(self) -> np.ndarray:
        vec = np.zeros(6)
        vec[self._perm] = 1.0
        return vec

    def strategy_id(self):
        return self._perm


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------

_FACTORIES = {
    "circle3": (circle3, CircleConfig),
    "circle8": (circle8, CircleConfig),
    "circle_continuous": (circle_continuous, CircleConfig),
    "circle_unequal": (circle_unequal, CircleConfig),
    "driving": (lambda **o: DrivingEnv(replace(DrivingConfig(), **o)), DrivingConfig),
    "reach3d": (lambda **o: ReachEnv(replace(ReachConfig(), **o)), ReachConfig),
    "speaker_listener": (None, SpeakerListenerConfig),  # needs an rng
}

ENV_NAMES = tuple(_FACTORIES)


def make_env(name: str, overrides: Optional[dict] = None,
             seed: int = 0) -> HiPMDPEnv:
    if name not in _FACTORIES:
        raise ConfigError(f"unknown environment {name!r}; known: {sorted(_FACTORIES)}")
    overrides = dict(overrides or {})
    factory, cfg_cls = _FACTORIES[name]
    valid = {f.name for f in fields(cfg_cls)}
    unknown = set(overrides) - valid
    if unknown:
        raise ConfigError(f"unknown {name} config keys: {sorted(unknown)}")
    for key in ("ego_start", "opp_start", "goals", "landmarks", "speaker"):
        if key in overrides and isinstance(overrides[key], list):
            overrides[key] = tuple(
                tuple(v) if isinstance(v, list) else v for v in overrides[key]
            )
    if name == "speaker_listener":
        cfg = replace(SpeakerListenerConfig(), **overrides)
        return SpeakerListenerEnv(cfg, rng=np.random.default_rng(seed))
    return factory(**overrides)
