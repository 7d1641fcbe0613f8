"""The ego learner and its configurations.

Soft actor-critic (two critics, exponential-smoothing targets, learned
entropy temperature) over observations optionally concatenated with predicted
opponent latents. The agent kinds differ only in conditioning and reward
blending:

  SILI   - conditions on (z^j, z^{j-1}), blended stability reward
  Stable - SILI with beta forced to 1
  LILI   - conditions on z^j only, task reward
  SAC    - no conditioning, task reward
  SMiRL  - no conditioning, state log-likelihood blended like the stability term
  Oracle - conditions on the ground-truth strategy, task reward
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CONTINUOUS, DISCRETE, LatentStrategy
from .envs import CircleEnv, DrivingEnv, HiPMDPEnv, ReachEnv, SpeakerListenerEnv
from .errors import InvalidArgumentError, PoisonedUpdateError
from .nn import Adam, DenseNet

SILI, LILI, SMIRL, STABLE, SAC, ORACLE = "SILI", "LILI", "SMiRL", "Stable", "SAC", "Oracle"
AGENT_KINDS = (SILI, LILI, SMIRL, STABLE, SAC, ORACLE)

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))
_SQUASH_EPS = 1e-9


@dataclass(frozen=True)
class SACConfig:
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    batch_size: int = 256
    updates_per_step: float = 1.0
    hidden: tuple = (256, 256)
    init_alpha: float = 0.2
    learn_alpha: bool = True
    target_entropy: Optional[float] = None  # default -action_dim
    reward_scale: float = 1.0
    obs_scale: float = 1.0  # observations are multiplied by this before the nets


class ActorCritic:
    """SAC networks and update rules for one (obs, conditioning) layout."""

    def __init__(self, obs_dim: int, cond_dim: int, action_dim: int,
                 action_bound: np.ndarray, cfg: SACConfig,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.cond_dim = cond_dim
        self.action_dim = action_dim
        self.action_bound = np.asarray(action_bound, dtype=np.float64)
        in_dim = obs_dim + cond_dim
        self.actor = DenseNet.mlp(in_dim, 2 * action_dim, hidden=cfg.hidden, rng=rng)
        self.q1 = DenseNet.mlp(in_dim + action_dim, 1, hidden=cfg.hidden, rng=rng)
        self.q2 = DenseNet.mlp(in_dim + action_dim, 1, hidden=cfg.hidden, rng=rng)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.actor_opt = Adam(self.actor.params(), lr=cfg.lr)
        self.q1_opt = Adam(self.q1.params(), lr=cfg.lr)
        self.q2_opt = Adam(self.q2.params(), lr=cfg.lr)
        self.log_alpha = np.array([np.log(cfg.init_alpha)])
        self.alpha_opt = Adam([self.log_alpha], lr=cfg.lr)
        self.target_entropy = (cfg.target_entropy if cfg.target_entropy is not None
                               else -float(action_dim))

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def _split_head(self, raw: np.ndarray):
        mu = raw[..., :self.action_dim]
        log_std_raw = raw[..., self.action_dim:]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        return mu, log_std, log_std_raw

    def _squash(self, u: np.ndarray) -> np.ndarray:
        return np.tanh(u) * self.action_bound

    def _log_prob(self, eps: np.ndarray, log_std: np.ndarray, t: np.ndarray) -> np.ndarray:
        per_dim = (-0.5 * eps ** 2 - 0.5 * _LOG_2PI - log_std
                   - np.log(self.action_bound * (1.0 - t ** 2) + _SQUASH_EPS))
        return per_dim.sum(axis=-1)

    def act(self, obs: np.ndarray, cond: np.ndarray, deterministic: bool,
            rng: Optional[np.random.Generator] = None) -> np.ndarray:
        x = np.concatenate([self.cfg.obs_scale * np.asarray(obs, dtype=np.float64),
                            np.asarray(cond, dtype=np.float64)])
        raw = self.actor.forward(x)
        mu, log_std, _ = self._split_head(raw)
        if deterministic:
            return self._squash(mu)
        if rng is None:
            raise InvalidArgumentError("stochastic act needs an rng")
        eps = rng.standard_normal(self.action_dim)
        return self._squash(mu + np.exp(log_std) * eps)

    def actor_loss_and_grads(self, x1: np.ndarray, eps: np.ndarray):
        """Actor loss mean(alpha * logp - min_q) with its parameter gradients.

        The Gaussian noise eps is passed in so the loss is a deterministic
        function of the actor parameters with the critics held fixed.
        """
        B = x1.shape[0]
        alpha = self.alpha
        raw, actor_cache = self.actor.forward_cached(x1)
        mu, log_std, log_std_raw = self._split_head(raw)
        clip_mask = (log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)
        std = np.exp(log_std)
        u = mu + std * eps
        t = np.tanh(u)
        a_pi = t * self.action_bound
        logp = self._log_prob(eps, log_std, t)

        xa_pi = np.concatenate([x1, a_pi], axis=1)
        q1_pi, c1 = self.q1.forward_cached(xa_pi)
        q2_pi, c2 = self.q2.forward_cached(xa_pi)
        q1_pi, q2_pi = q1_pi[:, 0], q2_pi[:, 0]
        qmin = np.minimum(q1_pi, q2_pi)
        actor_loss = float((alpha * logp - qmin).mean())

        # d(loss)/d(a): backprop -q_min/B through whichever critic is the min
        pick1 = (q1_pi <= q2_pi).astype(np.float64)
        _, dxa1 = self.q1.backward_cached(c1, (-pick1 / B)[:, None])
        _, dxa2 = self.q2.backward_cached(c2, (-(1.0 - pick1) / B)[:, None])
        da = (dxa1 + dxa2)[:, x1.shape[1]:]

        dtanh = self.action_bound * (1.0 - t ** 2)
        # d logp / du = 2 tanh(u); logp also depends on log_std directly (-1)
        dmu = (alpha / B) * (2.0 * t) + da * dtanh
        dlog_std = ((alpha / B) * (2.0 * t * std * eps - 1.0)
                    + da * dtanh * std * eps) * clip_mask
        dactor_out = np.concatenate([dmu, dlog_std], axis=1)
        actor_grads, _ = self.actor.backward_cached(actor_cache, dactor_out)
        return actor_loss, actor_grads, logp

    def rl_update(self, batch: dict, rng: np.random.Generator) -> dict:
        """One gradient step on both critics, the actor, and alpha."""
        cfg = self.cfg
        x1 = np.concatenate([cfg.obs_scale * batch["obs"], batch["cond"]], axis=1)
        x2 = np.concatenate([cfg.obs_scale * batch["next_obs"], batch["next_cond"]],
                            axis=1)
        a = batch["action"]
        r = batch["reward"]
        B = len(r)
        alpha = self.alpha

        # -- critic targets (no gradients flow here) --------------------------
        raw2 = self.actor.forward(x2)
        mu2, log_std2, _ = self._split_head(raw2)
        eps2 = rng.standard_normal(mu2.shape)
        u2 = mu2 + np.exp(log_std2) * eps2
        t2 = np.tanh(u2)
        a2 = t2 * self.action_bound
        logp2 = self._log_prob(eps2, log_std2, t2)
        xa2 = np.concatenate([x2, a2], axis=1)
        qt = np.minimum(self.q1_target.forward(xa2)[:, 0],
                        self.q2_target.forward(xa2)[:, 0])
        y = r + cfg.gamma * (qt - alpha * logp2)
        if not np.all(np.isfinite(y)):
            raise PoisonedUpdateError("non-finite critic target")

        # -- critic updates ----------------------------------------------------
        xa1 = np.concatenate([x1, a], axis=1)
        critic_losses = []
        for q, opt in ((self.q1, self.q1_opt), (self.q2, self.q2_opt)):
            pred, cache = q.forward_cached(xa1)
            resid = pred[:, 0] - y
            critic_losses.append(float((resid ** 2).mean()))
            grads, _ = q.backward_cached(cache, (2.0 * resid / B)[:, None])
            opt.step(q.params(), grads)

        # -- actor update ------------------------------------------------------
        eps = rng.standard_normal((B, self.action_dim))
        actor_loss, actor_grads, logp = self.actor_loss_and_grads(x1, eps)
        self.actor_opt.step(self.actor.params(), actor_grads)

        # -- temperature update ------------------------------------------------
        alpha_loss = 0.0
        if cfg.learn_alpha:
            err = float((logp + self.target_entropy).mean())
            alpha_loss = -float(self.log_alpha[0]) * err
            self.alpha_opt.step([self.log_alpha], [np.array([-err])])

        # -- target smoothing ---------------------------------------------------
        for live, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            for p, pt in zip(live.params(), target.params()):
                pt *= 1.0 - cfg.tau
                pt += cfg.tau * p

        return {
            "q1_loss": critic_losses[0],
            "q2_loss": critic_losses[1],
            "actor_loss": actor_loss,
            "alpha_loss": alpha_loss,
            "alpha": self.alpha,
            "entropy": -float(logp.mean()),
        }


class EgoAgent:
    """An agent kind plus its actor-critic; owns the conditioning layout."""

    def __init__(self, kind: str, ac: ActorCritic, latent_dim: int = 0):
        if kind not in AGENT_KINDS:
            raise InvalidArgumentError(f"unknown agent kind {kind!r}")
        self.kind = kind
        self.ac = ac
        self.latent_dim = latent_dim

    def conditioning(self, z: Optional[LatentStrategy],
                     z_prev: Optional[LatentStrategy]) -> np.ndarray:
        if self.ac.cond_dim == 0:  # SAC/SMiRL, and any kind in the partial setting
            return np.zeros(0)
        if self.kind in (SILI, STABLE):
            return np.concatenate([z.vector, z_prev.vector])
        if self.kind == LILI:
            return np.asarray(z.vector)
        if self.kind == ORACLE:
            return np.asarray(z.vector)
        return np.zeros(0)

    def act(self, obs, z, z_prev, deterministic: bool,
            rng: Optional[np.random.Generator] = None) -> np.ndarray:
        cond = self.conditioning(z, z_prev)
        if len(cond) != self.ac.cond_dim:
            raise InvalidArgumentError(
                f"conditioning dim {len(cond)} != expected {self.ac.cond_dim}"
            )
        return self.ac.act(obs, cond, deterministic, rng)


def act(agent: EgoAgent, obs, z, z_prev, deterministic: bool,
        rng: Optional[np.random.Generator] = None) -> np.ndarray:
    return agent.act(obs, z, z_prev, deterministic, rng)


def rl_update(agent: EgoAgent, batch: dict, rng: np.random.Generator) -> dict:
    return agent.ac.rl_update(batch, rng)


def conditioning_dim(kind: str, latent_dim: int, oracle_dim: int,
                     partial: bool = False) -> int:
    if kind == ORACLE:
        return oracle_dim
    if partial or kind in (SAC, SMIRL):
        return 0
    if kind in (SILI, STABLE):
        return 2 * latent_dim
    if kind == LILI:
        return latent_dim
    raise InvalidArgumentError(f"unknown agent kind {kind!r}")


def make_agent(kind: str, env: HiPMDPEnv, latent_dim: int, cfg: SACConfig,
               partial: bool = False,
               rng: Optional[np.random.Generator] = None) -> EgoAgent:
    cond = conditioning_dim(kind, latent_dim, env.oracle_dim, partial=partial)
    ac = ActorCritic(env.obs_dim, cond, env.action_dim, env.action_bound, cfg, rng=rng)
    return EgoAgent(kind, ac, latent_dim=latent_dim)


def oracle_observation(env: HiPMDPEnv) -> LatentStrategy:
    """Ground-truth strategy encoding for the Oracle agent.

    Circle/Reach: the opponent's goal coordinates. Driving: the intended lane
    as a one-hot of 3. Speaker-Listener: the permutation index as a one-hot of
    6 (not the true goal).
    """
    vec = env.true_strategy_vector()
    if isinstance(env, (DrivingEnv, SpeakerListenerEnv)):
        return LatentStrategy(DISCRETE, vector=vec)
    if isinstance(env, (CircleEnv, ReachEnv)):
        return LatentStrategy(CONTINUOUS, vector=vec)
    raise InvalidArgumentError(f"no oracle encoding for {type(env).__name__}")


class SmirlDensity:
    """Diagonal-Gaussian running density over all states visited in training."""

    VAR_FLOOR = 1e-6

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    def update(self, state: np.ndarray) -> None:
        state = np.asarray(state, dtype=np.float64)
        self.count += 1
        delta = state - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (state - self.mean)

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.full(self.dim, 1.0)
        return np.maximum(self._m2 / self.count, self.VAR_FLOOR)

    def log_likelihood(self, state: np.ndarray) -> float:
        if self.count < 1:
            raise InvalidArgumentError("density needs at least one observed state")
        state = np.asarray(state, dtype=np.float64)
        var = self.var
        per_dim = -0.5 * (np.log(2.0 * np.pi * var) + (state - self.mean) ** 2 / var)
        return float(per_dim.sum())


def smirl_reward(density: SmirlDensity, state: np.ndarray) -> float:
    """State log-likelihood under the running density (SMiRL's intrinsic term)."""
    return density.log_likelihood(state)
