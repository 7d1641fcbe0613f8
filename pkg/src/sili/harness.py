"""Experiment orchestration: configs, the interaction-level training loop,
evaluation, beta sweeps, metrics CSV and plot emission."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import agents as ag
from . import latent as lt
from .core import (
    CONTINUOUS,
    DISCRETE,
    InteractionTrajectory,
    LatentStrategy,
    ReplayBuffer,
    Transition,
)
from .envs import ENV_NAMES, HiPMDPEnv, make_env
from .errors import ConfigError
from .stability import (
    DISCRETE_METRIC,
    EUCLIDEAN,
    PARTIAL,
    AnnealSchedule,
    StabilityConfig,
    beta_at,
    change_flag_reward,
    stability_reward,
)

LATENT_MODES = ("continuous", "discrete", "partial")
_MODE_METRIC = {"continuous": EUCLIDEAN, "discrete": DISCRETE_METRIC, "partial": PARTIAL}


def _take(obj: dict, cls_name: str, **spec):
    """Pop known keys out of a dict, rejecting unknown ones."""
    unknown = set(obj) - set(spec)
    if unknown:
        raise ConfigError(f"unknown {cls_name} keys: {sorted(unknown)}")
    return {k: obj[k] for k in obj}


@dataclass(frozen=True)
class LatentSection:
    mode: str = "discrete"
    k: int = 10
    temperature: float = 1.0
    hidden: tuple = (256, 256)
    lr: float = 3e-4
    logit_bound: Optional[float] = 3.0

    def __post_init__(self):
        if self.mode not in LATENT_MODES:
            raise ConfigError(f"latent mode must be one of {LATENT_MODES}")
        if self.k < 1:
            raise ConfigError("latent dim k must be >= 1")
        if self.logit_bound is not None and self.logit_bound <= 0:
            raise ConfigError("latent logit_bound must be > 0 or null")


@dataclass(frozen=True)
class RepSection:
    updates_per_interaction: int = 1
    batch_size: int = 64
    freeze_after: Optional[int] = None  # stop encoder training past this interaction

    def __post_init__(self):
        if self.updates_per_interaction < 0 or self.batch_size < 1:
            raise ConfigError("invalid representation-training settings")
        if self.freeze_after is not None and self.freeze_after < 1:
            raise ConfigError("representation freeze must be >= 1 interactions")


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    agent: str
    interactions: int
    seeds: tuple
    env_overrides: dict = field(default_factory=dict)
    latent: LatentSection = LatentSection()
    stability: StabilityConfig = StabilityConfig(beta=0.5)
    sac: ag.SACConfig = ag.SACConfig()
    rep: RepSection = RepSection()
    warmup_interactions: int = 20
    buffer_capacity: int = 2000
    eval_every: Optional[int] = None
    eval_episodes: int = 10
    outdir: str = "runs/out"

    def __post_init__(self):
        if self.env not in ENV_NAMES:
            raise ConfigError(f"unknown env {self.env!r}; known: {sorted(ENV_NAMES)}")
        if self.agent not in ag.AGENT_KINDS:
            raise ConfigError(f"unknown agent {self.agent!r}; known: {ag.AGENT_KINDS}")
        if self.interactions < 2:
            raise ConfigError("interactions must be >= 2")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.eval_every is not None and self.eval_every < 1:
            raise ConfigError("eval cadence must be >= 1")
        want_metric = _MODE_METRIC[self.latent.mode]
        if self.stability.metric != want_metric:
            raise ConfigError(
                f"latent mode {self.latent.mode!r} requires stability metric "
                f"{want_metric!r}, got {self.stability.metric!r}"
            )

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        kw = _take(
            obj, "config",
            env=None, agent=None, interactions=None, seeds=None, env_overrides=None,
            latent=None, stability=None, sac=None, rep=None,
            warmup_interactions=None, buffer_capacity=None,
            eval_every=None, eval_episodes=None, outdir=None,
        )
        if "seeds" in kw:
            kw["seeds"] = tuple(kw["seeds"])
        if "latent" in kw:
            lat = dict(kw["latent"])
            lat = _take(lat, "latent", mode=None, k=None, temperature=None,
                        hidden=None, lr=None, logit_bound=None)
            if "hidden" in lat:
                lat["hidden"] = tuple(lat["hidden"])
            kw["latent"] = LatentSection(**lat)
        if "stability" in kw:
            st = _take(dict(kw["stability"]), "stability",
                       beta=None, metric=None, anneal=None)
            if st.get("anneal") is not None:
                an = _take(dict(st["anneal"]), "anneal", start_beta=None,
                           end_beta=None, interactions=None)
                st["anneal"] = AnnealSchedule(**an)
            st.setdefault("metric",
                          _MODE_METRIC[kw.get("latent", LatentSection()).mode])
            kw["stability"] = StabilityConfig(**st)
        elif "latent" in kw:
            kw["stability"] = StabilityConfig(beta=0.5,
                                              metric=_MODE_METRIC[kw["latent"].mode])
        if "sac" in kw:
            sac = _take(dict(kw["sac"]), "sac", **{
                f.name: None for f in dataclasses.fields(ag.SACConfig)})
            if "hidden" in sac:
                sac["hidden"] = tuple(sac["hidden"])
            kw["sac"] = ag.SACConfig(**sac)
        if "rep" in kw:
            kw["rep"] = RepSection(**_take(dict(kw["rep"]), "rep",
                                           updates_per_interaction=None,
                                           batch_size=None, freeze_after=None))
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        def enc(x):
            if dataclasses.is_dataclass(x) and not isinstance(x, type):
                return {k: enc(v) for k, v in dataclasses.asdict(x).items()}
            if isinstance(x, tuple):
                return [enc(v) for v in x]
            if isinstance(x, dict):
                return {k: enc(v) for k, v in x.items()}
            return x
        return {f.name: enc(getattr(self, f.name))
                for f in dataclasses.fields(self)}


@dataclass(frozen=True)
class MetricsRow:
    seed: int
    interaction: int
    task_reward: float       # sum over the interaction
    stability_reward: float  # sum over the interaction
    beta: float
    strategy_changed: bool


@dataclass
class MetricsLog:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    eval_rows: list = field(default_factory=list)

    CSV_HEADER = ("seed", "interaction", "task_reward", "stability_reward",
                  "beta", "strategy_changed")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_HEADER)
            for r in self.rows:
                writer.writerow([r.seed, r.interaction, repr(r.task_reward),
                                 repr(r.stability_reward), repr(r.beta),
                                 int(r.strategy_changed)])

    @classmethod
    def from_csv(cls, path) -> "MetricsLog":
        log = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                log.rows.append(MetricsRow(
                    seed=int(row["seed"]), interaction=int(row["interaction"]),
                    task_reward=float(row["task_reward"]),
                    stability_reward=float(row["stability_reward"]),
                    beta=float(row["beta"]),
                    strategy_changed=bool(int(row["strategy_changed"])),
                ))
        return log

    def seeds(self) -> list:
        return sorted({r.seed for r in self.rows})


def effective_beta(kind: str, cfg: StabilityConfig, interaction: int) -> float:
    """Per-kind stability weight: Stable is pinned to 1, the no-stability
    baselines to 0, SILI/SMiRL follow the config (and its anneal schedule)."""
    if kind == ag.STABLE:
        return 1.0
    if kind in (ag.SAC, ag.LILI, ag.ORACLE):
        return 0.0
    return beta_at(cfg, interaction)


class _LatentCache:
    """Noise-free encodings of z^j = E(tau^{j-1}), invalidated on encoder updates."""

    def __init__(self, model: lt.LatentModel, buffer: ReplayBuffer):
        self.model = model
        self.buffer = buffer
        self._cache: dict[int, np.ndarray] = {}
        self._version = model.version
        self._sentinel = model.sentinel().vector

    def get_many(self, indices: np.ndarray) -> np.ndarray:
        if self.model.version != self._version:
            self._cache.clear()
            self._version = self.model.version
        missing = sorted({int(j) for j in indices
                          if int(j) not in self._cache
                          and self.buffer.contains(int(j) - 1)})
        if missing:
            inputs = np.stack([
                lt.encoder_input(self.model, self.buffer.get(j - 1)) for j in missing
            ])
            zs = lt.encode_batch(self.model, inputs, rng=None)
            for j, z in zip(missing, zs):
                self._cache[j] = z
        out = np.empty((len(indices), self.model.k))
        for i, j in enumerate(indices):
            out[i] = self._cache.get(int(j), self._sentinel)
        return out

    def latent(self, index: int) -> LatentStrategy:
        vec = self.get_many(np.array([index]))[0]
        variant = DISCRETE if self.model.mode == DISCRETE else CONTINUOUS
        return LatentStrategy(variant, vector=vec)


def _pairwise_stability_rewards(z: np.ndarray, z_prev: np.ndarray, metric: str) -> np.ndarray:
    if metric == DISCRETE_METRIC:
        same = np.all(z == z_prev, axis=1)
        return np.where(same, 0.0, -1.0)
    return -np.linalg.norm(z - z_prev, axis=1)


def assemble_batch(
    kind: str,
    buffer: ReplayBuffer,
    batch_size: int,
    rng: np.random.Generator,
    stability_cfg: StabilityConfig,
    cache: Optional[_LatentCache] = None,
    oracle_obs: Optional[dict] = None,
    density: Optional[ag.SmirlDensity] = None,
    reward_scale: float = 1.0,
) -> dict:
    """Sample transitions annotated with latents and blended rewards.

    Only interactions with a stored successor are sampled, so the boundary
    transition can bootstrap into the next interaction's first state.
    """
    indices = buffer.stored_indices()
    lo, hi = indices.start, indices.stop - 1  # js with a stored successor
    if hi <= lo:
        raise ConfigError("buffer needs >= 2 interactions before RL updates")
    js = rng.integers(lo, hi, size=batch_size)
    H = len(buffer.get(lo))
    ts = rng.integers(0, H, size=batch_size)

    obs = np.empty((batch_size, buffer.get(lo).states.shape[1]))
    actions = np.empty((batch_size, buffer.get(lo).actions.shape[1]))
    r_task = np.empty(batch_size)
    next_obs = np.empty_like(obs)
    flags = np.zeros(batch_size)
    boundary = ts == H - 1
    for i, (j, t) in enumerate(zip(js, ts)):
        traj = buffer.get(int(j))
        obs[i] = traj.states[t]
        actions[i] = traj.actions[t]
        r_task[i] = traj.rewards[t]
        if traj.change_flags is not None:
            flags[i] = float(traj.change_flags[t])
        if t == H - 1:
            next_obs[i] = buffer.get(int(j) + 1).states[0]
        else:
            next_obs[i] = traj.states[t + 1]

    # conditioning and stability rewards
    partial = stability_cfg.metric == PARTIAL
    r_stable = np.zeros(batch_size)
    if kind in (ag.SILI, ag.STABLE, ag.LILI) and not partial:
        z = cache.get_many(js)
        z_prev = cache.get_many(js - 1)
        z_next = np.where(boundary[:, None], cache.get_many(js + 1), z)
        z_next_prev = np.where(boundary[:, None], z, z_prev)
        if kind == ag.LILI:
            cond, next_cond = z, z_next
        else:
            cond = np.concatenate([z, z_prev], axis=1)
            next_cond = np.concatenate([z_next, z_next_prev], axis=1)
        if kind in (ag.SILI, ag.STABLE):
            r_stable = _pairwise_stability_rewards(z, z_prev, stability_cfg.metric)
    elif kind == ag.ORACLE:
        cond = np.stack([oracle_obs[int(j)][t] for j, t in zip(js, ts)])
        next_cond = np.stack([
            oracle_obs[int(j) + 1][0] if t == H - 1 else oracle_obs[int(j)][t + 1]
            for j, t in zip(js, ts)
        ])
    else:
        cond = np.zeros((batch_size, 0))
        next_cond = cond
        if kind in (ag.SILI, ag.STABLE) and partial:
            r_stable = -flags
        elif kind == ag.SMIRL:
            r_stable = np.array([ag.smirl_reward(density, s) for s in next_obs])

    betas = np.array([effective_beta(kind, stability_cfg, int(j)) for j in js])
    reward = ((1.0 - betas) * r_task + betas * r_stable) * reward_scale
    return {
        "obs": obs, "action": actions, "reward": reward, "next_obs": next_obs,
        "cond": cond, "next_cond": next_cond,
    }


@dataclass
class AgentBundle:
    """Everything needed to act: the agent, its latent model, and the blend."""

    agent: ag.EgoAgent
    latent_model: Optional[lt.LatentModel]
    stability: StabilityConfig
    partial: bool


def _current_latents(bundle: AgentBundle, prev_traj, prev2_traj):
    model = bundle.latent_model
    if model is None:
        return None, None
    sent = model.sentinel()
    z = lt.encode(model, prev_traj)[0] if prev_traj is not None else sent
    z_prev = lt.encode(model, prev2_traj)[0] if prev2_traj is not None else sent
    return z, z_prev


def _rollout(env: HiPMDPEnv, index: int, policy: Callable[[np.ndarray], np.ndarray]):
    obs = env.reset_interaction()
    transitions = []
    for _ in range(env.horizon):
        a = policy(obs)
        obs2, r, flag = env.step(a)
        transitions.append(Transition(obs, a, r, obs2, flag))
        obs = obs2
    return InteractionTrajectory(index, transitions)


def _run_seed(cfg: ExperimentConfig, seed: int):
    """Train one seed; returns (rows, eval_rows, bundle, env)."""
    kind = cfg.agent
    ss = np.random.SeedSequence(seed)
    r_env, r_warm, r_act, r_rep, r_rl, r_init = [
        np.random.default_rng(s) for s in ss.spawn(6)
    ]
    env = make_env(cfg.env, cfg.env_overrides, seed=int(r_env.integers(2 ** 31)))
    partial = cfg.latent.mode == "partial"
    uses_latent = kind in (ag.SILI, ag.STABLE, ag.LILI) and not partial
    model = None
    if uses_latent:
        mode = DISCRETE if cfg.latent.mode == "discrete" else CONTINUOUS
        model = lt.LatentModel.build(
            mode, cfg.latent.k, env.obs_dim, env.action_dim, env.horizon,
            hidden=cfg.latent.hidden, temperature=cfg.latent.temperature,
            lr=cfg.latent.lr, logit_bound=cfg.latent.logit_bound, rng=r_init,
        )
    agent = ag.make_agent(kind, env, cfg.latent.k, cfg.sac, partial=partial, rng=r_init)
    bundle = AgentBundle(agent, model, cfg.stability, partial)
    buffer = ReplayBuffer(cfg.buffer_capacity, rng_seed=seed)
    cache = _LatentCache(model, buffer) if uses_latent else None
    density = ag.SmirlDensity(env.obs_dim) if kind == ag.SMIRL else None
    oracle_obs: dict[int, np.ndarray] = {}

    H = env.horizon
    rows, eval_rows = [], []
    prev_traj = prev2_traj = None
    prev_strat = None
    n_rl = max(0, int(round(H * cfg.sac.updates_per_step)))

    for j in range(1, cfg.interactions + 1):
        beta_j = effective_beta(kind, cfg.stability, j)
        if uses_latent:
            z = cache.latent(j)
            z_prev = cache.latent(j - 1)
        else:
            z = z_prev = None
        obs = env.reset_interaction()
        strat = env.strategy_id()
        transitions = []
        ovecs = np.empty((H, env.oracle_dim)) if kind == ag.ORACLE else None
        for t in range(H):
            if kind == ag.ORACLE:
                zo = ag.oracle_observation(env)
                ovecs[t] = zo.vector
            if j <= cfg.warmup_interactions:
                a = r_warm.uniform(-env.action_bound, env.action_bound)
            elif kind == ag.ORACLE:
                a = agent.act(obs, zo, zo, False, r_act)
            else:
                a = agent.act(obs, z, z_prev, False, r_act)
            obs2, r, flag = env.step(a)
            transitions.append(Transition(obs, a, r, obs2, flag))
            if density is not None:
                density.update(obs2)
            obs = obs2
        traj = InteractionTrajectory(j, transitions)

        if uses_latent and kind in (ag.SILI, ag.STABLE):
            stab_sum = H * stability_reward(z, z_prev, cfg.stability)
        elif partial:
            stab_sum = sum(change_flag_reward(bool(f))
                           for f in (traj.change_flags
                                     if traj.change_flags is not None else []))
        else:
            stab_sum = 0.0 if (prev_strat is None or strat == prev_strat) else -float(H)
        if traj.change_flags is not None:
            changed = bool(traj.change_flags.any())
        else:
            changed = prev_strat is not None and strat != prev_strat

        buffer.add(traj)
        if kind == ag.ORACLE:
            oracle_obs[j] = ovecs
            if j - cfg.buffer_capacity in oracle_obs:
                del oracle_obs[j - cfg.buffer_capacity]
        env.end_interaction(traj)
        prev_strat = strat
        prev2_traj, prev_traj = prev_traj, traj

        # the encoder/decoder train from the very start (they never touch the
        # policy), so RL begins with informative latents once warmup ends
        rep_live = (cfg.rep.freeze_after is None or j <= cfg.rep.freeze_after)
        if uses_latent and cfg.rep.updates_per_interaction > 0 and rep_live \
                and len(buffer) >= 2:
            lt.train_representation(model, buffer, cfg.rep.updates_per_interaction,
                                    cfg.rep.batch_size, r_rep)
        if j > cfg.warmup_interactions and len(buffer) >= 2:
            for _ in range(n_rl):
                batch = assemble_batch(
                    kind, buffer, cfg.sac.batch_size, r_rl, cfg.stability,
                    cache=cache, oracle_obs=oracle_obs, density=density,
                    reward_scale=cfg.sac.reward_scale,
                )
                agent.ac.rl_update(batch, r_rl)

        rows.append(MetricsRow(seed, j, float(traj.rewards.sum()), float(stab_sum),
                               beta_j, changed))
        if cfg.eval_every is not None and j % cfg.eval_every == 0:
            res = evaluate(bundle, env, cfg.eval_episodes, seed,
                           prev_traj=prev_traj, prev2_traj=prev2_traj,
                           start_index=j + 1)
            eval_rows.append((seed, j, res.mean_task, res.mean_stability))
            prev2_traj, prev_traj = res.prev2_traj, res.prev_traj
    return rows, eval_rows, bundle, env


@dataclass
class EvalResult:
    mean_task: float
    mean_stability: float
    task_returns: list
    stability_returns: list
    prev_traj: Optional[InteractionTrajectory] = None
    prev2_traj: Optional[InteractionTrajectory] = None


def evaluate(bundle: AgentBundle, env: HiPMDPEnv, episodes: int, seed: int,
             prev_traj=None, prev2_traj=None, start_index: int = 1) -> EvalResult:
    """Deterministic-policy rollouts continuing the env's strategy state."""
    if episodes == 0:
        return EvalResult(0.0, 0.0, [], [], prev_traj, prev2_traj)
    rng = np.random.default_rng(seed)
    task_returns, stab_returns = [], []
    prev_strat = None
    for e in range(episodes):
        z, z_prev = _current_latents(bundle, prev_traj, prev2_traj)
        index = start_index + e
        if bundle.agent.kind == ag.ORACLE:
            def policy(o):
                zo = ag.oracle_observation(env)
                return bundle.agent.act(o, zo, zo, True, rng)
        else:
            def policy(o, z=z, z_prev=z_prev):
                return bundle.agent.act(o, z, z_prev, True, rng)
        traj = _rollout(env, index, policy)
        strat = env.strategy_id()
        env.end_interaction(traj)
        task_returns.append(float(traj.rewards.sum()))
        if bundle.latent_model is not None and bundle.agent.kind in (ag.SILI, ag.STABLE):
            stab_returns.append(env.horizon * stability_reward(z, z_prev, bundle.stability))
        elif bundle.partial and traj.change_flags is not None:
            stab_returns.append(float(-traj.change_flags.sum()))
        else:
            stab_returns.append(
                0.0 if (prev_strat is None or strat == prev_strat) else -float(env.horizon)
            )
        prev_strat = strat
        prev2_traj, prev_traj = prev_traj, traj
    return EvalResult(float(np.mean(task_returns)), float(np.mean(stab_returns)),
                      task_returns, stab_returns, prev_traj, prev2_traj)


def run_experiment(cfg: ExperimentConfig, save_outputs: bool = True) -> MetricsLog:
    """Train every seed; per-seed failures are recorded and do not stop others."""
    log = MetricsLog(config=cfg.to_dict())
    for seed in cfg.seeds:
        try:
            rows, eval_rows, bundle, env = _run_seed(cfg, seed)
        except Exception as exc:  # noqa: BLE001 - diagnostic record per spec
            log.errors.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
            continue
        log.rows.extend(rows)
        log.eval_rows.extend(eval_rows)
        if save_outputs:
            save_checkpoint(os.path.join(cfg.outdir, f"checkpoint_seed{seed}"),
                            cfg, bundle)
    if save_outputs:
        emit_outputs(log, cfg.outdir)
    return log


def final_window_stats(log: MetricsLog, window: int = 100) -> dict:
    """Per-seed means over the last `window` interactions, averaged across seeds."""
    task, stab, changed = [], [], []
    for seed in log.seeds():
        rows = sorted((r for r in log.rows if r.seed == seed),
                      key=lambda r: r.interaction)[-window:]
        task.append(np.mean([r.task_reward for r in rows]))
        stab.append(np.mean([r.stability_reward for r in rows]))
        changed.append(np.mean([float(r.strategy_changed) for r in rows]))
    return {
        "task_reward": float(np.mean(task)),
        "stability_reward": float(np.mean(stab)),
        "changed_fraction": float(np.mean(changed)),
    }


def sweep_beta(cfg: ExperimentConfig, betas: Sequence[float],
               window: int = 100) -> list[dict]:
    """run_experiment per beta; returns final-window reward rows per beta."""
    results = []
    for beta in betas:
        sub = dataclasses.replace(
            cfg,
            stability=dataclasses.replace(cfg.stability, beta=float(beta)),
            outdir=os.path.join(cfg.outdir, f"beta_{beta:g}"),
        )
        try:
            log = run_experiment(sub)
            stats = final_window_stats(log, window=window)
            results.append({"beta": float(beta), "error": "", **stats})
        except Exception as exc:  # noqa: BLE001 - sweep continues per spec
            results.append({"beta": float(beta), "task_reward": float("nan"),
                            "stability_reward": float("nan"),
                            "changed_fraction": float("nan"),
                            "error": f"{type(exc).__name__}: {exc}"})
    os.makedirs(cfg.outdir, exist_ok=True)
    with open(os.path.join(cfg.outdir, "beta_sweep.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["beta", "task_reward",
                                                "stability_reward",
                                                "changed_fraction", "error"])
        writer.writeheader()
        writer.writerows(results)
    return results


def smooth(values: np.ndarray, window: int = 20) -> np.ndarray:
    """Trailing moving average; identity on constant series."""
    out = np.empty(len(values), dtype=np.float64)
    for i in range(len(values)):
        out[i] = values[max(0, i - window + 1):i + 1].mean()
    return out


def emit_outputs(log: MetricsLog, outdir) -> list[str]:
    """Write metrics.csv, config.json, and reward-curve SVGs."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    csv_path = os.path.join(outdir, "metrics.csv")
    log.to_csv(csv_path)
    paths.append(csv_path)
    cfg_path = os.path.join(outdir, "config.json")
    with open(cfg_path, "w") as fh:
        json.dump(log.config, fh, indent=2, sort_keys=True)
    paths.append(cfg_path)
    if log.errors:
        err_path = os.path.join(outdir, "errors.json")
        with open(err_path, "w") as fh:
            json.dump(log.errors, fh, indent=2)
        paths.append(err_path)
    if log.eval_rows:
        eval_path = os.path.join(outdir, "eval.csv")
        with open(eval_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("seed", "interaction", "mean_task", "mean_stability"))
            for seed, j, mt, ms in log.eval_rows:
                writer.writerow([seed, j, repr(mt), repr(ms)])
        paths.append(eval_path)
    if log.rows:
        paths.extend(_plot_curves(log, outdir))
    return paths


def _plot_curves(log: MetricsLog, outdir) -> list[str]:
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "sili"
    import matplotlib.pyplot as plt

    seeds = log.seeds()
    by_seed = {
        s: sorted((r for r in log.rows if r.seed == s), key=lambda r: r.interaction)
        for s in seeds
    }
    n = min(len(v) for v in by_seed.values())
    xs = np.arange(1, n + 1)
    paths = []
    for name, getter in (("task_reward", lambda r: r.task_reward),
                         ("stability_reward", lambda r: r.stability_reward)):
        series = np.stack([
            smooth(np.array([getter(r) for r in by_seed[s][:n]])) for s in seeds
        ])
        fig, axis = plt.subplots(figsize=(6, 4))
        axis.plot(xs, series.mean(axis=0), label="mean")
        axis.fill_between(xs, series.min(axis=0), series.max(axis=0), alpha=0.25,
                          label="range")
        axis.set_xlabel("interaction")
        axis.set_ylabel(name.replace("_", " "))
        axis.legend()
        fig.tight_layout()
        path = os.path.join(outdir, f"{name}.svg")
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

CHECKPOINT_MANIFEST = "manifest.json"


def save_checkpoint(outdir, cfg: ExperimentConfig, bundle: AgentBundle) -> None:
    os.makedirs(outdir, exist_ok=True)
    ac = bundle.agent.ac
    nets = {"actor": ac.actor, "q1": ac.q1, "q2": ac.q2,
            "q1_target": ac.q1_target, "q2_target": ac.q2_target}
    if bundle.latent_model is not None:
        nets["encoder"] = bundle.latent_model.encoder
        nets["decoder"] = bundle.latent_model.decoder
    for name, net in nets.items():
        net.save(os.path.join(outdir, f"{name}.json"))
    manifest = {
        "format": "sili-checkpoint-v1",
        "agent": bundle.agent.kind,
        "config": cfg.to_dict(),
        "log_alpha": float(ac.log_alpha[0]),
        "nets": sorted(nets),
    }
    with open(os.path.join(outdir, CHECKPOINT_MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_checkpoint(outdir):
    """Returns (ExperimentConfig, AgentBundle) for evaluation."""
    from .nn import DenseNet

    with open(os.path.join(outdir, CHECKPOINT_MANIFEST)) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "sili-checkpoint-v1":
        raise ConfigError(f"unsupported checkpoint format {manifest.get('format')!r}")
    cfg = ExperimentConfig.from_dict(manifest["config"])
    env = make_env(cfg.env, cfg.env_overrides, seed=0)
    kind = manifest["agent"]
    partial = cfg.latent.mode == "partial"
    agent = ag.make_agent(kind, env, cfg.latent.k, cfg.sac, partial=partial)
    ac = agent.ac
    ac.actor = DenseNet.load(os.path.join(outdir, "actor.json"))
    ac.q1 = DenseNet.load(os.path.join(outdir, "q1.json"))
    ac.q2 = DenseNet.load(os.path.join(outdir, "q2.json"))
    ac.q1_target = DenseNet.load(os.path.join(outdir, "q1_target.json"))
    ac.q2_target = DenseNet.load(os.path.join(outdir, "q2_target.json"))
    ac.log_alpha[0] = manifest["log_alpha"]
    model = None
    if "encoder" in manifest["nets"]:
        mode = DISCRETE if cfg.latent.mode == "discrete" else CONTINUOUS
        model = lt.LatentModel.build(mode, cfg.latent.k, env.obs_dim, env.action_dim,
                                     env.horizon, hidden=cfg.latent.hidden,
                                     temperature=cfg.latent.temperature,
                                     logit_bound=cfg.latent.logit_bound)
        model.encoder = DenseNet.load(os.path.join(outdir, "encoder.json"))
        model.decoder = DenseNet.load(os.path.join(outdir, "decoder.json"))
    return cfg, AgentBundle(agent, model, cfg.stability, partial)
