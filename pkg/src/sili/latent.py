"""Opponent strategy representation learning.

An encoder maps the previous interaction's flattened (s, a, r, s') tuples to a
k-dimensional latent; a decoder reconstructs next states and task rewards from
(s, a, z). Both are trained jointly by squared-error reconstruction (Gaussian
max-likelihood up to constants). Discrete latents use the straight-through
Gumbel estimator: hard one-hot forward, tempered-softmax gradients backward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    CONTINUOUS,
    DISCRETE,
    InteractionTrajectory,
    LatentStrategy,
    ReplayBuffer,
    sample_consecutive_pairs,
)
from .errors import EmptyBufferError, InvalidArgumentError
from .nn import Adam, DenseNet


def gumbel_st(
    logits: np.ndarray,
    temperature: float,
    rng: Optional[np.random.Generator],
    gumbel_noise: Optional[np.ndarray] = None,
):
    """Straight-through Gumbel sample.

    Returns (hard, soft): hard is the one-hot at the argmax of the perturbed
    logits (lowest index wins ties), soft is the tempered softmax of the same
    perturbed logits. Gradients are meant to flow through soft; hard is soft
    plus a constant. If rng is None and no noise is given, the noise is zero
    (deterministic argmax).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InvalidArgumentError("logits must be finite")
    if temperature <= 0:
        raise InvalidArgumentError(f"temperature must be > 0, got {temperature}")
    if gumbel_noise is None:
        if rng is None:
            gumbel_noise = np.zeros_like(logits)
        else:
            u = rng.random(logits.shape)
            gumbel_noise = -np.log(-np.log(u))
    perturbed = logits + gumbel_noise
    scaled = perturbed / temperature
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(scaled)
    soft = e / e.sum(axis=-1, keepdims=True)
    idx = perturbed.argmax(axis=-1)
    hard = np.zeros_like(soft)
    if soft.ndim == 1:
        hard[idx] = 1.0
    else:
        hard[np.arange(soft.shape[0]), idx] = 1.0
    return hard, soft


def gumbel_st_backward(raw_logits: np.ndarray, soft: np.ndarray, dz: np.ndarray,
                       temperature: float) -> np.ndarray:
    """Straight-through gradient w.r.t. the raw encoder logits.

    The hard sample is treated as soft plus a constant, so the upstream
    gradient dz flows through soft = softmax((log_softmax(raw) + g) / lambda).
    """
    dp = soft * (dz - (dz * soft).sum(axis=-1, keepdims=True))
    dlogp = dp / temperature
    p_raw = np.exp(_log_softmax(np.asarray(raw_logits, dtype=np.float64)))
    return dlogp - p_raw * dlogp.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class LatentModel:
    """Encoder/decoder pair with its optimizers and latent-space mode."""

    encoder: DenseNet
    decoder: DenseNet
    mode: str
    k: int
    state_dim: int
    action_dim: int
    horizon: int
    temperature: float = 1.0
    logit_bound: Optional[float] = 3.0
    encoder_opt: Adam = field(init=False)
    decoder_opt: Adam = field(init=False)

    def __post_init__(self):
        if self.mode not in (CONTINUOUS, DISCRETE):
            raise InvalidArgumentError(f"unknown latent mode {self.mode!r}")
        if self.temperature <= 0:
            raise InvalidArgumentError("temperature must be > 0")
        if self.logit_bound is not None and self.logit_bound <= 0:
            raise InvalidArgumentError("logit_bound must be > 0 or None")
        dec_in = self.state_dim + self.action_dim + self.k
        if self.decoder.in_dim != dec_in:
            raise InvalidArgumentError(
                f"decoder input dim {self.decoder.in_dim} != state+action+k = {dec_in}"
            )
        self.encoder_opt = Adam(self.encoder.params())
        self.decoder_opt = Adam(self.decoder.params())
        # bumped whenever encoder parameters change; lets callers cache encodings
        self.version = 0

    @classmethod
    def build(
        cls,
        mode: str,
        k: int,
        state_dim: int,
        action_dim: int,
        horizon: int,
        hidden: Sequence[int] = (256, 256),
        temperature: float = 1.0,
        lr: float = 3e-4,
        logit_bound: Optional[float] = 3.0,
        rng: Optional[np.random.Generator] = None,
    ) -> "LatentModel":
        rng = rng if rng is not None else np.random.default_rng(0)
        enc_in = horizon * (2 * state_dim + action_dim + 1)
        encoder = DenseNet.mlp(enc_in, k, hidden=hidden, rng=rng)
        decoder = DenseNet.mlp(state_dim + action_dim + k, state_dim + 1, hidden=hidden, rng=rng)
        model = cls(encoder, decoder, mode, k, state_dim, action_dim, horizon,
                    temperature=temperature, logit_bound=logit_bound)
        model.encoder_opt.lr = lr
        model.decoder_opt.lr = lr
        return model

    @property
    def encoder_in_dim(self) -> int:
        return self.encoder.in_dim

    def sentinel(self) -> LatentStrategy:
        """Latent used where no previous trajectory exists (interaction 1)."""
        if self.mode == DISCRETE:
            return LatentStrategy.one_hot(0, self.k)
        return LatentStrategy.continuous(np.zeros(self.k))


def encoder_input(model: LatentModel, traj: InteractionTrajectory) -> np.ndarray:
    """Flatten a trajectory into the encoder's (s, a, r, s') time-ordered vector."""
    if len(traj) != model.horizon:
        raise InvalidArgumentError(
            f"trajectory length {len(traj)} != horizon {model.horizon}"
        )
    if traj.states.shape[1] != model.state_dim or traj.actions.shape[1] != model.action_dim:
        raise InvalidArgumentError("trajectory dims do not match the latent model")
    per_step = np.concatenate(
        [traj.states, traj.actions, traj.rewards[:, None], traj.next_states], axis=1
    )
    return per_step.reshape(-1)


def squash_logits(model: LatentModel, raw: np.ndarray):
    """Bound raw encoder logits with a saturating tanh (discrete mode).

    Keeping the logits in a fixed range stops the softmax from saturating, so
    the Gumbel noise keeps exploring alternative clusters throughout training.
    The squash is monotone, so argmax-based encodings are unchanged. Returns
    (bounded_logits, elementwise_backward_factor); the factor is None when the
    squash is disabled or the mode is continuous.
    """
    if model.mode != DISCRETE or model.logit_bound is None:
        return raw, None
    t = np.tanh(raw / model.logit_bound)
    return model.logit_bound * t, 1.0 - t ** 2


def encode_batch(model: LatentModel, inputs: np.ndarray,
                 rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Latent vectors (B, k) for a batch of flattened trajectories; no caches."""
    raw = model.encoder.forward(inputs)
    if model.mode == CONTINUOUS:
        return raw
    bounded, _ = squash_logits(model, raw)
    hard, _ = gumbel_st(_log_softmax(bounded), model.temperature, rng)
    return hard


def encode(model: LatentModel, tau_prev: InteractionTrajectory,
           rng: Optional[np.random.Generator] = None):
    """Encode the previous trajectory into a LatentStrategy.

    Continuous mode returns the head output directly (deterministic). Discrete
    mode returns the straight-through sample; pass rng=None for the noise-free
    argmax latent. Also returns the raw encoder output.
    """
    raw = model.encoder.forward(encoder_input(model, tau_prev))
    if model.mode == CONTINUOUS:
        return LatentStrategy.continuous(raw), raw
    bounded, _ = squash_logits(model, raw)
    hard, _ = gumbel_st(_log_softmax(bounded), model.temperature, rng)
    return LatentStrategy(DISCRETE, vector=hard), raw


def decode(model: LatentModel, state: np.ndarray, action: np.ndarray, z: LatentStrategy):
    """Predicted (next_state, task_reward) mean for one (s, a, z)."""
    state = np.asarray(state, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    if state.shape != (model.state_dim,) or action.shape != (model.action_dim,):
        raise InvalidArgumentError("state/action dims do not match the latent model")
    if z.vector is None or z.vector.shape != (model.k,):
        raise InvalidArgumentError("latent dim does not match the model")
    out = model.decoder.forward(np.concatenate([state, action, z.vector]))
    return out[:-1], float(out[-1])


def _batch_arrays(model: LatentModel, pairs):
    """Stack a batch of (tau_prev, tau) pairs into dense training arrays."""
    enc_in = np.stack([encoder_input(model, prev) for prev, _ in pairs])
    states = np.stack([cur.states for _, cur in pairs])        # (B, H, ds)
    actions = np.stack([cur.actions for _, cur in pairs])      # (B, H, da)
    next_states = np.stack([cur.next_states for _, cur in pairs])
    rewards = np.stack([cur.rewards for _, cur in pairs])      # (B, H)
    return enc_in, states, actions, next_states, rewards


def _loss_and_grads(model: LatentModel, pairs, rng: Optional[np.random.Generator],
                    compute_grads: bool = True):
    if not pairs:
        raise InvalidArgumentError("batch must be nonempty")
    enc_in, states, actions, next_states, rewards = _batch_arrays(model, pairs)
    B, H = rewards.shape
    raw, enc_cache = model.encoder.forward_cached(enc_in)

    if model.mode == DISCRETE:
        bounded, squash_back = squash_logits(model, raw)
        logp = _log_softmax(bounded)
        noise = (np.zeros_like(logp) if rng is None
                 else -np.log(-np.log(rng.random(logp.shape))))
        hard, soft = gumbel_st(logp, model.temperature, rng=None, gumbel_noise=noise)
        z = hard
    else:
        z = raw

    dec_in = np.concatenate(
        [states.reshape(B * H, -1), actions.reshape(B * H, -1),
         np.repeat(z, H, axis=0)], axis=1
    )
    pred, dec_cache = model.decoder.forward_cached(dec_in)
    target = np.concatenate(
        [next_states.reshape(B * H, -1), rewards.reshape(B * H, 1)], axis=1
    )
    resid = pred - target
    loss = float((resid ** 2).sum(axis=1).mean())
    if not compute_grads:
        return loss, None, None

    dout = 2.0 * resid / (B * H)
    dec_grads, d_dec_in = model.decoder.backward_cached(dec_cache, dout)
    dz = d_dec_in[:, model.state_dim + model.action_dim:]
    dz = dz.reshape(B, H, model.k).sum(axis=1)

    if model.mode == DISCRETE:
        # the component of dz shared by the whole batch pushes every sample
        # toward the same cluster; removing it prevents cluster collapse
        if dz.shape[0] > 1:
            dz = dz - dz.mean(axis=0, keepdims=True)
        draw = gumbel_st_backward(bounded, soft, dz, model.temperature)
        if squash_back is not None:
            draw = draw * squash_back
    else:
        draw = dz
    enc_grads, _ = model.encoder.backward_cached(enc_cache, draw)
    return loss, enc_grads, dec_grads


def representation_loss(model: LatentModel, pairs,
                        rng: Optional[np.random.Generator] = None) -> float:
    """Mean squared next-state + reward reconstruction error over the batch."""
    loss, _, _ = _loss_and_grads(model, pairs, rng, compute_grads=False)
    return loss


def train_representation(model: LatentModel, buffer: ReplayBuffer, steps: int,
                         batch_size: int, rng: np.random.Generator) -> list[float]:
    """Run `steps` joint encoder/decoder updates; returns the per-step losses."""
    if steps < 0:
        raise InvalidArgumentError("steps must be >= 0")
    if steps > 0 and len(buffer) < 2:
        raise EmptyBufferError("need >= 2 stored interactions to train")
    history: list[float] = []
    for _ in range(steps):
        pairs = sample_consecutive_pairs(buffer, batch_size, rng)
        loss, enc_grads, dec_grads = _loss_and_grads(model, pairs, rng)
        model.encoder_opt.step(model.encoder.params(), enc_grads)
        model.decoder_opt.step(model.decoder.params(), dec_grads)
        model.version += 1
        history.append(loss)
    return history
