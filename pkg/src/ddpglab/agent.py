"""Actor-critic learner: action selection, Bellman targets, importance-
weighted critic regression, deterministic policy-gradient actor updates and
soft target maintenance.

One ``train_step`` runs, in order: sample, targets, critic update, actor
update, soft updates of both target networks, then batch priority refresh
from the pre-update TD errors. With a uniform buffer (alpha = 0) and
importance weights disabled this is plain DDPG.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .nets import (
    AdamState,
    LayerGrads,
    Network,
    adam_step,
    mlp,
    read_network,
    soft_update,
    write_network,
)
from .noise import AdaptiveParamNoise
from .replay import PrioritizedBuffer, SampledBatch


@dataclass
class TrainStepReport:
    """Diagnostics from one training step."""

    critic_loss: float
    actor_objective: float
    td_errors: np.ndarray
    sigma: float | None = None


def default_networks(state_dim: int, action_dim: int, hidden, rng,
                     normalize: bool = False):
    """Actor (tanh head) and critic (linear head) with shared layout."""
    actor = mlp(
        state_dim, hidden, action_dim, rng,
        output_activation="tanh", normalize=normalize,
    )
    critic = mlp(
        state_dim + action_dim, hidden, 1, rng,
        output_activation="linear", normalize=normalize,
    )
    return actor, critic


class Agent:
    """DDPG learner with target networks and optional importance weights.

    Target networks start as exact copies of the live ones and are only
    ever moved by soft updates; their Adam states exist but never step.
    """

    def __init__(self, actor: Network, critic: Network, *,
                 action_low, action_high, gamma: float = 0.99,
                 tau: float = 0.001, batch_size: int = 64,
                 actor_lr: float = 1e-4, critic_lr: float = 1e-3,
                 use_is_weights: bool = True, warmup: int = 1000):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.actor = actor
        self.critic = critic
        self.target_actor = actor.copy()
        self.target_critic = critic.copy()
        self.actor_opt = AdamState(actor, actor_lr)
        self.critic_opt = AdamState(critic, critic_lr)
        self.target_actor_opt = AdamState(self.target_actor, actor_lr)
        self.target_critic_opt = AdamState(self.target_critic, critic_lr)
        self.gamma = gamma
        self.tau = tau
        self.batch_size = batch_size
        self.use_is_weights = use_is_weights
        self.warmup = warmup
        self.action_low = np.asarray(action_low, dtype=np.float64)
        self.action_high = np.asarray(action_high, dtype=np.float64)
        if self.action_low.shape != self.action_high.shape:
            raise ValueError("action bound shapes differ")
        if np.any(self.action_low >= self.action_high):
            raise ValueError("action_low must be < action_high elementwise")
        self.action_scale = (self.action_high - self.action_low) / 2.0
        self.action_center = (self.action_high + self.action_low) / 2.0
        self.state_dim = actor.in_dim
        self.action_dim = actor.out_dim

    def policy(self, net: Network, states) -> np.ndarray:
        """Map tanh network output onto the action interval."""
        return self.action_center + self.action_scale * net.forward(states)

    def select_action(self, behavior_actor: Network, s, noise, rng) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if not np.isfinite(s).all():
            raise ValueError("non-finite state passed to select_action")
        a = self.policy(behavior_actor, s)
        if not isinstance(noise, AdaptiveParamNoise):
            a = a + noise.action_term(self.action_dim, rng)
        return np.clip(a, self.action_low, self.action_high)

    def compute_targets(self, batch: SampledBatch) -> np.ndarray:
        """One-step bootstrap through the target networks only."""
        if len(batch) == 0:
            raise ValueError("empty batch")
        a_next = self.policy(self.target_actor, batch.next_states)
        q_in = np.concatenate([batch.next_states, a_next], axis=1)
        q_next = self.target_critic.forward(q_in)[:, 0]
        not_done = 1.0 - batch.dones.astype(np.float64)
        return batch.rewards + self.gamma * not_done * q_next

    def _batch_weights(self, batch: SampledBatch) -> np.ndarray:
        if self.use_is_weights:
            return batch.is_weights
        return np.ones(len(batch))

    def critic_loss_and_grads(self, states, actions, y, weights):
        """TD errors, weighted MSE loss, and its exact parameter gradient."""
        x = np.concatenate([states, actions], axis=1)
        q_out, caches = self.critic.forward_with_caches(x)
        td = y - q_out[:, 0]
        n = len(td)
        loss = float(np.mean(weights * td * td))
        upstream = (-2.0 * weights * td / n)[:, None]
        grads, _ = self.critic.backward_from_caches(caches, upstream)
        return td, loss, grads

    def critic_update(self, batch: SampledBatch, y: np.ndarray):
        """One Adam step on the critic; returns pre-update TD errors and loss."""
        y = np.asarray(y, dtype=np.float64)
        if not np.isfinite(y).all():
            raise ValueError("non-finite targets")
        td, loss, grads = self.critic_loss_and_grads(
            batch.states, batch.actions, y, self._batch_weights(batch)
        )
        if not np.isfinite(loss):
            raise ValueError(
                f"non-finite critic loss {loss}; td range "
                f"[{td.min()}, {td.max()}]"
            )
        adam_step(self.critic_opt, self.critic, grads)
        return td, loss

    def actor_objective_and_grads(self, states):
        """Mean critic value of on-policy actions and its actor gradient.

        Chains the critic's action sensitivity at a = policy(s) through the
        actor network; critic parameters receive no update here.
        """
        states = np.asarray(states, dtype=np.float64)
        out, actor_caches = self.actor.forward_with_caches(states)
        actions = self.action_center + self.action_scale * out
        x = np.concatenate([states, actions], axis=1)
        q_out, critic_caches = self.critic.forward_with_caches(x)
        objective = float(np.mean(q_out[:, 0]))
        n = len(states)
        _, dx = self.critic.backward_from_caches(
            critic_caches, np.full((n, 1), 1.0 / n)
        )
        d_action = dx[:, self.state_dim :] * self.action_scale
        grads, _ = self.actor.backward_from_caches(actor_caches, d_action)
        return objective, grads

    def actor_update(self, batch: SampledBatch) -> float:
        """One ascent step on the policy objective; returns the pre-step value."""
        if len(batch) == 0:
            raise ValueError("empty batch")
        objective, grads = self.actor_objective_and_grads(batch.states)
        descent = [
            LayerGrads(
                weight=-g.weight,
                bias=-g.bias,
                ln_gain=None if g.ln_gain is None else -g.ln_gain,
                ln_offset=None if g.ln_offset is None else -g.ln_offset,
            )
            for g in grads
        ]
        adam_step(self.actor_opt, self.actor, descent)
        return objective

    def train_step(self, buf: PrioritizedBuffer, beta: float,
                   rng: np.random.Generator) -> TrainStepReport:
        if len(buf) < self.warmup:
            raise ValueError(
                f"buffer holds {len(buf)} transitions, below warmup {self.warmup}"
            )
        batch = buf.sample(self.batch_size, beta, rng)
        y = self.compute_targets(batch)
        td, loss = self.critic_update(batch, y)
        objective = self.actor_update(batch)
        soft_update(self.target_critic, self.critic, self.tau)
        soft_update(self.target_actor, self.actor, self.tau)
        buf.update_priorities(batch.indices, td)
        return TrainStepReport(critic_loss=loss, actor_objective=objective,
                               td_errors=td)

    # -- checkpoint ------------------------------------------------------------

    def save(self, fh: TextIO) -> None:
        fh.write("agent v1\n")
        fh.write(f"gamma={float(self.gamma).hex()}\n")
        fh.write(f"tau={float(self.tau).hex()}\n")
        fh.write(f"batch_size={self.batch_size}\n")
        fh.write(f"warmup={self.warmup}\n")
        fh.write(f"use_is_weights={int(self.use_is_weights)}\n")
        fh.write(f"actor_lr={float(self.actor_opt.lr).hex()}\n")
        fh.write(f"critic_lr={float(self.critic_opt.lr).hex()}\n")
        fh.write("action_low " + " ".join(v.hex() for v in self.action_low) + "\n")
        fh.write("action_high " + " ".join(v.hex() for v in self.action_high) + "\n")
        for name, net in [
            ("actor", self.actor),
            ("critic", self.critic),
            ("target_actor", self.target_actor),
            ("target_critic", self.target_critic),
        ]:
            fh.write(f"[{name}]\n")
            write_network(net, fh)

    @classmethod
    def load(cls, fh: TextIO) -> "Agent":
        if fh.readline().strip() != "agent v1":
            raise ValueError("bad agent checkpoint header")
        scalars = {}
        for _ in range(7):
            key, val = fh.readline().strip().split("=", 1)
            scalars[key] = val
        low_line = fh.readline().split()
        high_line = fh.readline().split()
        if low_line[0] != "action_low" or high_line[0] != "action_high":
            raise ValueError("bad action bound lines")
        nets = {}
        for name in ("actor", "critic", "target_actor", "target_critic"):
            if fh.readline().strip() != f"[{name}]":
                raise ValueError(f"missing [{name}] section")
            nets[name] = read_network(fh)
        agent = cls(
            nets["actor"],
            nets["critic"],
            action_low=[float.fromhex(v) for v in low_line[1:]],
            action_high=[float.fromhex(v) for v in high_line[1:]],
            gamma=float.fromhex(scalars["gamma"]),
            tau=float.fromhex(scalars["tau"]),
            batch_size=int(scalars["batch_size"]),
            actor_lr=float.fromhex(scalars["actor_lr"]),
            critic_lr=float.fromhex(scalars["critic_lr"]),
            use_is_weights=scalars["use_is_weights"] == "1",
            warmup=int(scalars["warmup"]),
        )
        agent.target_actor = nets["target_actor"]
        agent.target_critic = nets["target_critic"]
        return agent

    def save_path(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            self.save(fh)

    @classmethod
    def load_path(cls, path) -> "Agent":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.load(fh)
