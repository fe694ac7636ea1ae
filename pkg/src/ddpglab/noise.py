"""Exploration strategies: none, Gaussian, Ornstein-Uhlenbeck, adaptive
parameter-space noise.

Action-space strategies contribute an additive term per step; the
parameter-space strategy instead supplies a perturbed copy of the actor,
re-sampled at every episode start, with its noise scale adapted toward a
target action-space distance.
"""

from __future__ import annotations

import numpy as np

from .nets import Network, perturb


class NoNoise:
    """Pure greedy behavior; contributes exact zeros and consumes no RNG."""

    def on_episode_start(self, actor: Network, rng: np.random.Generator) -> None:
        pass

    def action_term(self, action_dim: int, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(action_dim)

    def behavior_actor(self, actor: Network) -> Network:
        return actor


class GaussianNoise:
    """Uncorrelated additive N(0, sigma^2) action noise."""

    def __init__(self, sigma):
        sigma = np.asarray(sigma, dtype=np.float64)
        if np.any(sigma < 0):
            raise ValueError("sigma must be nonnegative")
        self.sigma = sigma

    def on_episode_start(self, actor: Network, rng: np.random.Generator) -> None:
        pass

    def action_term(self, action_dim: int, rng: np.random.Generator) -> np.ndarray:
        return self.sigma * rng.standard_normal(action_dim)

    def behavior_actor(self, actor: Network) -> Network:
        return actor


class OUNoise:
    """Mean-reverting (Ornstein-Uhlenbeck) temporally correlated noise.

    Per step and dimension: state += theta * (0 - state) + sigma * N(0,1),
    returned after the update. State resets to zero each episode.
    """

    def __init__(self, action_dim: int, theta: float = 0.15, sigma: float = 0.2):
        if theta < 0 or sigma < 0:
            raise ValueError("theta and sigma must be nonnegative")
        self.theta = theta
        self.sigma = sigma
        self.state = np.zeros(action_dim)

    def on_episode_start(self, actor: Network, rng: np.random.Generator) -> None:
        self.state = np.zeros_like(self.state)

    def action_term(self, action_dim: int, rng: np.random.Generator) -> np.ndarray:
        if action_dim != self.state.shape[0]:
            raise ValueError("action_dim does not match OU state dimension")
        self.state = self.state + self.theta * (0.0 - self.state) \
            + self.sigma * rng.standard_normal(action_dim)
        return self.state.copy()

    def behavior_actor(self, actor: Network) -> Network:
        return actor


class AdaptiveParamNoise:
    """Parameter-space noise with a multiplicatively adapted scale.

    A perturbed copy of the actor is drawn at each episode start and acts
    for the whole episode. After measuring how far the perturbed policy's
    actions drifted from the unperturbed ones, ``adapt`` shrinks sigma when
    the drift exceeds the target and grows it otherwise (ties grow).
    """

    def __init__(self, sigma: float = 0.1, sigma_min: float = 1e-4,
                 sigma_max: float = 1.0, adapt_factor: float = 1.01,
                 target_distance: float = 0.1):
        if not sigma_min <= sigma <= sigma_max:
            raise ValueError("sigma must start inside [sigma_min, sigma_max]")
        if sigma_min <= 0:
            raise ValueError("sigma_min must be positive")
        if adapt_factor <= 1.0:
            raise ValueError("adapt_factor must exceed 1")
        if target_distance <= 0:
            raise ValueError("target_distance must be positive")
        self.sigma = sigma
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        self.adapt_factor = adapt_factor
        self.target_distance = target_distance
        self.perturbed_actor: Network | None = None

    def on_episode_start(self, actor: Network, rng: np.random.Generator) -> None:
        self.perturbed_actor = perturb(actor, self.sigma, rng)

    def action_term(self, action_dim: int, rng: np.random.Generator) -> np.ndarray:
        raise RuntimeError(
            "parameter-space noise has no additive action term; "
            "use the perturbed behavior actor instead"
        )

    def behavior_actor(self, actor: Network) -> Network:
        if self.perturbed_actor is None:
            raise RuntimeError("on_episode_start was never called")
        return self.perturbed_actor

    def adapt(self, measured_distance: float) -> None:
        if measured_distance < 0:
            raise ValueError("measured distance must be nonnegative")
        if measured_distance > self.target_distance:
            self.sigma /= self.adapt_factor
        else:
            self.sigma *= self.adapt_factor
        self.sigma = min(max(self.sigma, self.sigma_min), self.sigma_max)


NOISE_KINDS = ("none", "gaussian", "ou", "adaptive-param")


def make_noise(kind: str, action_dim: int, action_high: np.ndarray, *,
               gaussian_sigma: float | None = None,
               ou_theta: float = 0.15, ou_sigma: float = 0.2,
               param_sigma: float = 0.1, param_sigma_min: float = 1e-4,
               param_sigma_max: float = 1.0, adapt_factor: float = 1.01,
               target_distance: float = 0.1):
    """Build a strategy from its config name.

    A Gaussian sigma of None defaults to 0.1 * action bound per dimension.
    """
    if kind == "none":
        return NoNoise()
    if kind == "gaussian":
        sigma = 0.1 * np.asarray(action_high) if gaussian_sigma is None else gaussian_sigma
        return GaussianNoise(sigma)
    if kind == "ou":
        return OUNoise(action_dim, theta=ou_theta, sigma=ou_sigma)
    if kind == "adaptive-param":
        return AdaptiveParamNoise(
            sigma=param_sigma,
            sigma_min=param_sigma_min,
            sigma_max=param_sigma_max,
            adapt_factor=adapt_factor,
            target_distance=target_distance,
        )
    raise ValueError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
