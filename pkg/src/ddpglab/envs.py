"""Deterministic, seedable continuous-control environments.

Three closed-form tasks with fully pinned dynamics so trajectories are
bit-reproducible: pendulum swing-up, continuous mountain car, and a
point-mass reacher. Actions out of bounds are clipped, never rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_steps: int


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    done: bool


class _Env:
    spec: EnvSpec

    def __init__(self):
        self._steps = 0
        self._done = True

    def reset(self, seed: int) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> StepResult:
        raise NotImplementedError

    def _begin_episode(self):
        self._steps = 0
        self._done = False

    def _check_live(self):
        if self._done:
            raise RuntimeError("episode already finished; call reset first")

    def _clip_action(self, action) -> np.ndarray:
        a = np.asarray(action, dtype=np.float64)
        if a.shape != (self.spec.action_dim,):
            raise ValueError(
                f"action shape {a.shape} does not match {(self.spec.action_dim,)}"
            )
        return np.clip(a, self.spec.action_low, self.spec.action_high)


def _wrap_angle(theta: float) -> float:
    """Map an angle into [-pi, pi)."""
    return ((theta + np.pi) % (2.0 * np.pi)) - np.pi


class Pendulum(_Env):
    """Torque-limited pendulum swing-up.

    Internal state (theta, theta_dot), observed as (cos, sin, theta_dot).
    g=10, m=1, l=1, dt=0.05; angular velocity clipped to +-8; cost is
    wrapped-angle squared plus small velocity and torque penalties,
    evaluated on the pre-step state (so the hanging equilibrium with zero
    torque scores exactly 0).
    """

    spec = EnvSpec(
        state_dim=3,
        action_dim=1,
        action_low=np.array([-2.0]),
        action_high=np.array([2.0]),
        max_steps=200,
    )

    G, M, L, DT = 10.0, 1.0, 1.0, 0.05
    MAX_SPEED = 8.0

    def __init__(self):
        super().__init__()
        self._theta = 0.0
        self._theta_dot = 0.0

    def _obs(self) -> np.ndarray:
        return np.array([np.cos(self._theta), np.sin(self._theta), self._theta_dot])

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self._theta = float(rng.uniform(-np.pi, np.pi))
        self._theta_dot = float(rng.uniform(-1.0, 1.0))
        self._begin_episode()
        return self._obs()

    def step(self, action) -> StepResult:
        self._check_live()
        u = float(self._clip_action(action)[0])
        cost = _wrap_angle(self._theta) ** 2 + 0.1 * self._theta_dot**2 + 0.001 * u**2
        accel = (3.0 * self.G / (2.0 * self.L)) * np.sin(self._theta)
        self._theta_dot = float(
            np.clip(
                self._theta_dot + accel * self.DT
                + (3.0 / (self.M * self.L**2)) * u * self.DT,
                -self.MAX_SPEED,
                self.MAX_SPEED,
            )
        )
        self._theta = self._theta + self._theta_dot * self.DT
        self._steps += 1
        self._done = self._steps >= self.spec.max_steps
        return StepResult(self._obs(), -cost, self._done)


class MountainCar(_Env):
    """Continuous mountain car: drive out of a valley with a weak engine.

    Position in [-1.2, 0.6], velocity in [-0.07, 0.07]; reaching
    position >= 0.45 ends the episode with a +100 bonus; every step costs
    0.1 * action^2.
    """

    spec = EnvSpec(
        state_dim=2,
        action_dim=1,
        action_low=np.array([-1.0]),
        action_high=np.array([1.0]),
        max_steps=999,
    )

    POS_MIN, POS_MAX = -1.2, 0.6
    VEL_MAX = 0.07
    GOAL = 0.45

    def __init__(self):
        super().__init__()
        self._pos = 0.0
        self._vel = 0.0

    def _obs(self) -> np.ndarray:
        return np.array([self._pos, self._vel])

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self._pos = float(rng.uniform(-0.6, -0.4))
        self._vel = 0.0
        self._begin_episode()
        return self._obs()

    def step(self, action) -> StepResult:
        self._check_live()
        u = float(self._clip_action(action)[0])
        self._vel = float(
            np.clip(
                self._vel + 0.0015 * u - 0.0025 * np.cos(3.0 * self._pos),
                -self.VEL_MAX,
                self.VEL_MAX,
            )
        )
        self._pos = float(np.clip(self._pos + self._vel, self.POS_MIN, self.POS_MAX))
        self._steps += 1
        reward = -0.1 * u**2
        at_goal = self._pos >= self.GOAL
        if at_goal:
            reward += 100.0
        self._done = at_goal or self._steps >= self.spec.max_steps
        return StepResult(self._obs(), reward, self._done)


class Reacher(_Env):
    """Point mass steering toward a goal on the unit circle.

    State is (position, velocity, goal) in the plane; acceleration control
    with velocity clipped to +-1; reward is the negative euclidean distance
    to the goal after the move. The goal sits at distance exactly 1 from
    the origin with its angle drawn from the reset seed.
    """

    spec = EnvSpec(
        state_dim=6,
        action_dim=2,
        action_low=np.array([-1.0, -1.0]),
        action_high=np.array([1.0, 1.0]),
        max_steps=100,
    )

    def __init__(self):
        super().__init__()
        self._pos = np.zeros(2)
        self._vel = np.zeros(2)
        self._goal = np.zeros(2)

    def _obs(self) -> np.ndarray:
        return np.concatenate([self._pos, self._vel, self._goal])

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        angle = float(rng.uniform(-np.pi, np.pi))
        self._pos = np.zeros(2)
        self._vel = np.zeros(2)
        self._goal = np.array([np.cos(angle), np.sin(angle)])
        self._begin_episode()
        return self._obs()

    def step(self, action) -> StepResult:
        self._check_live()
        a = self._clip_action(action)
        self._vel = np.clip(self._vel + 0.05 * a, -1.0, 1.0)
        self._pos = self._pos + 0.05 * self._vel
        self._steps += 1
        reward = -float(np.linalg.norm(self._pos - self._goal))
        self._done = self._steps >= self.spec.max_steps
        return StepResult(self._obs(), reward, self._done)


ENV_REGISTRY = {
    "pendulum": Pendulum,
    "mountaincar": MountainCar,
    "reacher": Reacher,
}


def make_env(env_id: str) -> _Env:
    try:
        cls = ENV_REGISTRY[env_id]
    except KeyError:
        raise ValueError(
            f"unknown environment {env_id!r}; known: {sorted(ENV_REGISTRY)}"
        ) from None
    return cls()
