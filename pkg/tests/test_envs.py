import numpy as np
import pytest

from ddpglab.envs import ENV_REGISTRY, MountainCar, Pendulum, Reacher, make_env


def rollout(env, seed, actions):
    states = [env.reset(seed)]
    rewards = []
    for a in actions:
        result = env.step(a)
        states.append(result.next_state)
        rewards.append(result.reward)
        if result.done:
            break
    return np.array(states), np.array(rewards)


@pytest.mark.parametrize("env_id", sorted(ENV_REGISTRY))
def test_reset_deterministic(env_id):
    env = make_env(env_id)
    a = env.reset(123)
    b = env.reset(123)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("env_id", sorted(ENV_REGISTRY))
def test_trajectory_bit_deterministic(env_id):
    env1, env2 = make_env(env_id), make_env(env_id)
    rng = np.random.default_rng(7)
    dim = env1.spec.action_dim
    actions = rng.uniform(-1.0, 1.0, size=(50, dim))
    s1, r1 = rollout(env1, 5, actions)
    s2, r2 = rollout(env2, 5, actions)
    assert np.array_equal(s1, s2)
    assert np.array_equal(r1, r2)


def test_make_env_rejects_unknown_id():
    with pytest.raises(ValueError):
        make_env("cartpole")


@pytest.mark.parametrize("env_id", sorted(ENV_REGISTRY))
def test_step_after_done_raises(env_id):
    env = make_env(env_id)
    env.reset(0)
    zero = np.zeros(env.spec.action_dim)
    for _ in range(env.spec.max_steps):
        result = env.step(zero)
        if result.done:
            break
    assert result.done
    with pytest.raises(RuntimeError):
        env.step(zero)


@pytest.mark.parametrize("env_id", sorted(ENV_REGISTRY))
def test_episode_length_never_exceeds_cap(env_id):
    env = make_env(env_id)
    rng = np.random.default_rng(11)
    env.reset(3)
    steps = 0
    while True:
        a = rng.uniform(-1.0, 1.0, size=env.spec.action_dim)
        if env.step(a).done:
            break
        steps += 1
    assert steps < env.spec.max_steps


# -- pendulum -------------------------------------------------------------------


def test_pendulum_initial_ranges():
    for seed in range(50):
        env = Pendulum()
        env.reset(seed)
        assert -np.pi <= env._theta <= np.pi
        assert -1.0 <= env._theta_dot <= 1.0


def test_pendulum_equilibrium_is_fixed_point():
    env = Pendulum()
    env.reset(0)
    env._theta = 0.0
    env._theta_dot = 0.0
    result = env.step(np.array([0.0]))
    assert result.reward == 0.0
    assert np.array_equal(result.next_state, np.array([1.0, 0.0, 0.0]))


def test_pendulum_hand_stepped_dynamics():
    env = Pendulum()
    env.reset(0)
    env._theta = np.pi / 2.0
    env._theta_dot = 0.0
    result = env.step(np.array([0.0]))
    assert env._theta_dot == pytest.approx(0.75, abs=1e-12)
    assert env._theta == pytest.approx(np.pi / 2.0 + 0.0375, abs=1e-12)
    # reward uses the pre-step state: -( (pi/2)^2 )
    assert result.reward == pytest.approx(-((np.pi / 2.0) ** 2), abs=1e-12)


def test_pendulum_rewards_nonpositive_and_speed_clipped():
    env = Pendulum()
    rng = np.random.default_rng(13)
    env.reset(1)
    for _ in range(200):
        result = env.step(rng.uniform(-2.0, 2.0, size=1))
        assert result.reward <= 0.0
        assert abs(result.next_state[2]) <= 8.0
        if result.done:
            break


def test_pendulum_action_clipping():
    env1, env2 = Pendulum(), Pendulum()
    env1.reset(2)
    env2.reset(2)
    r1 = env1.step(np.array([10.0]))
    r2 = env2.step(np.array([2.0]))
    assert np.array_equal(r1.next_state, r2.next_state)


# -- mountain car -----------------------------------------------------------------


def test_mountaincar_initial_state():
    for seed in range(20):
        env = MountainCar()
        obs = env.reset(seed)
        assert -0.6 <= obs[0] <= -0.4
        assert obs[1] == 0.0


def test_mountaincar_goal_gives_bonus_and_done():
    env = MountainCar()
    env.reset(0)
    env._pos = 0.449
    env._vel = 0.07
    result = env.step(np.array([1.0]))
    assert result.done
    assert result.reward == pytest.approx(100.0 - 0.1, abs=1e-12)


def test_mountaincar_state_stays_in_ranges():
    env = MountainCar()
    rng = np.random.default_rng(14)
    env.reset(5)
    for _ in range(999):
        result = env.step(rng.uniform(-1.0, 1.0, size=1))
        assert -1.2 <= result.next_state[0] <= 0.6
        assert -0.07 <= result.next_state[1] <= 0.07
        if result.done:
            break


def test_mountaincar_hand_stepped_dynamics():
    env = MountainCar()
    env.reset(0)
    env._pos = -0.5
    env._vel = 0.0
    result = env.step(np.array([1.0]))
    vel = 0.0015 * 1.0 - 0.0025 * np.cos(3.0 * -0.5)
    assert result.next_state[1] == pytest.approx(vel, abs=1e-15)
    assert result.next_state[0] == pytest.approx(-0.5 + vel, abs=1e-15)
    assert result.reward == pytest.approx(-0.1, abs=1e-15)


# -- reacher ----------------------------------------------------------------------


def test_reacher_goal_on_unit_circle():
    for seed in range(20):
        env = Reacher()
        obs = env.reset(seed)
        goal = obs[4:]
        assert np.linalg.norm(goal) == pytest.approx(1.0, abs=1e-12)
        assert np.array_equal(obs[:4], np.zeros(4))


def test_reacher_stationary_policy_reward():
    env = Reacher()
    env.reset(9)
    total = 0.0
    for _ in range(100):
        result = env.step(np.zeros(2))
        total += result.reward
    assert result.done
    assert total == pytest.approx(-100.0, abs=1e-9)


def test_reacher_rewards_nonpositive_and_velocity_clipped():
    env = Reacher()
    rng = np.random.default_rng(15)
    env.reset(3)
    for _ in range(100):
        result = env.step(rng.uniform(-1.0, 1.0, size=2))
        assert result.reward <= 0.0
        assert np.all(np.abs(result.next_state[2:4]) <= 1.0)
        if result.done:
            break


def test_reacher_hand_stepped_dynamics():
    env = Reacher()
    env.reset(0)
    goal = env._goal.copy()
    result = env.step(np.array([1.0, -0.5]))
    vel = np.array([0.05, -0.025])
    pos = 0.05 * vel
    assert np.allclose(result.next_state[2:4], vel, atol=1e-15)
    assert np.allclose(result.next_state[:2], pos, atol=1e-15)
    assert result.reward == pytest.approx(-np.linalg.norm(pos - goal), abs=1e-12)
