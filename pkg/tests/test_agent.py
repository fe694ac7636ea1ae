import io
import math

import numpy as np
import pytest

from ddpglab.agent import Agent, default_networks
from ddpglab.nets import Layer, Network, mlp
from ddpglab.noise import GaussianNoise, NoNoise, OUNoise
from ddpglab.replay import PrioritizedBuffer, SampledBatch, Transition

from test_nets import flatten_params, max_rel_error, set_flat_params


def make_agent(seed=0, state_dim=3, action_dim=1, hidden=(8, 8), bound=2.0,
               **kwargs):
    rng = np.random.default_rng(seed)
    actor, critic = default_networks(state_dim, action_dim, hidden, rng)
    return Agent(
        actor,
        critic,
        action_low=np.full(action_dim, -bound),
        action_high=np.full(action_dim, bound),
        **kwargs,
    )


def filled_buffer(agent, n, rng, capacity=None, alpha=0.6):
    buf = PrioritizedBuffer(
        capacity or max(n, 16), agent.state_dim, agent.action_dim, alpha=alpha
    )
    for _ in range(n):
        s = rng.normal(size=agent.state_dim)
        a = rng.uniform(agent.action_low, agent.action_high)
        buf.push(
            Transition(s, a, float(rng.normal()), rng.normal(size=agent.state_dim),
                       bool(rng.uniform() < 0.1))
        )
    return buf


def batch_of(agent, buf, indices, beta=0.5):
    return buf.batch_for_indices(indices, beta)


# -- construction -----------------------------------------------------------------


def test_targets_start_as_exact_copies():
    agent = make_agent()
    assert np.array_equal(flatten_params(agent.target_actor), flatten_params(agent.actor))
    assert np.array_equal(flatten_params(agent.target_critic), flatten_params(agent.critic))
    agent.actor.layers[0].weight += 1.0
    assert not np.array_equal(
        flatten_params(agent.target_actor), flatten_params(agent.actor)
    )


def test_agent_rejects_bad_hyperparams():
    with pytest.raises(ValueError):
        make_agent(gamma=1.5)
    with pytest.raises(ValueError):
        make_agent(tau=0.0)


# -- select_action ------------------------------------------------------------


def test_select_action_zero_actor_is_zero():
    agent = make_agent()
    for layer in agent.actor.layers:
        layer.weight[:] = 0.0
        layer.bias[:] = 0.0
    a = agent.select_action(agent.actor, np.ones(3), NoNoise(), np.random.default_rng(0))
    assert np.array_equal(a, np.zeros(1))


def test_select_action_gaussian_sigma_zero_matches_no_noise():
    agent = make_agent(seed=1)
    s = np.array([0.3, -0.2, 0.9])
    rng = np.random.default_rng(1)
    base = agent.select_action(agent.actor, s, NoNoise(), rng)
    noisy = agent.select_action(agent.actor, s, GaussianNoise(0.0), rng)
    assert np.array_equal(base, noisy)


def test_select_action_clips_to_bounds():
    agent = make_agent(seed=2, bound=2.0)
    s = np.zeros(3)
    rng = np.random.default_rng(3)
    # huge OU state pushes the proposal far outside the bounds
    ou = OUNoise(1, theta=0.0, sigma=0.0)
    ou.state = np.array([3.7])
    for layer in agent.actor.layers:
        layer.weight[:] = 0.0
        layer.bias[:] = 0.0
    a = agent.select_action(agent.actor, s, ou, rng)
    assert a[0] == 2.0


def test_select_action_rejects_non_finite_state():
    agent = make_agent()
    with pytest.raises(ValueError):
        agent.select_action(agent.actor, np.array([np.nan, 0.0, 0.0]), NoNoise(),
                            np.random.default_rng(0))


# -- compute_targets ------------------------------------------------------------


def hand_batch(states, actions, rewards, next_states, dones):
    n = len(rewards)
    return SampledBatch(
        indices=np.arange(n),
        states=np.asarray(states, dtype=np.float64),
        actions=np.asarray(actions, dtype=np.float64),
        rewards=np.asarray(rewards, dtype=np.float64),
        next_states=np.asarray(next_states, dtype=np.float64),
        dones=np.asarray(dones, dtype=bool),
        is_weights=np.ones(n),
    )


def test_targets_terminal_transitions_use_reward_only():
    agent = make_agent(seed=3)
    batch = hand_batch(
        np.zeros((2, 3)), np.zeros((2, 1)), [1.5, -2.0], np.ones((2, 3)), [True, True]
    )
    assert np.array_equal(agent.compute_targets(batch), [1.5, -2.0])


def test_targets_gamma_zero_is_myopic():
    agent = make_agent(seed=4, gamma=0.0)
    rng = np.random.default_rng(5)
    batch = hand_batch(
        rng.normal(size=(4, 3)), rng.normal(size=(4, 1)),
        [0.1, 0.2, 0.3, 0.4], rng.normal(size=(4, 3)), [False] * 4
    )
    assert np.array_equal(agent.compute_targets(batch), [0.1, 0.2, 0.3, 0.4])


def test_targets_match_hand_computed_bellman_backup():
    # 1-unit linear networks with hand-set weights.
    actor = Network([Layer(np.array([[0.5]]), np.array([0.1]), "tanh")])
    critic = Network([Layer(np.array([[0.25, -0.75]]), np.array([0.05]), "linear")])
    agent = Agent(actor, critic, action_low=[-2.0], action_high=[2.0], gamma=0.9)
    s_next = 0.8
    r = 1.25
    batch = hand_batch([[0.0]], [[0.0]], [r], [[s_next]], [False])
    a_next = 2.0 * math.tanh(0.5 * s_next + 0.1)
    q_next = 0.25 * s_next - 0.75 * a_next + 0.05
    expected = r + 0.9 * q_next
    y = agent.compute_targets(batch)
    assert y[0] == pytest.approx(expected, abs=1e-12)


def test_compute_targets_leaves_live_networks_untouched():
    agent = make_agent(seed=6)
    rng = np.random.default_rng(7)
    batch = hand_batch(
        rng.normal(size=(3, 3)), rng.normal(size=(3, 1)), [0.0, 1.0, 2.0],
        rng.normal(size=(3, 3)), [False, True, False]
    )
    actor_before = flatten_params(agent.actor).copy()
    critic_before = flatten_params(agent.critic).copy()
    agent.compute_targets(batch)
    assert np.array_equal(flatten_params(agent.actor), actor_before)
    assert np.array_equal(flatten_params(agent.critic), critic_before)


# -- critic update ------------------------------------------------------------


def test_critic_update_at_fixed_point_changes_nothing():
    agent = make_agent(seed=8)
    rng = np.random.default_rng(9)
    states = rng.normal(size=(4, 3))
    actions = rng.uniform(-2.0, 2.0, size=(4, 1))
    batch = hand_batch(states, actions, np.zeros(4), states, [False] * 4)
    x = np.concatenate([states, actions], axis=1)
    y = agent.critic.forward(x)[:, 0]
    before = flatten_params(agent.critic).copy()
    td, loss = agent.critic_update(batch, y)
    assert loss == 0.0
    assert np.all(td == 0.0)
    assert np.array_equal(flatten_params(agent.critic), before)


def test_critic_loss_direct_value():
    agent = make_agent(seed=10, use_is_weights=False)
    rng = np.random.default_rng(11)
    states = rng.normal(size=(2, 3))
    actions = rng.uniform(-2.0, 2.0, size=(2, 1))
    batch = hand_batch(states, actions, np.zeros(2), states, [False, False])
    x = np.concatenate([states, actions], axis=1)
    q = agent.critic.forward(x)[:, 0]
    y = q + np.array([1.0, -1.0])
    td, loss = agent.critic_update(batch, y)
    assert loss == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(td, [1.0, -1.0], atol=1e-12)


def test_critic_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    actor = Network([Layer(rng.normal(size=(1, 2)) * 0.5, rng.normal(size=1), "tanh")])
    critic = Network([Layer(rng.normal(size=(1, 3)) * 0.5, rng.normal(size=1), "linear")])
    agent = Agent(actor, critic, action_low=[-1.0], action_high=[1.0])
    states = rng.normal(size=(3, 2))
    actions = rng.uniform(-1.0, 1.0, size=(3, 1))
    y = rng.normal(size=3)
    weights = rng.uniform(0.5, 1.0, size=3)

    _, _, grads = agent.critic_loss_and_grads(states, actions, y, weights)
    analytic = np.concatenate([g.weight.ravel() for g in grads] +
                              [g.bias.ravel() for g in grads])

    def loss_at(flat):
        set_flat_params(critic, flat)
        x = np.concatenate([states, actions], axis=1)
        q = critic.forward(x)[:, 0]
        return float(np.mean(weights * (y - q) ** 2))

    base = flatten_params(critic).copy()
    h = 1e-5
    fd = np.zeros_like(base)
    for i in range(base.size):
        up = base.copy()
        up[i] += h
        down = base.copy()
        down[i] -= h
        fd[i] = (loss_at(up) - loss_at(down)) / (2 * h)
    set_flat_params(critic, base)
    # grads order: weight then bias within the single layer
    assert max_rel_error(analytic, fd) < 1e-4


def test_critic_update_applies_is_weights():
    agent_w = make_agent(seed=13, use_is_weights=True)
    agent_u = make_agent(seed=13, use_is_weights=False)
    rng = np.random.default_rng(14)
    states = rng.normal(size=(2, 3))
    actions = rng.uniform(-2.0, 2.0, size=(2, 1))
    batch = hand_batch(states, actions, np.zeros(2), states, [False, False])
    batch.is_weights = np.array([1.0, 0.25])
    y = np.array([1.0, 1.0])
    _, loss_w = agent_w.critic_update(batch, y)
    _, loss_u = agent_u.critic_update(batch, y)
    assert loss_w != loss_u


# -- actor update ---------------------------------------------------------------


def test_actor_update_constant_critic_is_noop():
    agent = make_agent(seed=15)
    # zero out the critic's sensitivity to everything: constant output
    for layer in agent.critic.layers:
        layer.weight[:] = 0.0
        layer.bias[:] = 0.0
    rng = np.random.default_rng(16)
    buf = filled_buffer(agent, 8, rng)
    batch = batch_of(agent, buf, np.arange(8))
    before = flatten_params(agent.actor).copy()
    agent.actor_update(batch)
    assert np.array_equal(flatten_params(agent.actor), before)


def test_actor_gradient_matches_finite_differences_through_critic():
    rng = np.random.default_rng(17)
    actor, critic = default_networks(3, 1, [6], rng)
    agent = Agent(actor, critic, action_low=[-2.0], action_high=[2.0])
    states = rng.normal(size=(4, 3))

    _, grads = agent.actor_objective_and_grads(states)
    analytic = np.concatenate(
        [arr.ravel() for g in grads for _, arr in g.param_items()]
    )

    def objective_at(flat):
        set_flat_params(actor, flat)
        acts = agent.action_center + agent.action_scale * actor.forward(states)
        x = np.concatenate([states, acts], axis=1)
        return float(np.mean(critic.forward(x)[:, 0]))

    base = flatten_params(actor).copy()
    h = 1e-5
    fd = np.zeros_like(base)
    for i in range(base.size):
        up = base.copy()
        up[i] += h
        down = base.copy()
        down[i] -= h
        fd[i] = (objective_at(up) - objective_at(down)) / (2 * h)
    set_flat_params(actor, base)
    assert max_rel_error(analytic, fd) < 1e-4


def test_actor_gradient_identity_critic_reduces_to_policy_gradient():
    # Critic Q(s, a) = a: the objective gradient is exactly the gradient of
    # the (scaled) policy output.
    rng = np.random.default_rng(18)
    actor = mlp(2, [5], 1, rng, output_activation="tanh")
    critic = Network([Layer(np.array([[0.0, 0.0, 1.0]]), np.array([0.0]), "linear")])
    agent = Agent(actor, critic, action_low=[-1.5], action_high=[1.5])
    state = rng.normal(size=(1, 2))
    _, grads = agent.actor_objective_and_grads(state)
    expected, _ = actor.backward(state, np.array([[1.5]]))  # d(scale * out)/d theta
    for g, e in zip(grads, expected):
        assert np.allclose(g.weight, e.weight, atol=1e-12)
        assert np.allclose(g.bias, e.bias, atol=1e-12)


def test_actor_update_leaves_critic_untouched():
    agent = make_agent(seed=19)
    rng = np.random.default_rng(20)
    buf = filled_buffer(agent, 8, rng)
    batch = batch_of(agent, buf, np.arange(8))
    critic_before = flatten_params(agent.critic).copy()
    agent.actor_update(batch)
    assert np.array_equal(flatten_params(agent.critic), critic_before)


# -- train_step -------------------------------------------------------------------


def test_train_step_requires_warmup():
    agent = make_agent(seed=21, warmup=100)
    rng = np.random.default_rng(22)
    buf = filled_buffer(agent, 10, rng, capacity=128)
    with pytest.raises(ValueError):
        agent.train_step(buf, 0.4, rng)


def test_train_step_tau_one_copies_targets():
    agent = make_agent(seed=23, tau=1.0, warmup=8, batch_size=4)
    rng = np.random.default_rng(24)
    buf = filled_buffer(agent, 16, rng)
    agent.train_step(buf, 0.4, rng)
    assert np.array_equal(flatten_params(agent.target_actor), flatten_params(agent.actor))
    assert np.array_equal(flatten_params(agent.target_critic), flatten_params(agent.critic))


def test_train_step_refreshes_sampled_priorities():
    agent = make_agent(seed=25, warmup=8, batch_size=4)
    rng = np.random.default_rng(26)
    buf = filled_buffer(agent, 16, rng, alpha=0.6)
    report = agent.train_step(buf, 0.4, rng)
    leaves = buf.tree.leaf_values()
    assert report.td_errors.shape == (4,)
    # every returned td error must have landed in some leaf as (|td|+eps)^alpha
    expected = (np.abs(report.td_errors) + buf.priority_epsilon) ** buf.alpha
    for e in expected:
        assert np.any(np.isclose(leaves[:16], e, rtol=1e-12, atol=0.0))


def test_train_step_priority_rule_with_direct_indices():
    agent = make_agent(seed=27, warmup=4, batch_size=4, use_is_weights=False)
    rng = np.random.default_rng(28)
    buf = filled_buffer(agent, 8, rng, alpha=0.5)
    batch = buf.batch_for_indices([0, 2, 4, 6], beta=0.4)
    y = agent.compute_targets(batch)
    td, _ = agent.critic_update(batch, y)
    buf.update_priorities(batch.indices, td)
    leaves = buf.tree.leaf_values()
    for idx, delta in zip([0, 2, 4, 6], td):
        assert leaves[idx] == pytest.approx(
            (abs(delta) + buf.priority_epsilon) ** 0.5, rel=1e-12
        )


def test_train_step_deterministic_given_seed():
    reports = []
    for _ in range(2):
        agent = make_agent(seed=29, warmup=8, batch_size=4)
        rng = np.random.default_rng(30)
        buf = filled_buffer(agent, 16, rng)
        reports.append(agent.train_step(buf, 0.4, rng))
    a, b = reports
    assert a.critic_loss == b.critic_loss
    assert a.actor_objective == b.actor_objective
    assert np.array_equal(a.td_errors, b.td_errors)


def test_train_step_target_optimizers_never_step():
    agent = make_agent(seed=31, warmup=8, batch_size=4)
    rng = np.random.default_rng(32)
    buf = filled_buffer(agent, 16, rng)
    for _ in range(5):
        agent.train_step(buf, 0.4, rng)
    assert agent.target_actor_opt.step_count == 0
    assert agent.target_critic_opt.step_count == 0
    assert agent.actor_opt.step_count == 5
    assert agent.critic_opt.step_count == 5


def test_uniform_priorities_sample_like_ddpg():
    # With all leaves equal, the prioritized distribution is uniform, so
    # prioritization is the only behavioral difference from plain DDPG.
    agent = make_agent(seed=33, warmup=4, batch_size=4)
    rng = np.random.default_rng(34)
    buf = filled_buffer(agent, 12, rng, alpha=0.0)
    assert np.max(np.abs(buf.exact_distribution() - 1.0 / 12)) < 1e-12
    buf.update_priorities(np.arange(12), rng.uniform(0.0, 9.0, size=12))
    assert np.max(np.abs(buf.exact_distribution() - 1.0 / 12)) < 1e-12


def test_expected_prioritized_gradient_equals_uniform_with_full_compensation():
    # beta = 1, raw weights: enumerating the sampling distribution gives the
    # same expected critic gradient as uniform replay, on a tiny buffer.
    rng = np.random.default_rng(35)
    actor = Network([Layer(rng.normal(size=(1, 2)) * 0.3, np.zeros(1), "tanh")])
    critic = Network([Layer(rng.normal(size=(1, 3)) * 0.3, np.zeros(1), "linear")])
    agent = Agent(actor, critic, action_low=[-1.0], action_high=[1.0])

    for n in range(2, 9):
        buf = PrioritizedBuffer(8, 2, 1, alpha=0.8)
        for _ in range(n):
            buf.push(Transition(rng.normal(size=2), rng.uniform(-1, 1, size=1),
                                float(rng.normal()), rng.normal(size=2), False))
        buf.update_priorities(np.arange(n), rng.uniform(0.0, 4.0, size=n))
        probs = buf.exact_distribution()
        y = rng.normal(size=n)

        def single_gradient(i, weight):
            batch = buf.batch_for_indices([i], beta=1.0)
            _, _, grads = agent.critic_loss_and_grads(
                batch.states, batch.actions, np.array([y[i]]), np.array([weight])
            )
            return np.concatenate([grads[0].weight.ravel(), grads[0].bias.ravel()])

        raw_w = (1.0 / (n * probs)) ** 1.0
        prioritized = sum(probs[i] * single_gradient(i, raw_w[i]) for i in range(n))
        uniform = sum(single_gradient(i, 1.0) for i in range(n)) / n
        assert np.max(np.abs(prioritized - uniform)) < 1e-10


# -- checkpoint ---------------------------------------------------------------------


def test_agent_checkpoint_round_trip():
    agent = make_agent(seed=36, gamma=0.95, tau=0.01, batch_size=32,
                       use_is_weights=False, warmup=500)
    # move targets away from live nets so all four networks are distinct
    rng = np.random.default_rng(37)
    buf = filled_buffer(agent, 600, rng, capacity=1024)
    agent.warmup = 8
    agent.train_step(buf, 0.4, rng)

    fh = io.StringIO()
    agent.save(fh)
    fh.seek(0)
    loaded = Agent.load(fh)

    assert loaded.gamma == agent.gamma
    assert loaded.tau == agent.tau
    assert loaded.batch_size == agent.batch_size
    assert loaded.use_is_weights == agent.use_is_weights
    assert np.array_equal(loaded.action_low, agent.action_low)
    for name in ("actor", "critic", "target_actor", "target_critic"):
        assert np.array_equal(
            flatten_params(getattr(loaded, name)), flatten_params(getattr(agent, name))
        ), name

    fh2 = io.StringIO()
    loaded.save(fh2)
    # warmup was mutated after construction; rebuild expected header text
    assert fh2.getvalue() == fh.getvalue()
