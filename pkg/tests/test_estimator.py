import numpy as np
import pytest

from pcpo_lab.cmdp import exact_policy_eval
from pcpo_lab.envs import bandit_cmdp, chain_cmdp, random_cmdp
from pcpo_lab.estimator import (AdvantageEstimates, EstimatorConfig, ValueFits, ValueFunction, constraint_surrogate,
                                estimate_advantages, fit_value, gae, gradients, surrogate_gradient_exact,
                                surrogate_objective, surrogate_objective_exact)
from pcpo_lab.policy import PolicyParams, probabilities, score_batch
from pcpo_lab.sampler import collect

from conftest import make_batch


def test_single_terminal_step():
    batch = make_batch([0], [0], [1.0], [0.0], [0], discount=0.99)
    cfg = EstimatorConfig(discount=0.99)
    v = ValueFunction(np.array([0.5]), 0.0, n_states=1)
    est = gae(batch, v, cfg)
    assert est.advantages[0] == pytest.approx(0.5)
    assert est.targets[0] == pytest.approx(1.0)


def test_lambda_zero_gives_td_residuals(rng):
    n = 12
    batch = make_batch(rng.integers(3, size=n), np.zeros(n, int), rng.random(n), rng.random(n), [0, 5],
                       next_states=rng.integers(3, size=n))
    cfg = EstimatorConfig(discount=0.9, gae_lambda_reward=0.0)
    v = ValueFunction(rng.normal(size=3), 0.2, n_states=3)
    est = gae(batch, v, cfg)
    delta = batch.rewards + 0.9 * v.predict(batch.next_states) * (~batch.terminals) - v.predict(batch.states)
    assert np.array_equal(est.advantages, delta)


def test_lambda_one_gives_returns_to_go(rng):
    n = 15
    batch = make_batch(np.zeros(n, int), np.zeros(n, int), rng.random(n), rng.random(n), [0, 4, 9])
    cfg = EstimatorConfig(discount=0.97, gae_lambda_reward=1.0, gae_lambda_cost=1.0)
    zero = ValueFunction.zeros(1, 1)
    for channel, x in (("reward", batch.rewards), (0, batch.costs[:, 0])):
        est = gae(batch, zero, cfg, channel)
        expected = np.empty(n)
        for lo, hi in zip(batch.episode_starts[:-1], batch.episode_starts[1:]):
            for t in range(lo, hi):
                expected[t] = sum(0.97 ** (k - t) * x[k] for k in range(t, hi))
        assert np.abs(est.advantages - expected).max() < 1e-9


def test_truncated_episode_bootstraps():
    batch = make_batch([0, 0], [0, 0], [1.0, 1.0], [0, 0], [0], terminals=[False, False])
    v = ValueFunction(np.array([2.0]), 0.0, n_states=1)
    cfg = EstimatorConfig(discount=0.5, gae_lambda_reward=0.0)
    est = gae(batch, v, cfg)
    assert est.advantages[-1] == pytest.approx(1.0 + 0.5 * 2.0 - 2.0)


def test_fit_constant_targets(rng):
    states = rng.integers(4, size=50)
    fit = fit_value(states, np.full(50, 5.0), EstimatorConfig(), n_states=4)
    assert np.abs(fit.predict(np.arange(4)) - 5.0).max() < 1e-6
    assert fit.loss_history[1] <= fit.loss_history[0]


def test_fit_one_state_exact():
    env = bandit_cmdp([1.0, 0.0], [0.0, 1.0], discount=0.5)
    v_exact = exact_policy_eval(env, np.array([[0.5, 0.5]])).state_values[0]
    fit = fit_value(np.zeros(10, int), np.full(10, v_exact), EstimatorConfig(), n_states=1)
    assert abs(fit.predict([0])[0] - v_exact) < 1e-4
    assert fit.degenerate


def test_ridge_limit(rng):
    x = rng.normal(size=(200, 3))
    y = x @ np.array([1.0, -2.0, 0.5]) + 3
    fit = fit_value(x, y, EstimatorConfig(l2_coeff=1e6))
    assert np.linalg.norm(fit.weights) <= 1e-3
    loose = fit_value(x, y, EstimatorConfig(l2_coeff=0.0))
    assert np.allclose(loose.weights, [1.0, -2.0, 0.5])
    assert loose.bias == pytest.approx(3.0)


def test_degenerate_features_flagged():
    x = np.ones((20, 2))
    fit = fit_value(x, np.arange(20.0), EstimatorConfig())
    assert fit.degenerate
    assert np.allclose(fit.predict(x), 9.5)


def _chain_batch():
    env = chain_cmdp()
    params = PolicyParams.tabular(6, 2, np.random.default_rng(0).normal(size=12) * 0.3)
    batch = collect(env, params, 10, 50, 3)
    cfg = EstimatorConfig(discount=env.discount)
    est = estimate_advantages(batch, ValueFits.zeros(6, 1, 6), cfg)
    return env, params, batch, est


def test_uniform_weights_at_behavior_policy():
    env, params, batch, est = _chain_batch()
    raw = gae(batch, ValueFunction.zeros(6, 6), EstimatorConfig(discount=env.discount)).advantages
    assert surrogate_objective(batch, raw, params, params) == pytest.approx(raw.mean(), abs=1e-12)
    assert abs(surrogate_objective(batch, est.advantages, params, params)) < 1e-9


def test_constraint_surrogate_at_behavior_policy():
    env, params, batch, est = _chain_batch()
    g = constraint_surrogate(batch, est.cost_advantages[:, 0], params, params, 3.0, 5.0, env.discount)
    assert g == pytest.approx(-2.0, abs=1e-9)
    g_far = constraint_surrogate(batch, est.cost_advantages[:, 0], params, params, 3.0, 1e300, env.discount)
    assert g_far < -1e299


def test_zero_advantages_zero_gradient():
    env, params, batch, est = _chain_batch()
    zero = AdvantageEstimates(np.zeros(batch.n_steps), np.zeros((batch.n_steps, 1)),
                              np.zeros(batch.n_steps), np.zeros((batch.n_steps, 1)))
    gf, gg = gradients(batch, zero, params)
    assert not np.any(gf) and not np.any(gg[0])


def test_bandit_gradient_sign():
    batch = make_batch([0, 0], [0, 1], [1.0, -1.0], [0, 0], [0, 1], log_probs=np.log([0.5, 0.5]))
    est = AdvantageEstimates(np.array([1.0, -1.0]), np.zeros((2, 1)), np.zeros(2), np.zeros((2, 1)))
    gf, _ = gradients(batch, est, PolicyParams.tabular(1, 2), discount=0.5)
    assert gf[0] > 0 > gf[1]


def test_exact_gradient_matches_oracle_and_fd():
    rng = np.random.default_rng(6)
    cmdp = random_cmdp(rng, 2, 2, 1)
    params = PolicyParams.tabular(2, 2, rng.normal(size=4))
    pi = probabilities(params)
    res = exact_policy_eval(cmdp, pi)
    grad = surrogate_gradient_exact(params, res.occupancy, res.advantages)
    oracle = np.zeros(4)
    for s in range(2):
        for a in range(2):
            oracle += res.occupancy[s] * pi[s, a] * score_batch(params, [s], [a])[0] * res.advantages[s, a]
    assert np.abs(grad - oracle).max() < 1e-12
    # the true policy gradient carries the 1/(1-gamma) factor
    h = 1e-6
    fd = np.zeros(4)
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        jp = exact_policy_eval(cmdp, probabilities(params.with_theta(params.theta + e))).discounted_return
        jm = exact_policy_eval(cmdp, probabilities(params.with_theta(params.theta - e))).discounted_return
        fd[k] = (jp - jm) / (2 * h)
    assert np.abs(oracle / (1 - cmdp.discount) - fd).max() < 1e-6
    f0 = surrogate_objective_exact(params, res.occupancy, res.advantages)
    assert abs(f0) < 1e-12


def test_cost_advantages_centered_not_scaled():
    env, params, batch, est = _chain_batch()
    raw = gae(batch, ValueFunction.zeros(6, 6), EstimatorConfig(discount=env.discount), 0).advantages
    assert np.allclose(est.cost_advantages[:, 0], raw - raw.mean())
    assert est.cost_advantage_means[0] == pytest.approx(raw.mean())
