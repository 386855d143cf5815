import math

import numpy as np
import pytest

from pcpo_lab.cmdp import exact_policy_eval
from pcpo_lab.envs import PointCircleEnv, PointVelocityEnv, bandit_cmdp, chain_cmdp
from pcpo_lab.policy import PolicyParams, probabilities
from pcpo_lab.sampler import average_cost_return, average_return, collect, dump_batch

from conftest import make_batch


def assert_same_batch(a, b):
    for name in ("states", "actions", "rewards", "costs", "log_probs", "next_states", "terminals",
                 "truncated", "timesteps", "episode_starts"):
        assert np.array_equal(getattr(a, name), getattr(b, name)), name


def test_constant_environment():
    env = bandit_cmdp([1.0], [0.0])
    batch = collect(env, PolicyParams.tabular(1, 1), 2, 3, 0)
    assert batch.n_steps == 6
    assert np.all(batch.rewards == 1.0)
    assert batch.n_episodes == 2


@pytest.mark.parametrize("env", [chain_cmdp(), PointVelocityEnv(), PointCircleEnv()], ids=lambda e: type(e).__name__)
def test_collect_is_deterministic(env):
    if hasattr(env, "n_states"):
        params = PolicyParams.tabular(env.n_states, env.n_actions)
    else:
        params = PolicyParams.linear_gaussian(env.feature_dim, env.action_dim)
    seed = np.random.SeedSequence([3, 1, 0])
    a = collect(env, params, 4, 25, seed)
    b = collect(env, params, 4, 25, np.random.SeedSequence([3, 1, 0]))
    assert_same_batch(a, b)
    c = collect(env, params, 4, 25, np.random.SeedSequence([4, 1, 0]))
    assert not np.array_equal(a.actions, c.actions)


def test_chain_cost_matches_exact():
    env = chain_cmdp()
    params = PolicyParams.tabular(env.n_states, env.n_actions)
    batch = collect(env, params, 10_000, 200, 7)
    per_episode = batch.discounted_episode_sums(batch.costs[:, 0], env.discount)
    exact = exact_policy_eval(env, probabilities(params)).cost_returns[0]
    se = per_episode.std() / math.sqrt(per_episode.size)
    assert abs(per_episode.mean() - exact) < 3 * se


def test_average_cost_return_examples():
    batch = make_batch([0, 0, 0], [0, 0, 0], [0, 0, 0], [1, 1, 1], [0])
    assert average_cost_return(batch, 0.5, 0) == pytest.approx(1.75)
    zero = make_batch([0, 0], [0, 0], [1, 1], [0, 0], [0])
    assert average_cost_return(zero, 0.5, 0) == 0.0
    with pytest.raises(IndexError):
        average_cost_return(batch, 0.5, 1)


def test_average_return_resummation():
    env = chain_cmdp()
    batch = collect(env, PolicyParams.tabular(6, 2), 30, 40, 2)
    direct = []
    for e in range(batch.n_episodes):
        lo, hi = batch.episode_starts[e], batch.episode_starts[e + 1]
        direct.append(sum(env.discount**t * r for t, r in enumerate(batch.rewards[lo:hi])))
        assert np.array_equal(batch.timesteps[lo:hi], np.arange(hi - lo))
    assert average_return(batch, env.discount) == pytest.approx(np.mean(direct), abs=1e-12)
    direct_c = [sum(env.discount**t * c for t, c in enumerate(batch.costs[lo:hi, 0]))
                for lo, hi in zip(batch.episode_starts[:-1], batch.episode_starts[1:])]
    assert average_cost_return(batch, env.discount, 0) == pytest.approx(np.mean(direct_c), abs=1e-12)


def test_batch_is_read_only():
    batch = collect(chain_cmdp(), PolicyParams.tabular(6, 2), 2, 5, 0)
    with pytest.raises(ValueError):
        batch.rewards[0] = 3.0


def test_mismatched_policy():
    with pytest.raises(ValueError):
        collect(chain_cmdp(), PolicyParams.tabular(3, 2), 1, 5, 0)


def test_dump_batch(tmp_path):
    batch = collect(chain_cmdp(), PolicyParams.tabular(6, 2), 2, 5, 0)
    path = tmp_path / "b.jsonl"
    dump_batch(batch, path)
    assert len(path.read_text().splitlines()) == batch.n_steps
