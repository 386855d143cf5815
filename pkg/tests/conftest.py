import numpy as np
import pytest

from pcpo_lab.sampler import RolloutBatch


def make_batch(states, actions, rewards, costs, episode_starts, discount=0.99, next_states=None,
               terminals=None, log_probs=None, tabular=True):
    """Hand-built batch; every episode terminates at its last step unless told otherwise."""
    n = len(rewards)
    states = np.asarray(states)
    costs = np.asarray(costs, dtype=float).reshape(n, -1)
    starts = np.asarray(list(episode_starts) + [n])
    if terminals is None:
        terminals = np.zeros(n, dtype=bool)
        terminals[starts[1:] - 1] = True
    if next_states is None:
        next_states = states.copy()
    timesteps = np.concatenate([np.arange(b - a) for a, b in zip(starts[:-1], starts[1:])])
    return RolloutBatch(
        states=states,
        actions=np.asarray(actions),
        rewards=np.asarray(rewards, dtype=float),
        costs=costs,
        log_probs=np.zeros(n) if log_probs is None else np.asarray(log_probs, dtype=float),
        next_states=np.asarray(next_states),
        terminals=np.asarray(terminals, dtype=bool),
        truncated=~np.asarray(terminals, dtype=bool) & np.isin(np.arange(n), starts[1:] - 1),
        timesteps=timesteps,
        episode_starts=starts,
        discount=discount,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
