"""On-policy trajectory collection.

Each episode draws from its own RNG stream derived from ``(seed, episode)``,
so a batch does not depend on how episodes are split across workers.
Episodes are truncated at the horizon; the last step of a truncated episode
is marked ``truncated`` (not terminal) so advantage estimation bootstraps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pcpo_lab.cmdp import TabularCmdp
from pcpo_lab.policy import PolicyParams, log_prob_batch, probabilities, sample_action


class EnvironmentStepError(RuntimeError):
    def __init__(self, episode: int, step: int, cause: Exception) -> None:
        super().__init__(f"environment failed in episode {episode} at step {step}: {cause!r}")
        self.episode = episode
        self.step = step


@dataclass(frozen=True)
class RolloutBatch:
    """Flat per-step arrays plus episode offsets.

    ``states``/``next_states`` are integer indices for tabular environments
    and feature rows otherwise. Episode ``e`` spans
    ``episode_starts[e]:episode_starts[e + 1]``.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    costs: np.ndarray
    log_probs: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    truncated: np.ndarray
    timesteps: np.ndarray
    episode_starts: np.ndarray
    discount: float
    seed: tuple = ()
    tabular: bool = True

    def __post_init__(self) -> None:
        n = self.rewards.shape[0]
        if self.costs.ndim != 2 or self.costs.shape[0] != n:
            raise ValueError("costs must be (n_steps, m)")
        if not np.all(np.isfinite(self.log_probs)):
            raise ValueError("behavior log-probabilities must be finite")
        for arr in (self.states, self.actions, self.log_probs, self.next_states,
                    self.terminals, self.truncated, self.timesteps):
            if arr.shape[0] != n:
                raise ValueError("per-step arrays disagree in length")
            arr.setflags(write=False)
        for arr in (self.rewards, self.costs, self.episode_starts):
            arr.setflags(write=False)

    @property
    def n_steps(self) -> int:
        return int(self.rewards.shape[0])

    @property
    def n_episodes(self) -> int:
        return int(self.episode_starts.shape[0] - 1)

    @property
    def n_costs(self) -> int:
        return int(self.costs.shape[1])

    @property
    def episode_lengths(self) -> np.ndarray:
        return np.diff(self.episode_starts)

    @property
    def episode_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_episodes), self.episode_lengths)

    def episode_slices(self):
        for start, stop in zip(self.episode_starts[:-1], self.episode_starts[1:]):
            yield slice(int(start), int(stop))

    def discounted_episode_sums(self, values: np.ndarray, discount: float | None = None) -> np.ndarray:
        gamma = self.discount if discount is None else discount
        weighted = np.asarray(values) * gamma ** self.timesteps.reshape(-1, *([1] * (np.ndim(values) - 1)))
        return np.add.reduceat(weighted, self.episode_starts[:-1], axis=0)

    @property
    def episode_cost_returns(self) -> np.ndarray:
        """Discounted cost return of every episode, shape ``(E, m)``."""
        return self.discounted_episode_sums(self.costs)

    @property
    def episode_returns(self) -> np.ndarray:
        return self.discounted_episode_sums(self.rewards)

    def state_visitation(self, n_states: int) -> np.ndarray:
        """Empirical (undiscounted) state frequencies of a tabular batch."""
        return np.bincount(self.states, minlength=n_states) / self.n_steps


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def episode_stream(seed, episode: int) -> np.random.Generator:
    """The dedicated generator of one episode."""
    parent = _seed_sequence(seed)
    child = np.random.SeedSequence(parent.entropy, spawn_key=tuple(parent.spawn_key) + (episode,))
    return np.random.default_rng(child)


def _seed_provenance(seed) -> tuple:
    ss = _seed_sequence(seed)
    entropy = ss.entropy if isinstance(ss.entropy, (list, tuple)) else [ss.entropy]
    return tuple(int(e) for e in entropy) + tuple(int(k) for k in ss.spawn_key)


def collect(env, params: PolicyParams, n_episodes: int, horizon: int, seed) -> RolloutBatch:
    """Run ``params`` for ``n_episodes`` episodes of at most ``horizon`` steps."""
    if n_episodes < 1 or horizon < 1:
        raise ValueError("n_episodes and horizon must be positive")
    if isinstance(env, TabularCmdp):
        if not params.is_tabular or (params.n_states, params.n_actions) != (env.n_states, env.n_actions):
            raise ValueError("tabular environment needs a matching tabular policy")
        return _collect_tabular(env, params, n_episodes, horizon, seed)
    if params.is_tabular or params.feature_dim != env.feature_dim or params.action_dim != env.action_dim:
        raise ValueError("continuous environment needs a matching linear-gaussian policy")
    return _collect_generic(env, params, n_episodes, horizon, seed)


def _collect_tabular(env: TabularCmdp, params: PolicyParams, n_episodes: int, horizon: int, seed) -> RolloutBatch:
    # Same draw order as the generic path (reset, then action/transition per
    # step), vectorized over episodes.
    init_u = np.empty(n_episodes)
    step_u = np.empty((n_episodes, horizon, 2))
    for e in range(n_episodes):
        rng = episode_stream(seed, e)
        init_u[e] = rng.random()
        step_u[e] = rng.random((horizon, 2))

    n_s, n_a = env.n_states, env.n_actions
    pi_cdf = np.cumsum(probabilities(params), axis=1)
    p_cdf = np.cumsum(env.transition, axis=2)
    init_cdf = np.cumsum(env.init_dist)

    states = np.empty((n_episodes, horizon), dtype=int)
    actions = np.empty((n_episodes, horizon), dtype=int)
    next_states = np.empty((n_episodes, horizon), dtype=int)
    s = np.minimum(np.searchsorted(init_cdf, init_u, side="right"), n_s - 1)
    for t in range(horizon):
        a = np.minimum((pi_cdf[s] <= step_u[:, t, 0:1]).sum(axis=1), n_a - 1)
        s_next = np.minimum((p_cdf[s, a] <= step_u[:, t, 1:2]).sum(axis=1), n_s - 1)
        states[:, t], actions[:, t], next_states[:, t] = s, a, s_next
        s = s_next

    states, actions, next_states = states.ravel(), actions.ravel(), next_states.ravel()
    n = states.size
    truncated = np.zeros((n_episodes, horizon), dtype=bool)
    truncated[:, -1] = True
    return RolloutBatch(
        states=states,
        actions=actions,
        rewards=env.reward[states, actions],
        costs=env.cost_tensor[:, states, actions].T.copy(),
        log_probs=log_prob_batch(params, states, actions),
        next_states=next_states,
        terminals=np.zeros(n, dtype=bool),
        truncated=truncated.ravel(),
        timesteps=np.tile(np.arange(horizon), n_episodes),
        episode_starts=np.arange(0, n + 1, horizon),
        discount=env.discount,
        seed=_seed_provenance(seed),
        tabular=True,
    )


def _collect_generic(env, params: PolicyParams, n_episodes: int, horizon: int, seed) -> RolloutBatch:
    feats, acts, rews, costs, nexts, terms, truncs, steps = [], [], [], [], [], [], [], []
    starts = [0]
    for e in range(n_episodes):
        rng = episode_stream(seed, e)
        t = 0
        try:
            state = env.reset(rng)
            for t in range(horizon):
                phi = env.features(state)
                action = sample_action(params, phi, rng)
                next_state, reward, cost, terminal = env.step(state, action, rng)
                feats.append(phi)
                acts.append(np.atleast_1d(action))
                rews.append(reward)
                costs.append(np.atleast_1d(cost))
                nexts.append(env.features(next_state))
                terms.append(bool(terminal))
                truncs.append(not terminal and t == horizon - 1)
                steps.append(t)
                state = next_state
                if terminal:
                    break
        except Exception as exc:  # noqa: BLE001 - re-raised with episode context
            raise EnvironmentStepError(e, t, exc) from exc
        starts.append(len(rews))

    features = np.asarray(feats, dtype=float)
    actions = np.asarray(acts, dtype=float)
    cost_arr = np.asarray(costs, dtype=float)
    if cost_arr.shape[1] != env.n_costs:
        raise ValueError(f"environment emitted {cost_arr.shape[1]} costs, declared {env.n_costs}")
    return RolloutBatch(
        states=features,
        actions=actions,
        rewards=np.asarray(rews, dtype=float),
        costs=cost_arr,
        log_probs=log_prob_batch(params, features, actions),
        next_states=np.asarray(nexts, dtype=float),
        terminals=np.asarray(terms, dtype=bool),
        truncated=np.asarray(truncs, dtype=bool),
        timesteps=np.asarray(steps, dtype=int),
        episode_starts=np.asarray(starts, dtype=int),
        discount=float(env.discount),
        seed=_seed_provenance(seed),
        tabular=False,
    )


def average_cost_return(batch: RolloutBatch, discount: float, cost_index: int) -> float:
    """Mean over episodes of the discounted sum of cost channel ``cost_index``."""
    if batch.n_episodes == 0 or batch.n_steps == 0:
        raise ValueError("empty batch")
    if not 0 <= cost_index < batch.n_costs:
        raise IndexError(f"cost_index {cost_index} out of range for {batch.n_costs} channels")
    return float(batch.discounted_episode_sums(batch.costs[:, cost_index], discount).mean())


def average_return(batch: RolloutBatch, discount: float) -> float:
    if batch.n_episodes == 0 or batch.n_steps == 0:
        raise ValueError("empty batch")
    return float(batch.discounted_episode_sums(batch.rewards, discount).mean())


def _jsonable(x):
    arr = np.asarray(x)
    return arr.item() if arr.ndim == 0 else arr.tolist()


def dump_batch(batch: RolloutBatch, path, extra: dict | None = None) -> None:
    """One JSON record per step; ``extra`` maps column names to per-step arrays."""
    extra = extra or {}
    episode = batch.episode_index
    with Path(path).open("w") as fh:
        for j in range(batch.n_steps):
            record = {
                "episode": int(episode[j]),
                "t": int(batch.timesteps[j]),
                "state": _jsonable(batch.states[j]),
                "action": _jsonable(batch.actions[j]),
                "reward": float(batch.rewards[j]),
                "costs": batch.costs[j].tolist(),
                "log_prob": float(batch.log_probs[j]),
                "next_state": _jsonable(batch.next_states[j]),
                "terminal": bool(batch.terminals[j]),
                "truncated": bool(batch.truncated[j]),
            }
            for key, values in extra.items():
                record[key] = _jsonable(np.asarray(values)[j])
            fh.write(json.dumps(record) + "\n")
