"""Bundled toy environments.

``chain`` is the tabular workhorse: exact evaluation applies. The two point
environments are continuous and sampling-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pcpo_lab.cmdp import TabularCmdp


def chain_cmdp(
    n_states: int = 6,
    slow_advance: float = 0.5,
    fast_advance: float = 0.9,
    hazard_cost: float = 1.0,
    goal_reward: float = 1.0,
    discount: float = 0.95,
    threshold: float = math.inf,
    episode_horizon: int = 200,
) -> TabularCmdp:
    """A chain with a slow safe action and a fast hazardous one.

    Action 0 advances with probability ``slow_advance``; action 1 advances with
    probability ``fast_advance`` and costs ``hazard_cost`` outside the goal.
    The last state pays ``goal_reward`` and sends the agent back to state 0.
    """
    s, a = n_states, 2
    transition = np.zeros((s, a, s))
    for state in range(s - 1):
        for action, p in ((0, slow_advance), (1, fast_advance)):
            transition[state, action, state + 1] = p
            transition[state, action, state] = 1.0 - p
    transition[s - 1, :, 0] = 1.0
    reward = np.zeros((s, a))
    reward[s - 1, :] = goal_reward
    cost = np.zeros((s, a))
    cost[: s - 1, 1] = hazard_cost
    init = np.zeros(s)
    init[0] = 1.0
    return TabularCmdp(
        transition=transition,
        reward=reward,
        costs=(cost,),
        thresholds=(threshold,),
        init_dist=init,
        discount=discount,
        episode_horizon=episode_horizon,
        name="chain",
    )


def random_cmdp(
    rng: np.random.Generator,
    n_states: int = 3,
    n_actions: int = 2,
    n_costs: int = 1,
    discount: float = 0.9,
    thresholds=None,
    episode_horizon: int = 100,
) -> TabularCmdp:
    """Dirichlet transitions, uniform rewards and costs in [0, 1)."""
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    # renormalise so rows meet the 1e-12 invariant exactly enough
    transition /= transition.sum(axis=2, keepdims=True)
    init = rng.dirichlet(np.ones(n_states))
    init /= init.sum()
    if thresholds is None:
        thresholds = (math.inf,) * n_costs
    return TabularCmdp(
        transition=transition,
        reward=rng.random((n_states, n_actions)),
        costs=tuple(rng.random((n_states, n_actions)) for _ in range(n_costs)),
        thresholds=tuple(thresholds),
        init_dist=init,
        discount=discount,
        episode_horizon=episode_horizon,
        name="random",
    )


def bandit_cmdp(reward, cost, threshold=math.inf, discount: float = 0.5) -> TabularCmdp:
    """One state, self-looping; rewards and costs per action."""
    reward = np.atleast_1d(np.asarray(reward, dtype=float))
    cost = np.atleast_1d(np.asarray(cost, dtype=float))
    n_actions = reward.size
    return TabularCmdp(
        transition=np.ones((1, n_actions, 1)),
        reward=reward[None],
        costs=(cost[None],),
        thresholds=(threshold,),
        init_dist=np.ones(1),
        discount=discount,
        episode_horizon=50,
        name="bandit",
    )


@dataclass(frozen=True)
class PointVelocityEnv:
    """1-D point mass rewarded for forward motion, costed for speeding.

    State is ``(position, velocity)``. The action is an acceleration clamped
    to ``[-accel_limit, accel_limit]``.
    """

    position: float = 0.0
    velocity: float = 0.0
    accel_limit: float = 1.0
    velocity_threshold: float = 0.5
    dt: float = 0.1
    horizon: int = 100
    discount: float = 0.99
    name: str = "point_velocity"

    n_costs = 1
    action_dim = 1
    feature_dim = 2

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([self.position, self.velocity])

    def step(self, state: np.ndarray, action, rng: np.random.Generator):
        position, velocity = state
        accel = float(np.clip(np.ravel(action)[0], -self.accel_limit, self.accel_limit))
        new_position = position + velocity * self.dt
        new_velocity = velocity + accel * self.dt
        reward = new_position - position
        cost = 1.0 if abs(new_velocity) > self.velocity_threshold else 0.0
        return np.array([new_position, new_velocity]), float(reward), np.array([cost]), False

    def features(self, state: np.ndarray) -> np.ndarray:
        return np.array([state[1], 1.0])


@dataclass(frozen=True)
class PointCircleEnv:
    """2-D point mass rewarded for circling the origin, costed outside a band.

    State is ``(x, y, u, v)``; the action is a 2-D acceleration clamped
    componentwise to ``[-accel_limit, accel_limit]``.
    """

    x: float = 0.0
    y: float = 0.0
    u: float = 0.0
    v: float = 0.0
    circle_radius: float = 1.0
    x_boundary: float = 0.7
    accel_limit: float = 1.0
    dt: float = 0.1
    horizon: int = 100
    discount: float = 0.99
    start_noise: float = 0.1
    name: str = "point_circle"

    n_costs = 1
    action_dim = 2
    feature_dim = 5

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        jitter = self.start_noise * rng.standard_normal(2)
        return np.array([self.x + jitter[0], self.y + jitter[1], self.u, self.v])

    def reward_cost(self, state: np.ndarray) -> tuple[float, float]:
        x, y, u, v = state
        r_agent = max(math.hypot(x, y), 1e-8)
        reward = (u * y + v * x) / r_agent / (1.0 + abs(r_agent - self.circle_radius))
        cost = 1.0 if abs(x) > self.x_boundary else 0.0
        return reward, cost

    def step(self, state: np.ndarray, action, rng: np.random.Generator):
        x, y, u, v = state
        ax, ay = np.clip(np.ravel(action)[:2], -self.accel_limit, self.accel_limit)
        nxt = np.array([x + u * self.dt, y + v * self.dt, u + ax * self.dt, v + ay * self.dt])
        reward, cost = self.reward_cost(nxt)
        return nxt, float(reward), np.array([cost]), False

    def features(self, state: np.ndarray) -> np.ndarray:
        return np.array([state[0], state[1], state[2], state[3], 1.0])
