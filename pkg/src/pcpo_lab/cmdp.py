"""Finite constrained MDPs and their exact evaluation.

Everything here is dense linear algebra on small tables. The functions in this
module are the ground truth the sampled estimators are tested against.

Conventions: ``transition[s, a, s']`` is ``P(s' | s, a)``; reward and cost
tables are indexed ``(s, a)``; policy tables are ``(n_states, n_actions)``
with rows summing to one.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.optimize

_PROB_TOL = 1e-12
_RESIDUAL_TOL = 1e-8
MAX_GRID_POINTS = 10_000_000
CMDP_FILE_FORMAT = "pcpo-cmdp"
CMDP_FILE_VERSION = 1


class SolverResidualError(RuntimeError):
    """Raised when a dense solve leaves a residual above tolerance."""


class GridTooLargeError(ValueError):
    """Raised when a brute-force policy grid would exceed the point budget."""

    def __init__(self, required: int, budget: int) -> None:
        super().__init__(
            f"policy grid needs {required} points, budget is {budget}; "
            "coarsen grid_resolution or shrink the CMDP"
        )
        self.required = required
        self.budget = budget


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TabularCmdp:
    """A complete finite CMDP.

    ``episode_horizon`` only truncates sampled episodes; exact evaluation is
    infinite-horizon discounted.
    """

    transition: np.ndarray
    reward: np.ndarray
    costs: tuple[np.ndarray, ...]
    thresholds: tuple[float, ...]
    init_dist: np.ndarray
    discount: float
    episode_horizon: int = 200
    name: str = "tabular"

    def __post_init__(self) -> None:
        transition = _readonly(self.transition)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise ValueError(f"transition must be (S, A, S), got {transition.shape}")
        n_states, n_actions, _ = transition.shape
        if n_states < 1 or n_actions < 1:
            raise ValueError("need at least one state and one action")
        if np.any(transition < 0):
            raise ValueError("transition has negative entries")
        row_err = np.abs(transition.sum(axis=2) - 1.0).max()
        if row_err > _PROB_TOL:
            raise ValueError(f"transition rows do not sum to 1 (max error {row_err:.3g})")

        reward = _readonly(self.reward)
        if reward.shape != (n_states, n_actions):
            raise ValueError(f"reward must be {(n_states, n_actions)}, got {reward.shape}")
        costs = tuple(_readonly(c) for c in self.costs)
        if len(costs) < 1:
            raise ValueError("a CMDP needs at least one cost channel")
        for i, cost in enumerate(costs):
            if cost.shape != (n_states, n_actions):
                raise ValueError(f"cost {i} must be {(n_states, n_actions)}, got {cost.shape}")
        thresholds = tuple(float(d) for d in self.thresholds)
        if len(thresholds) != len(costs):
            raise ValueError(
                f"{len(costs)} cost channels but {len(thresholds)} thresholds"
            )
        if any(d < 0 or math.isnan(d) for d in thresholds):
            raise ValueError("thresholds must be nonnegative")

        init = _readonly(self.init_dist)
        if init.shape != (n_states,):
            raise ValueError(f"init_dist must have length {n_states}")
        if np.any(init < 0) or abs(init.sum() - 1.0) > _PROB_TOL:
            raise ValueError("init_dist is not a probability vector")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must be in (0, 1), got {self.discount}")
        if int(self.episode_horizon) < 1:
            raise ValueError("episode_horizon must be positive")

        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "init_dist", init)
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "episode_horizon", int(self.episode_horizon))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def n_costs(self) -> int:
        return len(self.costs)

    @property
    def cost_tensor(self) -> np.ndarray:
        """Costs stacked as ``(m, S, A)``."""
        return np.stack(self.costs)

    def with_thresholds(self, thresholds) -> "TabularCmdp":
        return TabularCmdp(
            transition=self.transition,
            reward=self.reward,
            costs=self.costs,
            thresholds=tuple(thresholds),
            init_dist=self.init_dist,
            discount=self.discount,
            episode_horizon=self.episode_horizon,
            name=self.name,
        )

    # generic environment protocol (used by the sampler's slow path)
    def reset(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(np.cumsum(self.init_dist), rng.random(), side="right"))

    def step(self, state: int, action: int, rng: np.random.Generator):
        row = self.transition[state, action]
        next_state = int(np.searchsorted(np.cumsum(row), rng.random(), side="right"))
        next_state = min(next_state, self.n_states - 1)
        costs = np.array([c[state, action] for c in self.costs])
        return next_state, float(self.reward[state, action]), costs, False

    def to_dict(self) -> dict:
        return {
            "format": CMDP_FILE_FORMAT,
            "version": CMDP_FILE_VERSION,
            "name": self.name,
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "n_costs": self.n_costs,
            "discount": self.discount,
            "episode_horizon": self.episode_horizon,
            "init_dist": self.init_dist.tolist(),
            "transition": self.transition.ravel().tolist(),
            "reward": self.reward.ravel().tolist(),
            "costs": [c.ravel().tolist() for c in self.costs],
            "thresholds": list(self.thresholds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TabularCmdp":
        if data.get("format") != CMDP_FILE_FORMAT:
            raise ValueError(f"not a {CMDP_FILE_FORMAT} document")
        if data.get("version") != CMDP_FILE_VERSION:
            raise ValueError(f"unsupported CMDP file version {data.get('version')}")
        s, a = int(data["n_states"]), int(data["n_actions"])
        return cls(
            transition=np.reshape(data["transition"], (s, a, s)),
            reward=np.reshape(data["reward"], (s, a)),
            costs=tuple(np.reshape(c, (s, a)) for c in data["costs"]),
            thresholds=tuple(float(d) for d in data["thresholds"]),
            init_dist=np.asarray(data["init_dist"], dtype=float),
            discount=float(data["discount"]),
            episode_horizon=int(data.get("episode_horizon", 200)),
            name=data.get("name", "tabular"),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "TabularCmdp":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ExactEvalResult:
    state_values: np.ndarray
    action_values: np.ndarray
    advantages: np.ndarray
    occupancy: np.ndarray
    discounted_return: float
    cost_state_values: tuple[np.ndarray, ...] = field(default_factory=tuple)
    cost_action_values: tuple[np.ndarray, ...] = field(default_factory=tuple)
    cost_advantages: tuple[np.ndarray, ...] = field(default_factory=tuple)
    cost_returns: tuple[float, ...] = field(default_factory=tuple)


def check_policy_table(cmdp: TabularCmdp, policy_table) -> np.ndarray:
    pi = np.asarray(policy_table, dtype=float)
    if pi.shape != (cmdp.n_states, cmdp.n_actions):
        raise ValueError(f"policy table must be {(cmdp.n_states, cmdp.n_actions)}, got {pi.shape}")
    if np.any(pi < -1e-15) or np.abs(pi.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("policy rows must be probability distributions")
    return pi


def state_transition_matrix(cmdp: TabularCmdp, pi: np.ndarray) -> np.ndarray:
    """Row-stochastic ``M[s, s'] = sum_a pi(a|s) P(s'|s,a)``."""
    return np.einsum("sa,sat->st", pi, cmdp.transition)


def _solve_checked(lu_piv, matrix: np.ndarray, rhs: np.ndarray, trans: int = 0) -> np.ndarray:
    x = scipy.linalg.lu_solve(lu_piv, rhs, trans=trans)
    a = matrix.T if trans else matrix
    residual = np.abs(a @ x - rhs).max()
    scale = max(1.0, np.abs(rhs).max())
    if residual > _RESIDUAL_TOL * scale:
        raise SolverResidualError(f"policy evaluation residual {residual:.3g}")
    return x


def exact_policy_eval(cmdp: TabularCmdp, policy_table) -> ExactEvalResult:
    """Exact values, advantages, occupancy and returns for every channel."""
    pi = check_policy_table(cmdp, policy_table)
    gamma = cmdp.discount
    system = np.eye(cmdp.n_states) - gamma * state_transition_matrix(cmdp, pi)
    lu_piv = scipy.linalg.lu_factor(system)

    def channel(table: np.ndarray):
        r_pi = np.einsum("sa,sa->s", pi, table)
        v = _solve_checked(lu_piv, system, r_pi)
        q = table + gamma * cmdp.transition @ v
        return v, q, q - v[:, None], float(cmdp.init_dist @ v)

    # d_pi = (1 - gamma) (I - gamma M^T)^{-1} nu
    occupancy = (1.0 - gamma) * _solve_checked(lu_piv, system, cmdp.init_dist, trans=1)
    v, q, adv, j = channel(cmdp.reward)
    cost_parts = [channel(c) for c in cmdp.costs]
    return ExactEvalResult(
        state_values=v,
        action_values=q,
        advantages=adv,
        occupancy=occupancy,
        discounted_return=j,
        cost_state_values=tuple(p[0] for p in cost_parts),
        cost_action_values=tuple(p[1] for p in cost_parts),
        cost_advantages=tuple(p[2] for p in cost_parts),
        cost_returns=tuple(p[3] for p in cost_parts),
    )


def performance_difference(cmdp: TabularCmdp, pi_old, pi_new, cost_index: int | None = None) -> float:
    """``J(pi_new) - J(pi_old)`` written through the advantages of ``pi_old``.

    With ``cost_index`` set, the same identity for that cost channel.
    """
    old = exact_policy_eval(cmdp, pi_old)
    new_pi = check_policy_table(cmdp, pi_new)
    new = exact_policy_eval(cmdp, new_pi)
    adv = old.advantages if cost_index is None else old.cost_advantages[cost_index]
    expected_adv = np.einsum("s,sa,sa->", new.occupancy, new_pi, adv)
    return float(expected_adv / (1.0 - cmdp.discount))


def batched_returns(cmdp: TabularCmdp, policies: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Discounted reward and cost returns for a stack of policies ``(K, S, A)``.

    Returns ``(J, J_C)`` with shapes ``(K,)`` and ``(K, m)``.
    """
    gamma = cmdp.discount
    k = policies.shape[0]
    m_pi = np.einsum("ksa,sat->kst", policies, cmdp.transition)
    system = np.eye(cmdp.n_states)[None] - gamma * m_pi
    tables = np.concatenate([cmdp.reward[None], cmdp.cost_tensor])  # (1+m, S, A)
    rhs = np.einsum("ksa,csa->ksc", policies, tables)
    values = np.linalg.solve(system, rhs)  # (K, S, 1+m)
    residual = np.abs(np.einsum("kst,ktc->ksc", system, values) - rhs).max() if k else 0.0
    if residual > _RESIDUAL_TOL * max(1.0, np.abs(rhs).max() if k else 1.0):
        raise SolverResidualError(f"batched evaluation residual {residual:.3g}")
    returns = np.einsum("s,ksc->kc", cmdp.init_dist, values)
    return returns[:, 0], returns[:, 1:]


def value_iteration(cmdp: TabularCmdp, tol: float = 1e-12, max_iters: int = 100_000):
    """Unconstrained optimal values and a greedy deterministic policy table."""
    v = np.zeros(cmdp.n_states)
    for _ in range(max_iters):
        q = cmdp.reward + cmdp.discount * cmdp.transition @ v
        v_new = q.max(axis=1)
        if np.abs(v_new - v).max() < tol:
            v = v_new
            break
        v = v_new
    q = cmdp.reward + cmdp.discount * cmdp.transition @ v
    greedy = np.zeros((cmdp.n_states, cmdp.n_actions))
    greedy[np.arange(cmdp.n_states), q.argmax(axis=1)] = 1.0
    return v, greedy


@dataclass(frozen=True)
class ConstrainedOptimum:
    policy: np.ndarray
    value: float
    cost_values: np.ndarray
    feasible: bool
    n_points: int = 0


def _simplex_grid(n_actions: int, steps: int) -> np.ndarray:
    """All points of the action simplex with coordinates in multiples of 1/steps."""
    points = []
    for bars in itertools.combinations(range(steps + n_actions - 1), n_actions - 1):
        edges = (-1,) + bars + (steps + n_actions - 1,)
        points.append([edges[i + 1] - edges[i] - 1 for i in range(n_actions)])
    return np.asarray(points, dtype=float) / steps


def grid_size(cmdp: TabularCmdp, grid_resolution: float) -> int:
    steps = int(round(1.0 / grid_resolution))
    per_state = math.comb(steps + cmdp.n_actions - 1, cmdp.n_actions - 1)
    return per_state ** cmdp.n_states


def brute_force_constrained_optimum(
    cmdp: TabularCmdp,
    grid_resolution: float,
    max_points: int = MAX_GRID_POINTS,
    chunk_size: int = 20_000,
) -> ConstrainedOptimum:
    """Enumerate a policy grid and keep the best feasible point.

    If no grid point is feasible, the point with the smallest total violation
    is returned with ``feasible=False``.
    """
    steps = int(round(1.0 / grid_resolution))
    if steps < 1 or abs(steps * grid_resolution - 1.0) > 1e-9:
        raise ValueError("1/grid_resolution must be a positive integer")
    total = grid_size(cmdp, grid_resolution)
    if total > max_points:
        raise GridTooLargeError(total, max_points)

    simplex = _simplex_grid(cmdp.n_actions, steps)
    per_state = simplex.shape[0]
    thresholds = np.asarray(cmdp.thresholds)
    best = (-np.inf, None, None)
    least_bad = (np.inf, None, None, None)
    for start in range(0, total, chunk_size):
        flat = np.arange(start, min(start + chunk_size, total))
        idx = np.stack(np.unravel_index(flat, (per_state,) * cmdp.n_states), axis=1)
        policies = simplex[idx]  # (K, S, A)
        j, jc = batched_returns(cmdp, policies)
        violation = np.maximum(jc - thresholds, 0.0).sum(axis=1)
        feasible = violation <= 1e-12
        if feasible.any():
            cand = np.flatnonzero(feasible)[np.argmax(j[feasible])]
            if j[cand] > best[0]:
                best = (j[cand], policies[cand], jc[cand])
        worst = int(np.argmin(violation))
        if violation[worst] < least_bad[0]:
            least_bad = (violation[worst], policies[worst], j[worst], jc[worst])

    if best[1] is not None:
        return ConstrainedOptimum(best[1], float(best[0]), best[2], True, total)
    return ConstrainedOptimum(least_bad[1], float(least_bad[2]), least_bad[3], False, total)


def lp_constrained_optimum(cmdp: TabularCmdp) -> ConstrainedOptimum:
    """Exact constrained optimum via the occupancy-measure linear program."""
    s, a = cmdp.n_states, cmdp.n_actions
    gamma = cmdp.discount
    # flow conservation: sum_a x(s',a) - gamma sum_{s,a} P(s'|s,a) x(s,a) = nu(s')
    a_eq = np.zeros((s, s * a))
    for sp in range(s):
        a_eq[sp, sp * a:(sp + 1) * a] += 1.0
    a_eq -= gamma * cmdp.transition.reshape(s * a, s).T
    finite = [i for i, d in enumerate(cmdp.thresholds) if math.isfinite(d)]
    a_ub = np.array([cmdp.costs[i].ravel() for i in finite]) if finite else None
    b_ub = np.array([cmdp.thresholds[i] for i in finite]) if finite else None
    res = scipy.optimize.linprog(
        -cmdp.reward.ravel(), A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=cmdp.init_dist,
        bounds=(0, None), method="highs",
    )
    if res.status == 2:
        return ConstrainedOptimum(
            np.full((s, a), 1.0 / a), float("nan"), np.full(cmdp.n_costs, np.nan), False
        )
    if not res.success:
        raise RuntimeError(f"occupancy LP failed: {res.message}")
    x = res.x.reshape(s, a)
    mass = x.sum(axis=1, keepdims=True)
    policy = np.where(mass > 1e-12, x / np.maximum(mass, 1e-300), 1.0 / a)
    policy /= policy.sum(axis=1, keepdims=True)
    ev = exact_policy_eval(cmdp, policy)
    return ConstrainedOptimum(policy, ev.discounted_return, np.asarray(ev.cost_returns), True)
