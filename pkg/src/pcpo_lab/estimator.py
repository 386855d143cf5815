"""Value baselines, GAE, and the surrogate objective/constraint estimators.

Sampled surrogates reweight behavior samples by ``pi_theta / pi_behavior``.
For tabular policies there is also an exact-enumeration variant that sums
over every action with given advantage tables; the tests use it to compare
against the exact oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from pcpo_lab.policy import PolicyParams, log_prob_batch, probabilities, score_batch
from pcpo_lab.sampler import RolloutBatch

MAX_IMPORTANCE_WEIGHT = 1e6


@dataclass(frozen=True)
class EstimatorConfig:
    """Advantage/value settings.

    The value fitters here solve their ridge problem exactly, so
    ``value_fit_epochs``, ``value_learning_rate`` and ``minibatch_size`` are
    carried for configuration compatibility only.
    """

    discount: float = 0.99
    gae_lambda_reward: float = 0.95
    gae_lambda_cost: float = 0.95
    value_fit_epochs: int = 10
    value_learning_rate: float = 3e-4
    l2_coeff: float = 1e-3
    minibatch_size: int = 64
    normalize_advantages: bool = True
    center_cost_advantages: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        for lam in (self.gae_lambda_reward, self.gae_lambda_cost):
            if not 0.0 <= lam <= 1.0:
                raise ValueError("GAE lambdas must lie in [0, 1]")
        if self.value_fit_epochs < 1 or self.minibatch_size < 1:
            raise ValueError("epochs and minibatch size must be positive")
        if self.value_learning_rate <= 0 or self.l2_coeff < 0:
            raise ValueError("learning rate must be positive and l2_coeff nonnegative")


# ---------------------------------------------------------------- value fits
@dataclass(frozen=True)
class ValueFunction:
    """Linear predictor ``w . features(s) + b``; tabular states use one-hot features."""

    weights: np.ndarray
    bias: float
    n_states: int = 0
    degenerate: bool = False
    loss_history: tuple[float, ...] = ()

    @classmethod
    def zeros(cls, n_features: int, n_states: int = 0) -> "ValueFunction":
        return cls(np.zeros(n_features), 0.0, n_states)

    def features(self, states) -> np.ndarray:
        if self.n_states:
            states = np.asarray(states, dtype=int)
            return np.eye(self.n_states)[states]
        return np.atleast_2d(np.asarray(states, dtype=float))

    def predict(self, states) -> np.ndarray:
        return self.features(states) @ self.weights + self.bias


def _ridge_loss(x: np.ndarray, y: np.ndarray, w: np.ndarray, b: float, l2: float) -> float:
    resid = x @ w + b - y
    return float(0.5 * np.mean(resid**2) + 0.5 * l2 * w @ w)


def fit_value(states, targets, config: EstimatorConfig, n_states: int = 0,
              previous: ValueFunction | None = None) -> ValueFunction:
    """Minimize ``(1/2B) sum (V(s_j) - y_j)^2 + (l2/2) |w|^2`` exactly.

    The intercept is unpenalized. With no feature variance at all the fit
    falls back to the constant predictor and is flagged ``degenerate``.
    """
    y = np.asarray(targets, dtype=float)
    if y.size == 0:
        raise ValueError("cannot fit values on an empty batch")
    template = ValueFunction.zeros(n_states if n_states else np.atleast_2d(states).shape[1], n_states)
    x = template.features(states)
    start = previous if previous is not None else template
    loss0 = _ridge_loss(x, y, start.weights, start.bias, config.l2_coeff)

    x_mean, y_mean = x.mean(axis=0), y.mean()
    xc, yc = x - x_mean, y - y_mean
    spread = xc.std(axis=0)
    degenerate = not np.any(spread > 1e-12)
    if degenerate:
        w = np.zeros(x.shape[1])
    else:
        n = y.size
        gram = xc.T @ xc / n + config.l2_coeff * np.eye(x.shape[1])
        w = np.linalg.lstsq(gram, xc.T @ yc / n, rcond=None)[0]
        w[spread <= 1e-12] = 0.0
    b = float(y_mean - x_mean @ w)
    loss1 = _ridge_loss(x, y, w, b, config.l2_coeff)
    return ValueFunction(w, b, n_states, degenerate, (loss0, loss1))


@dataclass(frozen=True)
class ValueFits:
    reward: ValueFunction
    costs: tuple[ValueFunction, ...]

    @classmethod
    def zeros(cls, n_features: int, n_costs: int, n_states: int = 0) -> "ValueFits":
        return cls(ValueFunction.zeros(n_features, n_states),
                   tuple(ValueFunction.zeros(n_features, n_states) for _ in range(n_costs)))

    @property
    def degenerate(self) -> bool:
        return self.reward.degenerate or any(c.degenerate for c in self.costs)


def fit_values(batch: RolloutBatch, estimates: "AdvantageEstimates", config: EstimatorConfig,
               n_states: int = 0, previous: ValueFits | None = None) -> ValueFits:
    """Refit reward and cost baselines on the GAE value targets."""
    prev_r = previous.reward if previous else None
    reward = fit_value(batch.states, estimates.value_targets, config, n_states, prev_r)
    costs = tuple(
        fit_value(batch.states, estimates.cost_value_targets[:, i], config, n_states,
                  previous.costs[i] if previous else None)
        for i in range(batch.n_costs)
    )
    return ValueFits(reward, costs)


# ----------------------------------------------------------------------- GAE
@dataclass(frozen=True)
class ChannelEstimate:
    advantages: np.ndarray
    targets: np.ndarray


def gae(batch: RolloutBatch, value: ValueFunction, config: EstimatorConfig, channel="reward",
        values=None, next_values=None) -> ChannelEstimate:
    """GAE for the reward (``channel="reward"``) or cost channel ``channel``.

    ``values``/``next_values`` override the predictions of ``value`` at
    ``s_t``/``s_{t+1}``. Truncated episodes bootstrap from ``V(s_T)``.
    """
    if channel == "reward":
        x, lam = batch.rewards, config.gae_lambda_reward
    else:
        x, lam = batch.costs[:, int(channel)], config.gae_lambda_cost
    gamma = config.discount
    v = value.predict(batch.states) if values is None else np.asarray(values, float)
    v_next = value.predict(batch.next_states) if next_values is None else np.asarray(next_values, float)
    delta = x + gamma * v_next * (~batch.terminals) - v
    adv = np.empty_like(delta)
    decay = gamma * lam
    for sl in batch.episode_slices():
        # Â_t = δ_t + γλ Â_{t+1}; episodes only end at their last step.
        adv[sl] = lfilter([1.0], [1.0, -decay], delta[sl][::-1])[::-1]
    return ChannelEstimate(adv, adv + v)


@dataclass(frozen=True)
class AdvantageEstimates:
    advantages: np.ndarray
    cost_advantages: np.ndarray
    value_targets: np.ndarray
    cost_value_targets: np.ndarray
    raw_advantage_mean: float = 0.0
    raw_advantage_std: float = 1.0
    cost_advantage_means: np.ndarray = field(default_factory=lambda: np.zeros(0))


def estimate_advantages(batch: RolloutBatch, values: ValueFits, config: EstimatorConfig) -> AdvantageEstimates:
    """All channels at once.

    Reward advantages are normalized if configured. Cost advantages are never
    rescaled; they are only centered (if configured) so that the constraint
    surrogate at the behavior policy equals ``J_C_hat - d`` despite baseline
    bias, which the ``1/(1-gamma)`` factor would otherwise amplify.
    """
    reward = gae(batch, values.reward, config, "reward")
    costs = [gae(batch, values.costs[i], config, i) for i in range(batch.n_costs)]
    adv = reward.advantages
    mean, std = float(adv.mean()), float(adv.std())
    if config.normalize_advantages:
        adv = (adv - mean) / (std + 1e-8) if std > 0 else adv - mean
    cost_adv = np.stack([c.advantages for c in costs], axis=1)
    cost_means = cost_adv.mean(axis=0)
    if config.center_cost_advantages:
        cost_adv = cost_adv - cost_means
    return AdvantageEstimates(
        advantages=adv,
        cost_advantages=cost_adv,
        value_targets=reward.targets,
        cost_value_targets=np.stack([c.targets for c in costs], axis=1),
        raw_advantage_mean=mean,
        raw_advantage_std=std,
        cost_advantage_means=cost_means,
    )


# ---------------------------------------------------------------- surrogates
def importance_weights(batch: RolloutBatch, params: PolicyParams) -> tuple[np.ndarray, int]:
    """``pi_theta(a|s) / pi_behavior(a|s)`` per step, clipped to ``[0, 1e6]``."""
    log_ratio = log_prob_batch(params, batch.states, batch.actions) - batch.log_probs
    with np.errstate(over="ignore"):
        weights = np.exp(log_ratio)
    clipped = int(np.count_nonzero(weights > MAX_IMPORTANCE_WEIGHT))
    return np.minimum(weights, MAX_IMPORTANCE_WEIGHT), clipped


def surrogate_objective(batch: RolloutBatch, advantages, params_new: PolicyParams,
                        params_old: PolicyParams | None = None) -> float:
    """Importance-weighted mean advantage.

    The behavior log-probabilities stored in ``batch`` stand in for
    ``params_old``; that argument is accepted for a symmetric call shape.
    """
    weights, _ = importance_weights(batch, params_new)
    return float(np.mean(weights * np.asarray(advantages)))


def constraint_surrogate(batch: RolloutBatch, cost_advantages, params_new: PolicyParams,
                         params_old: PolicyParams | None, j_c_hat: float, threshold: float,
                         discount: float) -> float:
    """``J_C_hat + (1/(1-gamma)) * weighted mean cost advantage - d``."""
    weights, _ = importance_weights(batch, params_new)
    return float(j_c_hat + np.mean(weights * np.asarray(cost_advantages)) / (1.0 - discount) - threshold)


def gradients(batch: RolloutBatch, estimates: AdvantageEstimates, params_old: PolicyParams,
              discount: float | None = None, scores: np.ndarray | None = None):
    """Gradients of the surrogate objective and of each constraint surrogate at ``params_old``."""
    gamma = batch.discount if discount is None else discount
    s = score_batch(params_old, batch.states, batch.actions) if scores is None else scores
    n = batch.n_steps
    grad_f = s.T @ estimates.advantages / n
    grad_g = [s.T @ estimates.cost_advantages[:, i] / (n * (1.0 - gamma))
              for i in range(estimates.cost_advantages.shape[1])]
    return grad_f, grad_g


# ------------------------------------------------------ exact enumeration
def surrogate_objective_exact(params: PolicyParams, state_weights, advantage_table) -> float:
    """``sum_s w(s) sum_a pi_theta(a|s) A(s,a)``."""
    return float(np.einsum("s,sa,sa->", np.asarray(state_weights, float), probabilities(params),
                           np.asarray(advantage_table, float)))


def constraint_surrogate_exact(params: PolicyParams, state_weights, cost_advantage_table,
                               j_c: float, threshold: float, discount: float) -> float:
    expected = surrogate_objective_exact(params, state_weights, cost_advantage_table)
    return float(j_c + expected / (1.0 - discount) - threshold)


def surrogate_gradient_exact(params: PolicyParams, state_weights, advantage_table) -> np.ndarray:
    """Analytic gradient of ``surrogate_objective_exact`` (softmax Jacobian per state)."""
    p = probabilities(params)
    a = np.asarray(advantage_table, float)
    centred = a - np.sum(p * a, axis=1, keepdims=True)
    return (np.asarray(state_weights, float)[:, None] * p * centred).ravel()
