"""Tabular-softmax and linear-Gaussian policies with exact scores and KL.

A tabular ``theta`` holds logits row-major over ``(state, action)``. A linear
Gaussian ``theta`` holds the mean weights ``W`` (``action_dim x feature_dim``,
row-major) followed by one state-independent log standard deviation per
action dimension. Gaussian "states" are feature vectors.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, logsumexp

LOG_STD_MIN = math.log(1e-6) + 1e-9
LOG_STD_MAX = math.log(1e6) - 1e-9
PARAMS_FILE_FORMAT = "pcpo-params"
PARAMS_FILE_VERSION = 1
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class PolicyFamily(str, enum.Enum):
    TABULAR_SOFTMAX = "tabular_softmax"
    LINEAR_GAUSSIAN = "linear_gaussian"


class FamilyMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyParams:
    family: PolicyFamily
    theta: np.ndarray
    n_states: int = 0
    n_actions: int = 0
    feature_dim: int = 0
    action_dim: int = 0

    def __post_init__(self) -> None:
        family = PolicyFamily(self.family)
        theta = np.array(self.theta, dtype=float).ravel()
        if family is PolicyFamily.TABULAR_SOFTMAX:
            expected = self.n_states * self.n_actions
            if self.n_states < 1 or self.n_actions < 1:
                raise ValueError("tabular policy needs n_states, n_actions >= 1")
        else:
            expected = self.action_dim * self.feature_dim + self.action_dim
            if self.feature_dim < 1 or self.action_dim < 1:
                raise ValueError("gaussian policy needs feature_dim, action_dim >= 1")
        if theta.size != expected:
            raise ValueError(f"theta has {theta.size} entries, {family.value} shape needs {expected}")
        if family is PolicyFamily.LINEAR_GAUSSIAN:
            tail = theta[-self.action_dim:]
            if not np.all(np.isfinite(tail)):
                raise ValueError("log-std entries must be finite")
            theta[-self.action_dim:] = np.clip(tail, LOG_STD_MIN, LOG_STD_MAX)
        theta.setflags(write=False)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def tabular(cls, n_states: int, n_actions: int, theta=None) -> "PolicyParams":
        if theta is None:
            theta = np.zeros(n_states * n_actions)
        return cls(PolicyFamily.TABULAR_SOFTMAX, theta, n_states=n_states, n_actions=n_actions)

    @classmethod
    def linear_gaussian(cls, feature_dim: int, action_dim: int, weights=None, log_std=None) -> "PolicyParams":
        weights = np.zeros((action_dim, feature_dim)) if weights is None else np.asarray(weights, float)
        log_std = np.zeros(action_dim) if log_std is None else np.asarray(log_std, float)
        theta = np.concatenate([weights.ravel(), np.ravel(log_std)])
        return cls(PolicyFamily.LINEAR_GAUSSIAN, theta, feature_dim=feature_dim, action_dim=action_dim)

    @property
    def size(self) -> int:
        return self.theta.size

    @property
    def is_tabular(self) -> bool:
        return self.family is PolicyFamily.TABULAR_SOFTMAX

    def with_theta(self, theta) -> "PolicyParams":
        return PolicyParams(
            self.family, theta, n_states=self.n_states, n_actions=self.n_actions,
            feature_dim=self.feature_dim, action_dim=self.action_dim,
        )

    def same_shape(self, other: "PolicyParams") -> bool:
        return (self.family, self.n_states, self.n_actions, self.feature_dim, self.action_dim) == (
            other.family, other.n_states, other.n_actions, other.feature_dim, other.action_dim)

    # tabular views
    def logits(self) -> np.ndarray:
        return self.theta.reshape(self.n_states, self.n_actions)

    # gaussian views
    def weights(self) -> np.ndarray:
        return self.theta[: self.action_dim * self.feature_dim].reshape(self.action_dim, self.feature_dim)

    def log_std(self) -> np.ndarray:
        return self.theta[-self.action_dim:]


def probabilities(params: PolicyParams) -> np.ndarray:
    """Action probability table ``(n_states, n_actions)`` of a tabular policy."""
    _require_tabular(params)
    return np.exp(log_softmax(params.logits(), axis=1))


def gaussian_mean(params: PolicyParams, features) -> np.ndarray:
    feats = np.asarray(features, dtype=float)
    return feats @ params.weights().T


def _require_tabular(params: PolicyParams) -> None:
    if not params.is_tabular:
        raise FamilyMismatchError("operation needs a tabular softmax policy")


def _check_tabular_index(params: PolicyParams, states, actions) -> None:
    states = np.asarray(states)
    actions = np.asarray(actions)
    if np.any((states < 0) | (states >= params.n_states)):
        raise IndexError(f"state out of range [0, {params.n_states})")
    if np.any((actions < 0) | (actions >= params.n_actions)):
        raise IndexError(f"action out of range [0, {params.n_actions})")


def log_prob_batch(params: PolicyParams, states, actions) -> np.ndarray:
    """Log-likelihoods of ``actions`` at ``states`` (vectorized ``log_prob``)."""
    if params.is_tabular:
        states = np.asarray(states, dtype=int)
        actions = np.asarray(actions, dtype=int)
        _check_tabular_index(params, states, actions)
        logits = params.logits()
        return logits[states, actions] - logsumexp(logits[states], axis=-1)
    feats = np.atleast_2d(np.asarray(states, dtype=float))
    acts = np.asarray(actions, dtype=float).reshape(feats.shape[0], params.action_dim)
    if feats.shape[1] != params.feature_dim:
        raise IndexError(f"feature vectors must have length {params.feature_dim}")
    log_std = params.log_std()
    z = (acts - gaussian_mean(params, feats)) * np.exp(-log_std)
    return np.sum(-0.5 * z**2 - log_std - _HALF_LOG_2PI, axis=1)


def log_prob(params: PolicyParams, state, action) -> float:
    if params.is_tabular:
        return float(log_prob_batch(params, [state], [action])[0])
    return float(log_prob_batch(params, np.atleast_2d(state), np.atleast_2d(action))[0])


def score_batch(params: PolicyParams, states, actions) -> np.ndarray:
    """Rows of ``grad_theta log pi(a|s)``; shape ``(N, params.size)``."""
    if params.is_tabular:
        states = np.asarray(states, dtype=int)
        actions = np.asarray(actions, dtype=int)
        _check_tabular_index(params, states, actions)
        probs = probabilities(params)
        n, a = states.size, params.n_actions
        block = -probs[states]
        block[np.arange(n), actions] += 1.0
        out = np.zeros((n, params.size))
        cols = states[:, None] * a + np.arange(a)[None, :]
        out[np.arange(n)[:, None], cols] = block
        return out
    feats = np.atleast_2d(np.asarray(states, dtype=float))
    acts = np.asarray(actions, dtype=float).reshape(feats.shape[0], params.action_dim)
    inv_var = np.exp(-2.0 * params.log_std())
    resid = acts - gaussian_mean(params, feats)
    grad_w = (resid * inv_var)[:, :, None] * feats[:, None, :]
    grad_log_std = resid**2 * inv_var - 1.0
    return np.concatenate([grad_w.reshape(feats.shape[0], -1), grad_log_std], axis=1)


def score(params: PolicyParams, state, action) -> np.ndarray:
    if params.is_tabular:
        return score_batch(params, [state], [action])[0]
    return score_batch(params, np.atleast_2d(state), np.atleast_2d(action))[0]


def kl_per_state(params_new: PolicyParams, params_ref: PolicyParams, states=None) -> np.ndarray:
    """``KL(pi_new(.|s) || pi_ref(.|s))`` for each state.

    Tabular policies cover every state unless ``states`` picks a subset;
    Gaussian policies need ``states`` as a feature matrix.
    """
    if not params_new.same_shape(params_ref):
        raise FamilyMismatchError("KL needs two policies of the same family and shape")
    if params_new.is_tabular:
        log_new = log_softmax(params_new.logits(), axis=1)
        log_ref = log_softmax(params_ref.logits(), axis=1)
        per_state = np.sum(np.exp(log_new) * (log_new - log_ref), axis=1)
        per_state = np.maximum(per_state, 0.0)
        return per_state if states is None else per_state[np.asarray(states, dtype=int)]
    if states is None:
        raise ValueError("gaussian KL needs feature vectors")
    feats = np.atleast_2d(np.asarray(states, dtype=float))
    ls_new, ls_ref = params_new.log_std(), params_ref.log_std()
    mean_gap = gaussian_mean(params_new, feats) - gaussian_mean(params_ref, feats)
    var_ratio = np.exp(2.0 * (ls_new - ls_ref))
    per_dim = (ls_ref - ls_new) + 0.5 * (var_ratio + mean_gap**2 * np.exp(-2.0 * ls_ref)) - 0.5
    return np.maximum(per_dim.sum(axis=1), 0.0)


def kl_divergence(params_new: PolicyParams, params_ref: PolicyParams, state_weights, states=None) -> float:
    """State-weighted ``KL(new || ref)``.

    For tabular policies ``state_weights`` has one entry per state (``states``
    may restrict which); for Gaussian ones it has one entry per feature row.
    """
    per_state = kl_per_state(params_new, params_ref, states)
    weights = np.asarray(state_weights, dtype=float)
    if weights.shape != per_state.shape:
        raise ValueError(f"state_weights shape {weights.shape} does not match {per_state.shape}")
    return float(weights @ per_state)


def sample_action(params: PolicyParams, state, rng: np.random.Generator):
    if params.is_tabular:
        _check_tabular_index(params, [state], [0])
        cdf = np.cumsum(probabilities(params)[state])
        return int(min(np.searchsorted(cdf, rng.random(), side="right"), params.n_actions - 1))
    mean = gaussian_mean(params, np.atleast_2d(state))[0]
    return mean + np.exp(params.log_std()) * rng.standard_normal(params.action_dim)


def params_to_dict(params: PolicyParams) -> dict:
    return {
        "format": PARAMS_FILE_FORMAT,
        "version": PARAMS_FILE_VERSION,
        "family": params.family.value,
        "shape": {
            "n_states": params.n_states,
            "n_actions": params.n_actions,
            "feature_dim": params.feature_dim,
            "action_dim": params.action_dim,
        },
        "theta": params.theta.tolist(),
    }


def params_from_dict(data: dict) -> PolicyParams:
    if data.get("format") != PARAMS_FILE_FORMAT:
        raise ValueError(f"not a {PARAMS_FILE_FORMAT} document")
    if data.get("version") != PARAMS_FILE_VERSION:
        raise ValueError(f"unsupported parameter file version {data.get('version')}")
    return PolicyParams(PolicyFamily(data["family"]), np.asarray(data["theta"], float), **data["shape"])


def save_params(params: PolicyParams, path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params)))


def load_params(path) -> PolicyParams:
    return params_from_dict(json.loads(Path(path).read_text()))
