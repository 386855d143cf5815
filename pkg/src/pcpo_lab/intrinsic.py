"""Gated intrinsic bonus that switches on near the constraint boundary.

Per cost channel ``i`` and sample ``j``::

    score_ij = beta * |A_C_ij| / ((1 - gamma) * max(-g_i, eps))
    bonus_ij = sigmoid(alpha * (kappa_i + g_i)) * softmax_j(score_ij)

with the gate forced to zero while ``kappa_i + g_i < 0``. The softmax runs
over the samples of one batch, so each channel total ``I_i`` is at most 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax


@dataclass(frozen=True)
class IntrinsicConfig:
    """Gate sharpness ``alpha``, softmax temperature ``beta`` and weight ``omega``.

    ``gate_margin`` is an absolute margin (kappa). When it is ``None`` the
    margin is ``gate_margin_fraction * d_i`` per channel.
    """

    alpha: float = 0.3
    beta: float = 1.0
    omega: float = 0.1
    epsilon: float = 1e-8
    gate_margin: float | None = None
    gate_margin_fraction: float = 0.05
    enabled: bool = True

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if self.gate_margin is not None and self.gate_margin < 0:
            raise ValueError("gate_margin must be nonnegative")
        if self.gate_margin_fraction < 0:
            raise ValueError("gate_margin_fraction must be nonnegative")
        if self.enabled and not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive when enabled")

    def margins(self, thresholds) -> np.ndarray:
        d = np.asarray(thresholds, dtype=float)
        if self.gate_margin is not None:
            return np.full(d.shape, float(self.gate_margin))
        # an infinite threshold never puts the policy near its boundary
        return np.where(np.isfinite(d), self.gate_margin_fraction * np.where(np.isfinite(d), d, 0.0), 0.0)


@dataclass(frozen=True)
class IntrinsicBatch:
    scores: np.ndarray  # (N, m) pre-softmax scores
    softmax: np.ndarray  # (N, m)
    gates: np.ndarray  # (m,)
    bonuses: np.ndarray  # (N, m) gate * softmax, the per-sample intrinsic values
    totals: np.ndarray  # (m,) I_i
    eta: float = 0.0

    @property
    def total(self) -> float:
        return float(self.totals.sum())

    @property
    def active(self) -> bool:
        return self.eta > 0 and bool(np.any(self.totals > 0))

    def with_eta(self, eta: float) -> "IntrinsicBatch":
        return IntrinsicBatch(self.scores, self.softmax, self.gates, self.bonuses, self.totals, float(eta))


def disabled_batch(n_samples: int, n_costs: int) -> IntrinsicBatch:
    zeros = np.zeros((n_samples, n_costs))
    return IntrinsicBatch(zeros, zeros.copy(), np.zeros(n_costs), zeros.copy(), np.zeros(n_costs), 0.0)


def intrinsic_scores(cost_advantages, g_values, config: IntrinsicConfig, discount: float,
                     thresholds=None) -> IntrinsicBatch:
    """Gated, batch-softmaxed bonuses for every sample and cost channel.

    ``thresholds`` set the default gate margins; they may be omitted when
    ``config.gate_margin`` is given explicitly.
    """
    adv = np.asarray(cost_advantages, dtype=float)
    if adv.ndim == 1:
        adv = adv[:, None]
    g = np.atleast_1d(np.asarray(g_values, dtype=float))
    n, m = adv.shape
    if g.shape != (m,):
        raise ValueError(f"expected {m} constraint values, got {g.shape}")
    if not config.enabled:
        return disabled_batch(n, m)
    if thresholds is None:
        if config.gate_margin is None:
            raise ValueError("thresholds are needed to derive the default gate margin")
        thresholds = np.zeros(m)
    kappa = config.margins(thresholds)

    slack = np.maximum(-g, config.epsilon)
    scores = config.beta * np.abs(adv) / ((1.0 - discount) * slack)[None, :]
    soft = softmax(scores, axis=0)
    with np.errstate(invalid="ignore"):
        trigger = kappa + g
    gates = np.where(trigger >= 0, expit(config.alpha * np.where(trigger >= 0, trigger, 0.0)), 0.0)
    bonuses = soft * gates[None, :]
    return IntrinsicBatch(scores, soft, gates, bonuses, bonuses.sum(axis=0), 0.0)


@dataclass(frozen=True)
class RunningMaxima:
    """Running maxima of ``|f - sum phi|`` and ``sum_i I_i`` across iterations."""

    g_max: float
    i_max: float
    i_max_per_channel: tuple[float, ...] = ()

    @classmethod
    def initial(cls, g_objective_magnitude: float, n_costs: int) -> "RunningMaxima":
        tiny = float(np.finfo(float).eps)
        return cls(abs(float(g_objective_magnitude)), tiny, (tiny,) * n_costs)

    def updated(self, g_objective_magnitude: float, totals) -> "RunningMaxima":
        totals = np.asarray(totals, dtype=float)
        per = tuple(max(a, float(b)) for a, b in zip(self.i_max_per_channel, totals)) or tuple(totals)
        return RunningMaxima(max(self.g_max, abs(float(g_objective_magnitude))),
                             max(self.i_max, float(totals.sum())), per)


def eta_weight(maxima: RunningMaxima, config: IntrinsicConfig) -> float:
    """``omega * G_max / (I_max + eps)``; exactly 0 when off or ``omega == 0``."""
    if not config.enabled or config.omega == 0:
        return 0.0
    return float(config.omega * maxima.g_max / (maxima.i_max + config.epsilon))


def augmented_objective(f_value: float, phi_values, intrinsic_totals=None, eta: float = 0.0) -> float:
    """``G = f - sum phi + eta * sum I``.

    The intrinsic term is skipped (not added as zero) when ``eta`` is 0, so the
    intrinsic-free value is reproduced bit for bit.
    """
    phi_arr = np.atleast_1d(np.asarray(phi_values, dtype=float))
    if not math.isfinite(f_value):
        raise FloatingPointError(f"objective surrogate f is not finite: {f_value}")
    bad = np.flatnonzero(~np.isfinite(phi_arr))
    if bad.size:
        raise FloatingPointError(f"barrier term phi[{bad[0]}] is not finite: {phi_arr[bad[0]]}")
    value = f_value - float(phi_arr.sum()) if phi_arr.size else float(f_value)
    if intrinsic_totals is None or eta == 0:
        return value
    if not math.isfinite(eta):
        raise FloatingPointError(f"intrinsic weight eta is not finite: {eta}")
    totals = np.atleast_1d(np.asarray(intrinsic_totals, dtype=float))
    bad = np.flatnonzero(~np.isfinite(totals))
    if bad.size:
        raise FloatingPointError(f"intrinsic total I[{bad[0]}] is not finite: {totals[bad[0]]}")
    return value + eta * float(totals.sum())


def intrinsic_totals_at(weights, bonuses) -> np.ndarray:
    """Per-channel intrinsic totals with fixed bonuses reweighted to a candidate policy."""
    return np.asarray(weights, dtype=float) @ np.asarray(bonuses, dtype=float)


def intrinsic_gradient(scores, bonuses) -> np.ndarray:
    """Gradient of ``sum_i sum_j w_j(theta) b_ij`` at the behavior policy."""
    return np.asarray(scores).T @ np.asarray(bonuses).sum(axis=1)


def proposition1_diagnostic(g_new, g_old, gbar_new, gbar_old, eta, i_new, i_old, tol: float = 1e-12):
    """Compare ``G(new) - G(old)`` with ``[Gbar(new') - Gbar(old)] + eta * sum(I_new - I_old)``.

    ``gbar_new`` is the intrinsic-free objective after the intrinsic-free
    counterfactual update from the same starting policy.
    """
    lhs = float(g_new - g_old)
    delta_i = np.sum(np.asarray(i_new, dtype=float) - np.asarray(i_old, dtype=float))
    rhs = float(gbar_new - gbar_old)
    if eta != 0:
        rhs += float(eta * delta_i)
    return lhs, rhs, bool(lhs >= rhs - tol)
