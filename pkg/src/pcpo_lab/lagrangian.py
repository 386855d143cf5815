"""Trust-region Lagrangian baseline: step on ``f - sum lambda_i g_i``, then dual ascent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pcpo_lab.estimator import AdvantageEstimates
from pcpo_lab.policy import PolicyParams
from pcpo_lab.sampler import RolloutBatch
from pcpo_lab.trust_region import TrustRegionConfig
from pcpo_lab.update import SampleModel, UpdateOutcome, base_record, trust_region_step


@dataclass(frozen=True)
class LagrangianState:
    lambdas: tuple[float, ...]
    lambda_lr: float = 0.01
    lambda_max: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))
        if not self.lambda_lr > 0 or not self.lambda_max > 0:
            raise ValueError("lambda_lr and lambda_max must be positive")
        if any(not 0.0 <= x <= self.lambda_max for x in self.lambdas):
            raise ValueError("multipliers must lie in [0, lambda_max]")

    @classmethod
    def initial(cls, n_costs: int, value: float = 0.0, lambda_lr: float = 0.01,
                lambda_max: float = 2.0) -> "LagrangianState":
        return cls((value,) * n_costs, lambda_lr, lambda_max)


def _penalties(g_values, lambdas) -> np.ndarray:
    # zero multipliers contribute exactly nothing, even against infinite slack
    g = np.atleast_1d(np.asarray(g_values, dtype=float))
    return np.array([lam * gi if lam != 0 else 0.0 for lam, gi in zip(lambdas, g)])


def lagrangian_objective(f_value: float, g_values, state: LagrangianState) -> float:
    """``f - sum_i lambda_i g_i`` (terms with ``lambda_i = 0`` skipped)."""
    value = float(f_value)
    for lam, gi in zip(state.lambdas, np.atleast_1d(np.asarray(g_values, dtype=float))):
        if lam != 0:
            value -= lam * float(gi)
    return value


def dual_ascent(state: LagrangianState, j_c_hat, thresholds) -> LagrangianState:
    """``lambda_i <- clip(lambda_i + lr (J_C_i - d_i), 0, lambda_max)``."""
    jc = np.atleast_1d(np.asarray(j_c_hat, dtype=float))
    d = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if jc.shape != d.shape or jc.shape != (len(state.lambdas),):
        raise ValueError("cost estimates, thresholds and multipliers must have equal length")
    moved = np.asarray(state.lambdas) + state.lambda_lr * (jc - d)
    return LagrangianState(tuple(np.clip(moved, 0.0, state.lambda_max)), state.lambda_lr, state.lambda_max)


def lagrangian_update(batch: RolloutBatch, estimates: AdvantageEstimates, params: PolicyParams,
                      state: LagrangianState, thresholds, tr: TrustRegionConfig,
                      discount: float | None = None) -> tuple[PolicyParams, LagrangianState, UpdateOutcome]:
    model = SampleModel(batch, estimates, params, thresholds, discount)
    w0, clipped = model.weights(params)
    f0 = model.f(w0)
    g0 = model.g(w0)
    lambdas = state.lambdas

    grad = model.grad_f()
    if any(lam != 0 for lam in lambdas):
        rows = model.grad_g()
        for i, lam in enumerate(lambdas):
            if lam != 0:
                grad = grad - lam * rows[i]

    def objective(candidate: PolicyParams) -> float:
        w, _ = model.weights(candidate)
        return lagrangian_objective(model.f(w), model.g(w), state)

    g_old = lagrangian_objective(f0, g0, state)
    step, search = trust_region_step(model, grad, objective, tr, g_old)
    if search.objective < g_old:
        raise AssertionError("line search returned a candidate that lowers the Lagrangian")
    new_state = dual_ascent(state, model.jc_hat, model.thresholds)

    m = batch.n_costs
    record = base_record(model, step, search, clipped)
    record.update({
        "f": f0,
        "g": g0.tolist(),
        "phi": _penalties(g0, lambdas).tolist(),
        "lambda": list(lambdas),
        "intrinsic": [0.0] * m,
        "gate": [0.0] * m,
        "eta": 0.0,
        "G": g_old,
        "g_max": 0.0,
        "i_max": 0.0,
        "prop1_lhs": search.objective - g_old,
        "prop1_rhs": search.objective - g_old,
        "prop1_holds": True,
    })
    return search.params, new_state, UpdateOutcome(search.params, record, None, step, search)
