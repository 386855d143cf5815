"""One policy update from a batch: the barrier method and the shared solver path.

``SampleModel`` evaluates every surrogate at a candidate policy from one set
of importance weights. ``pcpo_update`` and the Lagrangian update in
``pcpo_lab.lagrangian`` both end in ``trust_region_step`` so that their
parameter trajectories coincide exactly when their objectives do.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pcpo_lab.barrier import BarrierConfig, phi, phi_derivative
from pcpo_lab.estimator import AdvantageEstimates, importance_weights
from pcpo_lab.intrinsic import (
    IntrinsicBatch,
    IntrinsicConfig,
    RunningMaxima,
    augmented_objective,
    disabled_batch,
    eta_weight,
    intrinsic_gradient,
    intrinsic_scores,
    intrinsic_totals_at,
    proposition1_diagnostic,
)
from pcpo_lab.policy import PolicyParams, kl_divergence, score_batch
from pcpo_lab.sampler import RolloutBatch, average_cost_return, average_return
from pcpo_lab.trust_region import (
    LineSearchResult,
    StepResult,
    TrustRegionConfig,
    compute_step,
    fisher_operator,
    line_search,
)


class SampleModel:
    """Sampled surrogates of one batch, evaluated at arbitrary candidates."""

    def __init__(self, batch: RolloutBatch, estimates: AdvantageEstimates, params_old: PolicyParams,
                 thresholds, discount: float | None = None) -> None:
        self.batch = batch
        self.estimates = estimates
        self.params_old = params_old
        self.discount = batch.discount if discount is None else float(discount)
        self.thresholds = np.asarray(thresholds, dtype=float)
        m = batch.n_costs
        if self.thresholds.shape != (m,):
            raise ValueError(f"expected {m} thresholds, got {self.thresholds.shape}")
        self.j_hat = average_return(batch, self.discount)
        self.jc_hat = np.array([average_cost_return(batch, self.discount, i) for i in range(m)])
        self.scores = score_batch(params_old, batch.states, batch.actions)
        if params_old.is_tabular:
            self.kl_weights = batch.state_visitation(params_old.n_states)
            self.kl_states = None
        else:
            self.kl_weights = np.full(batch.n_steps, 1.0 / batch.n_steps)
            self.kl_states = batch.states

    def weights(self, params: PolicyParams):
        return importance_weights(self.batch, params)

    def f(self, w) -> float:
        return float(np.mean(w * self.estimates.advantages))

    def g(self, w) -> np.ndarray:
        expected = (w @ self.estimates.cost_advantages) / self.batch.n_steps
        return self.jc_hat + expected / (1.0 - self.discount) - self.thresholds

    def grad_f(self) -> np.ndarray:
        return self.scores.T @ self.estimates.advantages / self.batch.n_steps

    def grad_g(self) -> np.ndarray:
        """Rows are the constraint-surrogate gradients."""
        return (self.scores.T @ self.estimates.cost_advantages).T / (self.batch.n_steps * (1.0 - self.discount))

    def kl(self, params: PolicyParams) -> float:
        return kl_divergence(params, self.params_old, self.kl_weights, self.kl_states)

    def fisher(self, damping: float):
        return fisher_operator(self.params_old, self.kl_weights, self.kl_states, damping)


def trust_region_step(model: SampleModel, grad, objective, tr: TrustRegionConfig,
                      objective_old: float) -> tuple[StepResult, LineSearchResult]:
    step = compute_step(grad, model.fisher(tr.damping), tr)
    search = line_search(model.params_old, step.step, objective, model.kl, tr, g_old=objective_old)
    return step, search


@dataclass(frozen=True)
class UpdateOutcome:
    params: PolicyParams
    record: dict
    maxima: RunningMaxima | None = None
    step: StepResult | None = None
    search: LineSearchResult | None = None


def base_record(model: SampleModel, step: StepResult, search: LineSearchResult, clipped: int) -> dict:
    theta_new = search.params.theta
    return {
        "j_hat": model.j_hat,
        "jc_hat": model.jc_hat.tolist(),
        "kl_predicted": step.predicted_kl,
        "kl_actual": search.kl,
        "step_norm": float(np.linalg.norm(theta_new - model.params_old.theta)),
        "cg_residual": step.cg_residual,
        "cg_iters": step.cg_iterations,
        "cg_converged": step.cg_converged,
        "step_flags": "|".join(step.flags),
        "accepted": search.accepted,
        "backtracks": search.backtracks_used,
        "clipped_weights": clipped,
        "G_new": search.objective,
    }


class BarrierObjective:
    """``G(theta)`` for the barrier method with fixed intrinsic bonuses."""

    def __init__(self, model: SampleModel, barrier: BarrierConfig, intrinsic: IntrinsicBatch | None) -> None:
        self.model = model
        self.barrier = barrier
        self.intrinsic = intrinsic if intrinsic is not None and intrinsic.active else None

    def terms(self, params: PolicyParams):
        w, _ = self.model.weights(params)
        f = self.model.f(w)
        phis = phi(self.barrier, self.model.g(w)) if self.barrier.enabled else np.zeros(self.model.batch.n_costs)
        totals = intrinsic_totals_at(w, self.intrinsic.bonuses) if self.intrinsic is not None else None
        return f, phis, totals

    def __call__(self, params: PolicyParams) -> float:
        f, phis, totals = self.terms(params)
        if self.intrinsic is None:
            return augmented_objective(f, phis)
        return augmented_objective(f, phis, totals, self.intrinsic.eta)


def pcpo_update(batch: RolloutBatch, estimates: AdvantageEstimates, params: PolicyParams, thresholds,
                barrier: BarrierConfig, intrinsic_cfg: IntrinsicConfig, tr: TrustRegionConfig,
                maxima: RunningMaxima | None = None, discount: float | None = None) -> UpdateOutcome:
    """Barrier-penalized trust-region update with the gated intrinsic bonus.

    Also runs the intrinsic-free counterfactual update from the same batch
    and policy to record the intrinsic-enhancement diagnostic.
    """
    model = SampleModel(batch, estimates, params, thresholds, discount)
    m = batch.n_costs
    w0, clipped = model.weights(params)
    f0 = model.f(w0)
    g0 = model.g(w0)
    if barrier.enabled:
        phis = phi(barrier, g0)
        slopes = phi_derivative(barrier, g0)
    else:
        phis, slopes = np.zeros(m), np.zeros(m)
    gbar_old = augmented_objective(f0, phis)
    magnitude = abs(gbar_old)

    batch_i = intrinsic_scores(estimates.cost_advantages, g0, intrinsic_cfg, model.discount, model.thresholds) \
        if intrinsic_cfg.enabled else disabled_batch(batch.n_steps, m)
    maxima = RunningMaxima.initial(magnitude, m) if maxima is None else maxima
    maxima = maxima.updated(magnitude, batch_i.totals)
    eta = eta_weight(maxima, intrinsic_cfg)
    batch_i = batch_i.with_eta(eta)

    grad_bar = model.grad_f()
    if barrier.enabled:
        rows = model.grad_g()
        for i in range(m):
            grad_bar = grad_bar - slopes[i] * rows[i]
    objective_bar = BarrierObjective(model, barrier, None)

    if batch_i.active:
        grad = grad_bar + eta * intrinsic_gradient(model.scores, batch_i.bonuses)
        g_old = augmented_objective(f0, phis, batch_i.totals, eta)
        objective = BarrierObjective(model, barrier, batch_i)
    else:
        grad, g_old, objective = grad_bar, gbar_old, objective_bar

    step, search = trust_region_step(model, grad, objective, tr, g_old)
    if search.objective < g_old:
        raise AssertionError("line search returned a candidate that lowers G")

    if batch_i.active:
        _, search_bar = trust_region_step(model, grad_bar, objective_bar, tr, gbar_old)
        w_new, _ = model.weights(search.params)
        lhs, rhs, holds = proposition1_diagnostic(
            search.objective, g_old, search_bar.objective, gbar_old, eta,
            intrinsic_totals_at(w_new, batch_i.bonuses), batch_i.totals)
    else:
        lhs, rhs, holds = proposition1_diagnostic(search.objective, g_old, search.objective, g_old, 0.0, 0.0, 0.0)

    record = base_record(model, step, search, clipped)
    record.update({
        "f": f0,
        "g": g0.tolist(),
        "phi": np.asarray(phis, float).tolist(),
        "lambda": np.asarray(slopes, float).tolist(),
        "intrinsic": batch_i.totals.tolist(),
        "gate": batch_i.gates.tolist(),
        "eta": eta,
        "G": g_old,
        "g_max": maxima.g_max,
        "i_max": maxima.i_max,
        "prop1_lhs": lhs,
        "prop1_rhs": rhs,
        "prop1_holds": holds,
    })
    return UpdateOutcome(search.params, record, maxima, step, search)
