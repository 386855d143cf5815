"""Numerical checks of the barrier method's guarantees on tabular runs.

Everything here uses the exact oracle in ``pcpo_lab.cmdp``. Traces are the
per-iteration metric rows written by the harness (plain dicts of floats);
they must carry the policy parameters before and after each update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, softmax

from pcpo_lab.barrier import BarrierConfig, BarrierKind, gap_term_bound_check, implicit_duals, phi
from pcpo_lab.cmdp import TabularCmdp, brute_force_constrained_optimum, exact_policy_eval, lp_constrained_optimum
from pcpo_lab.policy import PolicyParams, probabilities


class UnsupportedTheoryCheck(ValueError):
    pass


# ---------------------------------------------------------------- epsilon/eta
@dataclass(frozen=True)
class EpsilonTerms:
    eps_new: float
    eps_cost_old: np.ndarray
    eps_cost_new: np.ndarray


def _max_expected_advantage(pi: np.ndarray, adv: np.ndarray) -> float:
    return float(np.max(np.abs(np.sum(pi * adv, axis=1))))


def epsilon_terms(cmdp: TabularCmdp, pi_k, pi_k1) -> EpsilonTerms:
    """Max-over-states expected-advantage magnitudes of one update.

    ``eps_new`` pairs ``pi_{k+1}`` with the advantages of ``pi_k``. A policy
    paired with its own advantages always gives 0, so the cost terms are the
    cross pairings: ``eps_cost_new`` is ``pi_{k+1}`` against ``A_C^{pi_k}``
    and ``eps_cost_old`` is ``pi_k`` against ``A_C^{pi_{k+1}}``.
    """
    if not isinstance(cmdp, TabularCmdp):
        raise UnsupportedTheoryCheck("epsilon terms need a tabular CMDP")
    pi_k = np.asarray(pi_k, dtype=float)
    pi_k1 = np.asarray(pi_k1, dtype=float)
    old = exact_policy_eval(cmdp, pi_k)
    new = exact_policy_eval(cmdp, pi_k1)
    eps_new = _max_expected_advantage(pi_k1, old.advantages)
    cost_new = np.array([_max_expected_advantage(pi_k1, a) for a in old.cost_advantages])
    cost_old = np.array([_max_expected_advantage(pi_k, a) for a in new.cost_advantages])
    return EpsilonTerms(eps_new, cost_old, cost_new)


def eta_term(epsilon, delta: float, discount: float):
    """``-sqrt(2 delta) gamma eps / (1 - gamma)^2``."""
    return -math.sqrt(2.0 * delta) * discount * np.asarray(epsilon, dtype=float) / (1.0 - discount) ** 2


# -------------------------------------------------------------- update bound
@dataclass(frozen=True)
class BoundValue:
    value: float
    value_proof_form: float
    applicable: bool
    cases: tuple[int, ...]


def update_bound(eta_new: float, eta_cost_old, eta_cost_new, thresholds, tau: float, eta_weight: float,
                 i_max_total: float, g_values) -> BoundValue:
    """Lower bound on ``G(pi_{k+1}) - G(pi_k)`` with the case chosen per constraint.

    Constraint ``i`` uses the logarithmic case when ``g_i(pi_k) <= -1/tau^2``
    and the linear case otherwise; the per-constraint terms are summed. The
    log case is evaluated in two algebraically equal forms and is not
    applicable when its argument is undefined or nonpositive.
    """
    eta_cost_old = np.atleast_1d(np.asarray(eta_cost_old, dtype=float))
    eta_cost_new = np.atleast_1d(np.asarray(eta_cost_new, dtype=float))
    d = np.atleast_1d(np.asarray(thresholds, dtype=float))
    g = np.atleast_1d(np.asarray(g_values, dtype=float))
    common = float(eta_new) - (float(eta_weight) * float(i_max_total) if eta_weight else 0.0)
    total, total_proof = common, common
    cases = []
    applicable = True
    for i in range(d.size):
        if g[i] <= -1.0 / tau**2:
            cases.append(1)
            if eta_cost_new[i] == 0 or not math.isfinite(d[i]):
                applicable = False
                continue
            arg = 2.0 - d[i] / (2.0 * eta_cost_new[i])
            # epsilon form: 2 + d (1-gamma)^2 / (2 sqrt(2 delta) gamma eps)
            arg_proof = 2.0 + d[i] / (-2.0 * eta_cost_new[i])
            if not (arg > 0 and arg_proof > 0):
                applicable = False
                continue
            total -= math.log(arg) / tau
            total_proof -= math.log(arg_proof) / tau
        else:
            cases.append(2)
            term = -d[i] + eta_cost_old[i] + eta_cost_new[i]
            total += term
            total_proof += term
    if not applicable:
        return BoundValue(math.nan, math.nan, False, tuple(cases))
    return BoundValue(float(total), float(total_proof), True, tuple(cases))


# --------------------------------------------------------------- duality gap
def duality_gap_bound(tau: float, m: int, eta_weight: float = 0.0, i_max_per_channel=()) -> float:
    """``m / tau + eta * sum I_max``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    bound = m / tau
    if eta_weight:
        bound += eta_weight * float(np.sum(i_max_per_channel))
    return float(bound)


def exact_intrinsic(cmdp: TabularCmdp, policy, g_values, alpha: float = 0.3, beta: float = 1.0,
                    epsilon: float = 1e-8, margins=None) -> np.ndarray:
    """Per-channel intrinsic totals with the softmax taken over all state-action pairs."""
    res = exact_policy_eval(cmdp, policy)
    g = np.atleast_1d(np.asarray(g_values, dtype=float))
    kappa = np.zeros_like(g) if margins is None else np.atleast_1d(np.asarray(margins, dtype=float))
    totals = []
    for i, adv in enumerate(res.cost_advantages):
        scores = beta * np.abs(adv.ravel()) / ((1.0 - cmdp.discount) * max(-g[i], epsilon))
        trigger = kappa[i] + g[i]
        gate = float(expit(alpha * trigger)) if trigger >= 0 else 0.0
        totals.append(gate * float(softmax(scores).sum()))
    return np.array(totals)


@dataclass(frozen=True)
class DualityGapCheck:
    tau: float
    measured_gap: float
    bound: float
    slack: float
    holds: bool
    lambdas: tuple[float, ...]
    optimum_value: float
    gap_terms_ok: bool
    holds_without_slack: bool = False


def measured_duality_gap(cmdp: TabularCmdp, tau: float, grid_resolution: float = 0.01, omega: float = 0.0,
                         alpha: float = 0.3, beta: float = 1.0, optimum=None) -> DualityGapCheck:
    """``G(lambda*) - J(pi*)`` at the brute-force constrained optimum, against the bound.

    ``G(lambda*) = J(pi*) - sum lambda*_i g_i(pi*) + eta sum I(pi*)`` with
    ``g_i(pi*) = J_C_i(pi*) - d_i``. The intrinsic totals use the exact
    softmax over state-action pairs, so each is at most 1 and ``I_max = 1``.
    """
    barrier = BarrierConfig(tau=tau, kind=BarrierKind.EXTENDED_LOG)
    opt = brute_force_constrained_optimum(cmdp, grid_resolution) if optimum is None else optimum
    res = exact_policy_eval(cmdp, opt.policy)
    g = np.array(res.cost_returns) - np.array(cmdp.thresholds)
    lambdas = implicit_duals(barrier, g).lambdas
    i_max = np.ones(cmdp.n_costs)
    g_magnitude = abs(res.discounted_return - float(np.sum(phi(barrier, g))))
    eta = omega * g_magnitude / (float(i_max.sum()) + 1e-8) if omega else 0.0
    gap = -float(np.dot(lambdas, g))
    if eta:
        margins = 0.05 * np.asarray(cmdp.thresholds, dtype=float)
        gap += eta * float(exact_intrinsic(cmdp, opt.policy, g, alpha, beta, margins=margins).sum())
    bound = duality_gap_bound(tau, cmdp.n_costs, eta, i_max)
    # grid slack: how far the grid optimum falls short of the exact LP optimum
    exact = lp_constrained_optimum(cmdp)
    slack = max(0.0, exact.value - float(res.discounted_return)) if math.isfinite(exact.value) else math.inf
    terms_ok = all(gap_term_bound_check(barrier, gi)[1] for gi in g)
    return DualityGapCheck(tau, gap, bound, slack, bool(gap <= bound + slack), tuple(lambdas),
                           float(res.discounted_return), terms_ok, bool(gap <= bound))


# --------------------------------------------------------------- violations
def cumulative_violation(jc_trace, thresholds) -> tuple[np.ndarray, float]:
    """``v_t = max(0, J_C(pi_t) - d)`` summed over channels, and ``V(T) = sum v_t``.

    ``jc_trace`` is ``(T,)`` for one channel or ``(T, m)``.
    """
    jc = np.asarray(jc_trace, dtype=float)
    if jc.size == 0:
        raise ValueError("empty trace")
    if jc.ndim == 1:
        jc = jc[:, None]
    d = np.atleast_1d(np.asarray(thresholds, dtype=float))
    per_iter = np.maximum(0.0, jc - d[None, :]).sum(axis=1)
    return per_iter, float(per_iter.sum())


# ------------------------------------------------------------ trace reports
@dataclass
class TheoryReport:
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _theta(row: dict, prefix: str, size: int) -> np.ndarray:
    return np.array([float(row[f"{prefix}{j}"]) for j in range(size)])


def theorem_report(cmdp: TabularCmdp, rows: list, tau: float, delta: float,
                   barrier_kind: str = BarrierKind.EXTENDED_LOG.value) -> TheoryReport:
    """Per-iteration update-bound check over a tabular training trace."""
    if not isinstance(cmdp, TabularCmdp):
        raise UnsupportedTheoryCheck("theorem checks need a tabular CMDP")
    if BarrierKind(barrier_kind) is not BarrierKind.EXTENDED_LOG:
        return TheoryReport([], {"supported": False,
                                 "reason": f"the update bound is stated for the extended log-barrier, not {barrier_kind}"})
    m, size = cmdp.n_costs, cmdp.n_states * cmdp.n_actions
    template = PolicyParams.tabular(cmdp.n_states, cmdp.n_actions)
    records = []
    jc_trace = []
    for row in rows:
        pi_k = probabilities(template.with_theta(_theta(row, "theta_", size)))
        pi_k1 = probabilities(template.with_theta(_theta(row, "theta_new_", size)))
        eps = epsilon_terms(cmdp, pi_k, pi_k1)
        eta_new = float(eta_term(eps.eps_new, delta, cmdp.discount))
        eta_c_old = eta_term(eps.eps_cost_old, delta, cmdp.discount)
        eta_c_new = eta_term(eps.eps_cost_new, delta, cmdp.discount)
        g = [float(row[f"g_{i}"]) for i in range(m)]
        bound = update_bound(eta_new, eta_c_old, eta_c_new, cmdp.thresholds, tau, float(row["eta"]),
                             float(row["i_max"]), g)
        g_diff = float(row["G_new"]) - float(row["G"])
        jc_new = exact_policy_eval(cmdp, pi_k1).cost_returns
        jc_trace.append(jc_new)
        records.append({
            "iteration": int(float(row["iteration"])),
            "eps_new": eps.eps_new,
            "eps_cost_old": eps.eps_cost_old.tolist(),
            "eps_cost_new": eps.eps_cost_new.tolist(),
            "eta_new": eta_new,
            "eta_cost_old": eta_c_old.tolist(),
            "eta_cost_new": eta_c_new.tolist(),
            "cases": list(bound.cases),
            "G_difference": g_diff,
            "bound": bound.value,
            "bound_proof_form": bound.value_proof_form,
            "applicable": bound.applicable,
            "holds": bool(bound.applicable and g_diff >= bound.value - 1e-12),
            "holds_proof_form": bool(bound.applicable and g_diff >= bound.value_proof_form - 1e-12),
        })
    applicable = [r for r in records if r["applicable"]]
    eta_last = float(rows[-1]["eta"]) if rows else 0.0
    i_max_last = float(rows[-1]["i_max"]) if rows else 0.0
    summary = {
        "supported": True,
        "iterations": len(records),
        "applicable": len(applicable),
        "holds": sum(r["holds"] for r in applicable),
        "holds_proof_form": sum(r["holds_proof_form"] for r in applicable),
        "pass_fraction": (sum(r["holds"] for r in applicable) / len(applicable)) if applicable else math.nan,
        "duality_gap_bound": duality_gap_bound(tau, m, eta_last, [i_max_last]),
    }
    if jc_trace:
        per_iter, total = cumulative_violation(np.array(jc_trace), cmdp.thresholds)
        running = np.cumsum(per_iter)
        for rec, v, cum in zip(records, per_iter, running):
            rec["violation"] = float(v)
            rec["cumulative_violation"] = float(cum)
        summary["cumulative_violation"] = total
    return TheoryReport(records, summary)
