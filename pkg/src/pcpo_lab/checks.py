"""Invariant suites run by ``pcpo-lab check`` and by the acceptance tests.

Every check is seeded. ``hard`` checks fail the suite; the rest are reported
diagnostics (the update-bound pass fraction on the bundled trace, for one).
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass
from importlib import resources

import numpy as np

from pcpo_lab.barrier import BarrierConfig, implicit_duals, phi, phi_derivative
from pcpo_lab.cmdp import (
    TabularCmdp,
    batched_returns,
    exact_policy_eval,
    performance_difference,
    state_transition_matrix,
    value_iteration,
)
from pcpo_lab.envs import chain_cmdp, random_cmdp
from pcpo_lab.estimator import (
    EstimatorConfig,
    ValueFits,
    constraint_surrogate,
    estimate_advantages,
    fit_values,
    gradients,
    surrogate_gradient_exact,
    surrogate_objective,
    surrogate_objective_exact,
)
from pcpo_lab.intrinsic import IntrinsicConfig
from pcpo_lab.policy import PolicyParams, log_prob, log_prob_batch, probabilities, score
from pcpo_lab.sampler import RolloutBatch, collect
from pcpo_lab.theory import epsilon_terms, measured_duality_gap, theorem_report
from pcpo_lab.trust_region import TrustRegionConfig, compute_step, conjugate_gradient, fisher_operator, line_search
from pcpo_lab.update import SampleModel, pcpo_update

SUITES = ("barrier", "gradients", "solver", "oracles", "theory")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str = ""
    hard: bool = True

    def line(self) -> str:
        status = "PASS" if self.passed else ("FAIL" if self.hard else "INFO")
        return f"[{status}] {self.suite}: {self.name} {self.detail}".rstrip()


def _rel_err(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


# ------------------------------------------------------------------ barrier
TAUS = (0.5, 1.0, 2.0, 20.0)


def barrier_suite(n_pairs: int = 100_000, seed: int = 0) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(seed)
    worst_c0 = worst_c1 = worst_fd = worst_dual = 0.0
    for tau in TAUS:
        cfg = BarrierConfig(tau=tau)
        j = cfg.junction
        log_side = -math.log(-j) / tau
        lin_side = tau * j - math.log(1.0 / tau**2) / tau + 1.0 / tau
        worst_c0 = max(worst_c0, abs(log_side - lin_side))
        worst_c1 = max(worst_c1, abs(-1.0 / (tau * j) - tau))
        # second-order one-sided differences on each side of the junction
        h = 1e-4 * abs(j)
        left = (3 * phi(cfg, j) - 4 * phi(cfg, j - h) + phi(cfg, j - 2 * h)) / (2 * h)
        right = (-3 * phi(cfg, j) + 4 * phi(cfg, j + h) - phi(cfg, j + 2 * h)) / (2 * h)
        worst_fd = max(worst_fd, abs(left - tau) / tau, abs(right - tau) / tau)
        g = np.concatenate([-np.exp(rng.uniform(-8, 4, 2000)), rng.uniform(-5, 5, 2000), [j]])
        dual = np.array(implicit_duals(cfg, g).lambdas)
        worst_dual = max(worst_dual, float(np.max(np.abs(dual - phi_derivative(cfg, g)))))
        # central differences away from the junction
        away = g[np.abs(g - j) > 1e-3 * abs(j) + 1e-9]
        hh = 1e-6 * np.maximum(np.abs(away), 1e-3)
        hh = np.minimum(hh, 0.5 * np.abs(away - j))
        fd = (phi(cfg, away + hh) - phi(cfg, away - hh)) / (2 * hh)
        rel = np.abs(fd - phi_derivative(cfg, away)) / np.abs(phi_derivative(cfg, away))
        out.append(CheckResult("barrier", f"phi' matches central differences (tau={tau})",
                               bool(np.max(rel) <= 1e-6), f"max rel={np.max(rel):.2e}"))
    out.append(CheckResult("barrier", "C0 at the junction", worst_c0 <= 1e-12, f"max gap={worst_c0:.2e}"))
    out.append(CheckResult("barrier", "C1 at the junction (analytic)", worst_c1 <= 1e-12, f"max gap={worst_c1:.2e}"))
    out.append(CheckResult("barrier", "C1 at the junction (one-sided differences)", worst_fd <= 1e-6,
                           f"max rel={worst_fd:.2e}"))
    out.append(CheckResult("barrier", "implicit duals equal phi'", worst_dual <= 1e-12, f"max gap={worst_dual:.2e}"))

    grid = np.linspace(-50, 50, 200_001)
    positive = all(np.all(phi_derivative(BarrierConfig(tau=t), grid) > 0) for t in TAUS)
    out.append(CheckResult("barrier", "phi' strictly positive", positive))
    convex = all(np.all(np.diff(phi_derivative(BarrierConfig(tau=t), grid)) >= -1e-12) for t in TAUS)
    out.append(CheckResult("barrier", "phi convex (nondecreasing slope)", convex))

    taus = np.exp(rng.uniform(math.log(0.05), math.log(200.0), n_pairs // 100))
    violations = 0
    for tau in taus:
        cfg = BarrierConfig(tau=float(tau))
        g = np.concatenate([-np.exp(rng.uniform(-10, 5, 50)), rng.uniform(-3, 3, 50)])
        lam = np.array(implicit_duals(cfg, g).lambdas)
        violations += int(np.count_nonzero(-lam * g > 1.0 / tau + 1e-12))
    out.append(CheckResult("barrier", f"-lambda* g <= 1/tau over {taus.size * 100} pairs", violations == 0,
                           f"violations={violations}"))
    return out


# ---------------------------------------------------------------- gradients
def kl_gradient(params: PolicyParams, ref: PolicyParams, state_weights, states=None) -> np.ndarray:
    """Analytic gradient of the weighted ``KL(params || ref)`` in ``params.theta``."""
    w = np.asarray(state_weights, dtype=float)
    if params.is_tabular:
        p, q = probabilities(params), probabilities(ref)
        logr = np.log(p) - np.log(q)
        kl_s = np.sum(p * logr, axis=1, keepdims=True)
        return (w[:, None] * p * (logr - kl_s)).ravel()
    feats = np.atleast_2d(np.asarray(states, dtype=float))
    ls, ls_r = params.log_std(), ref.log_std()
    gap = feats @ params.weights().T - feats @ ref.weights().T  # (N, D)
    grad_w = (w[:, None] * gap * np.exp(-2 * ls_r)[None, :]).T @ feats
    grad_ls = w.sum() * (np.exp(2 * (ls - ls_r)) - 1.0)
    return np.concatenate([grad_w.ravel(), grad_ls])


def _fd(fn, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        grad[i] = (fn(theta + e) - fn(theta - e)) / (2 * h)
    return grad


def _gaussian_case(rng):
    f_dim, a_dim = rng.integers(1, 4), rng.integers(1, 3)
    params = PolicyParams.linear_gaussian(f_dim, a_dim, rng.normal(size=(a_dim, f_dim)),
                                          rng.normal(scale=0.3, size=a_dim))
    return params


def _gaussian_batch(rng, params: PolicyParams, n: int = 64):
    """A synthetic behavior batch of a linear-Gaussian policy."""
    feats = rng.normal(size=(n, params.feature_dim))
    acts = feats @ params.weights().T + np.exp(params.log_std()) * rng.normal(size=(n, params.action_dim))
    zeros = np.zeros(n, dtype=bool)
    return RolloutBatch(
        states=feats, actions=acts, rewards=rng.normal(size=n), costs=rng.random((n, 1)),
        log_probs=log_prob_batch(params, feats, acts), next_states=feats.copy(), terminals=zeros,
        truncated=zeros.copy(), timesteps=np.arange(n), episode_starts=np.array([0, n]),
        discount=0.9, tabular=False,
    )


def gradients_suite(n_cases: int = 50, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in ("tab_score", "tab_f_exact", "tab_f", "tab_g", "tab_fim",
                              "gauss_score", "gauss_f", "gauss_g", "gauss_fim")}
    for _ in range(n_cases):
        # tabular softmax
        cmdp = random_cmdp(rng, int(rng.integers(2, 5)), int(rng.integers(2, 4)), 1, 0.9)
        params = PolicyParams.tabular(cmdp.n_states, cmdp.n_actions, rng.normal(size=cmdp.n_states * cmdp.n_actions))
        s, a = int(rng.integers(cmdp.n_states)), int(rng.integers(cmdp.n_actions))
        fd = _fd(lambda th: log_prob(params.with_theta(th), s, a), params.theta)
        worst["tab_score"] = max(worst["tab_score"], _rel_err(score(params, s, a), fd))

        res = exact_policy_eval(cmdp, probabilities(params))
        weights = res.occupancy / (1 - cmdp.discount)
        fd = _fd(lambda th: surrogate_objective_exact(params.with_theta(th), weights, res.advantages), params.theta)
        worst["tab_f_exact"] = max(worst["tab_f_exact"],
                                   _rel_err(surrogate_gradient_exact(params, weights, res.advantages), fd))

        batch = collect(cmdp, params, 4, 30, np.random.SeedSequence(int(rng.integers(1 << 31))))
        est = estimate_advantages(batch, ValueFits.zeros(cmdp.n_states, 1, cmdp.n_states),
                                  EstimatorConfig(discount=cmdp.discount))
        gf, gg = gradients(batch, est, params)
        fd = _fd(lambda th: surrogate_objective(batch, est.advantages, params.with_theta(th)), params.theta)
        worst["tab_f"] = max(worst["tab_f"], _rel_err(gf, fd))
        fd = _fd(lambda th: constraint_surrogate(batch, est.cost_advantages[:, 0], params.with_theta(th), params,
                                                 1.0, 2.0, cmdp.discount), params.theta)
        worst["tab_g"] = max(worst["tab_g"], _rel_err(gg[0], fd))

        v = rng.normal(size=params.size)
        w_states = rng.random(cmdp.n_states)
        hv = fisher_operator(params, w_states)(v)
        h = 1e-5
        fd = (kl_gradient(params.with_theta(params.theta + h * v), params, w_states)
              - kl_gradient(params.with_theta(params.theta - h * v), params, w_states)) / (2 * h)
        worst["tab_fim"] = max(worst["tab_fim"], _rel_err(hv, fd))

        # linear gaussian
        gparams = _gaussian_case(rng)
        phi_s = rng.normal(size=gparams.feature_dim)
        act = rng.normal(size=gparams.action_dim)
        fd = _fd(lambda th: log_prob(gparams.with_theta(th), phi_s, act), gparams.theta)
        worst["gauss_score"] = max(worst["gauss_score"], _rel_err(score(gparams, phi_s, act), fd))

        gbatch = _gaussian_batch(rng, gparams)
        gest = estimate_advantages(gbatch, ValueFits.zeros(gparams.feature_dim, 1),
                                   EstimatorConfig(discount=gbatch.discount))
        gf, gg = gradients(gbatch, gest, gparams)
        fd = _fd(lambda th: surrogate_objective(gbatch, gest.advantages, gparams.with_theta(th)), gparams.theta)
        worst["gauss_f"] = max(worst["gauss_f"], _rel_err(gf, fd))
        fd = _fd(lambda th: constraint_surrogate(gbatch, gest.cost_advantages[:, 0], gparams.with_theta(th),
                                                 gparams, 1.0, 2.0, gbatch.discount), gparams.theta)
        worst["gauss_g"] = max(worst["gauss_g"], _rel_err(gg[0], fd))

        v = rng.normal(size=gparams.size)
        feats = gbatch.states
        w_rows = np.full(feats.shape[0], 1.0 / feats.shape[0])
        hv = fisher_operator(gparams, w_rows, feats)(v)
        fd = (kl_gradient(gparams.with_theta(gparams.theta + h * v), gparams, w_rows, feats)
              - kl_gradient(gparams.with_theta(gparams.theta - h * v), gparams, w_rows, feats)) / (2 * h)
        worst["gauss_fim"] = max(worst["gauss_fim"], _rel_err(hv, fd))

    limits = {"tab_score": 1e-4, "tab_f_exact": 1e-4, "tab_f": 1e-3, "tab_g": 1e-3, "tab_fim": 1e-4,
              "gauss_score": 1e-3, "gauss_f": 1e-3, "gauss_g": 1e-3, "gauss_fim": 1e-3}
    names = {
        "tab_score": "tabular score vs FD", "tab_f_exact": "tabular exact-enumeration grad f vs FD",
        "tab_f": "tabular sampled grad f vs FD", "tab_g": "tabular grad g vs FD",
        "tab_fim": "tabular Fisher product vs FD of grad KL", "gauss_score": "gaussian score vs FD",
        "gauss_f": "gaussian grad f vs FD", "gauss_g": "gaussian grad g vs FD",
        "gauss_fim": "gaussian Fisher product vs FD of grad KL",
    }
    return [CheckResult("gradients", f"{names[k]} ({n_cases} cases)", worst[k] <= limits[k],
                        f"max rel={worst[k]:.2e} (limit {limits[k]:g})") for k in worst]


# ------------------------------------------------------------------- solver
def solver_suite(n_cases: int = 20, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    worst_res = worst_dense = worst_kl = worst_ball = 0.0
    for _ in range(n_cases):
        m = rng.normal(size=(50, 50))
        a = m.T @ m + np.eye(50)
        b = rng.normal(size=50)
        cg = conjugate_gradient(lambda v: a @ v, b, max_iters=500, tolerance=1e-12)
        worst_res = max(worst_res, cg.residual)
        worst_dense = max(worst_dense, float(np.max(np.abs(cg.x - np.linalg.solve(a, b)))))

        dim = int(rng.integers(2, 12))
        mm = rng.normal(size=(dim, dim))
        h = mm.T @ mm + 0.1 * np.eye(dim)
        grad = rng.normal(size=dim)
        delta = float(rng.uniform(1e-3, 0.5))
        step = compute_step(grad, lambda v: h @ v, TrustRegionConfig(delta=delta, cg_max_iters=15))
        worst_kl = max(worst_kl, abs(step.predicted_kl - delta) / delta)

        # the KL-ball problem solved in whitened coordinates p = H^{1/2} s
        h2 = h[:2, :2]
        g2 = grad[:2]
        evals, evecs = np.linalg.eigh(h2)
        inv_sqrt = evecs @ np.diag(evals**-0.5) @ evecs.T
        p_dir = inv_sqrt @ g2
        p_star = math.sqrt(2 * delta) * p_dir / np.linalg.norm(p_dir)
        s_ref = inv_sqrt @ p_star
        s2 = compute_step(g2, lambda v: h2 @ v, TrustRegionConfig(delta=delta)).step
        worst_ball = max(worst_ball, float(np.max(np.abs(s2 - s_ref))))
    out.append(CheckResult("solver", "CG residual on 50-dim SPD systems", worst_res <= 1e-8, f"max={worst_res:.2e}"))
    out.append(CheckResult("solver", "CG agrees with dense solve", worst_dense <= 1e-6, f"max={worst_dense:.2e}"))
    out.append(CheckResult("solver", "predicted KL equals delta", worst_kl <= 1e-6, f"max rel={worst_kl:.2e}"))
    out.append(CheckResult("solver", "step equals whitened norm-ball solution (2-d)", worst_ball <= 1e-8,
                           f"max={worst_ball:.2e}"))

    # line search on real chain updates: never lowers G, never exceeds delta
    cmdp = chain_cmdp(threshold=8.0)
    est_cfg = EstimatorConfig(discount=cmdp.discount)
    tr = TrustRegionConfig()
    params = PolicyParams.tabular(cmdp.n_states, cmdp.n_actions)
    values = ValueFits.zeros(cmdp.n_states, 1, cmdp.n_states)
    maxima = None
    bad_g = bad_kl = 0
    quad = 0.0
    for k in range(15):
        batch = collect(cmdp, params, 20, cmdp.episode_horizon, np.random.SeedSequence([seed, 99, k]))
        est = estimate_advantages(batch, values, est_cfg)
        outcome = pcpo_update(batch, est, params, cmdp.thresholds, BarrierConfig(), IntrinsicConfig(), tr, maxima)
        model = SampleModel(batch, est, params, cmdp.thresholds)
        g_old, g_new = outcome.record["G"], outcome.record["G_new"]
        kl = model.kl(outcome.params)
        bad_g += int(g_new < g_old)
        bad_kl += int(kl > tr.delta)
        s = outcome.params.theta - params.theta
        if np.any(s):
            quad_model = 0.5 * float(s @ model.fisher(0.0)(s))
            quad = max(quad, abs(kl - quad_model) / quad_model)
        values = fit_values(batch, est, est_cfg, cmdp.n_states, values)
        maxima, params = outcome.maxima, outcome.params
    out.append(CheckResult("solver", "line search never lowers G", bad_g == 0, f"violations={bad_g}"))
    out.append(CheckResult("solver", "line search never exceeds sampled KL delta", bad_kl == 0,
                           f"violations={bad_kl}"))
    out.append(CheckResult("solver", "sampled KL within 20% of its quadratic model", quad <= 0.2,
                           f"max rel={quad:.3f}"))

    def always_worse(candidate):
        return -float(np.sum(candidate.theta**2)) - 1.0

    p0 = PolicyParams.tabular(2, 2)
    res = line_search(p0, np.ones(4), always_worse, lambda c: 0.0, tr, g_old=0.0)
    out.append(CheckResult("solver", "rejection returns the old parameters",
                           (not res.accepted) and np.array_equal(res.params.theta, p0.theta)))
    return out


# ------------------------------------------------------------------ oracles
def oracles_suite(n_cases: int = 100, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = {"bellman": 0.0, "occupancy": 0.0, "perf_diff": 0.0, "centering": 0.0, "batched": 0.0}
    for _ in range(n_cases):
        cmdp = random_cmdp(rng, int(rng.integers(2, 7)), int(rng.integers(2, 4)), int(rng.integers(1, 3)),
                           float(rng.uniform(0.5, 0.97)))
        pi = rng.dirichlet(np.ones(cmdp.n_actions), size=cmdp.n_states)
        pi2 = rng.dirichlet(np.ones(cmdp.n_actions), size=cmdp.n_states)
        res = exact_policy_eval(cmdp, pi)
        gamma = cmdp.discount
        m_pi = state_transition_matrix(cmdp, pi)
        r_pi = np.sum(pi * cmdp.reward, axis=1)
        worst["bellman"] = max(worst["bellman"], float(np.max(np.abs(res.state_values - (r_pi + gamma * m_pi @ res.state_values)))))
        for c, v in zip(cmdp.costs, res.cost_state_values):
            worst["bellman"] = max(worst["bellman"], float(np.max(np.abs(v - (np.sum(pi * c, 1) + gamma * m_pi @ v)))))
        occ = (1 - gamma) * cmdp.init_dist + gamma * m_pi.T @ res.occupancy
        worst["occupancy"] = max(worst["occupancy"], float(np.max(np.abs(res.occupancy - occ))))
        j_direct = float(res.occupancy @ r_pi / (1 - gamma))
        worst["occupancy"] = max(worst["occupancy"], abs(j_direct - res.discounted_return))
        new = exact_policy_eval(cmdp, pi2)
        worst["perf_diff"] = max(worst["perf_diff"],
                                 abs(performance_difference(cmdp, pi, pi2) - (new.discounted_return - res.discounted_return)))
        for i in range(cmdp.n_costs):
            gap = new.cost_returns[i] - res.cost_returns[i]
            worst["perf_diff"] = max(worst["perf_diff"], abs(performance_difference(cmdp, pi, pi2, i) - gap))
        worst["centering"] = max(worst["centering"], float(np.max(np.abs(np.sum(pi * res.advantages, 1)))))
        for adv in res.cost_advantages:
            worst["centering"] = max(worst["centering"], float(np.max(np.abs(np.sum(pi * adv, 1)))))
        j, jc = batched_returns(cmdp, np.stack([pi, pi2]))
        worst["batched"] = max(worst["batched"], abs(j[0] - res.discounted_return),
                               float(np.max(np.abs(jc[1] - np.array(new.cost_returns)))))
    names = {"bellman": "Bellman consistency", "occupancy": "occupancy identity",
             "perf_diff": "performance-difference identity", "centering": "expected advantage is zero",
             "batched": "batched returns match single evaluation"}
    return [CheckResult("oracles", f"{names[k]} ({n_cases} instances)", v <= 1e-9, f"max={v:.2e}")
            for k, v in worst.items()]


# ------------------------------------------------------------------- theory
def duality_gap_cmdp(seed: int = 7) -> TabularCmdp:
    """Two states, two actions, with a constraint that binds at the optimum.

    Instances are drawn from ``seed`` upward until the greedy policy costs
    clearly more than the cheapest deterministic one; the threshold sits
    halfway between the two.
    """
    corners = np.array([[[1 - a0, a0], [1 - a1, a1]] for a0 in (0, 1) for a1 in (0, 1)], dtype=float)
    while True:
        cmdp = random_cmdp(np.random.default_rng(seed), 2, 2, 1, 0.9)
        _, greedy = value_iteration(cmdp)
        _, jc = batched_returns(cmdp, corners)
        jc_greedy = exact_policy_eval(cmdp, greedy).cost_returns[0]
        if jc_greedy > float(jc.min()) + 0.5:
            return cmdp.with_thresholds((0.5 * (float(jc.min()) + jc_greedy),))
        seed += 1


def load_bundled_trace():
    """The bundled 20-iteration chain trace and its run metadata."""
    base = resources.files("pcpo_lab") / "data"
    meta = json.loads((base / "chain_trace.json").read_text())
    rows = list(csv.DictReader(io.StringIO((base / "chain_trace.csv").read_text())))
    return rows, meta


def theory_suite(seed: int = 0) -> list[CheckResult]:
    out = []
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        cmdp = random_cmdp(rng, 3, 2, 1, 0.9)
        pi = rng.dirichlet(np.ones(2), size=3)
        eps = epsilon_terms(cmdp, pi, pi)
        worst = max(worst, eps.eps_new, float(np.max(eps.eps_cost_new)), float(np.max(eps.eps_cost_old)))
    out.append(CheckResult("theory", "epsilon terms vanish for identical policies", worst <= 1e-9, f"max={worst:.2e}"))

    cmdp = duality_gap_cmdp()
    for tau in (1.0, 5.0, 20.0):
        for omega in (0.0, 0.1):
            res = measured_duality_gap(cmdp, tau, 0.01, omega=omega)
            out.append(CheckResult("theory", f"duality gap within bound (tau={tau:g}, omega={omega:g})",
                                   res.holds and res.gap_terms_ok,
                                   f"gap={res.measured_gap:.4g} bound={res.bound:.4g} grid slack={res.slack:.3g}"))

    rows, meta = load_bundled_trace()
    chain = chain_cmdp(threshold=meta["threshold"])
    report = theorem_report(chain, rows, meta["tau"], meta["delta"])
    s = report.summary
    out.append(CheckResult("theory", "update bound on bundled trace",
                           s["applicable"] > 0 and s["holds"] == s["applicable"],
                           f"pass {s['holds']}/{s['applicable']} (proof form {s['holds_proof_form']}/{s['applicable']})",
                           hard=False))
    monotone = all(b["cumulative_violation"] >= a["cumulative_violation"]
                   for a, b in zip(report.records, report.records[1:]))
    out.append(CheckResult("theory", "cumulative violation nondecreasing", monotone))
    eps_ok = all(r["eps_new"] >= 0 and min(r["eps_cost_new"] + r["eps_cost_old"]) >= 0 and r["eta_new"] <= 0
                 for r in report.records)
    out.append(CheckResult("theory", "epsilon >= 0 and eta <= 0 on trace", eps_ok))
    prop1 = np.mean([float(r["prop1_holds"]) for r in rows])
    out.append(CheckResult("theory", "intrinsic-enhancement diagnostic on bundled trace", True,
                           f"pass fraction {prop1:.3f}", hard=False))
    return out


SUITE_FUNCTIONS = {
    "barrier": barrier_suite,
    "gradients": gradients_suite,
    "solver": solver_suite,
    "oracles": oracles_suite,
    "theory": theory_suite,
}


def run_suites(name: str = "all") -> tuple[list[CheckResult], dict]:
    names = SUITES if name == "all" else (name,)
    if any(n not in SUITE_FUNCTIONS for n in names):
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    results, timings = [], {}
    for n in names:
        start = time.perf_counter()
        results.extend(SUITE_FUNCTIONS[n]())
        timings[n] = time.perf_counter() - start
    return results, timings


def failed_hard(results) -> list[CheckResult]:
    return [r for r in results if r.hard and not r.passed]
