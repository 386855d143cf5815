"""Fisher products, conjugate gradient, the KL-ball step and backtracking.

The step maximizes the linear model ``grad . s`` subject to
``0.5 * s^T H s <= delta`` where ``H`` is the damped Fisher matrix, giving
``s = sqrt(2 delta) * x / sqrt(grad . x)`` with ``H x = grad``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from pcpo_lab.policy import PolicyParams, probabilities

Operator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TrustRegionConfig:
    delta: float = 0.01
    damping: float = 0.1
    cg_max_iters: int = 15
    cg_tolerance: float = 1e-10
    backtrack_coeff: float = 0.8
    max_backtracks: int = 15

    def __post_init__(self) -> None:
        if not self.delta > 0 or not self.damping > 0:
            raise ValueError("delta and damping must be positive")
        if self.cg_max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("iteration caps must be positive")
        if not self.cg_tolerance > 0:
            raise ValueError("cg_tolerance must be positive")
        if not 0.0 < self.backtrack_coeff < 1.0:
            raise ValueError("backtrack_coeff must lie in (0, 1)")


# ------------------------------------------------------------ Fisher products
def fisher_operator(params: PolicyParams, state_weights, states=None, damping: float = 0.0) -> Operator:
    """``v -> (H + damping I) v`` with actions integrated exactly.

    Tabular: ``state_weights`` has one entry per state. Gaussian: ``states``
    is a feature matrix and ``state_weights`` one weight per row (``None``
    means uniform).
    """
    size = params.size
    if params.is_tabular:
        w = np.asarray(state_weights, dtype=float)
        if w.shape != (params.n_states,):
            raise ValueError(f"state_weights must have shape ({params.n_states},)")
        p = probabilities(params)
        wp = w[:, None] * p

        def apply(v):
            vv = _check_vector(v, size).reshape(p.shape)
            # per state: diag(p) v - p (p . v), weighted
            out = wp * (vv - np.sum(p * vv, axis=1, keepdims=True))
            out = out.ravel()
            return out + damping * vv.ravel() if damping else out

        return apply

    feats = np.atleast_2d(np.asarray(states, dtype=float))
    n = feats.shape[0]
    w = np.full(n, 1.0 / n) if state_weights is None else np.asarray(state_weights, dtype=float)
    if w.shape != (n,):
        raise ValueError("state_weights must have one entry per feature row")
    gram = feats.T @ (w[:, None] * feats)
    inv_var = np.exp(-2.0 * params.log_std())
    total_w = float(w.sum())
    d, f = params.action_dim, params.feature_dim

    def apply(v):
        vv = _check_vector(v, size)
        mean_part = (vv[: d * f].reshape(d, f) @ gram) * inv_var[:, None]
        out = np.concatenate([mean_part.ravel(), 2.0 * total_w * vv[d * f:]])
        return out + damping * vv if damping else out

    return apply


def _check_vector(v, size: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (size,):
        raise ValueError(f"vector has shape {v.shape}, parameters need ({size},)")
    return v


def fim_vector_product(params: PolicyParams, v, state_weights, states=None) -> np.ndarray:
    """Undamped Fisher (KL Hessian at ``params``) times ``v``."""
    return fisher_operator(params, state_weights, states)(v)


# --------------------------------------------------------- conjugate gradient
@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def conjugate_gradient(apply_a: Operator, b, max_iters: int = 15, tolerance: float = 1e-10) -> CGResult:
    """Solve ``A x = b`` for SPD ``A``; stops at ``|Ax - b| <= max(tol, tol |b|)``."""
    b = np.asarray(b, dtype=float)
    target = max(tolerance, tolerance * float(np.linalg.norm(b)))
    x = np.zeros_like(b)
    if not np.any(b):
        return CGResult(x, 0.0, 0, True)
    r = b.copy()
    p = r.copy()
    rr = float(r @ r)
    iters = 0
    for iters in range(1, max_iters + 1):
        ap = apply_a(p)
        pap = float(p @ ap)
        if not math.isfinite(pap) or not np.all(np.isfinite(ap)):
            raise FloatingPointError(f"non-finite operator product at CG iteration {iters}")
        if pap <= 0:
            raise FloatingPointError(f"operator not positive definite at CG iteration {iters} (p.Ap={pap})")
        alpha = rr / pap
        x = x + alpha * p
        r = r - alpha * ap
        rr_new = float(r @ r)
        if math.sqrt(rr_new) <= target:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    residual = float(np.linalg.norm(apply_a(x) - b))
    if not math.isfinite(residual):
        raise FloatingPointError("non-finite CG residual")
    return CGResult(x, residual, iters, residual <= target)


# ------------------------------------------------------------------- the step
@dataclass(frozen=True)
class StepResult:
    direction: np.ndarray
    step: np.ndarray
    predicted_kl: float
    cg_residual: float
    cg_iterations: int
    cg_converged: bool
    flags: tuple[str, ...] = ()

    @property
    def stationary(self) -> bool:
        return "stationary" in self.flags


def compute_step(grad, fim_apply: Operator, config: TrustRegionConfig) -> StepResult:
    """Maximal step of the linear model inside the KL ball.

    ``fim_apply`` must already include damping. If CG stops early the step is
    rescaled so that its quadratic-model KL is exactly ``delta``.
    """
    g = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("gradient of G is not finite")
    if not np.any(g):
        zero = np.zeros_like(g)
        return StepResult(zero, zero, 0.0, 0.0, 0, True, ("stationary",))
    cg = conjugate_gradient(fim_apply, g, config.cg_max_iters, config.cg_tolerance)
    flags = [] if cg.converged else ["cg_cap"]
    x = cg.x
    gx = float(g @ x)
    if not gx > 0:
        flags.append("gradient_fallback")
        x = g
        gx = float(g @ fim_apply(g))
    step = math.sqrt(2.0 * config.delta) * x / math.sqrt(gx)
    predicted = 0.5 * float(step @ fim_apply(step))
    if abs(predicted - config.delta) > 1e-9 * config.delta:
        step = step * math.sqrt(config.delta / predicted)
        predicted = 0.5 * float(step @ fim_apply(step))
        flags.append("rescaled")
    return StepResult(x, step, predicted, cg.residual, cg.iterations, cg.converged, tuple(flags))


@dataclass(frozen=True)
class LineSearchResult:
    params: PolicyParams
    accepted: bool
    backtracks_used: int
    kl: float
    objective: float
    objective_old: float
    trials: tuple = field(default_factory=tuple)


def line_search(params_old: PolicyParams, step, evaluate_g: Callable[[PolicyParams], float],
                evaluate_kl: Callable[[PolicyParams], float], config: TrustRegionConfig,
                g_old: float | None = None) -> LineSearchResult:
    """First ``theta_k + c^j step`` with KL <= delta and G not below ``G(theta_k)``.

    Returns ``params_old`` (``accepted=False``) when every candidate fails.
    """
    step = np.asarray(step, dtype=float)
    base = evaluate_g(params_old) if g_old is None else g_old
    trials = []
    for j in range(config.max_backtracks + 1):
        cand = params_old.with_theta(params_old.theta + config.backtrack_coeff**j * step)
        kl = float(evaluate_kl(cand))
        value = float(evaluate_g(cand)) if kl <= config.delta else math.nan
        trials.append((j, kl, value))
        if kl <= config.delta and value >= base:
            return LineSearchResult(cand, True, j, kl, value, base, tuple(trials))
    return LineSearchResult(params_old, False, config.max_backtracks, 0.0, base, base, tuple(trials))
