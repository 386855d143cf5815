"""Barrier penalties on constraint surrogates and the implicit duals they induce.

``g`` is the constraint surrogate, feasible when ``g <= 0``. The extended
log-barrier is the usual ``-(1/tau) log(-g)`` on ``g <= -1/tau**2`` glued to a
linear tail of slope ``tau`` so that it is defined, continuous and C1 for
every real ``g``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class BarrierKind(str, enum.Enum):
    EXTENDED_LOG = "extended_log"
    QUADRATIC = "quadratic"
    EXPONENTIAL = "exponential"


DEFAULT_TAU = {
    BarrierKind.EXTENDED_LOG: 20.0,
    BarrierKind.QUADRATIC: 1.0,
    BarrierKind.EXPONENTIAL: 0.01,
}


class UnsupportedBarrierError(ValueError):
    pass


@dataclass(frozen=True)
class BarrierConfig:
    """Barrier sharpness ``tau`` and kind.

    ``enabled=False`` removes the penalty entirely (zero value and slope); it
    exists for reduction checks against the unpenalized trust-region update.
    """

    tau: float = 20.0
    kind: BarrierKind = BarrierKind.EXTENDED_LOG
    enabled: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", BarrierKind(self.kind))
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @classmethod
    def default_for(cls, kind) -> "BarrierConfig":
        kind = BarrierKind(kind)
        return cls(tau=DEFAULT_TAU[kind], kind=kind)

    @property
    def junction(self) -> float:
        """Switch point ``-1/tau**2`` of the extended log-barrier."""
        return -1.0 / self.tau**2


@dataclass(frozen=True)
class DualVariables:
    lambdas: tuple[float, ...]

    def __post_init__(self) -> None:
        if any(not lam >= 0 for lam in self.lambdas):
            raise ValueError("dual variables must be nonnegative")


def _log_branch(tau: float, g):
    return -np.log(-g) / tau


def _linear_branch(tau: float, g):
    return tau * g - np.log(1.0 / tau**2) / tau + 1.0 / tau


def phi(config: BarrierConfig, g):
    """Barrier value; scalars in, float out, arrays in, array out."""
    g_arr = np.asarray(g, dtype=float)
    tau = config.tau
    if not config.enabled:
        out = np.zeros_like(g_arr)
    elif config.kind is BarrierKind.EXTENDED_LOG:
        inside = g_arr <= config.junction
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(inside, _log_branch(tau, np.where(inside, g_arr, -1.0)),
                           _linear_branch(tau, g_arr))
    elif config.kind is BarrierKind.QUADRATIC:
        out = tau * g_arr**2
    else:
        out = np.exp(tau * g_arr)
    return float(out) if out.ndim == 0 else out


def phi_derivative(config: BarrierConfig, g):
    """``d phi / d g``; the scalar chain-rule factor on the constraint gradient."""
    g_arr = np.asarray(g, dtype=float)
    tau = config.tau
    if not config.enabled:
        out = np.zeros_like(g_arr)
    elif config.kind is BarrierKind.EXTENDED_LOG:
        inside = g_arr <= config.junction
        out = np.where(inside, -1.0 / (tau * np.where(inside, g_arr, -1.0)), tau)
    elif config.kind is BarrierKind.QUADRATIC:
        out = 2.0 * tau * g_arr
    else:
        out = tau * np.exp(tau * g_arr)
    return float(out) if out.ndim == 0 else out


def implicit_duals(config: BarrierConfig, g_values) -> DualVariables:
    """Dual variables recovered from the extended log-barrier slope."""
    if config.kind is not BarrierKind.EXTENDED_LOG:
        raise UnsupportedBarrierError(
            f"implicit duals are defined for the extended log-barrier, not {config.kind.value}"
        )
    tau = config.tau
    lambdas = []
    for g in np.atleast_1d(np.asarray(g_values, dtype=float)):
        lambdas.append(-1.0 / (tau * g) if g <= config.junction else tau)
    return DualVariables(tuple(float(lam) for lam in lambdas))


def gap_term_bound_check(config: BarrierConfig, g: float) -> tuple[float, bool]:
    """``-lambda*(g) * g`` and whether it stays below ``1/tau``."""
    lam = implicit_duals(config, [g]).lambdas[0]
    value = -lam * float(g)
    return value, bool(value <= 1.0 / config.tau + 1e-12)
