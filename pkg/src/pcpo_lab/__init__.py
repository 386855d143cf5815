"""Barrier-penalized trust-region policy optimization on small constrained MDPs."""

from pcpo_lab.barrier import BarrierConfig, BarrierKind, DualVariables
from pcpo_lab.cmdp import ExactEvalResult, TabularCmdp, exact_policy_eval
from pcpo_lab.policy import PolicyFamily, PolicyParams

__version__ = "0.1.0"

__all__ = [
    "BarrierConfig",
    "BarrierKind",
    "DualVariables",
    "ExactEvalResult",
    "PolicyFamily",
    "PolicyParams",
    "TabularCmdp",
    "exact_policy_eval",
]
