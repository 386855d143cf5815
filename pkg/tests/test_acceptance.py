"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import math
import time

import pytest

from pcpo_lab import harness
from pcpo_lab.barrier import BarrierConfig
from pcpo_lab.checks import duality_gap_cmdp, run_suites
from pcpo_lab.harness import ExperimentConfig, compare
from pcpo_lab.intrinsic import IntrinsicConfig
from pcpo_lab.theory import measured_duality_gap, theorem_report


def report(number: int, name: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {number} ({name}): {detail}")


def suite_criterion(suite: str, limit_s: float):
    start = time.perf_counter()
    results, _ = run_suites(suite)
    elapsed = time.perf_counter() - start
    failed = [r.name for r in results if r.hard and not r.passed]
    passed = not failed and elapsed < limit_s
    limit = f"limit {limit_s:g}s" if math.isfinite(limit_s) else "no time limit"
    detail = f"{len(results) - len(failed)}/{len(results)} checks in {elapsed:.2f}s ({limit})"
    if failed:
        detail += "; failed: " + ", ".join(failed)
    return passed, detail


def criterion_1():
    return suite_criterion("barrier", 1.0)


def criterion_2():
    return suite_criterion("gradients", 30.0)


def criterion_3():
    return suite_criterion("solver", math.inf)


def criterion_4():
    return suite_criterion("oracles", 10.0)


def criterion_5():
    start = time.perf_counter()
    cmdp = duality_gap_cmdp()
    parts, ok = [], True
    for tau in (1.0, 5.0, 20.0):
        check = measured_duality_gap(cmdp, tau, grid_resolution=0.01)
        ok &= check.holds
        parts.append(f"tau={tau:g}: gap={check.measured_gap:.4g} <= {check.bound:.4g}+{check.slack:.2g}")
    elapsed = time.perf_counter() - start
    return bool(ok and elapsed < 60.0), "; ".join(parts) + f" ({elapsed:.2f}s)"


def criterion_6():
    cfg = ExperimentConfig(iterations=50, seeds=(0,))
    d = harness.resolve_threshold(cfg)
    env, thresholds = harness.build_environment(cfg.environment, d)
    res = harness.run_seed(cfg, 0, thresholds)
    if res.error:
        return False, f"training failed: {res.error}"
    rep = theorem_report(env, res.rows, cfg.barrier.tau, cfg.trust_region.delta, cfg.barrier.kind.value)
    s = rep.summary
    passed = s["applicable"] > 0 and s["holds"] == s["applicable"]
    return passed, (f"bound holds on {s['holds']}/{s['applicable']} applicable iterations "
                    f"of {s['iterations']} (d={d:.4g})")


def criterion_7():
    start = time.perf_counter()
    base = ExperimentConfig(iterations=100, seeds=(0, 1, 2, 3, 4))
    d = harness.resolve_threshold(base)
    rep = compare(base.replace(method="pcpo"), base.replace(method="lagrangian"))
    elapsed = time.perf_counter() - start
    pcpo_run = rep.runs[0]
    finals = [s["final_exact_jc"][0] for s in pcpo_run.summary["seeds"] if "final_exact_jc" in s]
    feasible = sum(jc <= 1.05 * d for jc in finals)
    wins = sum(r["a_le_b"] for r in rep.per_seed)
    passed = feasible >= 4 and wins >= 4 and elapsed < 300.0
    vs = ", ".join(f"{r['V_a']:.3g}/{r['V_b']:.3g}" for r in rep.per_seed)
    return passed, (f"feasible {feasible}/5 (J_C <= 1.05 d, d={d:.4g}); V_P <= V_L on {wins}/5 "
                    f"[V_P/V_L: {vs}]; {elapsed:.1f}s (limit 300s)")


def criterion_8():
    base = ExperimentConfig(iterations=50, seeds=(0, 1, 2, 3, 4))
    rep = compare(base.replace(method="pcpo"), base.replace(method="pcpo-no-intrinsic"))
    frac = rep.prop1.get("pcpo", math.nan)
    passed = math.isfinite(frac) and 0.0 <= frac <= 1.0
    return passed, f"per-iteration pass fraction {frac:.3f} over 5 seeds x 50 iterations (reported, no threshold)"


def _same_rows(a, b, skip=()):
    if a.error or b.error or len(a.rows) != len(b.rows):
        return False
    keep = [c for c in a.columns if c not in skip]
    return all(repr(ra[c]) == repr(rb[c]) for ra, rb in zip(a.rows, b.rows) for c in keep)


def criterion_9():
    d = 8.0
    base = ExperimentConfig(iterations=30, seeds=(0,))
    omega0 = harness.run_seed(base.replace(intrinsic=IntrinsicConfig(omega=0.0)), 0, (d,))
    no_int = harness.run_seed(base.replace(method="pcpo-no-intrinsic"), 0, (d,))
    skip = {"method", "i_max"} | {c for c in omega0.columns if c.startswith(("intrinsic_", "gate_"))}
    r1 = _same_rows(omega0, no_int, skip)

    lag = harness.run_seed(base.replace(method="lagrangian"), 0, (math.inf,))
    unpen = harness.run_seed(base.replace(barrier=BarrierConfig(enabled=False),
                                          intrinsic=IntrinsicConfig(enabled=False)), 0, (math.inf,))
    # the Lagrangian tracks no running maxima; every other column must match
    r2 = _same_rows(lag, unpen, {"method", "g_max", "i_max"})

    r3 = True
    for method in harness.METHODS:
        cfg = base.replace(method=method, iterations=20)
        a, b = harness.run_seed(cfg, 3, (d,)), harness.run_seed(cfg, 3, (d,))
        rows_a = [[harness._fmt(r[c]) for c in a.columns] for r in a.rows]
        rows_b = [[harness._fmt(r[c]) for c in b.columns] for r in b.rows]
        r3 &= bool(rows_a) and rows_a == rows_b
    passed = r1 and r2 and r3
    return passed, f"omega=0 vs no-intrinsic: {r1}; lagrangian(d=inf) vs unpenalized: {r2}; determinism: {r3}"


CRITERIA = [
    (1, "barrier kernel", criterion_1),
    (2, "gradient suite", criterion_2),
    (3, "solver", criterion_3),
    (4, "oracle identities", criterion_4),
    (5, "duality gap", criterion_5),
    (6, "update bound", criterion_6),
    (7, "desk-scale behavior", criterion_7),
    (8, "intrinsic-enhancement diagnostic", criterion_8),
    (9, "reductions and determinism", criterion_9),
]


@pytest.mark.parametrize("number,name,fn", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(number, name, fn):
    passed, detail = fn()
    report(number, name, passed, detail)
    assert passed, detail


if __name__ == "__main__":
    failures = 0
    for number, name, fn in CRITERIA:
        passed, detail = fn()
        report(number, name, passed, detail)
        failures += not passed
    raise SystemExit(1 if failures else 0)
