import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcpo_lab.barrier import (BarrierConfig, BarrierKind, DualVariables, UnsupportedBarrierError, gap_term_bound_check,
                              implicit_duals, phi, phi_derivative)


def test_phi_examples():
    assert phi(BarrierConfig(tau=1.0), -math.e) == pytest.approx(-1.0)
    cfg = BarrierConfig(tau=1.0)
    assert phi(cfg, -1.0) == pytest.approx(0.0, abs=1e-15)
    assert -math.log(1.0) / 1.0 == pytest.approx(1.0 * -1.0 - math.log(1.0) + 1.0)
    assert phi(BarrierConfig(tau=2.0), 0.0) == pytest.approx(math.log(2) + 0.5)
    assert phi(BarrierConfig(tau=2.0), 0.0) == pytest.approx(1.1931472, abs=1e-7)


def test_derivative_examples():
    assert phi_derivative(BarrierConfig(tau=2.0), -1.0) == pytest.approx(0.5)
    cfg = BarrierConfig(tau=3.0)
    left = -1.0 / (3.0 * cfg.junction)
    assert left == pytest.approx(3.0)
    assert phi_derivative(cfg, cfg.junction) == pytest.approx(3.0)
    assert phi_derivative(cfg, cfg.junction + 1e-9) == 3.0


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0, 20.0])
def test_junction_continuity(tau):
    cfg = BarrierConfig(tau=tau)
    j = cfg.junction
    log_value = -math.log(-j) / tau
    lin_value = tau * j - math.log(1 / tau**2) / tau + 1 / tau
    assert abs(log_value - lin_value) <= 1e-12
    assert abs(-1 / (tau * j) - tau) <= 1e-12 * tau
    # second-order one-sided stencils, each staying on its own branch
    h = 1e-5 * abs(j)
    left = (3 * phi(cfg, j) - 4 * phi(cfg, j - h) + phi(cfg, j - 2 * h)) / (2 * h)
    right = (-3 * phi(cfg, j) + 4 * phi(cfg, j + h) - phi(cfg, j + 2 * h)) / (2 * h)
    assert abs(left - tau) <= 1e-6 * tau
    assert abs(right - tau) <= 1e-6 * tau


@settings(max_examples=200, deadline=None)
@given(tau=st.floats(0.1, 100), g=st.floats(-100, 100))
def test_derivative_positive_and_dual_identity(tau, g):
    cfg = BarrierConfig(tau=tau)
    d = phi_derivative(cfg, g)
    assert d > 0
    assert abs(implicit_duals(cfg, [g]).lambdas[0] - d) <= 1e-12 * max(1.0, d)
    value, ok = gap_term_bound_check(cfg, g)
    assert ok and value <= 1 / tau + 1e-12


def test_fd_of_phi():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        tau = rng.uniform(0.5, 20)
        cfg = BarrierConfig(tau=tau)
        g = rng.uniform(-5, 2)
        h = 1e-6 * max(1.0, abs(g))
        if abs(g - cfg.junction) < 10 * h:
            continue
        if g < 0:
            h = min(h, -g / 10)
        fd = (phi(cfg, g + h) - phi(cfg, g - h)) / (2 * h)
        d = phi_derivative(cfg, g)
        worst = max(worst, abs(fd - d) / abs(d))
    assert worst <= 1e-6


def test_dual_examples():
    cfg = BarrierConfig(tau=2.0)
    assert implicit_duals(cfg, [-1.0]).lambdas == (0.5,)
    assert implicit_duals(cfg, [0.3]).lambdas == (2.0,)
    assert gap_term_bound_check(cfg, -1.0) == (0.5, True)
    value, ok = gap_term_bound_check(cfg, 5.0)
    assert value == -10.0 and ok


def test_gap_term_sweep():
    rng = np.random.default_rng(42)
    taus = rng.uniform(0.1, 100, 100_000)
    gs = rng.uniform(-100, 100, 100_000)
    bad = sum(not gap_term_bound_check(BarrierConfig(tau=t), g)[1] for t, g in zip(taus[:2000], gs[:2000]))
    assert bad == 0
    # vectorized over all pairs
    lam = np.where(gs <= -1 / taus**2, -1 / (taus * gs), taus)
    assert np.count_nonzero(-lam * gs > 1 / taus + 1e-12) == 0


def test_other_kinds():
    quad = BarrierConfig.default_for("quadratic")
    assert quad.tau == 1.0
    assert phi(quad, 0.5) == pytest.approx(0.25)
    assert phi_derivative(quad, 0.5) == pytest.approx(1.0)
    expo = BarrierConfig.default_for(BarrierKind.EXPONENTIAL)
    assert phi(expo, 1.0) == pytest.approx(math.exp(0.01))
    with pytest.raises(UnsupportedBarrierError):
        implicit_duals(quad, [0.1])


def test_disabled_and_validation():
    off = BarrierConfig(enabled=False)
    assert phi(off, 3.0) == 0.0 and phi_derivative(off, 3.0) == 0.0
    with pytest.raises(ValueError):
        BarrierConfig(tau=0.0)
    with pytest.raises(ValueError):
        DualVariables((-1.0,))


def test_vectorized_and_convex():
    cfg = BarrierConfig(tau=4.0)
    g = np.linspace(-3, 3, 1001)
    d = phi_derivative(cfg, g)
    assert np.all(np.diff(d) >= -1e-12)
    assert np.allclose(phi(cfg, g), [phi(cfg, x) for x in g])
