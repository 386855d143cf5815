import math

import numpy as np
import pytest

from pcpo_lab.intrinsic import (IntrinsicConfig, RunningMaxima, augmented_objective, eta_weight,
                                intrinsic_gradient, intrinsic_scores, intrinsic_totals_at, proposition1_diagnostic)


def test_single_sample_on_boundary():
    cfg = IntrinsicConfig(gate_margin=0.0)
    out = intrinsic_scores([[0.7]], [0.0], cfg, 0.99)
    assert out.softmax[0, 0] == pytest.approx(1.0)
    assert out.gates[0] == pytest.approx(0.5)
    assert out.totals[0] == pytest.approx(0.5)


def test_disabled():
    out = intrinsic_scores(np.ones((5, 2)), [0.0, 0.0], IntrinsicConfig(enabled=False), 0.9)
    assert not np.any(out.totals) and out.eta == 0.0 and not out.active
    assert eta_weight(RunningMaxima(10.0, 2.0), IntrinsicConfig(enabled=False)) == 0.0


def test_deep_interior_gate_closed():
    cfg = IntrinsicConfig()
    out = intrinsic_scores(np.random.default_rng(0).normal(size=(20, 1)), [-5.0], cfg, 0.9, thresholds=[10.0])
    assert out.gates[0] == 0.0 and out.totals[0] == 0.0
    near = intrinsic_scores(np.ones((4, 1)), [-0.4], cfg, 0.9, thresholds=[10.0])
    assert near.gates[0] == pytest.approx(1 / (1 + math.exp(-0.3 * 0.1)))


def test_softmax_and_scores():
    adv = np.array([[1.0], [-2.0], [0.5]])
    cfg = IntrinsicConfig(beta=2.0, gate_margin=1.0)
    out = intrinsic_scores(adv, [-0.5], cfg, 0.9)
    scores = 2.0 * np.abs(adv[:, 0]) / (0.1 * 0.5)
    assert np.allclose(out.scores[:, 0], scores)
    e = np.exp(scores - scores.max())
    assert np.allclose(out.softmax[:, 0], e / e.sum())
    assert out.softmax[:, 0].sum() == pytest.approx(1.0)
    assert np.allclose(out.bonuses, out.softmax * out.gates)


def test_eta_examples():
    assert eta_weight(RunningMaxima(10.0, 2.0), IntrinsicConfig(omega=0.0)) == 0.0
    assert eta_weight(RunningMaxima(10.0, 2.0), IntrinsicConfig(omega=0.5)) == pytest.approx(2.5)


def test_running_maxima():
    m = RunningMaxima.initial(-3.0, 2)
    assert m.g_max == 3.0 and m.i_max > 0
    m2 = m.updated(1.0, [0.2, 0.5]).updated(4.0, [0.1, 0.1])
    assert m2.g_max == 4.0 and m2.i_max == pytest.approx(0.7)
    assert m2.i_max_per_channel == (0.2, 0.5)


def test_augmented_examples():
    assert augmented_objective(1.0, [0.25]) == pytest.approx(0.75)
    assert augmented_objective(1.0, [0.25], [0.5], 2.0) == pytest.approx(1.75)
    assert augmented_objective(0.0, [0.0], [0.0], 0.0) == 0.0
    with pytest.raises(FloatingPointError, match="phi"):
        augmented_objective(1.0, [math.inf])
    with pytest.raises(FloatingPointError, match="objective"):
        augmented_objective(math.nan, [0.0])
    with pytest.raises(FloatingPointError, match="intrinsic"):
        augmented_objective(1.0, [0.0], [math.nan], 1.0)


def test_totals_and_gradient_fd(rng):
    n, m, p = 8, 2, 5
    scores = rng.normal(size=(n, p))
    bonuses = rng.random((n, m))
    theta = np.zeros(p)

    def total(t):
        # importance weights exp(score . t) around the behavior policy, per-sample mean
        w = np.exp(scores @ t) / n
        return intrinsic_totals_at(w, bonuses).sum()

    h = 1e-6
    fd = np.array([(total(theta + h * e) - total(theta - h * e)) / (2 * h) for e in np.eye(p)])
    assert np.allclose(intrinsic_gradient(scores, bonuses) / n, fd, atol=1e-8)


def test_diagnostic_degenerate_cases():
    lhs, rhs, holds = proposition1_diagnostic(1.2, 1.0, 1.2, 1.0, 0.0, [0.3], [0.1])
    assert lhs == rhs and holds
    lhs, rhs, holds = proposition1_diagnostic(2.0, 1.0, 1.5, 1.0, 3.0, [0.4], [0.4])
    assert rhs == pytest.approx(0.5) and holds
    _, _, holds = proposition1_diagnostic(1.0, 1.0, 1.5, 1.0, 0.0, [0.0], [0.0])
    assert not holds


def test_eta_linear_in_omega():
    maxima = RunningMaxima(7.3, 0.4)
    one = eta_weight(maxima, IntrinsicConfig(omega=0.2))
    two = eta_weight(maxima, IntrinsicConfig(omega=0.4))
    assert abs(two - 2 * one) <= 1e-12
