import math

import numpy as np
import pytest

from pcpo_lab.barrier import BarrierConfig
from pcpo_lab.envs import chain_cmdp
from pcpo_lab.estimator import EstimatorConfig, ValueFits, estimate_advantages
from pcpo_lab.intrinsic import IntrinsicConfig
from pcpo_lab.lagrangian import LagrangianState, dual_ascent, lagrangian_objective, lagrangian_update
from pcpo_lab.policy import PolicyParams
from pcpo_lab.sampler import collect
from pcpo_lab.trust_region import TrustRegionConfig
from pcpo_lab.update import SampleModel, pcpo_update


def setup(seed=0, threshold=8.0):
    env = chain_cmdp(threshold=threshold)
    params = PolicyParams.tabular(6, 2, np.random.default_rng(seed).normal(size=12) * 0.2)
    batch = collect(env, params, 20, 200, seed)
    est = estimate_advantages(batch, ValueFits.zeros(6, 1, 6), EstimatorConfig(discount=env.discount))
    return env, params, batch, est


def test_lagrangian_objective_examples():
    state = LagrangianState((2.0,))
    assert lagrangian_objective(1.0, [0.5], state) == 0.0
    assert lagrangian_objective(1.0, [0.5], LagrangianState((0.0,))) == 1.0
    assert lagrangian_objective(1.0, [-0.5], state) >= 1.0
    assert lagrangian_objective(1.0, [math.inf], LagrangianState((0.0,))) == 1.0


def test_dual_ascent_examples():
    s = LagrangianState((0.3,))
    assert dual_ascent(s, [4.0], [4.0]).lambdas == (0.3,)
    assert dual_ascent(LagrangianState((0.0,)), [0.0], [5.0]).lambdas == (0.0,)
    assert dual_ascent(LagrangianState((0.0,)), [10.0], [0.0]).lambdas == pytest.approx((0.1,))
    assert dual_ascent(LagrangianState((1.99,)), [100.0], [0.0]).lambdas == (2.0,)
    with pytest.raises(ValueError):
        LagrangianState((3.0,))


def test_lagrangian_zero_lambda_matches_unpenalized_step():
    env, params, batch, est = setup()
    tr = TrustRegionConfig()
    inf = (math.inf,)
    new_l, state, out_l = lagrangian_update(batch, est, params, LagrangianState((0.0,)), inf, tr, env.discount)
    out_p = pcpo_update(batch, est, params, inf, BarrierConfig(enabled=False), IntrinsicConfig(enabled=False), tr,
                        discount=env.discount)
    assert np.array_equal(new_l.theta, out_p.params.theta)
    assert out_l.step.step.tobytes() == out_p.step.step.tobytes()
    assert state.lambdas == (0.0,)


def test_deep_interior_lagrangian_gradient_is_grad_f():
    env, params, batch, est = setup(threshold=1e6)
    model = SampleModel(batch, est, params, (1e6,), env.discount)
    w, _ = model.weights(params)
    assert model.g(w)[0] < -1e5
    _, _, out = lagrangian_update(batch, est, params, LagrangianState((0.0,)), (1e6,), TrustRegionConfig(),
                                  env.discount)
    assert out.record["phi"] == [0.0]
    out_p = pcpo_update(batch, est, params, (1e6,), BarrierConfig(enabled=False), IntrinsicConfig(enabled=False),
                        TrustRegionConfig(), discount=env.discount)
    assert np.array_equal(out.params.theta, out_p.params.theta)


def test_pcpo_update_record_and_monotonicity():
    env, params, batch, est = setup()
    tr = TrustRegionConfig()
    out = pcpo_update(batch, est, params, (8.0,), BarrierConfig(tau=20.0), IntrinsicConfig(), tr,
                      discount=env.discount)
    rec = out.record
    for key in ("f", "g", "phi", "lambda", "intrinsic", "gate", "eta", "G", "G_new", "kl_predicted",
                "kl_actual", "accepted", "prop1_holds"):
        assert key in rec
    assert rec["G_new"] >= rec["G"]
    assert rec["kl_actual"] <= tr.delta
    assert rec["g"][0] == pytest.approx(rec["jc_hat"][0] - 8.0, abs=1e-9)
    assert rec["lambda"][0] > 0
    assert abs(rec["kl_predicted"] - tr.delta) <= 1e-6 * tr.delta


def test_omega_zero_matches_no_intrinsic():
    env, params, batch, est = setup(threshold=7.0)
    tr = TrustRegionConfig()
    a = pcpo_update(batch, est, params, (7.0,), BarrierConfig(), IntrinsicConfig(omega=0.0), tr,
                    discount=env.discount)
    b = pcpo_update(batch, est, params, (7.0,), BarrierConfig(), IntrinsicConfig(enabled=False), tr,
                    discount=env.discount)
    assert np.array_equal(a.params.theta, b.params.theta)
    assert a.record["G"] == b.record["G"] and a.record["eta"] == 0.0


def test_intrinsic_active_near_boundary():
    env, params, batch, est = setup()
    model = SampleModel(batch, est, params, (1.0,), env.discount)
    d = float(model.jc_hat[0]) + 0.01
    out = pcpo_update(batch, est, params, (d,), BarrierConfig(), IntrinsicConfig(omega=0.5), TrustRegionConfig(),
                      discount=env.discount)
    assert out.record["gate"][0] > 0
    assert out.record["eta"] > 0
    assert out.record["intrinsic"][0] > 0
