"""Experiment orchestration: configs, the training loop, comparisons, sweeps, evaluation.

A run trains one method on one environment for every seed in the config.
Each seed's randomness comes from ``SeedSequence([seed, stream, iteration])``
so seeds are independent and a seed's CSV is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pcpo_lab import svg
from pcpo_lab.barrier import BarrierConfig, BarrierKind
from pcpo_lab.cmdp import TabularCmdp, exact_policy_eval
from pcpo_lab.envs import PointCircleEnv, PointVelocityEnv, chain_cmdp
from pcpo_lab.estimator import EstimatorConfig, ValueFits, estimate_advantages, fit_values
from pcpo_lab.intrinsic import IntrinsicConfig
from pcpo_lab.lagrangian import LagrangianState, lagrangian_update
from pcpo_lab.policy import PolicyParams, probabilities, save_params
from pcpo_lab.sampler import average_cost_return, average_return, collect
from pcpo_lab.theory import cumulative_violation, theorem_report
from pcpo_lab.trust_region import TrustRegionConfig
from pcpo_lab.update import pcpo_update

log = logging.getLogger(__name__)

METHODS = ("pcpo", "lagrangian", "pcpo-no-intrinsic", "pcpo-quadratic", "pcpo-exponential", "trpo")
COLLECT_STREAM = 1
EVAL_STREAM = 2
CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


# -------------------------------------------------------------------- config
@dataclass(frozen=True)
class EnvironmentConfig:
    """``name`` is chain, point_velocity, point_circle or file (``params.path``).

    ``threshold`` of ``None`` means: calibrate it from an unconstrained run.
    """

    name: str = "chain"
    params: dict = field(default_factory=dict)
    threshold: float | None = None


@dataclass(frozen=True)
class LagrangianConfig:
    initial_lambda: float = 0.0
    lambda_lr: float = 0.01
    lambda_max: float = 2.0


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    method: str = "pcpo"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    intrinsic: IntrinsicConfig = field(default_factory=IntrinsicConfig)
    trust_region: TrustRegionConfig = field(default_factory=TrustRegionConfig)
    lagrangian: LagrangianConfig = field(default_factory=LagrangianConfig)
    iterations: int = 100
    episodes_per_batch: int = 40
    horizon: int | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    output_dir: str | None = None
    calibration_iterations: int = 100
    calibration_seed: int = 10_000
    calibration_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.iterations < 0 or self.episodes_per_batch < 1:
            raise ConfigError("iterations must be >= 0 and episodes_per_batch >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not 0 < self.calibration_fraction:
            raise ConfigError("calibration_fraction must be positive")

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "environment": EnvironmentConfig,
    "estimator": EstimatorConfig,
    "barrier": BarrierConfig,
    "intrinsic": IntrinsicConfig,
    "trust_region": TrustRegionConfig,
    "lagrangian": LagrangianConfig,
}


def _plain(value):
    if isinstance(value, BarrierKind):
        return value.value
    if isinstance(value, tuple):
        return list(value)
    return value


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {"version": CONFIG_VERSION}
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = {k: _plain(v) for k, v in dataclasses.asdict(value).items()}
        else:
            out[f.name] = _plain(value)
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    version = data.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            names = {f.name for f in dataclasses.fields(cls)}
            bad = set(value) - names
            if bad:
                raise ConfigError(f"unknown keys in {key}: {sorted(bad)}")
            kwargs[key] = cls(**value)
        elif key == "seeds":
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text()))


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2))


# -------------------------------------------------------------- environments
def build_environment(env_cfg: EnvironmentConfig, threshold: float = math.inf):
    """Environment object plus its threshold tuple."""
    params = dict(env_cfg.params)
    if env_cfg.name == "chain":
        env = chain_cmdp(threshold=threshold, **params)
        return env, env.thresholds
    if env_cfg.name == "file":
        env = TabularCmdp.load(params["path"])
        if env_cfg.threshold is not None or math.isfinite(threshold):
            env = env.with_thresholds((threshold,) * env.n_costs)
        return env, env.thresholds
    if env_cfg.name == "point_velocity":
        return PointVelocityEnv(**params), (threshold,)
    if env_cfg.name == "point_circle":
        return PointCircleEnv(**params), (threshold,)
    raise ConfigError(f"unknown environment {env_cfg.name!r}")


def initial_params(env) -> PolicyParams:
    if isinstance(env, TabularCmdp):
        return PolicyParams.tabular(env.n_states, env.n_actions)
    return PolicyParams.linear_gaussian(env.feature_dim, env.action_dim)


def env_horizon(env, config: ExperimentConfig) -> int:
    if config.horizon is not None:
        return int(config.horizon)
    return int(env.episode_horizon if isinstance(env, TabularCmdp) else env.horizon)


def method_settings(config: ExperimentConfig) -> tuple[BarrierConfig, IntrinsicConfig]:
    method = config.method
    barrier, intrinsic = config.barrier, config.intrinsic
    if method == "pcpo-quadratic":
        barrier = BarrierConfig.default_for(BarrierKind.QUADRATIC)
    elif method == "pcpo-exponential":
        barrier = BarrierConfig.default_for(BarrierKind.EXPONENTIAL)
    if method in ("pcpo-no-intrinsic", "trpo", "lagrangian"):
        intrinsic = dataclasses.replace(intrinsic, enabled=False)
    if method == "trpo":
        barrier = dataclasses.replace(barrier, enabled=False)
    return barrier, intrinsic


# --------------------------------------------------------------- calibration
_CALIBRATION_CACHE: dict[str, float] = {}


def calibrate_threshold(config: ExperimentConfig) -> float:
    """``calibration_fraction`` times the final cost of an unconstrained trust-region run."""
    key = json.dumps({
        "env": config_to_dict(config)["environment"],
        "est": config_to_dict(config)["estimator"],
        "tr": config_to_dict(config)["trust_region"],
        "n": [config.calibration_iterations, config.calibration_seed, config.episodes_per_batch, config.horizon],
        "fraction": config.calibration_fraction,
    }, sort_keys=True)
    if key not in _CALIBRATION_CACHE:
        env_cfg = dataclasses.replace(config.environment, threshold=math.inf)
        calib = config.replace(environment=env_cfg, method="trpo", iterations=config.calibration_iterations,
                               seeds=(config.calibration_seed,), output_dir=None)
        result = run_seed(calib, config.calibration_seed, (math.inf,))
        if result.error:
            raise RuntimeError(f"threshold calibration failed: {result.error}")
        final_cost = result.final_cost
        _CALIBRATION_CACHE[key] = float(config.calibration_fraction * final_cost)
        log.info("calibrated threshold %.6g from unconstrained cost %.6g", _CALIBRATION_CACHE[key], final_cost)
    return _CALIBRATION_CACHE[key]


def resolve_threshold(config: ExperimentConfig) -> float:
    if config.environment.threshold is not None:
        return float(config.environment.threshold)
    return calibrate_threshold(config)


# ------------------------------------------------------------ metrics schema
def metric_columns(n_costs: int, n_params: int) -> list[str]:
    def per(name):
        return [f"{name}_{i}" for i in range(n_costs)]

    return (
        ["method", "seed", "iteration", "f", "G", "G_new"]
        + per("g") + per("phi") + per("lambda") + per("intrinsic") + per("gate")
        + ["eta", "g_max", "i_max", "j_hat"] + per("jc_hat")
        + ["exact_j", "exact_j_new"] + per("exact_jc") + per("exact_jc_new")
        + ["kl_predicted", "kl_actual", "step_norm", "cg_residual", "cg_iters", "cg_converged",
           "step_flags", "accepted", "backtracks", "clipped_weights", "value_loss",
           "prop1_lhs", "prop1_rhs", "prop1_holds"]
        + [f"theta_{j}" for j in range(n_params)] + [f"theta_new_{j}" for j in range(n_params)]
    )


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _flatten(record: dict, n_costs: int) -> dict:
    out = {}
    for key, value in record.items():
        if isinstance(value, (list, tuple, np.ndarray)):
            for i, v in enumerate(value):
                out[f"{key}_{i}"] = v
        else:
            out[key] = value
    return out


def write_metrics_csv(path, rows: list[dict], columns: list[str]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "nan")) for c in columns])


def read_metrics_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------- seed runs
@dataclass
class SeedResult:
    seed: int
    rows: list
    columns: list
    final_params: PolicyParams
    initial_eval: dict
    wall_time: float
    error: str | None = None

    @property
    def final_cost(self) -> float:
        if self.rows:
            last = self.rows[-1]
            exact = last.get("exact_jc_new_0", math.nan)
            return float(exact) if not math.isnan(float(exact)) else float(last["jc_hat_0"])
        return float(self.initial_eval.get("exact_jc_0", math.nan))


def _exact(env, params: PolicyParams):
    if not isinstance(env, TabularCmdp):
        return math.nan, [math.nan] * env.n_costs
    res = exact_policy_eval(env, probabilities(params))
    return res.discounted_return, list(res.cost_returns)


def run_seed(config: ExperimentConfig, seed: int, thresholds) -> SeedResult:
    """The training loop for one seed; errors are captured, not raised."""
    threshold = float(thresholds[0])
    env, thresholds = build_environment(config.environment, threshold)
    m = env.n_costs
    thresholds = tuple(thresholds) if len(thresholds) == m else (threshold,) * m
    tabular = isinstance(env, TabularCmdp)
    horizon = env_horizon(env, config)
    estimator = dataclasses.replace(config.estimator, discount=env.discount)
    barrier, intrinsic = method_settings(config)
    n_states = env.n_states if tabular else 0
    n_features = env.n_states if tabular else env.feature_dim

    params = initial_params(env)
    columns = metric_columns(m, params.size)
    values = ValueFits.zeros(n_features, m, n_states)
    maxima = None
    lag = LagrangianState.initial(m, config.lagrangian.initial_lambda, config.lagrangian.lambda_lr,
                                  config.lagrangian.lambda_max)
    j0, jc0 = _exact(env, params)
    initial_eval = {"exact_j": j0, **{f"exact_jc_{i}": v for i, v in enumerate(jc0)}}
    rows: list[dict] = []
    start = time.perf_counter()
    error = None
    try:
        for k in range(config.iterations):
            stream = np.random.SeedSequence([int(seed), COLLECT_STREAM, k])
            batch = collect(env, params, config.episodes_per_batch, horizon, stream)
            estimates = estimate_advantages(batch, values, estimator)
            if config.method == "lagrangian":
                new_params, lag, outcome = lagrangian_update(batch, estimates, params, lag, thresholds,
                                                             config.trust_region)
            else:
                outcome = pcpo_update(batch, estimates, params, thresholds, barrier, intrinsic,
                                      config.trust_region, maxima)
                new_params, maxima = outcome.params, outcome.maxima
            values = fit_values(batch, estimates, estimator, n_states, values)
            j_old, jc_old = _exact(env, params)
            j_new, jc_new = _exact(env, new_params)
            row = _flatten(outcome.record, m)
            row.update({
                "method": config.method, "seed": int(seed), "iteration": k,
                "exact_j": j_old, "exact_j_new": j_new,
                "value_loss": values.reward.loss_history[-1],
            })
            row.update({f"exact_jc_{i}": v for i, v in enumerate(jc_old)})
            row.update({f"exact_jc_new_{i}": v for i, v in enumerate(jc_new)})
            row.update({f"theta_{j}": v for j, v in enumerate(params.theta)})
            row.update({f"theta_new_{j}": v for j, v in enumerate(new_params.theta)})
            rows.append(row)
            params = new_params
    except Exception as exc:  # noqa: BLE001 - the seed aborts, the run goes on
        error = f"{type(exc).__name__}: {exc}"
        log.error("seed %s aborted at iteration %d: %s", seed, len(rows), error)
        log.debug("%s", traceback.format_exc())
    return SeedResult(int(seed), rows, columns, params, initial_eval, time.perf_counter() - start, error)


# ---------------------------------------------------------------- full runs
@dataclass
class RunResult:
    config: ExperimentConfig
    thresholds: tuple
    seeds: list
    summary: dict
    theory: dict = field(default_factory=dict)

    def seed(self, seed: int) -> SeedResult:
        return next(s for s in self.seeds if s.seed == seed)


def violation_trace(result: SeedResult) -> np.ndarray:
    """Per-iteration constraint costs of the policies after each update."""
    if not result.rows:
        return np.zeros((0, 1))
    m = sum(1 for c in result.columns if c.startswith("exact_jc_new_"))
    exact = np.array([[float(r[f"exact_jc_new_{i}"]) for i in range(m)] for r in result.rows])
    if not np.any(np.isnan(exact)):
        return exact
    return np.array([[float(r[f"jc_hat_{i}"]) for i in range(m)] for r in result.rows])


def _seed_summary(result: SeedResult, thresholds) -> dict:
    out = {"seed": result.seed, "iterations": len(result.rows), "wall_time": result.wall_time,
           "status": "failed" if result.error else "ok", "initial": result.initial_eval}
    if result.error:
        out["error"] = result.error
    if result.rows:
        last = result.rows[-1]
        jc = violation_trace(result)
        _, total = cumulative_violation(jc, thresholds)
        out.update({
            "final_exact_j": float(last["exact_j_new"]),
            "final_exact_jc": [float(last[f"exact_jc_new_{i}"]) for i in range(jc.shape[1])],
            "final_j_hat": float(last["j_hat"]),
            "final_jc_hat": [float(last[f"jc_hat_{i}"]) for i in range(jc.shape[1])],
            "cumulative_violation": total,
            "accepted_fraction": float(np.mean([bool(r["accepted"]) for r in result.rows])),
            "prop1_pass_fraction": float(np.mean([bool(r["prop1_holds"]) for r in result.rows])),
        })
    return out


def train(config: ExperimentConfig, threshold: float | None = None) -> RunResult:
    """Train every seed; write CSV/summary/theory files when ``output_dir`` is set."""
    d = resolve_threshold(config) if threshold is None else float(threshold)
    env, thresholds = build_environment(config.environment, d)
    thresholds = tuple(thresholds)
    out_dir = Path(config.output_dir) if config.output_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        save_config(config, out_dir / "config.json")
    barrier, _ = method_settings(config)
    results, theory = [], {}
    for seed in config.seeds:
        res = run_seed(config, seed, thresholds)
        results.append(res)
        report = None
        if isinstance(env, TabularCmdp) and res.rows and config.method != "lagrangian" and barrier.enabled:
            report = theorem_report(env, res.rows, barrier.tau, config.trust_region.delta, barrier.kind.value)
            theory[seed] = report.summary
        if out_dir:
            write_metrics_csv(out_dir / f"seed_{seed}.csv", res.rows, res.columns)
            save_params(res.final_params, out_dir / f"params_seed_{seed}.json")
            if report is not None:
                (out_dir / f"theory_seed_{seed}.json").write_text(
                    json.dumps({"summary": report.summary, "records": report.records}, indent=1))
            marker = out_dir / f"seed_{seed}.FAILED"
            if res.error:
                marker.write_text(res.error + "\n")
            elif marker.exists():
                marker.unlink()
    summary = {
        "method": config.method,
        "environment": config.environment.name,
        "thresholds": list(thresholds),
        "iterations": config.iterations,
        "seeds": [_seed_summary(r, thresholds) for r in results],
        "theory": {str(k): v for k, v in theory.items()},
    }
    if out_dir:
        (out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
    return RunResult(config, thresholds, results, summary, theory)


# ---------------------------------------------------------------- comparison
@dataclass
class ComparisonReport:
    methods: tuple[str, str]
    per_seed: list
    table: str
    runs: tuple
    prop1: dict


def _check_pair(a: ExperimentConfig, b: ExperimentConfig) -> None:
    for name in ("environment", "seeds", "iterations", "episodes_per_batch", "horizon", "estimator",
                 "trust_region"):
        if getattr(a, name) != getattr(b, name):
            raise ConfigError(f"compared arms differ in {name}")


def _mean_curve(run: RunResult, key: str) -> np.ndarray:
    curves = [[float(r[key]) for r in s.rows] for s in run.seeds if s.rows and not s.error]
    if not curves:
        return np.zeros(0)
    n = min(len(c) for c in curves)
    return np.mean([c[:n] for c in curves], axis=0)


def compare(config_a: ExperimentConfig, config_b: ExperimentConfig, output_dir=None) -> ComparisonReport:
    """Paired runs of two methods; cumulative violations per seed and their difference."""
    _check_pair(config_a, config_b)
    d = resolve_threshold(config_a)
    out = Path(output_dir) if output_dir else None
    arms = []
    for cfg in (config_a, config_b):
        sub = str(out / cfg.method) if out else None
        if out and config_a.method == config_b.method:
            sub = str(out / f"{cfg.method}_{len(arms)}")
        arms.append(train(cfg.replace(output_dir=sub), threshold=d))
    run_a, run_b = arms
    per_seed = []
    for sa, sb in zip(run_a.seeds, run_b.seeds):
        _, va = cumulative_violation(violation_trace(sa), run_a.thresholds) if sa.rows else (None, 0.0)
        _, vb = cumulative_violation(violation_trace(sb), run_b.thresholds) if sb.rows else (None, 0.0)
        per_seed.append({"seed": sa.seed, "V_a": va, "V_b": vb, "delta": vb - va,
                         "a_le_b": bool(va <= vb)})
    prop1 = {}
    for run in arms:
        fractions = [s["prop1_pass_fraction"] for s in run.summary["seeds"] if "prop1_pass_fraction" in s]
        prop1[run.config.method] = float(np.mean(fractions)) if fractions else math.nan
    name_a, name_b = config_a.method, config_b.method
    lines = [f"{'seed':>4}  {'V(' + name_a + ')':>18}  {'V(' + name_b + ')':>18}  {'delta':>12}",]
    for rec in per_seed:
        lines.append(f"{rec['seed']:>4}  {rec['V_a']:>18.6g}  {rec['V_b']:>18.6g}  {rec['delta']:>12.6g}")
    wins = sum(r["a_le_b"] for r in per_seed)
    lines.append(f"V({name_a}) <= V({name_b}) on {wins}/{len(per_seed)} seeds")
    for method, frac in prop1.items():
        lines.append(f"intrinsic-enhancement diagnostic pass fraction ({method}): {frac:.3f}")
    table = "\n".join(lines)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.txt").write_text(table + "\n")
        (out / "comparison.json").write_text(json.dumps({"per_seed": per_seed, "prop1": prop1,
                                                         "threshold": d}, indent=2))
        exact = isinstance(build_environment(config_a.environment, d)[0], TabularCmdp)
        r_key, c_key = ("exact_j_new", "exact_jc_new_0") if exact else ("j_hat", "jc_hat_0")
        for key, label, fname in ((r_key, "return", "return.svg"), (c_key, "cost", "cost.svg")):
            series = {run.config.method if name_a != name_b else f"{run.config.method}_{i}": _mean_curve(run, key)
                      for i, run in enumerate(arms)}
            hline = d if label == "cost" else None
            svg.write_line_chart(out / fname, series, title=f"mean {label} per iteration",
                                 xlabel="iteration", ylabel=label, hline=hline)
    return ComparisonReport((name_a, name_b), per_seed, table, (run_a, run_b), prop1)


# --------------------------------------------------------------------- sweep
@dataclass
class SweepReport:
    parameter: str
    rows: list
    table: str


def sweep(base: ExperimentConfig, parameter: str, values, output_dir=None) -> SweepReport:
    if not values:
        raise ConfigError("sweep needs at least one value")
    if parameter not in ("tau", "omega"):
        raise ConfigError("sweep parameter must be tau or omega")
    d = resolve_threshold(base)
    rows = []
    for value in values:
        if parameter == "tau":
            cfg = base.replace(barrier=dataclasses.replace(base.barrier, tau=float(value)))
        else:
            cfg = base.replace(intrinsic=dataclasses.replace(base.intrinsic, omega=float(value)))
        sub = str(Path(output_dir) / f"{parameter}_{value}") if output_dir else None
        run = train(cfg.replace(output_dir=sub), threshold=d)
        ok = [s for s in run.summary["seeds"] if "final_exact_j" in s]
        exact = ok and not math.isnan(ok[0]["final_exact_j"])
        j_key, c_key = ("final_exact_j", "final_exact_jc") if exact else ("final_j_hat", "final_jc_hat")
        rows.append({
            "value": float(value),
            "mean_return": float(np.mean([s[j_key] for s in ok])) if ok else math.nan,
            "mean_cost": float(np.mean([s[c_key][0] for s in ok])) if ok else math.nan,
            "mean_violation": float(np.mean([s["cumulative_violation"] for s in ok])) if ok else math.nan,
        })
    lines = [f"{parameter:>10}  {'return':>12}  {'cost':>12}  {'V(T)':>12}"]
    for r in rows:
        lines.append(f"{r['value']:>10.4g}  {r['mean_return']:>12.6g}  {r['mean_cost']:>12.6g}  "
                     f"{r['mean_violation']:>12.6g}")
    lines.append(f"threshold d = {d:.6g}")
    table = "\n".join(lines)
    if output_dir:
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        (Path(output_dir) / "sweep.txt").write_text(table + "\n")
        (Path(output_dir) / "sweep.json").write_text(json.dumps({"parameter": parameter, "rows": rows,
                                                                 "threshold": d}, indent=2))
    return SweepReport(parameter, rows, table)


# ---------------------------------------------------------------- evaluation
def evaluate_policy(env, params: PolicyParams, seeds, episodes: int, horizon: int) -> dict:
    """Frozen-policy evaluation on ``seeds``; the policy is never modified."""
    theta_before = params.theta.copy()
    per_seed = []
    for seed in seeds:
        stream = np.random.SeedSequence([int(seed), EVAL_STREAM])
        batch = collect(env, params, episodes, horizon, stream)
        per_seed.append({
            "seed": int(seed),
            "return": average_return(batch, batch.discount),
            "costs": [average_cost_return(batch, batch.discount, i) for i in range(batch.n_costs)],
        })
    if not np.array_equal(theta_before, params.theta):
        raise AssertionError("evaluation changed the policy")
    j, jc = _exact(env, params)
    return {
        "per_seed": per_seed,
        "mean_return": float(np.mean([p["return"] for p in per_seed])),
        "mean_costs": np.mean([p["costs"] for p in per_seed], axis=0).tolist(),
        "exact_j": j,
        "exact_jc": jc,
    }


def holdout_evaluation(config: ExperimentConfig, eval_seeds, threshold: float | None = None) -> dict:
    """Train on ``config.seeds``, evaluate each final policy on disjoint ``eval_seeds``."""
    if set(config.seeds) & set(int(s) for s in eval_seeds):
        raise ConfigError("evaluation seeds must be disjoint from training seeds")
    run = train(config, threshold)
    env, _ = build_environment(config.environment, run.thresholds[0])
    horizon = env_horizon(env, config)
    return {
        str(s.seed): evaluate_policy(env, s.final_params, eval_seeds, config.episodes_per_batch, horizon)
        for s in run.seeds if not s.error
    }
