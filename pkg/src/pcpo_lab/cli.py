"""Command line entry point: train, compare, sweep, check, eval, init-config."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from pcpo_lab import harness
from pcpo_lab.checks import SUITES, failed_hard, run_suites
from pcpo_lab.policy import load_params


def _seeds(text: str) -> tuple[int, ...]:
    """``0,1,2`` or a range ``0-4``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty seed list")
    return tuple(out)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _base_config(args) -> harness.ExperimentConfig:
    config = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    changes = {}
    if getattr(args, "method", None):
        changes["method"] = args.method
    if args.seeds is not None:
        changes["seeds"] = args.seeds
    if args.iterations is not None:
        changes["iterations"] = args.iterations
    if args.episodes is not None:
        changes["episodes_per_batch"] = args.episodes
    if getattr(args, "out", None):
        changes["output_dir"] = args.out
    return config.replace(**changes) if changes else config


def _add_run_flags(p: argparse.ArgumentParser, method: bool = True) -> None:
    p.add_argument("--config", help="JSON config file (see init-config)")
    if method:
        p.add_argument("--method", choices=harness.METHODS, help="override the config's method")
    p.add_argument("--seeds", type=_seeds, help="e.g. 0,1,2 or 0-4")
    p.add_argument("--iterations", type=int)
    p.add_argument("--episodes", type=int, help="episodes per batch")
    p.add_argument("--threshold", type=float, help="cost threshold; skips calibration")
    p.add_argument("--out", help="output directory")


def cmd_train(args) -> int:
    config = _base_config(args)
    run = harness.train(config, threshold=args.threshold)
    print(f"method={config.method} thresholds={list(run.thresholds)}")
    for s in run.summary["seeds"]:
        print(json.dumps(s))
    for seed, report in run.theory.items():
        print(f"seed {seed}: update bound holds on {report['holds']}/{report['applicable']} applicable iterations")
    return 1 if any(s.error for s in run.seeds) else 0


def cmd_compare(args) -> int:
    base = _base_config(args)
    a, b = args.methods
    report = harness.compare(base.replace(method=a, output_dir=None),
                             base.replace(method=b, output_dir=None), output_dir=args.out)
    print(report.table)
    return 0


def cmd_sweep(args) -> int:
    base = _base_config(args)
    report = harness.sweep(base.replace(output_dir=None), args.param, args.values, output_dir=args.out)
    print(report.table)
    return 0


def cmd_check(args) -> int:
    results, timings = run_suites(args.suite)
    for r in results:
        print(r.line())
    for name, seconds in timings.items():
        print(f"suite {name}: {seconds:.2f}s")
    bad = failed_hard(results)
    if bad:
        print(f"{len(bad)} hard check(s) failed", file=sys.stderr)
    return 1 if bad else 0


def cmd_eval(args) -> int:
    if args.run:
        run_dir = Path(args.run)
        config = harness.load_config(run_dir / "config.json")
        summary = json.loads((run_dir / "summary.json").read_text())
        threshold = summary["thresholds"][0]
        param_files = sorted(run_dir.glob("params_seed_*.json"))
    else:
        if not args.params:
            raise SystemExit("eval needs --run or --params")
        config = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
        threshold = args.threshold if args.threshold is not None else harness.resolve_threshold(config)
        param_files = [Path(args.params)]
    env, _ = harness.build_environment(config.environment, threshold)
    horizon = harness.env_horizon(env, config)
    episodes = args.episodes or config.episodes_per_batch
    trained_on = set(config.seeds) if args.run else set()
    if trained_on & set(args.seeds):
        raise SystemExit("evaluation seeds overlap the training seeds")
    results = {}
    for path in param_files:
        results[path.stem] = harness.evaluate_policy(env, load_params(path), args.seeds, episodes, horizon)
    print(json.dumps(results, indent=2))
    return 0


def cmd_init_config(args) -> int:
    harness.save_config(harness.ExperimentConfig(), args.path)
    print(f"wrote {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pcpo-lab", description="Barrier-based constrained policy optimization toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one method over a seed list")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="paired run of two methods")
    _add_run_flags(p, method=False)
    p.add_argument("--methods", nargs=2, choices=harness.METHODS, default=["pcpo", "lagrangian"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="train once per value of tau or omega")
    _add_run_flags(p)
    p.add_argument("--param", choices=("tau", "omega"), required=True)
    p.add_argument("--values", type=_floats, required=True, help="comma separated")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="run invariant suites")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("eval", help="evaluate frozen policies on held-out seeds")
    p.add_argument("--run", help="run directory written by train")
    p.add_argument("--params", help="single params JSON file")
    p.add_argument("--config", help="config for --params")
    p.add_argument("--threshold", type=float)
    p.add_argument("--seeds", type=_seeds, default=tuple(range(100, 110)))
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("init-config", help="write the default config as JSON")
    p.add_argument("path")
    p.set_defaults(func=cmd_init_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
