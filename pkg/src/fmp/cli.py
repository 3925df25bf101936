"""``bench`` command line: ``run``, ``bounds`` and ``plan`` subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path


from .bench import bounds_report, format_csv, load_config, run_experiment, summary_line
from .discretization import EpsilonSchedule
from .errors import FmpError
from .model import as_belief, uniform_belief
from .planner import PlanConfig, plan
from .pomdp_io import load_pomdp_file
from .spaces import SamplingConfig, TabularSpace


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config, parallel=args.parallel)
    text = format_csv(result, timings=args.timings)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(summary_line(result), file=sys.stderr)
    for index, msg in result.failures:
        print(f"episode {index} aborted: {msg}", file=sys.stderr)
    return 1 if result.failures else 0


def _cmd_bounds(args) -> int:
    sys.stdout.write(bounds_report(args.eps_v, args.gamma, args.rmax, args.dim))
    return 0


def _cmd_plan(args) -> int:
    model = load_pomdp_file(args.model)
    space = TabularSpace(model)
    if args.belief == "uniform":
        belief = uniform_belief(model.num_states)
    else:
        belief = as_belief(_floats(args.belief), model.num_states)
    eps = _floats(args.eps)
    schedule = EpsilonSchedule(eps if len(eps) > 1 else eps * (args.horizon + 1))
    config = PlanConfig(schedule=schedule, horizon=args.horizon, leaf_value=args.leaf,
                        sampling=SamplingConfig(args.mode, args.samples, args.seed))
    res = plan(space, belief, config)
    print(f"action = {res.action}")
    print(f"value = {res.value:.10g}")
    print("depth  nodes  edges  eps       log10|A(eps)|")
    for s in res.stats:
        print(f"{s.depth:5d}  {s.nodes:5d}  {s.edges:5d}  {s.eps:<8.4g}  {s.log10_cells:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bench", description="Finite memory planner benchmarks")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a seeded multi-episode experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--parallel", type=int, default=None, help="worker processes")
    r.add_argument("--out", help="CSV output path (default stdout)")
    r.add_argument("--timings", action="store_true", help="fill the mean_plan_ms column")
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bounds", help="tree height, schedule and memory bounds")
    b.add_argument("--eps-v", type=float, required=True)
    b.add_argument("--gamma", type=float, required=True)
    b.add_argument("--rmax", type=float, required=True)
    b.add_argument("--dim", type=int, nargs="+", required=True)
    b.set_defaults(func=_cmd_bounds)

    q = sub.add_parser("plan", help="one planning decision on a .pomdp model")
    q.add_argument("--model", required=True)
    q.add_argument("--belief", default="uniform", help="'uniform' or a comma list")
    q.add_argument("--horizon", type=int, required=True)
    q.add_argument("--eps", default="0.2", help="one resolution or a comma list per depth")
    q.add_argument("--leaf", type=float, default=0.0)
    q.add_argument("--mode", choices=("exact", "sample"), default="exact")
    q.add_argument("--samples", type=int, default=8)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=_cmd_plan)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FmpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
