"""Command line interface: gen / run / oracle / describe."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import harness, oracle
from .harness import (
    ExperimentSpec,
    MallGenParams,
    NurseGenParams,
    default_mall_suite,
    default_nurse_suite,
    emit,
    emit_pivot,
    generate_mall_instance,
    generate_nurse_instance,
    load_instances,
    run_experiment,
    zero_seconds,
)
from .mall import full_rent, write_mall_instance
from .nurse import full_fitness, write_nurse_instance
from .partnering import STRATEGIES
from .pyramid import describe

ENGINE_FLAGS = {
    "uniform_p": "uniform_inherit_prob",
    "mutation_rate": "mutation_rate",
    "replacement_fraction": "replacement_fraction",
    "stagnation_window": "stagnation_window",
    "cross_level_fraction": "cross_level_fraction",
    "max_generations": "max_generations",
    "elitist_pool": "elitist_pool",
}


def _add_run_flags(sub: argparse.ArgumentParser):
    sub.add_argument("--problem", choices=("nurse", "mall", "both"), default="both")
    sub.add_argument("--instances", nargs="*", default=None, help="instance files or directories")
    sub.add_argument(
        "--strategy",
        default="RR",
        help=f"comma-separated subset of {','.join(STRATEGIES)},SGA",
    )
    sub.add_argument("--runs", type=int, default=20)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--hillclimber", choices=("on", "off"), default="off")
    sub.add_argument("--jobs", type=int, default=1)
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--out", default="results.csv")
    sub.add_argument("--pivot", action="store_true", help="emit the strategy pivot table instead")
    sub.add_argument("--instance-count", type=int, default=10)
    sub.add_argument("--wall-time", action="store_true", help="keep real timings (not reproducible)")
    sub.add_argument("--penalty-beta", type=float, default=1.1)
    sub.add_argument("--penalty-w0-scale", type=float, default=1.0)
    sub.add_argument("--uniform-p", type=float, default=None)
    sub.add_argument("--mutation-rate", type=float, default=None)
    sub.add_argument("--replacement-fraction", type=float, default=None)
    sub.add_argument("--stagnation-window", type=int, default=None)
    sub.add_argument("--cross-level-fraction", type=float, default=None)
    sub.add_argument("--max-generations", type=int, default=None)
    sub.add_argument("--elitist-pool", action="store_const", const=True, default=None)
    sub.add_argument("--config", default=None, help="key=value file; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyramidga",
        description="Pyramidal coevolutionary GA benchmark for nurse scheduling and mall tenancy",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate instance files")
    gen.add_argument("--problem", choices=("nurse", "mall"), required=True)
    gen.add_argument("--count", type=int, default=10)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="instances")
    gen.add_argument("--tier", choices=("loose", "medium", "tight"), default=None)
    gen.add_argument("--nurses", type=int, default=NurseGenParams.n)
    gen.add_argument("--day-patterns", type=int, default=NurseGenParams.day_patterns)
    gen.add_argument("--night-patterns", type=int, default=NurseGenParams.night_patterns)
    gen.add_argument("--types-min", type=int, default=MallGenParams.types_min)
    gen.add_argument("--types-max", type=int, default=MallGenParams.types_max)

    run = subs.add_parser("run", help="run the benchmark protocol")
    _add_run_flags(run)

    orc = subs.add_parser("oracle", help="verify fitness implementations on one instance")
    orc.add_argument("--problem", choices=("nurse", "mall"), required=True)
    orc.add_argument("--instance", required=True)
    orc.add_argument("--assignments", type=int, default=1000)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--w", type=float, default=10.0)
    orc.add_argument("--brute-force", action="store_true")

    dsc = subs.add_parser("describe", help="print the pyramid level table")
    dsc.add_argument("--problem", choices=("nurse", "mall"), required=True)
    dsc.add_argument("--instance", default=None)
    return parser


def _apply_config_file(args: argparse.Namespace, parser_defaults: dict):
    """Fill unset values from a key=value file; explicit CLI flags stay."""
    if not args.config:
        return
    for line in Path(args.config).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        dest = key.strip().replace("-", "_")
        if not hasattr(args, dest):
            raise SystemExit(f"unknown config key {key.strip()!r}")
        if getattr(args, dest) != parser_defaults.get(dest):
            continue  # explicitly set on the command line
        current = parser_defaults.get(dest)
        value = value.strip()
        if dest in ("hillclimber", "strategy", "problem", "format", "out", "config"):
            setattr(args, dest, value)
        elif isinstance(current, bool) or dest in ("pivot", "wall_time", "elitist_pool"):
            setattr(args, dest, value.lower() in ("1", "true", "on", "yes"))
        elif dest in ("instances",):
            setattr(args, dest, value.split(","))
        else:
            setattr(args, dest, type(current)(value) if current is not None else float(value))


def _cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.problem == "nurse":
        instances = default_nurse_suite(
            args.count,
            args.seed,
            tier=args.tier,
            n=args.nurses,
            day_patterns=args.day_patterns,
            night_patterns=args.night_patterns,
        )
        for inst in instances:
            write_nurse_instance(inst, out / f"{inst.name}.txt")
    else:
        instances = default_mall_suite(
            args.count, args.seed, tier=args.tier, types_min=args.types_min, types_max=args.types_max
        )
        for inst in instances:
            write_mall_instance(inst, out / f"{inst.name}.txt")
    for inst in instances:
        print(out / f"{inst.name}.txt")
    return 0


def _engine_overrides(args) -> dict:
    overrides = {}
    for flag, field in ENGINE_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    return overrides


def _cmd_run(args) -> int:
    strategies = [s.strip() for s in args.strategy.split(",") if s.strip()]
    for s in strategies:
        if s not in STRATEGIES and s != harness.SGA:
            raise SystemExit(f"unknown strategy {s!r}")
    problems = ("nurse", "mall") if args.problem == "both" else (args.problem,)
    if args.instances and args.problem == "both":
        raise SystemExit("--instances requires --problem nurse or --problem mall")
    overrides = _engine_overrides(args)
    all_rows = []
    for problem in problems:
        if args.instances:
            instances = load_instances(problem, args.instances)
        elif problem == "nurse":
            instances = default_nurse_suite(args.instance_count, args.seed)
        else:
            instances = default_mall_suite(args.instance_count, args.seed)
        spec = ExperimentSpec(
            problem=problem,
            instances=instances,
            strategies=strategies,
            runs_per_instance=args.runs,
            base_seed=args.seed,
            hillclimber=args.hillclimber == "on",
            jobs=args.jobs,
            config_overrides=overrides,
            penalty_beta=args.penalty_beta,
            penalty_w0_scale=args.penalty_w0_scale,
        )
        all_rows.extend(run_experiment(spec))
    if not args.wall_time:
        all_rows = zero_seconds(all_rows)
    if args.pivot:
        emit_pivot(all_rows, args.format, args.out)
    else:
        emit(all_rows, args.format, args.out)
    print(args.out)
    return 0


def _cmd_oracle(args) -> int:
    rng = np.random.default_rng(args.seed)
    ok = True
    if args.problem == "nurse":
        inst = harness.read_nurse_instance(args.instance)
        for _ in range(args.assignments):
            assignment = oracle.random_nurse_assignment(inst, rng)
            ours = full_fitness(inst, assignment, args.w).total
            theirs = oracle.recompute_fitness(inst, assignment, args.w)
            if ours != theirs:
                ok = False
                print(f"MISMATCH assignment={assignment} ours={ours} oracle={theirs}")
                break
        print(f"fitness identity over {args.assignments} assignments: {'ok' if ok else 'FAILED'}")
        if args.brute_force:
            res = oracle.brute_force_nurse(inst, args.w)
            print(f"optimum penalised={res.best_penalised} assignment={res.best_assignment}")
            print(f"best feasible cost={res.best_feasible_cost}")
    else:
        inst = harness.read_mall_instance(args.instance)
        for _ in range(args.assignments):
            layout = oracle.random_mall_layout(inst, rng)
            ours = full_rent(inst, layout, args.w)
            rent, violation, feasible = oracle.recompute_rent(inst, layout, args.w)
            if (ours.rent, ours.violation, ours.feasible) != (rent, violation, feasible):
                ok = False
                print(f"MISMATCH layout={layout} ours={ours.rent} oracle={rent}")
                break
        print(f"rent identity over {args.assignments} layouts: {'ok' if ok else 'FAILED'}")
        if args.brute_force:
            res = oracle.brute_force_mall(inst, args.w)
            print(f"optimum rent={res.best_rent} feasible={res.best_is_feasible}")
    return 0 if ok else 1


def _cmd_describe(args) -> int:
    if args.instance:
        instances = load_instances(args.problem, [args.instance])
        inst = instances[0]
    elif args.problem == "nurse":
        inst = generate_nurse_instance(NurseGenParams(), 0)
    else:
        inst = generate_mall_instance(MallGenParams(), 0)
    _, topo = harness.build_problem(args.problem, inst, "RR")
    print(f"instance: {inst.name}")
    print(describe(topo))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        defaults = {a.dest: a.default for a in parser._subparsers._group_actions[0].choices["run"]._actions}
        _apply_config_file(args, defaults)
    if args.command == "gen":
        return _cmd_gen(args)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "oracle":
        return _cmd_oracle(args)
    return _cmd_describe(args)


if __name__ == "__main__":
    sys.exit(main())
