"""``sched`` command line: gen, schedule, bounds, simulate, experiment.

Exit codes: 0 ok, 1 user error (bad arguments or files), 2 infeasible.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bounds import lb_pipelines, tree_bound
from .config import SystemConfig
from .cost_model import InfeasibleError
from .experiment import ALGORITHMS, ExperimentSpec, iter_rows, rows_to_csv, schedule_instance
from .placement import POLICIES, place
from .plan import (TaskTree, WorkloadSpec, expand_plan, gen_workload, workload_from_json,
                   workload_to_json)
from .schedule import Schedule
from .simexec import InfeasibleScheduleError, execute

EXIT_OK, EXIT_USER, EXIT_INFEASIBLE = 0, 1, 2


class UserError(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc.strerror}") from None


def _config(args) -> SystemConfig:
    try:
        cfg = SystemConfig.load(args.config) if args.config else SystemConfig()
    except (OSError, json.JSONDecodeError) as exc:
        raise UserError(f"bad config file {args.config}: {exc}") from None
    overrides = {k: v for k, v in {
        "p_sites": getattr(args, "sites", None), "lam": getattr(args, "lam", None),
        "f": getattr(args, "f", None), "epsilon": getattr(args, "epsilon", None),
        "memory_mb": getattr(args, "memory_mb", None)}.items() if v is not None}
    return cfg.with_(**overrides) if overrides else cfg


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="system config JSON")
    p.add_argument("--sites", type=int, help="number of sites P")
    p.add_argument("--lambda", dest="lam", type=float, help="memory grain bound")
    p.add_argument("--f", type=float, help="communication granularity bound")
    p.add_argument("--epsilon", type=float, help="resource overlap in [0, 1]")
    p.add_argument("--memory-mb", type=float, help="memory per site")


def _load_tree(args, cfg: SystemConfig) -> TaskTree:
    try:
        catalog, plans, homes, _ = workload_from_json(_read(args.workload))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UserError(f"malformed workload {args.workload}: {exc}") from None
    if getattr(args, "placement", None):
        homes = place(args.placement, catalog, cfg.p_sites, args.placement_seed, plans, cfg.hw)
    for name, sites in (homes or {}).items():
        if any(not 0 <= s < cfg.p_sites for s in sites):
            raise UserError(f"relation {name} has home sites outside 0..{cfg.p_sites - 1}")
    return TaskTree.union([expand_plan(p, catalog, cfg, f"q{i}", homes or None)
                           for i, p in enumerate(plans)])


def cmd_gen(args) -> int:
    spec = WorkloadSpec(seed=args.seed, n_queries=args.n_queries, n_joins=args.n_joins,
                        shape=args.shape, mix=args.mix, min_tuples=args.min_tuples,
                        max_tuples=args.max_tuples)
    catalog, plans = gen_workload(spec)
    homes = None
    if args.placement:
        if not args.sites:
            raise UserError("--placement needs --sites")
        homes = place(args.placement, catalog, args.sites, args.seed, plans)
    _write(workload_to_json(catalog, plans, spec, homes), args.out)
    return EXIT_OK


def cmd_schedule(args) -> int:
    cfg = _config(args)
    tree = _load_tree(args, cfg)
    if args.algo == "zsched" and not any(
            c.home is not None for op in tree.operators.values()
            if op.kind.value in ("Scan", "Select") for c in op.clones):
        raise UserError("zsched needs home sites: use --placement or a workload with home_sites")
    sched, _ = schedule_instance(tree, cfg, args.algo)
    _write(sched.to_json(), args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = _config(args)
    tree = _load_tree(args, cfg)
    if args.kind == "tree":
        rep = tree_bound(tree, cfg.p_sites)
    else:
        rep = lb_pipelines(list(tree.pipelines.values()), cfg.p_sites)
    _write(json.dumps(rep.to_dict(), sort_keys=True, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    try:
        sched = Schedule.from_json(_read(args.schedule))
    except json.JSONDecodeError as exc:
        raise UserError(f"malformed schedule {args.schedule}: {exc}") from None
    if sched.n_sites != cfg.p_sites:
        cfg = cfg.with_(p_sites=sched.n_sites)
    trace = execute(sched, cfg)
    _write(trace.to_json(), args.out)
    if args.csv:
        Path(args.csv).write_text(trace.utilization_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        spec = ExperimentSpec.load(args.spec)
    except OSError as exc:
        raise UserError(f"cannot read {args.spec}: {exc.strerror}") from None
    except (json.JSONDecodeError, TypeError) as exc:
        raise UserError(f"malformed experiment spec: {exc}") from None
    progress = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    rows = list(iter_rows(spec, args.wall_time, progress))
    _write(rows_to_csv(rows), args.out)
    if rows and all(r["status"] != "ok" for r in rows):
        print("every instance was infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sched", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a random workload")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-queries", type=int, default=20)
    g.add_argument("--n-joins", type=int, default=20)
    g.add_argument("--shape", choices=("bushy_random", "right_deep"), default="bushy_random")
    g.add_argument("--mix", help='right-deep mix such as "5x8,10x2"')
    g.add_argument("--min-tuples", type=int, default=10_000)
    g.add_argument("--max-tuples", type=int, default=1_000_000)
    g.add_argument("--placement", choices=POLICIES)
    g.add_argument("--sites", type=int, help="sites for --placement")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("schedule", help="schedule a workload")
    s.add_argument("--workload", required=True)
    s.add_argument("--algo", choices=ALGORITHMS, default="treesched")
    s.add_argument("--placement", choices=POLICIES)
    s.add_argument("--placement-seed", type=int, default=0)
    s.add_argument("--out")
    _add_config_flags(s)
    s.set_defaults(func=cmd_schedule)

    b = sub.add_parser("bounds", help="lower bounds for a workload")
    b.add_argument("--workload", required=True)
    b.add_argument("--kind", choices=("tree", "level"), default="tree")
    b.add_argument("--placement", choices=POLICIES)
    b.add_argument("--placement-seed", type=int, default=0)
    b.add_argument("--out")
    _add_config_flags(b)
    b.set_defaults(func=cmd_bounds)

    m = sub.add_parser("simulate", help="replay a schedule")
    m.add_argument("--schedule", required=True)
    m.add_argument("--out")
    m.add_argument("--csv", help="per-site utilization CSV")
    _add_config_flags(m)
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run a parameter sweep")
    e.add_argument("--spec", required=True)
    e.add_argument("--out")
    e.add_argument("--wall-time", action="store_true", help="record scheduler wall time")
    e.add_argument("-v", "--verbose", action="store_true")
    e.set_defaults(func=cmd_experiment)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UserError as exc:
        print(f"sched: {exc}", file=sys.stderr)
        return EXIT_USER
    except (InfeasibleError, InfeasibleScheduleError) as exc:
        print(f"sched: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"sched: {exc}", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
