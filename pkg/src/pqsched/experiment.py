"""Parameter sweeps producing one tidy CSV row per scheduled instance."""
from __future__ import annotations

import csv
import io
import itertools
import json
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

from .bounds import BoundsReport, lb_pipelines, perf_ratio, tree_bound
from .config import SystemConfig
from .cost_model import InfeasibleError
from .placement import place
from .plan import TaskTree, WorkloadSpec, expand_plan, gen_workload
from .schedulers import hier_sched, level_sched, tree_sched, zsched

ALGORITHMS = ("treesched", "levelsched", "hier", "zsched")

COLUMNS = ["rep", "query", "P", "memory_mb", "lambda", "f", "epsilon", "algo", "status",
           "response_ms", "lb_ms", "ratio", "dominant_term", "t_max", "avg_work",
           "avg_volume", "crit_path", "wall_ms"]


@dataclass(frozen=True)
class ExperimentSpec:
    workload: dict
    sites: tuple[int, ...] = (10,)
    memory_mb: tuple[float, ...] = (64.0,)
    lambdas: tuple[float, ...] = (0.2,)
    fs: tuple[float, ...] = (0.6,)
    epsilons: tuple[float, ...] = (0.5,)
    algorithms: tuple[str, ...] = ("treesched",)
    placement: str | None = None
    repetitions: int = 1
    seed: int = 0
    unit: str = "query"
    config: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("sites", "memory_mb", "lambdas", "fs", "epsilons", "algorithms"):
            if not getattr(self, name):
                raise ValueError(f"experiment axis {name!r} is empty")
        bad = set(self.algorithms) - set(ALGORITHMS)
        if bad:
            raise ValueError(f"unknown algorithms {sorted(bad)}; choose from {ALGORITHMS}")
        if self.unit not in ("query", "workload"):
            raise ValueError("unit must be 'query' or 'workload'")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if "zsched" in self.algorithms and not self.placement:
            raise ValueError("zsched needs a placement policy")

    @classmethod
    def from_dict(cls, doc: dict) -> ExperimentSpec:
        doc = dict(doc)
        if "workload" not in doc:
            raise ValueError("experiment spec needs a 'workload' section")
        for k in ("sites", "memory_mb", "lambdas", "fs", "epsilons", "algorithms"):
            if k in doc:
                v = doc[k]
                doc[k] = tuple(v) if isinstance(v, (list, tuple)) else (v,)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment keys {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> ExperimentSpec:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def schedule_instance(tree: TaskTree, cfg: SystemConfig, algo: str):
    """Run one algorithm; returns ``(schedule, bounds)``."""
    p = cfg.p_sites
    if algo == "treesched":
        return tree_sched(tree, p, cfg.lam, cfg.s), tree_bound(tree, p)
    if algo == "levelsched":
        pipes = list(tree.pipelines.values())
        return level_sched(pipes, p, cfg.lam, cfg.s), lb_pipelines(pipes, p)
    if algo == "hier":
        return hier_sched(tree, cfg), tree_bound(tree, p)
    if algo == "zsched":
        return zsched(tree, cfg), tree_bound(tree, p)
    raise ValueError(f"unknown algorithm {algo}")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def iter_rows(spec: ExperimentSpec, wall_time: bool = False,
              progress: Callable[[str], None] | None = None) -> Iterator[dict]:
    base = SystemConfig.from_dict(spec.config) if spec.config else SystemConfig()
    for rep in range(spec.repetitions):
        wspec = WorkloadSpec.from_dict({**spec.workload, "seed": spec.seed * 1000 + rep})
        catalog, plans = gen_workload(wspec)
        for p, mb, lam, f, eps in itertools.product(spec.sites, spec.memory_mb, spec.lambdas,
                                                    spec.fs, spec.epsilons):
            cfg = base.with_(p_sites=p, memory_mb=mb, lam=lam, f=f, epsilon=eps)
            homes = None
            if spec.placement:
                homes = place(spec.placement, catalog, p, seed=spec.seed * 1000 + rep,
                              plans=plans, hw=cfg.hw)
            if progress:
                progress(f"rep={rep} P={p} mem={mb} lambda={lam} f={f} eps={eps}")
            yield from _cell(rep, catalog, plans, homes, cfg, mb, spec, wall_time)


def _cell(rep, catalog, plans, homes, cfg, mb, spec, wall_time):
    prefix = {"rep": rep, "P": cfg.p_sites, "memory_mb": mb, "lambda": cfg.lam,
              "f": cfg.f, "epsilon": cfg.epsilon}
    trees: list[tuple[str, TaskTree | Exception]] = []
    for i, plan in enumerate(plans):
        try:
            trees.append((f"q{i}", expand_plan(plan, catalog, cfg, f"q{i}", homes)))
        except InfeasibleError as exc:
            trees.append((f"q{i}", exc))
    if spec.unit == "workload":
        bad = next((t for _, t in trees if isinstance(t, Exception)), None)
        trees = [("all", bad if bad else TaskTree.union([t for _, t in trees]))]
    for name, tree in trees:
        for algo in spec.algorithms:
            row = {**prefix, "query": name, "algo": algo}
            if isinstance(tree, Exception):
                yield {**row, "status": "infeasible"}
                continue
            t0 = time.perf_counter()
            try:
                sched, rep_b = schedule_instance(tree, cfg, algo)
            except InfeasibleError:
                yield {**row, "status": "infeasible"}
                continue
            wall = (time.perf_counter() - t0) * 1000.0
            yield {**row, **_result(sched.response_time, rep_b),
                   "wall_ms": wall if wall_time else None}


def _result(response: float, b: BoundsReport) -> dict:
    return {"status": "ok", "response_ms": response, "lb_ms": b.lb,
            "ratio": perf_ratio(response, b), "dominant_term": b.dominant_term,
            "t_max": b.t_max, "avg_work": b.avg_work, "avg_volume": b.avg_volume,
            "crit_path": b.crit_path}


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in COLUMNS])
    return buf.getvalue()


def run_experiment(spec: ExperimentSpec, wall_time: bool = False, progress=None) -> list[dict]:
    return list(iter_rows(spec, wall_time, progress))
