"""One-dimensional processor-allotment baseline.

Each memory-merged unit becomes one rigid parallel job. Inside a job every
join (a fused Build/Probe plus the scans and stores feeding or draining it)
gets its own processors; joins never share a processor. Scans of relations
with home sites stay there, so a job also claims its scans' home sites. Allotments start at
the fewest processors that keep each hash table in memory. At every step the
jobs are list scheduled with scalar times (the sum of work components), and
the job with the most idle processor time during its run gives one more
processor to its slowest join. The best allotment seen is kept and finally
laid out with the multi-resource clone times.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from ..config import SystemConfig
from ..cost_model import InfeasibleError, OpKind
from ..granularity import CloneSplit, split_clones, uniform_weights
from ..plan import MEM_MAT, TaskTree, merged_units
from ..schedule import Assignment, Schedule, make_level
from ..vectors import CAPACITY_TOL, Clone, seq_time

_EPS = 1e-12


@dataclass
class _Component:
    key: str
    ops: list[str]
    fused: tuple[str, str] | None  # (build op, probe op) sharing one hash table
    min_n: int
    _cache: dict = field(default_factory=dict)


@dataclass
class _Job:
    id: str
    query: str
    comps: list[_Component]
    preds: tuple[str, ...]
    alloc: list[int] = field(default_factory=list)
    fixed: dict[int, list[Clone]] = field(default_factory=dict)

    @property
    def procs(self) -> int:
        return sum(self.alloc)


def _components(tree: TaskTree, members: tuple[str, ...],
                fuse: dict[str, str]) -> list[tuple[list[str], tuple[str, str] | None]]:
    probes_of = {b: p for b, p in fuse.items()}
    comps: dict[str, list[str]] = {}
    order: list[str] = []
    for pid in members:
        ops = list(tree.pipelines[pid].operators)
        if not ops or any(o not in tree.operators for o in ops):
            raise ValueError(f"pipeline {pid} lacks operator records; expand a plan first")
        builds = [o for o in ops if o in probes_of]
        probes = [o for o in ops if tree.operators[o].kind is OpKind.PROBE]
        if builds:
            key = probes_of[builds[-1]]
            comps.setdefault(key, [])
            comps[key].extend(ops)
            if key not in order:
                order.append(key)
            continue
        current = next((o for o in ops if tree.operators[o].kind is OpKind.PROBE), None)
        key = current or pid
        for o in ops:
            if o in probes:
                key = o
            comps.setdefault(key, [])
            if o not in comps[key]:
                comps[key].append(o)
            if key not in order:
                order.append(key)
    fused_by_probe = {p: (b, p) for b, p in fuse.items()}
    return [(comps[k], fused_by_probe.get(k)) for k in order]


def _per_site(tree: TaskTree, comp: _Component, n: int, cfg: SystemConfig) -> list[Clone]:
    """The component split ``n`` ways, one combined clone per processor."""
    if n in comp._cache:
        return comp._cache[n]
    split = CloneSplit(n, uniform_weights(n), cfg.f)
    work = [[0.0, 0.0, 0.0] for _ in range(n)]
    demand = [[0.0] * cfg.s for _ in range(n)]
    fused_demand = None
    for op in comp.ops:
        rec = tree.operators[op]
        parts = split_clones(rec.cost, split, cfg.hw, op, cfg.epsilon, lam=math.inf)
        for k, c in enumerate(parts):
            for d, x in enumerate(c.work):
                work[k][d] += x
            if comp.fused is None or op not in comp.fused:
                for d, x in enumerate(c.demand):
                    demand[k][d] += x
        if comp.fused and op in comp.fused:
            dem = [c.demand for c in parts]
            fused_demand = dem if fused_demand is None else [
                tuple(max(a, b) for a, b in zip(x, y)) for x, y in zip(fused_demand, dem)]
    if fused_demand is not None:
        for k in range(n):
            for d in range(cfg.s):
                demand[k][d] += fused_demand[k][d]
    clones = [Clone(f"hier.{comp.key}", k, tuple(w), tuple(v), seq_time(w, cfg.epsilon))
              for k, (w, v) in enumerate(zip(work, demand))]
    comp._cache[n] = clones
    return clones


def _scalar_time(tree, comp, n, cfg) -> float:
    return max(sum(c.work) for c in _per_site(tree, comp, n, cfg))


def _fixed_times(job: _Job, scalar: bool, cfg: SystemConfig) -> dict[int, float]:
    """Per home site, the time its rooted scans need."""
    out: dict[int, float] = {}
    for site, clones in job.fixed.items():
        if scalar:
            out[site] = sum(sum(c.work) for c in clones)
        else:
            out[site] = max(max(c.seq_time for c in clones),
                            max(map(sum, zip(*(c.work for c in clones)))))
    return out


def _list_schedule(jobs: list[_Job], times: dict[str, float], p: int):
    """Greedy list schedule on concrete sites.

    A job starts once its predecessors are done, its home sites are free and
    enough other sites are free for its joins. Returns start times, the site
    sets, the makespan and each job's idle site-time while it runs.
    """
    done: set[str] = set()
    start: dict[str, float] = {}
    end: dict[str, float] = {}
    taken: dict[str, list[int]] = {}
    free = set(range(p))
    running: list[tuple[float, int, str]] = []
    t = 0.0
    pending = sorted(jobs, key=lambda j: -times[j.id])
    seq = 0
    while pending or running:
        for j in list(pending):
            if not all(q in done for q in j.preds):
                continue
            homes = set(j.fixed)
            others = sorted(free - homes)
            if homes <= free and len(others) >= j.procs:
                sites = sorted(homes) + others[:j.procs]
                start[j.id], end[j.id] = t, t + times[j.id]
                taken[j.id] = sites
                free -= set(sites)
                heapq.heappush(running, (end[j.id], seq, j.id))
                seq += 1
                pending.remove(j)
        if not running:
            raise InfeasibleError("a job needs more sites than the system has")
        t = running[0][0]
        while running and running[0][0] <= t + _EPS:
            _, _, jid = heapq.heappop(running)
            done.add(jid)
            free |= set(taken[jid])
    makespan = max(end.values(), default=0.0)
    events = sorted({0.0, makespan, *start.values(), *end.values()})
    idle = []
    for a, b in zip(events, events[1:]):
        used = sum(len(taken[j.id]) for j in jobs
                   if start[j.id] <= a + _EPS and end[j.id] >= b - _EPS)
        idle.append((a, b, p - used))
    waste = {j.id: sum((b - a) * n for a, b, n in idle
                       if a >= start[j.id] - _EPS and b <= end[j.id] + _EPS) for j in jobs}
    return start, taken, makespan, waste


def hier_sched(tree: TaskTree, cfg: SystemConfig, p: int | None = None,
               max_steps: int | None = None) -> Schedule:
    p = p or cfg.p_sites
    units, _ = merged_units(tree)
    fuse = {b: pr for e in tree.edges if e.kind == MEM_MAT for b, pr in e.pairs}
    jobs: list[_Job] = []
    for u in units.values():
        fixed: dict[int, list[Clone]] = {}
        comps = []
        for ops, fused in _components(tree, u.pipelines, fuse):
            flexible = []
            for op in ops:
                rec = tree.operators[op]
                if rec.kind in (OpKind.SCAN, OpKind.SELECT) and all(
                        c.home is not None for c in rec.clones):
                    for c in rec.clones:
                        fixed.setdefault(c.home, []).append(c)
                else:
                    flexible.append(op)
            if not flexible:
                continue
            need = 0.0
            for op in flexible:
                if not (fused and op in fused):
                    need += max(tree.operators[op].cost.total_demand)
            if fused:
                need += max(max(tree.operators[o].cost.total_demand[i] for o in fused)
                            for i in range(cfg.s))
            comps.append(_Component(flexible[-1] if fused is None else fused[1], flexible,
                                    fused, max(1, math.ceil(need - CAPACITY_TOL))))
        job = _Job(u.id, u.query, comps, u.preds, fixed=fixed)
        job.alloc = [c.min_n for c in comps]
        if job.procs + len(fixed) > p:
            raise InfeasibleError(f"unit {u.id} needs {job.procs + len(fixed)} sites to "
                                  f"stay in memory, system has {p}")
        jobs.append(job)

    def scalar_times():
        out = {}
        for j in jobs:
            ts = [_scalar_time(tree, c, n, cfg) for c, n in zip(j.comps, j.alloc)]
            ts += list(_fixed_times(j, True, cfg).values())
            out[j.id] = max(ts, default=0.0)
        return out

    best_alloc = {j.id: list(j.alloc) for j in jobs}
    best = math.inf
    limit = max_steps if max_steps is not None else len(jobs) * p
    for _ in range(limit + 1):
        _, _, makespan, waste = _list_schedule(jobs, scalar_times(), p)
        if makespan < best - _EPS:
            best = makespan
            best_alloc = {j.id: list(j.alloc) for j in jobs}
        growable = [j for j in jobs
                    if j.comps and j.procs + len(j.fixed) < p and waste[j.id] > _EPS]
        if not growable:
            break
        job = max(growable, key=lambda j: waste[j.id])
        times = [_scalar_time(tree, c, n, cfg) for c, n in zip(job.comps, job.alloc)]
        k = max(range(len(times)), key=lambda i: times[i])
        job.alloc[k] += 1

    for j in jobs:
        j.alloc = best_alloc[j.id]
    return _layout(tree, jobs, cfg, p, best)


def _layout(tree, jobs: list[_Job], cfg: SystemConfig, p: int, best_scalar: float) -> Schedule:
    """Lay the chosen allotment out with multi-resource times."""
    flex = {j.id: [c for comp, n in zip(j.comps, j.alloc)
                   for c in _per_site(tree, comp, n, cfg)] for j in jobs}
    registry: dict[str, Clone] = {}
    for j in jobs:
        for c in flex[j.id]:
            registry[c.cid] = c
        for clones in j.fixed.values():
            for c in clones:
                registry[c.cid] = c
    times = {}
    for j in jobs:
        ts = [c.seq_time for c in flex[j.id]] + list(_fixed_times(j, False, cfg).values())
        times[j.id] = max(ts, default=0.0)
    start, taken, _, _ = _list_schedule(jobs, times, p)
    levels = []
    for j in jobs:
        homes = sorted(j.fixed)
        others = [s for s in taken[j.id] if s not in j.fixed]
        assignments = [Assignment(c.cid, s) for s in homes for c in j.fixed[s]]
        assignments += [Assignment(c.cid, s) for c, s in zip(flex[j.id], others)]
        levels.append(make_level(start[j.id], [j.id], assignments, registry))
    levels.sort(key=lambda lv: (lv.start, lv.pipes))
    return Schedule(levels, registry, p, "hier",
                    {"p": p, "allotment": {j.id: j.alloc for j in jobs},
                     "scalar_makespan": best_scalar},
                    groups={j.id: tuple(c.cid for c in flex[j.id])
                            + tuple(c.cid for cl in j.fixed.values() for c in cl) for j in jobs},
                    deps=[(q, j.id) for j in jobs for q in j.preds],
                    query_of={j.id: j.query for j in jobs if j.query})
