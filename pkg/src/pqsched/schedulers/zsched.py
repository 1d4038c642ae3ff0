"""Placement-driven baseline.

Every join runs on the sites holding its build input, scans run where their
relation lives, and a materialized result is read back where it was written.
Queries are admitted in submission order while every site still has memory
for all admitted hash tables; otherwise a new level starts. A query too large
for the memory of its fixed sites runs its operators in sequential segments.
"""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..config import SystemConfig
from ..cost_model import InfeasibleError, OpKind
from ..granularity import CloneSplit, split_clones, uniform_weights
from ..plan import DISK_MAT, MEM_MAT, Operator, Pipeline, TaskTree, merged_units
from ..schedule import Assignment, Schedule, make_level
from ..vectors import CAPACITY_TOL, Clone


def _resite(tree: TaskTree, cfg: SystemConfig) -> TaskTree:
    sites: dict[str, list[int]] = {}
    store_of_scan = {dst: src for e in tree.edges if e.kind == DISK_MAT for src, dst in e.pairs}
    build_of_probe = {p: b for e in tree.edges if e.kind == MEM_MAT for b, p in e.pairs}
    ops: dict[str, Operator] = {}
    for pid in tree.topological_order():
        prev = None
        for op in tree.pipelines[pid].operators:
            rec = tree.operators[op]
            homes = [c.home for c in rec.clones]
            if op in store_of_scan:
                here = sites[store_of_scan[op]]
            elif rec.kind in (OpKind.SCAN, OpKind.SELECT):
                if any(h is None for h in homes):
                    raise ValueError(f"{op}: scan has no home sites; apply a placement policy")
                here = homes
            elif rec.kind is OpKind.PROBE:
                here = sites[build_of_probe[op]]
            elif rec.kind is OpKind.STORE and all(h is not None for h in homes):
                here = homes
            else:
                here = sites[prev]
            sites[op] = list(here)
            split = CloneSplit(len(here), uniform_weights(len(here)), cfg.f)
            clones = split_clones(rec.cost, split, cfg.hw, op, cfg.epsilon, lam=1.0,
                                  homes=here)
            ops[op] = Operator(op, rec.kind, rec.cost, split, clones, pid)
            prev = op
    pipes = {pid: Pipeline(pid, tuple(c for o in p.operators for c in ops[o].clones),
                           p.operators, p.query)
             for pid, p in tree.pipelines.items()}
    return TaskTree(pipes, list(tree.edges), ops, tree.epsilon)


def _site_demand(clones, p: int, s: int) -> np.ndarray:
    out = np.zeros((p, s))
    for c in clones:
        out[c.home] += c.demand
    return out


def zsched(tree: TaskTree, cfg: SystemConfig, p: int | None = None) -> Schedule:
    p = p or cfg.p_sites
    units, _ = merged_units(_resite(tree, cfg))
    # submission order: by query, then dependency order inside the query
    queries: dict[str, list] = defaultdict(list)
    for u in units.values():
        queries[u.query].append(u)
    ordered = [u for q in queries for u in queries[q]]

    groups: list[tuple[str, list[Clone], tuple[str, ...], str]] = []
    last_segment: dict[str, str] = {}
    for u in ordered:
        preds = tuple(last_segment[q] for q in u.preds)
        if np.all(_site_demand(u.clones, p, cfg.s) <= 1.0 + CAPACITY_TOL):
            groups.append((u.id, list(u.clones), preds, u.query))
            last_segment[u.id] = u.id
            continue
        by_op: dict[str, list[Clone]] = defaultdict(list)
        for c in u.clones:
            by_op[c.operator_id].append(c)
        segment: list[Clone] = []
        k = 0
        for op, cl in by_op.items():
            if np.any(_site_demand(cl, p, cfg.s) > 1.0 + CAPACITY_TOL):
                raise InfeasibleError(f"{op} exceeds the memory of its home sites")
            if np.any(_site_demand(segment + cl, p, cfg.s) > 1.0 + CAPACITY_TOL):
                gid = f"{u.id}/s{k}"
                groups.append((gid, segment, preds, u.query))
                preds, segment, k = (gid,), [], k + 1
            segment = segment + cl
        gid = f"{u.id}/s{k}"
        groups.append((gid, segment, preds, u.query))
        last_segment[u.id] = gid

    registry = {c.cid: c for _, cl, _, _ in groups for c in cl}
    levels = []
    current: list = []
    used = np.zeros((p, cfg.s))
    t = 0.0

    def close():
        nonlocal t, current, used
        if current:
            lv = make_level(t, [g[0] for g in current],
                            [Assignment(c.cid, c.home) for g in current for c in g[1]], registry)
            levels.append(lv)
            t = lv.end
        current, used = [], np.zeros((p, cfg.s))

    for g in groups:
        need = _site_demand(g[1], p, cfg.s)
        blocked = any(q in {x[0] for x in current} for q in g[2])
        if blocked or np.any(used + need > 1.0 + CAPACITY_TOL):
            close()
        current.append(g)
        used = used + need
    close()
    return Schedule(levels, registry, p, "zsched", {"p": p},
                    groups={g[0]: tuple(c.cid for c in g[1]) for g in groups},
                    deps=[(q, g[0]) for g in groups for q in g[2]],
                    colocate=[a for u in ordered for a in u.anchors],
                    query_of={g[0]: g[3] for g in groups})
