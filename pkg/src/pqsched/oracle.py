"""Exact optimum for tiny instances, by exhaustive search.

Independent clones: every site runs a sequence of compatible subsets, so the
best cost of a clone set on one site is its cheapest partition into
compatible blocks; the optimum is the best split of all clones over the
sites. Pipelines: all clones of a pipeline run in the same level, each site
runs its share of a level as one compatible set, and levels run back to back.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .plan import Pipeline
from .vectors import Clone, is_compatible, subset_exec_time


@dataclass(frozen=True)
class OracleLimits:
    max_clones: int = 8
    max_sites: int = 3
    max_levels: int = 3


class InstanceTooLarge(ValueError):
    pass


def _check(n_clones: int, p: int, limits: OracleLimits) -> None:
    if n_clones > limits.max_clones:
        raise InstanceTooLarge(f"{n_clones} clones exceeds oracle limit {limits.max_clones}")
    if not 1 <= p <= limits.max_sites:
        raise InstanceTooLarge(f"{p} sites outside oracle limit 1..{limits.max_sites}")


def _submasks(mask: int):
    sub = mask
    while sub:
        yield sub
        sub = (sub - 1) & mask
    yield 0


def oracle_independent(clones: Sequence[Clone], p: int,
                       limits: OracleLimits = OracleLimits()) -> float:
    clones = list(clones)
    n = len(clones)
    _check(n, p, limits)
    if n == 0:
        return 0.0
    full = (1 << n) - 1
    members = [[clones[i] for i in range(n) if m >> i & 1] for m in range(full + 1)]
    block = [subset_exec_time(ms) if ms and is_compatible(ms) else None for ms in members]

    @lru_cache(maxsize=None)
    def best(mask: int) -> float:
        if mask == 0:
            return 0.0
        low = mask & -mask
        out = float("inf")
        for sub in _submasks(mask ^ low):
            b = sub | low
            if block[b] is not None:
                out = min(out, block[b] + best(mask ^ b))
        return out

    def split(mask: int, sites: int) -> float:
        if sites == 1:
            return best(mask)
        out = float("inf")
        for sub in _submasks(mask):
            here = best(sub)
            if here >= out:
                continue
            out = min(out, max(here, split(mask ^ sub, sites - 1)))
        return out

    return split(full, p)


def _one_level(clones: list[Clone], p: int) -> float:
    """Best single-level placement: one compatible set per site."""
    n = len(clones)
    best = float("inf")
    # sites are interchangeable: clone i may only open site index <= max used + 1
    def rec(i: int, loads: list[list[Clone]], worst: float):
        nonlocal best
        if worst >= best:
            return
        if i == n:
            best = worst
            return
        c = clones[i]
        opened = sum(1 for l in loads if l)
        for s in range(min(p, opened + 1)):
            if c.home is not None and c.home != s:
                continue
            trial = loads[s] + [c]
            if not is_compatible(trial):
                continue
            old = loads[s]
            loads[s] = trial
            rec(i + 1, loads, max(worst, subset_exec_time(trial)))
            loads[s] = old

    if any(c.home is not None for c in clones):
        # rooted clones break site symmetry; fall back to plain enumeration
        for sites in itertools.product(range(p), repeat=n):
            if any(c.home is not None and c.home != s for c, s in zip(clones, sites)):
                continue
            groups = [[c for c, s in zip(clones, sites) if s == k] for k in range(p)]
            if all(is_compatible(g) for g in groups):
                best = min(best, max(subset_exec_time(g) for g in groups))
        return best
    rec(0, [[] for _ in range(p)], 0.0)
    return best


def _set_partitions(items: list[int]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def oracle_pipelines(pipes: Sequence[Pipeline], p: int,
                     limits: OracleLimits = OracleLimits()) -> float:
    pipes = list(pipes)
    _check(sum(len(pp.clones) for pp in pipes), p, limits)
    if not pipes:
        return 0.0
    level_cost: dict[frozenset, float] = {}
    best = float("inf")
    for part in _set_partitions(list(range(len(pipes)))):
        if len(part) > limits.max_levels:
            continue
        total = 0.0
        for blk in part:
            key = frozenset(blk)
            if key not in level_cost:
                level_cost[key] = _one_level([c for i in blk for c in pipes[i].clones], p)
            total += level_cost[key]
        best = min(best, total)
    if best == float("inf"):
        raise ValueError("no feasible placement within the oracle's limits")
    return best


def oracle_opt(instance, p: int, limits: OracleLimits = OracleLimits()) -> float:
    """Dispatch on clones vs pipelines."""
    items = list(instance)
    if items and isinstance(items[0], Pipeline):
        return oracle_pipelines(items, p, limits)
    return oracle_independent(items, p, limits)
