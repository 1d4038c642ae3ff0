"""Level-by-level scheduling of co-scheduled groups.

The ready groups are sorted by stand-alone time, longest first, and the
longest prefix whose combined demand length stays within ``P(1-lam)/s`` forms
the next level. With ``recheck`` on, later ready groups that still fit the
residual are pulled into the level as well. Each level is placed by
:func:`place_clones` and levels run back to back.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..cost_model import InfeasibleError
from ..schedule import Assignment, Schedule, make_level
from ..vectors import CAPACITY_TOL, Clone
from .pipesched import PlacementError, place_clones


@dataclass(frozen=True)
class Group:
    id: str
    clones: tuple[Clone, ...]
    preds: tuple[str, ...] = ()
    anchors: tuple[tuple[str, str], ...] = ()
    query: str = ""
    arrival: float = 0.0

    @property
    def t_max(self) -> float:
        return max(c.seq_time for c in self.clones)

    def demand_sum(self) -> np.ndarray:
        return np.sum([c.demand for c in self.clones], axis=0)


def level_threshold(p: int, lam: float, s: int) -> float:
    if not 0.0 < lam < 1.0:
        raise ValueError(f"level scheduling needs 0 < lambda < 1, got {lam}")
    return p * (1.0 - lam) / s


def first_level(demands: Sequence[np.ndarray], threshold: float,
                recheck: bool = True) -> list[int]:
    """Indices (into the sorted ready list) of the next level's groups.

    The first group is always taken, even if it alone exceeds the threshold.
    """
    if not demands:
        return []
    acc = np.array(demands[0], dtype=float)
    chosen = [0]
    i = 1
    while i < len(demands) and (acc + demands[i]).max() <= threshold + CAPACITY_TOL:
        acc = acc + demands[i]
        chosen.append(i)
        i += 1
    if recheck:
        for j in range(i + 1, len(demands)):
            if (acc + demands[j]).max() <= threshold + CAPACITY_TOL:
                acc = acc + demands[j]
                chosen.append(j)
    return chosen


def run_levels(groups: Sequence[Group], p: int, lam: float, s: int = 1,
               recheck: bool = True, algo: str = "levelsched",
               params: dict | None = None) -> Schedule:
    """Shared engine: dependencies, anchors and arrivals are all optional.

    A group becomes ready once it has arrived and its predecessors finished.
    New arrivals are only admitted at level boundaries; if nothing is ready
    the clock jumps to the next arrival.
    """
    threshold = level_threshold(p, lam, s)
    by_id = {g.id: g for g in groups}
    if len(by_id) != len(groups):
        raise ValueError("group ids must be unique")
    for g in groups:
        missing = set(g.preds) - set(by_id)
        if missing:
            raise ValueError(f"group {g.id} depends on unknown {sorted(missing)}")
    position = {g.id: i for i, g in enumerate(groups)}
    registry: dict[str, Clone] = {}
    for g in groups:
        for c in g.clones:
            if c.cid in registry:
                raise ValueError(f"clone {c.cid} appears in two groups")
            registry[c.cid] = c

    anchor_of = {cid: a for g in groups for cid, a in g.anchors}
    site_of: dict[str, int] = {}
    done: set[str] = set()
    levels = []
    t = 0.0
    todo = sorted(groups, key=lambda g: (g.arrival, position[g.id]))
    while todo:
        ready = [g for g in todo if g.arrival <= t and set(g.preds) <= done]
        if not ready:
            future = [g.arrival for g in todo if g.arrival > t]
            if not future:
                raise ValueError("dependency deadlock: no group can become ready")
            t = min(future)
            continue
        ready.sort(key=lambda g: -g.t_max)  # stable: admission order breaks ties
        picked = [ready[i] for i in first_level([g.demand_sum() for g in ready],
                                                threshold, recheck)]
        while True:
            clones = [_anchored(c, anchor_of, site_of) for g in picked for c in g.clones]
            try:
                sites = place_clones(clones, p)
                break
            except PlacementError as exc:
                if len(picked) == 1:
                    raise InfeasibleError(f"group {picked[0].id} cannot be placed on {p} "
                                          f"sites: {exc}") from exc
                picked.pop()
        for c in clones:
            registry[c.cid] = c
        level = make_level(t, [g.id for g in picked],
                           [Assignment(c.cid, sites[c.cid]) for c in clones], registry)
        levels.append(level)
        site_of.update(sites)
        t = level.end
        chosen = {g.id for g in picked}
        done |= chosen
        todo = [g for g in todo if g.id not in chosen]

    return Schedule(
        levels, registry, p, algo,
        {"p": p, "lambda": lam, "s": s, "recheck": recheck, **(params or {})},
        groups={g.id: tuple(c.cid for c in g.clones) for g in groups},
        deps=[(q, g.id) for g in groups for q in g.preds],
        colocate=[a for g in groups for a in g.anchors],
        query_of={g.id: g.query for g in groups if g.query},
    )


def _anchored(c: Clone, anchor_of: dict[str, str], site_of: dict[str, int]) -> Clone:
    anchor = anchor_of.get(c.cid)
    if anchor is None:
        return c
    if anchor not in site_of:
        raise ValueError(f"clone {c.cid} anchored to unscheduled {anchor}")
    return c.pinned(site_of[anchor])


def level_sched(pipes, p: int, lam: float, s: int = 1, recheck: bool = True) -> Schedule:
    """Independent pipelines, cut into levels by demand."""
    groups = [Group(pp.id, tuple(pp.clones), query=getattr(pp, "query", "")) for pp in pipes]
    return run_levels(groups, p, lam, s, recheck, "levelsched")
