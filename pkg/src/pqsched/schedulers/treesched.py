"""Task trees: memory-materialized pairs merged, disk-materialized tasks
released level by level as their inputs finish."""
from __future__ import annotations

from typing import Sequence

from ..plan import TaskTree, merged_units
from ..schedule import Schedule
from .levelsched import Group, run_levels


def tree_groups(tree: TaskTree, arrival: float = 0.0) -> list[Group]:
    units, _ = merged_units(tree)
    return [Group(u.id, u.clones, u.preds, u.anchors, u.query, arrival)
            for u in units.values()]


def tree_sched(tree: TaskTree, p: int, lam: float, s: int = 1,
               recheck: bool = True) -> Schedule:
    """Every Build is fused with its Probe into one clone (work added, memory
    held), and a task whose input went to disk runs on the sites that wrote it."""
    return run_levels(tree_groups(tree), p, lam, s, recheck, "treesched")


def tree_sched_online(arrivals: Sequence[tuple[float, TaskTree]], p: int, lam: float,
                      s: int = 1, recheck: bool = True) -> Schedule:
    """Trees arriving over time join the ready list at the next level boundary.

    Per-query completion times are available from
    :meth:`Schedule.query_completion`.
    """
    groups: list[Group] = []
    for at, tree in sorted(arrivals, key=lambda a: a[0]):
        if at < 0:
            raise ValueError("arrival times must be >= 0")
        groups.extend(tree_groups(tree, at))
    schedule = run_levels(groups, p, lam, s, recheck, "treesched_online")
    schedule.params["arrivals"] = sorted({g.arrival for g in groups})
    return schedule
