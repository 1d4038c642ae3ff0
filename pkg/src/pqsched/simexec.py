"""Analytic replay of a schedule.

The executor does not trust the schedule's own numbers: it rebuilds each
clone's stand-alone time from its work vector, stretches each shelf to the
slower of its slowest clone and its busiest resource, and sums shelves per
site. It checks model consistency, not hardware realism.
"""
from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import SystemConfig
from .cost_model import InfeasibleError
from .schedule import Schedule
from .vectors import CAPACITY_TOL, seq_time

TIME_TOL = 1e-9
WORK_NAMES = ("cpu", "disk", "net")


class InfeasibleScheduleError(InfeasibleError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations[:5]) + (" ..." if len(violations) > 5 else ""))
        self.violations = violations


def validate(schedule: Schedule, cfg: SystemConfig | None = None) -> list[str]:
    """All constraint violations; empty means feasible."""
    out: list[str] = []
    clones = schedule.clones
    where: dict[str, tuple[int, int]] = {}
    for li, lv in enumerate(schedule.levels):
        for a in lv.assignments:
            if a.clone not in clones:
                out.append(f"level {li}: unknown clone {a.clone}")
                continue
            if a.clone in where:
                out.append(f"clone {a.clone} scheduled twice")
            where[a.clone] = (li, a.site)
            if not 0 <= a.site < schedule.n_sites:
                out.append(f"level {li}: clone {a.clone} on site {a.site} outside "
                           f"0..{schedule.n_sites - 1}")
            home = clones[a.clone].home
            if home is not None and home != a.site:
                out.append(f"clone {a.clone} rooted at site {home} but placed on {a.site}")
        for site, shelves in lv.shelves().items():
            for k, members in sorted(shelves.items()):
                known = [clones[c] for c in members if c in clones]
                if not known:
                    continue
                total = np.sum([c.demand for c in known], axis=0)
                for dim, x in enumerate(np.atleast_1d(total)):
                    if x > 1.0 + CAPACITY_TOL:
                        out.append(f"level {li} site {site} shelf {k}: demand dim {dim} "
                                   f"is {x:.6f} > 1")
    for cid in clones:
        if cid not in where:
            out.append(f"clone {cid} never scheduled")
    if cfg is not None:
        for cid, c in clones.items():
            expect = seq_time(c.work, cfg.epsilon)
            if abs(expect - c.seq_time) > TIME_TOL * max(1.0, expect):
                out.append(f"clone {cid}: cached time {c.seq_time} != {expect}")
            if len(c.work) != cfg.d or len(c.demand) != cfg.s:
                out.append(f"clone {cid}: dimensions do not match config")

    level_of_group: dict[str, int] = {}
    for g, members in schedule.groups.items():
        levels = {where[c][0] for c in members if c in where}
        if len(levels) > 1:
            out.append(f"group {g} split across levels {sorted(levels)}")
        if levels:
            level_of_group[g] = min(levels)
    for a, b in schedule.colocate:
        if a in where and b in where and where[a][1] != where[b][1]:
            out.append(f"clone {a} must share a site with {b}")
    for before, after in schedule.deps:
        if before in level_of_group and after in level_of_group:
            end = schedule.levels[level_of_group[before]].end
            start = schedule.levels[level_of_group[after]].start
            if start < end - TIME_TOL * max(1.0, end):
                out.append(f"group {after} starts at {start} before {before} ends at {end}")
    lv = schedule.levels
    for i in range(len(lv)):
        for j in range(i + 1, len(lv)):
            overlap = min(lv[i].end, lv[j].end) - max(lv[i].start, lv[j].start)
            if overlap > TIME_TOL * max(1.0, lv[i].end, lv[j].end):
                shared = lv[i].sites & lv[j].sites
                if shared:
                    out.append(f"levels {i} and {j} overlap in time on sites {sorted(shared)}")
    return out


@dataclass
class SiteTrace:
    level: int
    site: int
    start: float
    duration: float
    busy: list[float]
    utilization: list[float]
    peak_demand: list[float]


@dataclass
class ExecutionTrace:
    total: float
    levels: list[dict]
    sites: list[SiteTrace] = field(default_factory=list)
    pipeline_completion: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"total_ms": self.total, "levels": self.levels,
                "sites": [asdict(s) for s in self.sites],
                "pipeline_completion": self.pipeline_completion}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def utilization_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = len(self.sites[0].busy) if self.sites else 3
        s = len(self.sites[0].peak_demand) if self.sites else 1
        names = [WORK_NAMES[k] if k < len(WORK_NAMES) else f"tsr{k}" for k in range(d)]
        w.writerow(["level", "site", "start_ms", "duration_ms",
                    *[f"busy_{n}_ms" for n in names], *[f"util_{n}" for n in names],
                    *[f"peak_mem{k}" for k in range(s)]])
        for st in self.sites:
            w.writerow([st.level, st.site, repr(st.start), repr(st.duration),
                        *map(repr, st.busy), *map(repr, st.utilization),
                        *map(repr, st.peak_demand)])
        return buf.getvalue()


def execute(schedule: Schedule, cfg: SystemConfig) -> ExecutionTrace:
    """Replay ``schedule``; raises :class:`InfeasibleScheduleError` if invalid."""
    bad = validate(schedule, cfg)
    if bad:
        raise InfeasibleScheduleError(bad)
    sites: list[SiteTrace] = []
    levels = []
    total = 0.0
    for li, lv in enumerate(schedule.levels):
        longest = 0.0
        for site, shelves in sorted(lv.shelves().items()):
            duration = 0.0
            busy = np.zeros(cfg.d)
            peak = np.zeros(cfg.s)
            for k in sorted(shelves):
                members = [schedule.clones[c] for c in shelves[k]]
                W = np.array([c.work for c in members], dtype=float)
                V = np.array([c.demand for c in members], dtype=float)
                slowest = max(seq_time(c.work, cfg.epsilon) for c in members)
                duration += max(slowest, float(W.sum(axis=0).max()))
                busy += W.sum(axis=0)
                peak = np.maximum(peak, V.sum(axis=0))
            util = busy / duration if duration > 0 else np.zeros(cfg.d)
            sites.append(SiteTrace(li, site, lv.start, duration, busy.tolist(),
                                   util.tolist(), peak.tolist()))
            longest = max(longest, duration)
        end = lv.start + longest
        levels.append({"level": li, "start": lv.start, "end": end, "pipes": list(lv.pipes)})
        total = max(total, end)
    completion = {}
    for info in levels:
        for g in info["pipes"]:
            completion[g] = info["end"]
    return ExecutionTrace(total, levels, sites, completion)
