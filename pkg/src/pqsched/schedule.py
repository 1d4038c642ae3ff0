"""Schedules: ordered levels of clone-to-site assignments."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .vectors import Clone, subset_exec_time


@dataclass(frozen=True)
class Assignment:
    clone: str
    site: int
    shelf: int = 0


@dataclass
class Level:
    """A batch of co-scheduled groups.

    Each site runs its shelves back to back; the level lasts as long as its
    busiest site. ``pipes`` names the groups (pipelines or merged units) whose
    clones all run here.
    """

    start: float
    pipes: tuple[str, ...]
    assignments: list[Assignment]
    height: float = 0.0

    @property
    def end(self) -> float:
        return self.start + self.height

    @property
    def sites(self) -> set[int]:
        return {a.site for a in self.assignments}

    def shelves(self) -> dict[int, dict[int, list[str]]]:
        out: dict[int, dict[int, list[str]]] = defaultdict(lambda: defaultdict(list))
        for a in self.assignments:
            out[a.site][a.shelf].append(a.clone)
        return out


def site_times(level: Level, clones: Mapping[str, Clone]) -> dict[int, float]:
    """Sum of shelf execution times per site."""
    out = {}
    for site, shelves in level.shelves().items():
        out[site] = sum(subset_exec_time([clones[c] for c in shelves[k]])
                        for k in sorted(shelves))
    return out


def level_height(level: Level, clones: Mapping[str, Clone]) -> float:
    return max(site_times(level, clones).values(), default=0.0)


@dataclass
class Schedule:
    levels: list[Level]
    clones: dict[str, Clone]
    n_sites: int
    algo: str
    params: dict = field(default_factory=dict)
    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)
    deps: list[tuple[str, str]] = field(default_factory=list)
    colocate: list[tuple[str, str]] = field(default_factory=list)
    query_of: dict[str, str] = field(default_factory=dict)

    @property
    def response_time(self) -> float:
        return max((lv.end for lv in self.levels), default=0.0)

    def site_of(self) -> dict[str, int]:
        return {a.clone: a.site for lv in self.levels for a in lv.assignments}

    def group_end(self) -> dict[str, float]:
        return {g: lv.end for lv in self.levels for g in lv.pipes}

    def query_completion(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for g, end in self.group_end().items():
            q = self.query_of.get(g)
            if q is not None:
                out[q] = max(out.get(q, 0.0), end)
        return out

    def to_dict(self) -> dict:
        return {
            "algo": self.algo,
            "params": self.params,
            "n_sites": self.n_sites,
            "response_ms": self.response_time,
            "levels": [{
                "start": lv.start,
                "height": lv.height,
                "pipes": list(lv.pipes),
                "assignments": [{"clone": a.clone, "site": a.site, "shelf": a.shelf}
                                for a in lv.assignments],
            } for lv in self.levels],
            "clones": {cid: {"operator": c.operator_id, "index": c.index,
                             "work": list(c.work), "demand": list(c.demand),
                             "seq_time": c.seq_time, "home": c.home,
                             "parts": list(c.parts)}
                       for cid, c in self.clones.items()},
            "groups": {g: list(m) for g, m in self.groups.items()},
            "deps": [list(d) for d in self.deps],
            "colocate": [list(p) for p in self.colocate],
            "query_of": self.query_of,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> Schedule:
        try:
            clones = {}
            for cid, c in doc["clones"].items():
                clones[cid] = Clone(c["operator"], int(c["index"]), tuple(c["work"]),
                                    tuple(c["demand"]), float(c["seq_time"]), c.get("home"),
                                    tuple(c.get("parts", ())))
            levels = [Level(float(lv["start"]), tuple(lv["pipes"]),
                            [Assignment(a["clone"], int(a["site"]), int(a.get("shelf", 0)))
                             for a in lv["assignments"]], float(lv["height"]))
                      for lv in doc["levels"]]
            return cls(levels, clones, int(doc["n_sites"]), doc["algo"], doc.get("params", {}),
                       {g: tuple(m) for g, m in doc.get("groups", {}).items()},
                       [tuple(d) for d in doc.get("deps", [])],
                       [tuple(p) for p in doc.get("colocate", [])],
                       dict(doc.get("query_of", {})))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed schedule: missing or bad field {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> Schedule:
        return cls.from_dict(json.loads(text))


def make_level(start: float, pipes: Iterable[str], assignments: Sequence[Assignment],
               clones: Mapping[str, Clone]) -> Level:
    lv = Level(start, tuple(pipes), list(assignments))
    lv.height = level_height(lv, clones)
    return lv
