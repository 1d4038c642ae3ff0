"""Work, demand and volume vector algebra.

Work vectors hold milliseconds of effective use of each time-shared resource
(CPU, disk, network interface). Demand vectors hold the fraction of a site's
space-shared capacity (memory) reserved for the whole run of a clone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

#: Absolute slack on normalized capacity checks, so exact-fit packings pass.
CAPACITY_TOL = 1e-9


def _check_vector(values: Sequence[float], what: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    for v in out:
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{what} components must be finite and >= 0, got {out}")
    return out


def seq_time(work: Sequence[float], epsilon: float) -> float:
    """Stand-alone time of a work vector under uniform resource overlap.

    ``epsilon`` interpolates between zero overlap (0, the sum of components)
    and perfect overlap (1, the largest component).
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    w = _check_vector(work, "work")
    if not w:
        return 0.0
    return epsilon * max(w) + (1.0 - epsilon) * math.fsum(w)


def vector_length(vectors: Iterable[Sequence[float]] | np.ndarray) -> float:
    """Largest component of the sum of ``vectors``; 0 for an empty set."""
    arr = np.asarray(list(vectors) if not isinstance(vectors, np.ndarray) else vectors,
                     dtype=float)
    if arr.size == 0:
        return 0.0
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("expected a set of equal-dimension vectors")
    return float(arr.sum(axis=0).max())


@dataclass(frozen=True)
class Clone:
    """One partition of an operator, pinned to a single site when it runs.

    ``home`` fixes the site for rooted clones (e.g. a declustered Store);
    ``None`` means the scheduler chooses.
    """

    operator_id: str
    index: int
    work: tuple[float, ...]
    demand: tuple[float, ...]
    seq_time: float
    home: int | None = None
    parts: tuple[str, ...] = field(default=(), compare=False)

    @property
    def cid(self) -> str:
        return f"{self.operator_id}#{self.index}"

    @property
    def work_length(self) -> float:
        return max(self.work) if self.work else 0.0

    @property
    def demand_length(self) -> float:
        return max(self.demand) if self.demand else 0.0

    def pinned(self, site: int | None) -> Clone:
        return replace(self, home=site)


def make_clone(operator_id: str, index: int, work: Sequence[float],
               demand: Sequence[float], epsilon: float,
               home: int | None = None, parts: tuple[str, ...] = ()) -> Clone:
    w = _check_vector(work, "work")
    v = _check_vector(demand, "demand")
    if any(x > 1.0 + CAPACITY_TOL for x in v):
        raise ValueError(f"clone {operator_id}#{index} demand {v} exceeds site capacity")
    return Clone(operator_id, index, w, v, seq_time(w, epsilon), home, parts)


def volume(clone: Clone) -> tuple[float, ...]:
    """Resource-time product of a clone: its stand-alone time times its demand."""
    return tuple(clone.seq_time * v for v in clone.demand)


def is_compatible(clones: Iterable[Clone], tol: float = CAPACITY_TOL) -> bool:
    """True if the clones can share one site without exceeding its capacity."""
    return vector_length([c.demand for c in clones]) <= 1.0 + tol


def subset_exec_time(clones: Sequence[Clone]) -> float:
    """Run time of a compatible clone set sharing one site.

    Either the slowest clone or the most congested time-shared resource
    decides, whichever is larger.
    """
    clones = list(clones)
    if not clones:
        return 0.0
    if not is_compatible(clones):
        raise ValueError("clone set exceeds site capacity")
    slowest = max(c.seq_time for c in clones)
    return max(slowest, vector_length([c.work for c in clones]))


def as_arrays(clones: Sequence[Clone]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack clones into (work, demand, seq_time) arrays for the kernels."""
    if not clones:
        return np.zeros((0, 0)), np.zeros((0, 0)), np.zeros(0)
    work = np.array([c.work for c in clones], dtype=np.float64)
    demand = np.array([c.demand for c in clones], dtype=np.float64)
    times = np.array([c.seq_time for c in clones], dtype=np.float64)
    return work, demand, times
