"""Lower bounds, worst-case guarantees and performance ratios."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .plan import Pipeline, TaskTree, critical_path_time, merged_units
from .vectors import Clone, vector_length, volume


@dataclass(frozen=True)
class BoundsReport:
    t_max: float
    avg_work: float
    avg_volume: float
    crit_path: float | None
    lb: float
    dominant_term: str

    def to_dict(self) -> dict:
        return asdict(self)


def _report(t_max: float, avg_work: float, avg_volume: float,
            crit_path: float | None = None) -> BoundsReport:
    terms = {"avg_work": avg_work, "avg_volume": avg_volume}
    if crit_path is None:
        terms = {"t_max": t_max, **terms}
    else:
        terms = {"crit_path": crit_path, **terms}
    dominant = max(terms, key=lambda k: terms[k])  # first wins ties
    return BoundsReport(t_max, avg_work, avg_volume, crit_path, terms[dominant], dominant)


def _work_len(clones: Sequence[Clone]) -> float:
    return vector_length([c.work for c in clones]) if clones else 0.0


def pipeline_volume(groups: Sequence[Sequence[Clone]]) -> float:
    """``l(sum_i T^max(C_i) * sum of C_i's demands)``: co-scheduled clones hold
    their memory for as long as the slowest member runs."""
    total = None
    for g in groups:
        if not g:
            continue
        t = max(c.seq_time for c in g)
        v = t * np.sum([c.demand for c in g], axis=0)
        total = v if total is None else total + v
    return 0.0 if total is None else float(np.max(total))


def lb_independent(clones: Sequence[Clone], p: int) -> BoundsReport:
    clones = list(clones)
    t_max = max((c.seq_time for c in clones), default=0.0)
    vol = vector_length([volume(c) for c in clones]) if clones else 0.0
    return _report(t_max, _work_len(clones) / p, vol / p)


def lb_pipelines(pipes: Sequence[Pipeline], p: int) -> BoundsReport:
    clones = [c for pp in pipes for c in pp.clones]
    t_max = max((pp.t_max for pp in pipes), default=0.0)
    vol = pipeline_volume([pp.clones for pp in pipes])
    return _report(t_max, _work_len(clones) / p, vol / p)


def tree_bound(tree: TaskTree, p: int) -> BoundsReport:
    """Like the pipeline bound, with the critical path in place of ``T^max``.

    Build/Probe pairs are counted once, fused, as the scheduler runs them.
    """
    units, _ = merged_units(tree)
    clones = [c for u in units.values() for c in u.clones]
    t_max = max((u.t_max for u in units.values()), default=0.0)
    vol = pipeline_volume([u.clones for u in units.values()])
    return _report(t_max, _work_len(clones) / p, vol / p, critical_path_time(tree))


def perf_ratio(response, report: BoundsReport | float) -> float:
    r = getattr(response, "response_time", response)
    lb = getattr(report, "lb", report)
    if lb <= 0:
        if r <= 0:
            return 1.0
        raise ValueError("performance ratio undefined: lower bound is 0")
    return r / lb


# ------------------------------------------------------------ guarantees

def _dims(clones: Sequence[Clone]) -> tuple[int, int]:
    c = clones[0]
    return len(c.work), len(c.demand)


def opsched_guarantee(clones: Sequence[Clone], p: int) -> float:
    """``d*l(S^W)/P + 2s*l(S^TV)/P + 2*T^max``."""
    if not clones:
        return 0.0
    d, s = _dims(clones)
    rep = lb_independent(clones, p)
    return d * rep.avg_work + 2 * s * rep.avg_volume + 2 * rep.t_max


def pipesched_guarantee(clones: Sequence[Clone], p_c: int, lam: float) -> float:
    """``d(1 + s/(1-lam)) * l(S^W)/P_C + T^max``."""
    if not clones:
        return 0.0
    d, s = _dims(clones)
    t_max = max(c.seq_time for c in clones)
    return d * (1 + s / (1 - lam)) * _work_len(clones) / p_c + t_max


def levelsched_guarantee(pipes: Sequence[Pipeline], p: int, lam: float) -> float:
    """``d^2(1 + s/(1-lam)) l(S^W)/P + 2s^2/(1-lam) l(S^TV)/P + T^max``."""
    clones = [c for pp in pipes for c in pp.clones]
    if not clones:
        return 0.0
    d, s = _dims(clones)
    rep = lb_pipelines(pipes, p)
    return (d * d * (1 + s / (1 - lam)) * rep.avg_work
            + 2 * s * s / (1 - lam) * rep.avg_volume + rep.t_max)


def sites_needed(clones: Sequence[Clone], lam: float) -> int:
    """Sites that always suffice for one co-scheduled ``lam``-granular set."""
    if not clones:
        return 1
    s = len(clones[0].demand)
    need = vector_length([c.demand for c in clones]) * s / (1 - lam)
    return max(1, math.ceil(need - 1e-9))


# ------------------------------------------------------------ bulk parameters

@dataclass(frozen=True)
class BulkParameters:
    crit_path: float
    avg_work: float
    avg_volume: float

    @property
    def combined(self) -> float:
        return max(self.crit_path, self.avg_work, self.avg_volume)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.crit_path, self.avg_work, self.avg_volume)


def bulk_parameters(tree: TaskTree, p: int) -> BulkParameters:
    rep = tree_bound(tree, p)
    return BulkParameters(rep.crit_path, rep.avg_work, rep.avg_volume)


def compare_bulk(a: BulkParameters, b: BulkParameters, tol: float = 1e-12) -> str:
    """Componentwise order: ``"<="`` if ``a`` is no worse anywhere, ``">="`` if
    no better anywhere, ``"=="`` if equal, else ``"incomparable"``."""
    le = all(x <= y + tol for x, y in zip(a.as_tuple(), b.as_tuple()))
    ge = all(x >= y - tol for x, y in zip(a.as_tuple(), b.as_tuple()))
    if le and ge:
        return "=="
    if le:
        return "<="
    if ge:
        return ">="
    return "incomparable"


# ------------------------------------------------------------ tightness family

def tightness_family(p: int, k: int, eps: float, s: int = 1) -> list[tuple[float, ...]]:
    """``P(k-1)`` demand vectors, each ``1/(k - eps)`` in one dimension.

    Packing all of them into the same dimension fits ``k-1`` per site (``k``
    would overflow), so exactly ``P`` sites fill up, while the sufficient
    site count ``l(S^V) s / (1 - lam)`` with ``lam = 1/(k - eps)`` approaches
    ``P`` as ``eps`` shrinks.
    """
    if k < 2 or not 0 < eps < 1:
        raise ValueError("need k >= 2 and 0 < eps < 1")
    v = 1.0 / (k - eps)
    return [tuple(v if dim == 0 else 0.0 for dim in range(s)) for _ in range(p * (k - 1))]


def tightness_bound(p: int, k: int, eps: float, s: int = 1) -> float:
    vecs = tightness_family(p, k, eps, s)
    lam = 1.0 / (k - eps)
    return vector_length(vecs) * s / (1 - lam)
