"""Degree of partitioned parallelism and clone splitting.

An operator is split into ``N`` clones. Its communication area ``alpha*N +
beta*D`` should stay within ``f`` times its processing area; every clone's
memory share must stay within ``lam`` of a site. The memory rule wins when the
two disagree, which relaxes ``f`` to the smallest value that admits it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .cost_model import CPU, NET, HardwareParams, InfeasibleError, OperatorCost
from .vectors import CAPACITY_TOL, Clone, make_clone

WeightFn = Callable[[int], Sequence[float]]

_LAMBDA_TIE = 1e-12


class GranularityError(InfeasibleError):
    """The operator fits in memory but cannot be split finely enough."""


@dataclass(frozen=True)
class GranularityParams:
    f: float = 0.6
    lam: float = 0.2

    def __post_init__(self) -> None:
        if self.f <= 0:
            raise ValueError("f must be > 0")
        if not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")


@dataclass(frozen=True)
class CloneSplit:
    n: int
    weights: tuple[float, ...]
    effective_f: float

    def __post_init__(self) -> None:
        if self.n < 1 or len(self.weights) != self.n:
            raise ValueError("split needs n >= 1 weights")
        if any(w <= 0 for w in self.weights) or abs(math.fsum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must be positive and sum to 1")


def uniform_weights(n: int) -> tuple[float, ...]:
    return (1.0 / n,) * n


def zipf_weights(theta: float) -> WeightFn:
    """Skewed partition sizes: clone i gets a share proportional to 1/(i+1)^theta."""
    def weights(n: int) -> tuple[float, ...]:
        raw = [1.0 / (i + 1) ** theta for i in range(n)]
        total = math.fsum(raw)
        return tuple(r / total for r in raw)
    return weights


def processing_area(cost: OperatorCost) -> float:
    return math.fsum(cost.base_work)


def communication_area(cost: OperatorCost, n: int, hw: HardwareParams) -> float:
    if n < 1:
        raise ValueError("degree of parallelism must be >= 1")
    return hw.startup_alpha_ms * n + hw.net_beta_ms_per_byte * cost.bytes_transferred


def maxmem(demand: Sequence[float], n: int, weights: WeightFn = uniform_weights) -> float:
    """Largest per-clone memory share when ``demand`` is split ``n`` ways."""
    return max(weights(n)) * (max(demand) if demand else 0.0)


def _degree(cg_term: int, demand: Sequence[float], g: GranularityParams,
            p_sites: int, weights: WeightFn, what: str) -> tuple[int, bool]:
    if maxmem(demand, p_sites, weights) > 1.0 + CAPACITY_TOL:
        raise InfeasibleError(
            f"{what} needs {max(demand):.3f} sites of memory even split over {p_sites} sites")
    lam_term = next((n for n in range(1, p_sites + 1)
                     if maxmem(demand, n, weights) <= g.lam + _LAMBDA_TIE), None)
    if lam_term is None:
        raise GranularityError(
            f"{what} cannot be made {g.lam}-granular on {p_sites} sites")
    n = min(p_sites, max(1, cg_term, lam_term))
    # Skewed weights need not shrink monotonically; walk up to the first feasible N.
    while maxmem(demand, n, weights) > g.lam + _LAMBDA_TIE:
        n += 1
    return n, lam_term > max(1, cg_term)


def _effective_f(forced: bool, comm: float, proc: float, f: float) -> float:
    if not forced:
        return f
    return comm / proc if proc > 0 else math.inf


def max_degree(cost: OperatorCost, g: GranularityParams, hw: HardwareParams,
               p_sites: int, weights: WeightFn = uniform_weights) -> CloneSplit:
    proc = processing_area(cost)
    cg = math.floor((g.f * proc - hw.net_beta_ms_per_byte * cost.bytes_transferred)
                    / hw.startup_alpha_ms)
    n, forced = _degree(cg, cost.total_demand, g, p_sites, weights, cost.kind.value)
    eff = _effective_f(forced, communication_area(cost, n, hw), proc, g.f)
    return CloneSplit(n, tuple(weights(n)), eff)


def paired_degree(parent: OperatorCost, child: OperatorCost, g: GranularityParams,
                  hw: HardwareParams, p_sites: int,
                  weights: WeightFn = uniform_weights) -> CloneSplit:
    """One degree for two operators that must run on the same sites."""
    proc = processing_area(parent) + processing_area(child)
    data = parent.bytes_transferred + child.bytes_transferred
    cg = math.floor((g.f * proc - hw.net_beta_ms_per_byte * data)
                    / (2 * hw.startup_alpha_ms))
    demand = tuple(max(a, b) for a, b in zip(parent.total_demand, child.total_demand))
    n, forced = _degree(cg, demand, g, p_sites, weights,
                        f"{child.kind.value}/{parent.kind.value}")
    comm = communication_area(parent, n, hw) + communication_area(child, n, hw)
    return CloneSplit(n, tuple(weights(n)), _effective_f(forced, comm, proc, g.f))


def split_clones(cost: OperatorCost, split: CloneSplit, hw: HardwareParams,
                 operator_id: str, epsilon: float, lam: float = 1.0,
                 homes: Sequence[int] | None = None) -> list[Clone]:
    """Partition an operator's work and memory into ``split.n`` clones.

    Per-byte network cost follows the weights; the coordinator (clone 0) alone
    pays the startup cost, half on CPU and half on the network interface.
    """
    n = split.n
    if homes is not None and len(homes) != n:
        raise ValueError("need one home site per clone")
    shipped = hw.net_beta_ms_per_byte * cost.bytes_transferred
    startup = hw.startup_alpha_ms * n
    clones = []
    for i, w in enumerate(split.weights):
        work = [w * x for x in cost.base_work]
        work[NET] += w * shipped
        if i == 0:
            work[CPU] += startup / 2
            work[NET] += startup / 2
        demand = tuple(w * v for v in cost.total_demand)
        if demand and max(demand) > lam + _LAMBDA_TIE:
            raise GranularityError(
                f"clone {i} demand {max(demand):.4f} exceeds lambda {lam}", operator_id)
        if demand and max(demand) > 1.0 + CAPACITY_TOL:
            raise InfeasibleError(f"clone {i} exceeds site memory", operator_id)
        clones.append(make_clone(operator_id, i, work, demand, epsilon,
                                 None if homes is None else homes[i]))
    return clones
