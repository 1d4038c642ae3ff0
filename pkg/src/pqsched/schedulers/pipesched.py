"""Placement of one co-scheduled clone set onto sites.

Clones go in non-increasing work density ``l(W)/l(V)`` (zero-demand clones
first, input order breaking ties) to the site with the smallest work length
that still has memory room. Rooted clones are placed on their home sites
before anything else.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import _kernels
from ..cost_model import InfeasibleError
from ..schedule import Assignment, Schedule, make_level
from ..vectors import CAPACITY_TOL, Clone, as_arrays


class PlacementError(InfeasibleError):
    """No site had room for a clone."""

    def __init__(self, message: str, clone_id: str):
        super().__init__(message)
        self.clone_id = clone_id


def density_order(clones: Sequence[Clone]) -> np.ndarray:
    wl = np.array([c.work_length for c in clones], dtype=float)
    vl = np.array([c.demand_length for c in clones], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(vl > 0, wl / np.where(vl > 0, vl, 1.0), np.inf)
    return np.argsort(-dens, kind="stable")


def place_clones(clones: Sequence[Clone], p: int) -> dict[str, int]:
    """Map clone ids to sites, or raise :class:`PlacementError`."""
    clones = list(clones)
    if not clones:
        return {}
    W, V, _ = as_arrays(clones)
    BW = np.zeros((p, W.shape[1]))
    BV = np.zeros((p, V.shape[1]))
    out: dict[str, int] = {}
    free = []
    for i, c in enumerate(clones):
        if c.home is None:
            free.append(i)
            continue
        if not 0 <= c.home < p:
            raise PlacementError(f"clone {c.cid} is rooted at site {c.home} outside 0..{p - 1}",
                                 c.cid)
        BW[c.home] += W[i]
        BV[c.home] += V[i]
        if np.any(BV[c.home] > 1.0 + CAPACITY_TOL):
            raise PlacementError(f"rooted clone {c.cid} overflows site {c.home}", c.cid)
        out[c.cid] = c.home
    if free:
        sub = [clones[i] for i in free]
        order = density_order(sub)
        assign, failed = _kernels.pipe_place(order, W[free], V[free], p, BW, BV, CAPACITY_TOL)
        if failed >= 0:
            cid = sub[failed].cid
            raise PlacementError(f"no site has memory left for clone {cid}", cid)
        for c, s in zip(sub, assign):
            out[c.cid] = int(s)
    return out


def pipe_sched(pipe, p_c: int, algo: str = "pipesched") -> Schedule:
    """Schedule one pipeline (or any co-scheduled clone set) as a single level."""
    clones = list(getattr(pipe, "clones", pipe))
    pid = getattr(pipe, "id", "pipe")
    sites = place_clones(clones, p_c)
    registry = {c.cid: c for c in clones}
    level = make_level(0.0, [pid], [Assignment(c.cid, sites[c.cid]) for c in clones], registry)
    return Schedule([level], registry, p_c, algo, {"p": p_c},
                    groups={pid: tuple(registry)})
