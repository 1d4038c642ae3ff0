"""Independent clones: longest first onto the least loaded site, shelf by shelf."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import _kernels
from ..schedule import Assignment, Schedule, make_level
from ..vectors import CAPACITY_TOL, Clone, as_arrays


def op_sched(clones: Sequence[Clone], p: int) -> Schedule:
    """Each clone goes to the site with the smallest total time so far and
    joins that site's top shelf if its memory fits, else opens a new shelf."""
    clones = list(clones)
    if p < 1:
        raise ValueError("need at least one site")
    for c in clones:
        if c.demand_length > 1.0 + CAPACITY_TOL:
            raise ValueError(f"clone {c.cid} does not fit on a site")
    registry = {c.cid: c for c in clones}
    if not clones:
        return Schedule([], registry, p, "opsched", {"p": p})
    W, V, T = as_arrays(clones)
    order = np.argsort(-T, kind="stable")
    site, shelf = _kernels.lpt_shelves(order, T, W, V, p, CAPACITY_TOL)
    assignments = [Assignment(c.cid, int(site[i]), int(shelf[i])) for i, c in enumerate(clones)]
    level = make_level(0.0, [], assignments, registry)
    return Schedule([level], registry, p, "opsched", {"p": p})
