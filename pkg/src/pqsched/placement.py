"""Base-relation home sites (data placement policies)."""
from __future__ import annotations

import math
import random
from typing import Sequence

from .cost_model import HardwareParams, RelationStats
from .plan import PlanNode

POLICIES = ("declust", "declust_1_4", "nodeclust", "nodeclust_1_4", "random",
            "query_based")


def _quarter(p: int) -> list[int]:
    return list(range(max(1, p // 4)))


def _build_relations(node: PlanNode) -> list[str]:
    if node.is_leaf:
        return []
    build, probe = node.children
    own = [build.relation] if build.is_leaf else []
    return own + _build_relations(build) + _build_relations(probe)


def hash_table_sites(rel: RelationStats, hw: HardwareParams) -> int:
    """Fewest sites that hold the relation's hash table in memory."""
    return max(1, math.ceil(hw.fudge_F * rel.pages(hw) / hw.mem_pages_per_site - 1e-9))


def place(policy: str, catalog: Sequence[RelationStats], p: int, seed: int = 0,
          plans: Sequence[PlanNode] = (), hw: HardwareParams | None = None
          ) -> dict[str, list[int]]:
    """Map every relation to its sorted list of home sites."""
    rng = random.Random(seed)
    policy = policy.lower().replace("-", "_").replace("/", "_")
    if policy == "declust":
        return {r.name: list(range(p)) for r in catalog}
    if policy == "declust_1_4":
        return {r.name: _quarter(p) for r in catalog}
    if policy == "nodeclust":
        return {r.name: [rng.randrange(p)] for r in catalog}
    if policy == "nodeclust_1_4":
        q = _quarter(p)
        return {r.name: [rng.choice(q)] for r in catalog}
    if policy == "random":
        biggest = max((r.tuples for r in catalog), default=1) or 1
        out = {}
        for r in catalog:
            cap = max(1, round(p * r.tuples / biggest))
            out[r.name] = sorted(rng.sample(range(p), rng.randint(1, cap)))
        return out
    if policy == "query_based":
        hw = hw or HardwareParams()
        sizes = {r.name: r for r in catalog}
        out: dict[str, list[int]] = {}
        for plan in plans:
            cursor = rng.randrange(p)
            for name in _build_relations(plan):
                n = min(p, hash_table_sites(sizes[name], hw))
                out[name] = sorted((cursor + i) % p for i in range(n))
                cursor = (cursor + n) % p
        for r in catalog:
            if r.name not in out:
                n = min(p, hash_table_sites(r, hw))
                start = rng.randrange(p)
                out[r.name] = sorted((start + i) % p for i in range(n))
        return out
    raise ValueError(f"unknown placement policy {policy!r}; choose from {POLICIES}")
