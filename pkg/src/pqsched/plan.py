"""Query plans, their expansion into task trees, and random workloads.

A hash join ``{"join": [build, probe]}`` expands into a Build over its first
input and a Probe streaming over its second. Leaves become Scans and the plan
root gets a Store declustered over every site. Pipelines are the maximal
chains of pipelined operators; a Build finishes before its Probe starts
(memory materialization). When a Build consumes a join result, that result is
written to disk by a temporary Store and read back by a co-located Scan (disk
materialization), so each query does not collapse into a single co-scheduled
unit.
"""
from __future__ import annotations

import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .config import SystemConfig
from .cost_model import (OpKind, OperatorCost, RelationStats, estimate_operator,
                         key_join_output)
from .granularity import (CloneSplit, GranularityParams, WeightFn, max_degree,
                          paired_degree, split_clones, uniform_weights)
from .vectors import Clone, make_clone, seq_time

DISK_MAT = "disk_mat"
MEM_MAT = "mem_mat"


# ---------------------------------------------------------------- plan trees

@dataclass(frozen=True)
class PlanNode:
    id: str
    children: tuple[PlanNode, ...] = ()
    relation: str | None = None
    selectivity: float | None = None

    def __post_init__(self) -> None:
        if self.is_leaf:
            if self.relation is None:
                raise ValueError(f"leaf {self.id} needs a relation")
        elif len(self.children) != 2:
            raise ValueError(f"join {self.id} needs exactly two inputs")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def n_joins(self) -> int:
        return 0 if self.is_leaf else 1 + sum(c.n_joins() for c in self.children)

    def leaves(self) -> list[str]:
        if self.is_leaf:
            return [self.relation]
        return [r for c in self.children for r in c.leaves()]

    def to_json(self):
        if self.is_leaf:
            if self.selectivity is None:
                return self.relation
            return {"rel": self.relation, "selectivity": self.selectivity}
        return {"join": [c.to_json() for c in self.children]}

    @classmethod
    def from_json(cls, obj, _path: str = "n") -> PlanNode:
        if isinstance(obj, str):
            return cls(_path, relation=obj)
        if isinstance(obj, dict) and "join" in obj:
            kids = obj["join"]
            if not isinstance(kids, list) or len(kids) != 2:
                raise ValueError(f"{_path}: join needs a list of two inputs")
            return cls(_path, tuple(cls.from_json(k, f"{_path}.{i}") for i, k in enumerate(kids)))
        if isinstance(obj, dict) and "rel" in obj:
            return cls(_path, relation=obj["rel"], selectivity=obj.get("selectivity"))
        raise ValueError(f"{_path}: cannot parse plan node {obj!r}")


def join(build: PlanNode | str, probe: PlanNode | str) -> PlanNode:
    """Convenience constructor; ids are reassigned on the JSON round trip."""
    as_node = lambda x: x if isinstance(x, PlanNode) else PlanNode(x, relation=x)
    return PlanNode(f"({as_node(build).id}*{as_node(probe).id})",
                    (as_node(build), as_node(probe)))


# ---------------------------------------------------------------- task trees

@dataclass
class Operator:
    op_id: str
    kind: OpKind
    cost: OperatorCost
    split: CloneSplit
    clones: list[Clone]
    pipeline: str = ""


@dataclass(frozen=True)
class Pipeline:
    id: str
    clones: tuple[Clone, ...]
    operators: tuple[str, ...] = ()
    query: str = ""

    def __post_init__(self) -> None:
        if not self.clones:
            raise ValueError(f"pipeline {self.id} has no clones")

    @property
    def t_max(self) -> float:
        return max(c.seq_time for c in self.clones)


@dataclass(frozen=True)
class Edge:
    child: str
    parent: str
    kind: str
    pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (DISK_MAT, MEM_MAT):
            raise ValueError(f"unknown edge kind {self.kind}")


@dataclass
class TaskTree:
    """Pipelines plus blocking edges; may hold several queries (a forest)."""

    pipelines: dict[str, Pipeline]
    edges: list[Edge] = field(default_factory=list)
    operators: dict[str, Operator] = field(default_factory=dict)
    epsilon: float = 0.5

    def __post_init__(self) -> None:
        for e in self.edges:
            if e.child not in self.pipelines or e.parent not in self.pipelines:
                raise ValueError(f"edge {e.child}->{e.parent} names an unknown pipeline")
        seen: set[str] = set()
        for p in self.pipelines.values():
            for c in p.clones:
                if c.cid in seen:
                    raise ValueError(f"clone {c.cid} appears twice")
                seen.add(c.cid)
        self.topological_order()

    @classmethod
    def from_pipelines(cls, pipes: Iterable[Pipeline], edges: Iterable[Edge] = (),
                       epsilon: float = 0.5) -> TaskTree:
        return cls({p.id: p for p in pipes}, list(edges), {}, epsilon)

    @property
    def queries(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for p in self.pipelines.values():
            out[p.query].append(p.id)
        return dict(out)

    def all_clones(self) -> list[Clone]:
        return [c for p in self.pipelines.values() for c in p.clones]

    def topological_order(self) -> list[str]:
        indeg = {pid: 0 for pid in self.pipelines}
        kids = defaultdict(list)
        for e in self.edges:
            indeg[e.parent] += 1
            kids[e.child].append(e.parent)
        ready = [pid for pid, k in indeg.items() if k == 0]
        order = []
        while ready:
            pid = ready.pop(0)
            order.append(pid)
            for q in kids[pid]:
                indeg[q] -= 1
                if indeg[q] == 0:
                    ready.append(q)
        if len(order) != len(self.pipelines):
            raise ValueError("task tree contains a cycle")
        return order

    def without_edges(self) -> TaskTree:
        return TaskTree(dict(self.pipelines), [], dict(self.operators), self.epsilon)

    @staticmethod
    def union(trees: Sequence[TaskTree]) -> TaskTree:
        if not trees:
            return TaskTree({})
        pipes, edges, ops = {}, [], {}
        for t in trees:
            clash = set(pipes) & set(t.pipelines)
            if clash:
                raise ValueError(f"duplicate pipelines {sorted(clash)[:3]}")
            pipes.update(t.pipelines)
            edges.extend(t.edges)
            ops.update(t.operators)
        return TaskTree(pipes, edges, ops, trees[0].epsilon)


# ---------------------------------------------------------------- expansion

class _Expander:
    def __init__(self, catalog: Mapping[str, RelationStats], cfg: SystemConfig,
                 query: str, homes: Mapping[str, Sequence[int]] | None,
                 weights: WeightFn):
        self.catalog = catalog
        self.cfg = cfg
        self.hw = cfg.hw
        self.g = GranularityParams(cfg.f, cfg.lam)
        self.query = query
        self.homes = homes or {}
        self.weights = weights
        self.ops: dict[str, Operator] = {}
        self.pipes: dict[str, list[str]] = {}
        self.edges: list[Edge] = []
        self._n = 0

    def _op(self, kind: OpKind, cost: OperatorCost, split: CloneSplit,
            homes: Sequence[int] | None = None) -> str:
        op_id = f"{self.query}.{kind.value}{self._n}"
        self._n += 1
        try:
            clones = split_clones(cost, split, self.hw, op_id, self.cfg.epsilon,
                                  self.cfg.lam, homes)
        except ValueError as exc:
            raise type(exc)(f"{op_id}: {exc}") from exc
        self.ops[op_id] = Operator(op_id, kind, cost, split, clones)
        return op_id

    def _degree(self, cost: OperatorCost, op_name: str) -> CloneSplit:
        try:
            return max_degree(cost, self.g, self.hw, self.cfg.p_sites, self.weights)
        except ValueError as exc:
            raise type(exc)(f"{self.query}.{op_name}: {exc}") from exc

    def _paired(self, parent: OperatorCost, child: OperatorCost, op_name: str) -> CloneSplit:
        try:
            return paired_degree(parent, child, self.g, self.hw, self.cfg.p_sites, self.weights)
        except ValueError as exc:
            raise type(exc)(f"{self.query}.{op_name}: {exc}") from exc

    def _close(self, ops: list[str]) -> str:
        pid = f"{self.query}.p{len(self.pipes)}"
        self.pipes[pid] = ops
        for o in ops:
            self.ops[o].pipeline = pid
        return pid

    def leaf(self, node: PlanNode) -> tuple[list[str], RelationStats]:
        try:
            rel = self.catalog[node.relation]
        except KeyError:
            raise ValueError(f"relation {node.relation!r} not in catalog") from None
        kind = OpKind.SCAN if node.selectivity is None else OpKind.SELECT
        cost = estimate_operator(kind, rel, self.hw, node.selectivity or 1.0,
                                 p_sites=self.cfg.p_sites)
        homes = self.homes.get(rel.name)
        if homes:
            split = CloneSplit(len(homes), tuple(self.weights(len(homes))), self.g.f)
            return [self._op(kind, cost, split, list(homes))], cost.output_stats
        return [self._op(kind, cost, self._degree(cost, kind.value))], cost.output_stats

    def stream(self, node: PlanNode) -> tuple[list[str], RelationStats]:
        """Open pipeline producing ``node``'s output, plus its statistics."""
        if node.is_leaf:
            return self.leaf(node)
        build_node, probe_node = node.children
        if build_node.is_leaf:
            build_ops, inner = self.leaf(build_node)
            build_in_deps: list[tuple[str, str, str]] = []
        else:
            sub_ops, inner = self.stream(build_node)
            store_c = estimate_operator(OpKind.STORE, inner, self.hw)
            scan_c = estimate_operator(OpKind.SCAN, inner, self.hw)
            split = self._paired(scan_c, store_c, "Store")
            store_id = self._op(OpKind.STORE, store_c, split)
            sub_pid = self._close(sub_ops + [store_id])
            scan_id = self._op(OpKind.SCAN, scan_c, split)
            build_ops = [scan_id]
            build_in_deps = [(sub_pid, store_id, scan_id)]
        build_c = estimate_operator(OpKind.BUILD, inner, self.hw, p_sites=self.cfg.p_sites)
        probe_ops, outer = self.stream(probe_node)
        probe_c = estimate_operator(OpKind.PROBE, outer, self.hw, second=inner)
        split = self._paired(probe_c, build_c, "Build")
        build_id = self._op(OpKind.BUILD, build_c, split)
        build_pid = self._close(build_ops + [build_id])
        for sub_pid, store_id, scan_id in build_in_deps:
            self.edges.append(Edge(sub_pid, build_pid, DISK_MAT, ((store_id, scan_id),)))
        probe_id = self._op(OpKind.PROBE, probe_c, split)
        self._pending_mem.append((build_pid, build_id, probe_id))
        return probe_ops + [probe_id], probe_c.output_stats

    def run(self, plan: PlanNode) -> TaskTree:
        self._pending_mem: list[tuple[str, str, str]] = []
        ops, out = self.stream(plan)
        store_c = estimate_operator(OpKind.STORE, out, self.hw)
        p = self.cfg.p_sites
        split = CloneSplit(p, tuple(self.weights(p)), self.g.f)
        ops.append(self._op(OpKind.STORE, store_c, split, list(range(p))))
        self._close(ops)
        for build_pid, build_id, probe_id in self._pending_mem:
            self.edges.append(Edge(build_pid, self.ops[probe_id].pipeline, MEM_MAT,
                                   ((build_id, probe_id),)))
        pipes = {pid: Pipeline(pid, tuple(c for o in ops for c in self.ops[o].clones),
                               tuple(ops), self.query)
                 for pid, ops in self.pipes.items()}
        return TaskTree(pipes, self.edges, self.ops, self.cfg.epsilon)


def expand_plan(plan: PlanNode, catalog: Mapping[str, RelationStats] | Iterable[RelationStats],
                cfg: SystemConfig, query_id: str = "q0",
                homes: Mapping[str, Sequence[int]] | None = None,
                weights: WeightFn = uniform_weights) -> TaskTree:
    """Macro-expand a plan into pipelines with fixed degrees and clones.

    ``homes`` maps relation names to the sites holding them; Scans of those
    relations are then rooted there.
    """
    if not isinstance(catalog, Mapping):
        catalog = {r.name: r for r in catalog}
    return _Expander(catalog, cfg, query_id, homes, weights).run(plan)


def expand_workload(plans: Sequence[PlanNode], catalog, cfg: SystemConfig,
                    homes=None, weights: WeightFn = uniform_weights) -> list[TaskTree]:
    return [expand_plan(p, catalog, cfg, f"q{i}", homes, weights) for i, p in enumerate(plans)]


# ---------------------------------------------------------------- merged units

@dataclass(frozen=True)
class Unit:
    """Pipelines glued by memory materialization, scheduled as one co-scheduled set.

    ``anchors`` pairs a clone with an earlier clone whose site it must reuse.
    """

    id: str
    clones: tuple[Clone, ...]
    pipelines: tuple[str, ...]
    query: str
    preds: tuple[str, ...]
    anchors: tuple[tuple[str, str], ...] = ()

    @property
    def t_max(self) -> float:
        return max(c.seq_time for c in self.clones)


def merge_pair(build: Clone, probe: Clone, epsilon: float) -> Clone:
    """Build and Probe clone sharing a site and a hash table, as one clone."""
    work = tuple(a + b for a, b in zip(build.work, probe.work))
    demand = tuple(max(a, b) for a, b in zip(build.demand, probe.demand))
    return Clone(f"{probe.operator_id}+{build.operator_id}", probe.index,
                 work, demand, seq_time(work, epsilon),
                 probe.home if probe.home is not None else build.home,
                 (build.cid, probe.cid))


def merged_units(tree: TaskTree) -> tuple[dict[str, Unit], dict[str, str]]:
    """Collapse memory-materialization edges; returns units and pipeline->unit."""
    parent = {pid: pid for pid in tree.pipelines}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in tree.edges:
        if e.kind == MEM_MAT:
            a, b = find(e.child), find(e.parent)
            if a != b:
                parent[a] = b
    topo = tree.topological_order()
    rank = {pid: i for i, pid in enumerate(topo)}
    groups: dict[str, list[str]] = defaultdict(list)
    for pid in topo:
        groups[find(pid)].append(pid)

    merge_with: dict[str, str] = {}
    for e in tree.edges:
        if e.kind == MEM_MAT:
            for b_op, p_op in e.pairs:
                merge_with[b_op] = p_op
    unit_of = {pid: root for root, members in groups.items() for pid in members}

    unit_preds = {root: sorted({unit_of[e.child] for e in tree.edges
                                if e.kind == DISK_MAT and unit_of[e.parent] == root},
                               key=lambda u: rank[u])
                  for root in groups}
    units: dict[str, Unit] = {}
    for root in _unit_order(groups, unit_preds, rank):
        members = groups[root]
        by_op: dict[str, list[Clone]] = defaultdict(list)
        order: list[str] = []
        for pid in members:
            for c in tree.pipelines[pid].clones:
                if c.operator_id not in by_op:
                    order.append(c.operator_id)
                by_op[c.operator_id].append(c)
        absorbed = set(merge_with) & set(by_op)
        clones: list[Clone] = []
        for op in order:
            if op in absorbed:
                continue
            builds = [b for b, p in merge_with.items() if p == op and b in by_op]
            cur = by_op[op]
            for b in builds:
                bc = by_op[b]
                if len(bc) != len(cur):
                    raise ValueError(f"{b} and {op} must have equal degrees to share sites")
                cur = [merge_pair(x, y, tree.epsilon) for x, y in zip(bc, cur)]
            clones.extend(cur)
        preds = unit_preds[root]
        anchors = []
        for e in tree.edges:
            if e.kind == DISK_MAT and unit_of[e.parent] == root:
                for src_op, dst_op in e.pairs:
                    src = tree.operators[src_op].clones if src_op in tree.operators else []
                    dst = by_op.get(dst_op, [])
                    anchors.extend((d.cid, s.cid) for s, d in zip(src, dst))
        query = tree.pipelines[members[0]].query
        units[root] = Unit(root, tuple(clones), tuple(members), query,
                           tuple(preds), tuple(anchors))
    return units, unit_of


def _unit_order(groups, preds, rank) -> list[str]:
    pending = {u: set(p) - {u} for u, p in preds.items()}
    if any(u in p for u, p in preds.items()):
        raise ValueError("memory-materialized group depends on itself")
    done: list[str] = []
    while pending:
        ready = [u for u, p in pending.items() if not p]
        if not ready:
            raise ValueError("merged units form a cycle")
        u = min(ready, key=lambda r: min(rank[m] for m in groups[r]))
        done.append(u)
        del pending[u]
        for p in pending.values():
            p.discard(u)
    return done


def critical_path_time(tree: TaskTree) -> float:
    """Longest chain of blocking dependencies, summing unit stand-alone times."""
    units, _ = merged_units(tree)
    finish: dict[str, float] = {}
    for uid, u in units.items():  # units come out in topological order
        finish[uid] = u.t_max + max((finish[p] for p in u.preds), default=0.0)
    return max(finish.values(), default=0.0)


# ---------------------------------------------------------------- workloads

def _remy_tree(n_joins: int, rng: random.Random) -> list:
    """Uniform random binary tree shape with ``n_joins`` internal nodes."""
    # nodes: index -> [left, right] for internal, None for leaf; grow by
    # replacing a uniformly chosen node with a join of it and a new leaf.
    kids: list[list[int] | None] = [None]
    parent_of = [-1]
    root = 0
    for _ in range(n_joins):
        target = rng.randrange(len(kids))
        leaf = len(kids)
        kids.append(None)
        parent_of.append(-1)
        node = len(kids)
        pair = [target, leaf] if rng.random() < 0.5 else [leaf, target]
        kids.append(pair)
        parent_of.append(parent_of[target])
        up = parent_of[target]
        if up == -1:
            root = node
        else:
            kids[up][kids[up].index(target)] = node
        parent_of[target] = node
        parent_of[leaf] = node
    return _shape(root, kids)


def _shape(i, kids):
    if kids[i] is None:
        return None
    return [_shape(kids[i][0], kids), _shape(kids[i][1], kids)]


def _right_deep(n_joins: int):
    shape = None
    for _ in range(n_joins):
        shape = [None, shape]
    return shape


def _fill(shape, names: list[str]):
    if shape is None:
        return names.pop(0)
    return {"join": [_fill(shape[0], names), _fill(shape[1], names)]}


def parse_mix(mix: str) -> list[int]:
    """``"5x8,10x2"`` -> five 8-join queries then ten 2-join queries."""
    out = []
    for part in mix.replace("×", "x").split(","):
        count, joins = part.strip().split("x")
        out += [int(joins)] * int(count)
    return out


@dataclass(frozen=True)
class WorkloadSpec:
    seed: int = 0
    n_queries: int = 20
    n_joins: int = 20
    shape: str = "bushy_random"
    mix: str | None = None
    min_tuples: int = 10_000
    max_tuples: int = 1_000_000

    def __post_init__(self) -> None:
        if self.shape not in ("bushy_random", "right_deep"):
            raise ValueError(f"unknown shape {self.shape}")
        if not 1 <= self.min_tuples <= self.max_tuples:
            raise ValueError("need 1 <= min_tuples <= max_tuples")

    def join_counts(self) -> list[int]:
        return parse_mix(self.mix) if self.mix else [self.n_joins] * self.n_queries

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: Mapping) -> WorkloadSpec:
        return cls(**dict(data))


def gen_workload(spec: WorkloadSpec | Mapping) -> tuple[list[RelationStats], list[PlanNode]]:
    """Random catalog and plans; a pure function of ``spec``."""
    if not isinstance(spec, WorkloadSpec):
        spec = WorkloadSpec.from_dict(spec)
    rng = random.Random(spec.seed)
    lo, hi = math.log(spec.min_tuples), math.log(spec.max_tuples)
    catalog: list[RelationStats] = []
    plans: list[PlanNode] = []
    for q, n in enumerate(spec.join_counts()):
        shape = _remy_tree(n, rng) if spec.shape == "bushy_random" else _right_deep(n)
        names = [f"R{q}_{i}" for i in range(n + 1)]
        for name in names:
            catalog.append(RelationStats(name, int(round(math.exp(rng.uniform(lo, hi))))))
        plans.append(PlanNode.from_json(_fill(shape, list(names)), f"q{q}"))
    return catalog, plans


def workload_to_json(catalog: Sequence[RelationStats], plans: Sequence[PlanNode],
                     spec: WorkloadSpec | Mapping | None = None,
                     homes: Mapping[str, Sequence[int]] | None = None) -> str:
    cat = []
    for r in catalog:
        entry = {"name": r.name, "tuples": r.tuples}
        if homes and r.name in homes:
            entry["home_sites"] = list(homes[r.name])
        cat.append(entry)
    if isinstance(spec, WorkloadSpec):
        spec = spec.to_dict()
    doc = {"catalog": cat, "plans": [p.to_json() for p in plans], "spec": spec or {}}
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def workload_from_json(text: str):
    """Returns ``(catalog, plans, homes, spec)``."""
    doc = json.loads(text)
    if not isinstance(doc, dict) or "catalog" not in doc or "plans" not in doc:
        raise ValueError("workload file needs 'catalog' and 'plans'")
    catalog, homes = [], {}
    for entry in doc["catalog"]:
        catalog.append(RelationStats(entry["name"], int(entry["tuples"])))
        if entry.get("home_sites"):
            homes[entry["name"]] = [int(s) for s in entry["home_sites"]]
    plans = [PlanNode.from_json(p, f"q{i}") for i, p in enumerate(doc["plans"])]
    return catalog, plans, homes, doc.get("spec", {})


def single_pipeline_tree(clones: Sequence[Clone], epsilon: float = 0.5,
                         pid: str = "p0") -> TaskTree:
    return TaskTree.from_pipelines([Pipeline(pid, tuple(clones))], epsilon=epsilon)


def make_pipeline(pid: str, specs: Sequence[tuple[Sequence[float], Sequence[float]]],
                  epsilon: float = 0.5, query: str = "") -> Pipeline:
    """Pipeline from ``(work, demand)`` pairs, one clone each."""
    return Pipeline(pid, tuple(make_clone(f"{pid}.op", i, w, v, epsilon)
                               for i, (w, v) in enumerate(specs)), (f"{pid}.op",), query)
