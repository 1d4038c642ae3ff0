import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import rand_clones, rand_pipes
from pqsched import _kernels
from pqsched.bounds import lb_independent, opsched_guarantee, tree_bound
from pqsched.config import SystemConfig
from pqsched.cost_model import InfeasibleError, OpKind, RelationStats
from pqsched.oracle import oracle_independent
from pqsched.placement import POLICIES, hash_table_sites, place
from pqsched.plan import (DISK_MAT, Edge, PlanNode, TaskTree, WorkloadSpec, expand_plan,
                          gen_workload, join, make_pipeline)
from pqsched.schedulers import (first_level, hier_sched, level_sched, level_threshold, op_sched,
                                pipe_sched, place_clones, tree_sched, tree_sched_online, zsched)
from pqsched.schedulers.pipesched import PlacementError, density_order
from pqsched.simexec import execute, validate
from pqsched.vectors import make_clone, subset_exec_time

CFG = SystemConfig()


def ok(schedule, cfg=None):
    assert validate(schedule, cfg) == []
    return schedule


# -------------------------------------------------------------- op_sched

def test_opsched_single_clone():
    c = make_clone("a", 0, [3, 4], [0.2], 0.5)
    s = ok(op_sched([c], 2))
    assert s.site_of()[c.cid] == 0 and s.response_time == c.seq_time


def test_opsched_serializes_incompatible_clones():
    cs = [make_clone("a", i, [i + 1.0, 2.0], [0.6], 0.5) for i in range(3)]
    s = ok(op_sched(cs, 1))
    assert s.response_time == pytest.approx(sum(c.seq_time for c in cs))
    assert len(s.levels[0].shelves()[0]) == 3


def test_opsched_between_optimum_and_guarantee(rng):
    for _ in range(20):
        cs = rand_clones(rng, 6, d=2, s=1, lam=0.6)
        s = ok(op_sched(cs, 2))
        assert oracle_independent(cs, 2) <= s.response_time + 1e-9
        assert s.response_time <= opsched_guarantee(cs, 2) + 1e-9


def test_opsched_empty():
    assert op_sched([], 3).response_time == 0.0


# -------------------------------------------------------------- pipe_sched

EX4 = [([10, 5], [0.2]), ([15, 0], [0.3]), ([7, 9], [0.3]), ([2, 10], [0.35])]


def test_density_placement_worked_example():
    pipe = make_pipeline("p", EX4)
    c = [x.cid for x in pipe.clones]
    order = density_order(pipe.clones)
    assert list(order) == [0, 1, 2, 3]
    s = ok(pipe_sched(pipe, 2))
    assert {x: s.site_of()[x] for x in c} == {c[0]: 0, c[2]: 0, c[1]: 1, c[3]: 1}
    assert s.levels[0].height == pytest.approx(max(
        subset_exec_time([pipe.clones[0], pipe.clones[2]]),
        subset_exec_time([pipe.clones[1], pipe.clones[3]])))


def test_pipesched_single_clone():
    pipe = make_pipeline("p", [([4, 2, 1], [0.1])])
    s = ok(pipe_sched(pipe, 3))
    assert len(s.levels) == 1 and s.response_time == pipe.clones[0].seq_time


def test_rooted_clones_stay_home():
    cs = [make_clone("r", 0, [5.0], [0.5], 0.5, home=1), make_clone("f", 0, [5.0], [0.6], 0.5)]
    sites = place_clones(cs, 2)
    assert sites == {"r#0": 1, "f#0": 0}


def test_placement_failure_names_clone():
    cs = [make_clone("a", i, [1.0], [0.6], 0.5) for i in range(3)]
    with pytest.raises(PlacementError) as err:
        place_clones(cs, 2)
    assert err.value.clone_id == "a#2"


# -------------------------------------------------------------- level_sched

def test_one_pipe_is_one_level():
    pipe = make_pipeline("p", EX4)
    a = ok(level_sched([pipe], 2, 0.35))
    assert len(a.levels) == 1
    assert a.response_time == pipe_sched(pipe, 2).response_time


def test_threshold_cuts_levels():
    pipes = [make_pipeline(f"p{i}", [([5.0], [0.2])] * 3) for i in range(2)]
    assert level_threshold(1, 0.2, 1) == pytest.approx(0.8)
    s = ok(level_sched(pipes, 1, 0.2))
    assert len(s.levels) == 2


def test_recheck_fills_residual():
    demands = [np.array([0.5]), np.array([0.5]), np.array([0.05])]
    assert first_level(demands, 0.8, recheck=False) == [0]
    assert first_level(demands, 0.8, recheck=True) == [0, 2]
    pipes = [make_pipeline("p1", [([10.0, 0.0], [0.5])], 1.0),
             make_pipeline("p2", [([9.0, 0.0], [0.5])], 1.0),
             make_pipeline("p3", [([0.0, 1.0], [0.05])], 1.0)]
    base = ok(level_sched(pipes, 1, 0.2, recheck=False))
    assert [lv.pipes for lv in base.levels] == [("p1",), ("p2", "p3")]
    re = ok(level_sched(pipes, 1, 0.2, recheck=True))
    assert [lv.pipes for lv in re.levels] == [("p1", "p3"), ("p2",)]
    assert [lv.height for lv in re.levels] == pytest.approx([10.0, 9.0])


def test_threshold_needs_lambda_below_one():
    with pytest.raises(ValueError):
        level_threshold(4, 1.0, 1)


@given(st.integers(0, 10**6))
def test_recheck_never_adds_levels(seed):
    rng = random.Random(seed)
    pipes = rand_pipes(rng, rng.randint(1, 8), lam=0.25)
    base = level_sched(pipes, 4, 0.25, recheck=False)
    re = level_sched(pipes, 4, 0.25, recheck=True)
    assert len(re.levels) <= len(base.levels)


# -------------------------------------------------------------- tree_sched

def test_single_join_one_level_colocated():
    t = expand_plan(join("A", "B"), [RelationStats("A", 10_000), RelationStats("B", 20_000)],
                    CFG, "q0")
    s = ok(tree_sched(t, CFG.p_sites, CFG.lam))
    assert len(s.levels) == 1
    merged = [c for c in s.clones.values() if len(c.parts) == 2]
    build = next(o for o in t.operators.values() if o.kind is OpKind.BUILD)
    assert len(merged) == len(build.clones)


def test_disk_chain_runs_back_to_back():
    pipes = [make_pipeline("a", [([5.0], [0.1])], 1.0), make_pipeline("b", [([7.0], [0.1])], 1.0)]
    t = TaskTree.from_pipelines(pipes, [Edge("a", "b", DISK_MAT)], epsilon=1.0)
    s = ok(tree_sched(t, 8, 0.2))
    assert s.response_time == 12.0


def test_materialized_result_read_where_written():
    plan = PlanNode.from_json({"join": [{"join": ["A", "B"]}, "C"]})
    cat = [RelationStats(n, 30_000) for n in "ABC"]
    t = expand_plan(plan, cat, CFG, "q0")
    s = ok(tree_sched(t, CFG.p_sites, CFG.lam))
    assert s.colocate
    for a, b in s.colocate:
        assert s.site_of()[a] == s.site_of()[b]


def test_bushy_workload_ratio_small():
    cat, plans = gen_workload(WorkloadSpec(seed=5, n_queries=4, n_joins=40))
    cfg = CFG.with_(memory_mb=96)
    ratios = []
    for i, p in enumerate(plans):
        t = expand_plan(p, cat, cfg, f"q{i}")
        s = ok(tree_sched(t, cfg.p_sites, cfg.lam))
        ratios.append(s.response_time / tree_bound(t, cfg.p_sites).lb)
    assert np.mean(ratios) < 2.0


def _one_pipe_tree(pid, t):
    return TaskTree.from_pipelines([make_pipeline(pid, [([t], [0.1])], 1.0, query=pid)],
                                   epsilon=1.0)


def test_online_with_all_arrivals_at_zero_matches_batch():
    trees = [_one_pipe_tree("a", 5.0), _one_pipe_tree("b", 3.0)]
    online = tree_sched_online([(0.0, t) for t in trees], 2, 0.2)
    batch = tree_sched(TaskTree.union(trees), 2, 0.2)
    assert [lv.pipes for lv in online.levels] == [lv.pipes for lv in batch.levels]
    assert online.response_time == batch.response_time


def test_online_late_query_waits_for_next_level():
    s = ok(tree_sched_online([(0.0, _one_pipe_tree("a", 5.0)), (1.0, _one_pipe_tree("b", 3.0))],
                             4, 0.2))
    assert [lv.pipes for lv in s.levels] == [("a",), ("b",)]
    assert s.levels[1].start == 5.0
    assert s.query_completion() == {"a": 5.0, "b": 8.0}


def test_online_idle_gap_and_empty_stream():
    s = tree_sched_online([(10.0, _one_pipe_tree("a", 2.0))], 2, 0.2)
    assert s.levels[0].start == 10.0 and s.response_time == 12.0
    assert tree_sched_online([], 2, 0.2).response_time == 0.0


# -------------------------------------------------------------- baselines

def _workload(seed=3, n=3, joins=4, shape="bushy_random", mix=None, hi=100_000):
    return gen_workload(WorkloadSpec(seed=seed, n_queries=n, n_joins=joins, shape=shape,
                                     mix=mix, max_tuples=hi))


def test_hier_single_pipeline_grows_from_memory_minimum():
    cat = [RelationStats("A", 50_000), RelationStats("B", 50_000), RelationStats("C", 50_000)]
    plan = PlanNode.from_json({"join": ["A", {"join": ["B", "C"]}]})
    t = expand_plan(plan, cat, CFG, "q0")
    frozen = ok(hier_sched(t, CFG, max_steps=0))
    grown = ok(hier_sched(t, CFG))
    minimum = frozen.params["allotment"]
    final = grown.params["allotment"]
    for job in minimum:
        assert all(a <= b for a, b in zip(minimum[job], final[job]))
    assert grown.params["scalar_makespan"] <= frozen.params["scalar_makespan"]


def test_hier_respects_lower_bound():
    cat, plans = _workload()
    for i, p in enumerate(plans):
        t = expand_plan(p, cat, CFG, f"q{i}")
        s = ok(hier_sched(t, CFG))
        assert s.response_time >= lb_independent(list(s.clones.values()), CFG.p_sites).lb - 1e-9
        assert execute(s, CFG).total == pytest.approx(s.response_time, rel=1e-9)


def test_hier_keeps_rooted_scans_home():
    cat, plans = _workload(seed=4)
    homes = place("nodeclust", cat, CFG.p_sites, seed=4)
    t = TaskTree.union([expand_plan(p, cat, CFG, f"q{i}", homes) for i, p in enumerate(plans)])
    s = ok(hier_sched(t, CFG))
    for c in s.clones.values():
        if ".Scan" in c.operator_id and c.home is not None:
            assert s.site_of()[c.cid] == c.home


def _joins_on(s, tree):
    out = {}
    for c in s.clones.values():
        if "+" in c.operator_id:
            out.setdefault(c.operator_id, set()).add(s.site_of()[c.cid])
    return out


def test_zsched_nodeclust_runs_each_join_on_one_site():
    cat, plans = _workload(seed=2, shape="right_deep", mix="2x3,2x2", hi=50_000)
    homes = place("nodeclust", cat, 8, seed=2)
    cfg = CFG.with_(p_sites=8)
    t = TaskTree.union([expand_plan(p, cat, cfg, f"q{i}", homes) for i, p in enumerate(plans)])
    s = ok(zsched(t, cfg))
    joins = _joins_on(s, t)
    assert joins and all(len(v) == 1 for v in joins.values())
    assert execute(s, cfg).total == pytest.approx(s.response_time, rel=1e-9)


def test_zsched_declust_runs_each_join_everywhere():
    cat, plans = _workload(seed=2, shape="right_deep", mix="2x3", hi=50_000)
    homes = place("declust", cat, 6)
    cfg = CFG.with_(p_sites=6)
    t = TaskTree.union([expand_plan(p, cat, cfg, f"q{i}", homes) for i, p in enumerate(plans)])
    s = ok(zsched(t, cfg))
    assert all(v == set(range(6)) for v in _joins_on(s, t).values())


def test_zsched_oversized_join_is_infeasible():
    cat = [RelationStats("A", 400_000), RelationStats("B", 1000)]
    cfg = CFG.with_(memory_mb=64)
    t = expand_plan(join("A", "B"), cat, cfg, "q0", {"A": [0], "B": [1]})
    tree_sched(t, cfg.p_sites, cfg.lam)
    with pytest.raises(InfeasibleError):
        zsched(t, cfg)


def test_zsched_needs_homes():
    cat, plans = _workload(n=1)
    with pytest.raises(ValueError):
        zsched(expand_plan(plans[0], cat, CFG, "q0"), CFG)


# -------------------------------------------------------------- placement

def test_placement_policies():
    cat, plans = _workload(seed=9, n=2, joins=3)
    for policy in POLICIES:
        homes = place(policy, cat, 12, seed=9, plans=plans)
        assert set(homes) == {r.name for r in cat}
        assert all(h == sorted(set(h)) and all(0 <= x < 12 for x in h) for h in homes.values())
        assert homes == place(policy, cat, 12, seed=9, plans=plans)
    assert all(len(h) == 1 for h in place("nodeclust", cat, 12).values())
    assert all(h == [0, 1, 2] for h in place("declust_1_4", cat, 12).values())
    assert all(h[0] < 3 for h in place("nodeclust_1_4", cat, 12).values())
    with pytest.raises(ValueError):
        place("bogus", cat, 4)


def test_hash_table_sites():
    assert hash_table_sites(RelationStats("r", 10_000), CFG.hw) == 1
    assert hash_table_sites(RelationStats("r", 1_000_000), CFG.hw) == 11


# -------------------------------------------------------------- kernels

@pytest.mark.skipif(_kernels.pipe_place_numba is None, reason="numba not installed")
@given(st.integers(0, 10**6), st.integers(1, 40), st.integers(1, 8))
def test_kernel_paths_agree(seed, n, p):
    rng = np.random.default_rng(seed)
    W = rng.uniform(0, 100, (n, 3)) * (rng.random((n, 3)) > 0.2)
    V = rng.uniform(0, 0.5, (n, 1))
    T = 0.5 * W.max(axis=1) + 0.5 * W.sum(axis=1)
    order = np.argsort(-T, kind="stable")
    a = _kernels.pipe_place(order, W, V, p, use_numba=False)
    b = _kernels.pipe_place(order, W, V, p, use_numba=True)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]
    x = _kernels.lpt_shelves(order, T, W, V, p, use_numba=False)
    y = _kernels.lpt_shelves(order, T, W, V, p, use_numba=True)
    assert np.array_equal(x[0], y[0]) and np.array_equal(x[1], y[1])
