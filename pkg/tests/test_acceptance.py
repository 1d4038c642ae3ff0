"""Exit criteria, one test per criterion, each printing a PASS/FAIL line."""
import random
import statistics
import subprocess
import sys
import time
from collections import defaultdict
from fractions import Fraction

import pytest

from conftest import rand_clones, rand_pipes, report
from pqsched.bounds import (lb_independent, lb_pipelines, levelsched_guarantee,
                            opsched_guarantee, pipesched_guarantee, sites_needed,
                            tightness_bound, tightness_family)
from pqsched.config import SystemConfig
from pqsched.experiment import ExperimentSpec, run_experiment
from pqsched.oracle import oracle_opt
from pqsched.schedulers import level_sched, op_sched, pipe_sched, place_clones
from pqsched.schedulers.pipesched import PlacementError
from pqsched.simexec import execute, validate
from pqsched.vectors import make_clone, vector_length

pytestmark = pytest.mark.acceptance

N_BOUND = 1000
TOL = 1e-9


def _within(value, bound):
    return value <= bound * (1 + 1e-12) + TOL


def _keep(produced, sched, d, s=1, eps=0.5):
    produced.append((sched, SystemConfig(d=d, s=s, epsilon=eps)))


def _suite_bounds(produced):
    rng = random.Random(101)
    fails = defaultdict(int)
    recheck_fails = 0
    for _ in range(N_BOUND):
        p, d, sd = rng.randint(1, 12), rng.randint(1, 4), rng.randint(1, 2)
        lam, eps = rng.uniform(0.05, 1.0), rng.random()
        cs = rand_clones(rng, rng.randint(1, 30), d=d, s=sd, lam=lam, eps=eps)
        s = op_sched(cs, p)
        _keep(produced, s, d, sd, eps)
        fails["opsched"] += not _within(s.response_time, opsched_guarantee(cs, p))

    for _ in range(N_BOUND):
        lam, d, eps = rng.uniform(0.05, 0.9), rng.randint(1, 4), rng.random()
        cs = rand_clones(rng, rng.randint(1, 30), d=d, lam=lam, eps=eps)
        p = sites_needed(cs, lam)
        s = pipe_sched(cs, p)
        _keep(produced, s, d, eps=eps)
        fails["pipesched"] += not _within(s.response_time, pipesched_guarantee(cs, p, lam))

    done = 0
    while done < N_BOUND:
        lam, eps = rng.uniform(0.05, 0.9), rng.random()
        p, d = rng.randint(1, 16), rng.randint(1, 4)
        pipes = rand_pipes(rng, rng.randint(1, 10), max_clones=8, d=d, lam=lam, eps=eps)
        # the guarantee presumes every pipeline is schedulable on its own
        if any(sites_needed(pp.clones, lam) > p for pp in pipes):
            continue
        done += 1
        bound = levelsched_guarantee(pipes, p, lam)
        base = level_sched(pipes, p, lam, recheck=False)
        tuned = level_sched(pipes, p, lam)
        _keep(produced, base, d, eps=eps)
        _keep(produced, tuned, d, eps=eps)
        fails["levelsched"] += not _within(base.response_time, bound)
        recheck_fails += not _within(tuned.response_time, bound)
    return fails, recheck_fails


def _suite_schedulability(produced):
    rng = random.Random(202)
    failures = 0
    for _ in range(1000):
        lam = rng.uniform(0.05, 0.95)
        d, sd = rng.randint(1, 4), rng.randint(1, 3)
        cs = rand_clones(rng, rng.randint(1, 40), d=d, s=sd, lam=lam)
        p = sites_needed(cs, lam) + rng.randint(0, 2)
        try:
            _keep(produced, pipe_sched(cs, p), d, sd)
        except PlacementError:
            failures += 1
    return failures


def _suite_oracle(produced):
    rng = random.Random(303)
    violations = []
    done = 0
    while done < 500:
        p = rng.randint(1, 3)
        lam, d, eps = rng.uniform(0.1, 0.9), rng.randint(1, 3), rng.random()
        if done % 2 == 0:
            inst = rand_clones(rng, rng.randint(1, 6), d=d, lam=lam, eps=eps)
            heur = op_sched(inst, p)
            lb = lb_independent(inst, p).lb
        else:
            inst = rand_pipes(rng, rng.randint(1, 3), max_clones=2, d=d, lam=lam, eps=eps)
            if any(sites_needed(pp.clones, lam) > p for pp in inst):
                continue
            heur = level_sched(inst, p, lam)
            lb = lb_pipelines(inst, p).lb
        done += 1
        _keep(produced, heur, d, eps=eps)
        opt = oracle_opt(inst, p)
        if not (lb <= opt + TOL and opt <= heur.response_time + TOL):
            violations.append((done, lb, opt, heur.response_time))
    return violations


@pytest.fixture(scope="module")
def suites():
    out = {"schedules": [], "elapsed": {}}
    for name, fn in (("bounds", _suite_bounds), ("schedulability", _suite_schedulability),
                     ("oracle", _suite_oracle)):
        t0 = time.perf_counter()
        out[name] = fn(out["schedules"])
        out["elapsed"][name] = time.perf_counter() - t0
    return out


def test_criterion_1_guarantees(suites):
    fails, recheck_fails = suites["bounds"]
    secs = suites["elapsed"]["bounds"]
    ok = sum(fails.values()) == 0 and secs < 60
    report(1, ok, f"{N_BOUND} instances per algorithm, violations {dict(fails)}, "
                  f"{secs:.1f}s (re-check variant violations: {recheck_fails})")
    assert ok


def test_criterion_2_schedulability(suites):
    failures = suites["schedulability"]
    report(2, failures == 0, f"1000 granular pipelines, {failures} placement failures")
    assert failures == 0


@pytest.mark.parametrize("p", [2, 4])
@pytest.mark.parametrize("k", [3, 5])
def test_criterion_3_tightness(p, k):
    vecs = tightness_family(p, k, 0.01)
    clones = [make_clone("t", i, [1.0], v, 0.5) for i, v in enumerate(vecs)]
    used = len(set(place_clones(clones, p).values()))
    try:
        place_clones(clones, p - 1)
        fewer = True
    except PlacementError:
        fewer = False
    ratio = tightness_bound(p, k, 0.01) / p
    ok = used == p and not fewer and 1 <= ratio <= 1.05
    report(3, ok, f"P={p} k={k}: {used} sites used, fits on P-1: {fewer}, bound/P={ratio:.4f}")
    assert ok


def test_criterion_4_oracle_sandwich(suites):
    violations = suites["oracle"]
    secs = suites["elapsed"]["oracle"]
    ok = not violations and secs < 120
    report(4, ok, f"500 instances, {len(violations)} sandwich violations, {secs:.1f}s")
    assert ok


def test_criterion_5_vector_length():
    rng = random.Random(505)
    bad = 0
    for _ in range(10_000):
        d = rng.randint(1, 4)
        n = rng.randint(1, 12)
        # multiples of 2**-10 keep every sum exact in binary floating point
        vecs = [[rng.randint(0, 4096) / 1024 for _ in range(d)] for _ in range(n)]
        k = rng.randint(1, n)
        parts = defaultdict(list)
        for v in vecs:
            parts[rng.randrange(k)].append(v)
        whole = Fraction(vector_length(vecs))
        total = sum(Fraction(vector_length(part)) for part in parts.values())
        bad += not (total / d <= whole <= total)
    report(5, bad == 0, f"10000 partitions, {bad} violations")
    assert bad == 0


def test_criterion_6_executor_equivalence(suites):
    mismatched = invalid = 0
    for s, cfg in suites["schedules"]:
        if validate(s, cfg):
            invalid += 1
            continue
        total = execute(s, cfg).total
        mismatched += abs(total - s.response_time) > TOL * max(1.0, abs(s.response_time))
    n = len(suites["schedules"])
    ok = mismatched == 0 and invalid == 0
    report(6, ok, f"{n} schedules replayed, {mismatched} time mismatches, "
                  f"{invalid} with violations")
    assert ok


TREND_SITES = [10, 20, 30, 40, 50, 60]
TREND_LAMBDAS = [0.2, 0.5, 0.8]


def test_criterion_7_trends():
    spec = ExperimentSpec.from_dict({
        "workload": {"n_queries": 20, "n_joins": 20, "shape": "bushy_random"},
        "sites": TREND_SITES, "memory_mb": [96], "lambdas": TREND_LAMBDAS, "fs": [0.6],
        "epsilons": [0.5], "algorithms": ["treesched", "levelsched"], "seed": 7})
    t0 = time.perf_counter()
    rows = run_experiment(spec)
    secs = time.perf_counter() - t0
    cells = defaultdict(list)
    for r in rows:
        cells[(r["P"], r["lambda"], r["algo"])].append(r)
    infeasible = sum(r["status"] != "ok" for r in rows)

    def mean(p, lam, algo, key):
        return statistics.mean(r[key] for r in cells[(p, lam, algo)] if r["status"] == "ok")

    worst_ratio = max(mean(p, lam, "treesched", "ratio")
                      for p in TREND_SITES for lam in TREND_LAMBDAS)
    a = worst_ratio < 2.5
    b_fail = []
    for p in TREND_SITES:
        resp = [mean(p, lam, "treesched", "response_ms") for lam in TREND_LAMBDAS]
        ratio = [mean(p, lam, "treesched", "ratio") for lam in TREND_LAMBDAS]
        for i in range(len(TREND_LAMBDAS) - 1):
            if resp[i + 1] < resp[i] * 0.95 or ratio[i + 1] > ratio[i] * 1.05:
                b_fail.append(p)
    c_fail = [(p, lam) for p in TREND_SITES for lam in TREND_LAMBDAS
              if mean(p, lam, "levelsched", "response_ms")
              > mean(p, lam, "treesched", "response_ms") * (1 + 1e-12)]
    ok = a and not b_fail and not c_fail and infeasible == 0 and secs < 300
    report(7, ok, f"(a) worst mean ratio {worst_ratio:.3f}; (b) non-monotone at P={b_fail}; "
                  f"(c) level > tree at {c_fail}; {infeasible} infeasible rows; {secs:.1f}s")
    assert ok


def test_criterion_8_baseline_ordering():
    seed, reps = 11, 3
    spec = ExperimentSpec.from_dict({
        "workload": {"shape": "right_deep", "mix": "5x8,10x2", "min_tuples": 10_000,
                     "max_tuples": 100_000},
        "sites": [16, 32], "memory_mb": [64], "lambdas": [0.2], "fs": [0.6],
        "epsilons": [0.5], "algorithms": ["treesched", "hier", "zsched"],
        "placement": "nodeclust", "repetitions": reps, "seed": seed, "unit": "workload"})
    rows = run_experiment(spec)
    resp = defaultdict(list)
    for r in rows:
        if r["status"] == "ok":
            resp[(r["P"], r["algo"])].append(r["response_ms"])
    parts, ok = [], True
    for p in (16, 32):
        if not all(len(resp[(p, a)]) == reps for a in ("treesched", "hier", "zsched")):
            ok = False
            parts.append(f"P={p}: infeasible rows")
            continue
        tree = statistics.mean(resp[(p, "treesched")])
        z = statistics.mean(resp[(p, "zsched")]) / tree
        h = statistics.mean(resp[(p, "hier")]) / tree
        ok &= z >= 2.0 and h >= 1.0
        parts.append(f"P={p}: zsched/tree={z:.2f} hier/tree={h:.2f}")
    report(8, ok, f"seed={seed} reps={reps}; " + "; ".join(parts))
    assert ok


def test_criterion_9_determinism(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(
        '{"workload": {"n_queries": 4, "n_joins": 6, "max_tuples": 100000},'
        ' "sites": [8, 16], "memory_mb": [64], "lambdas": [0.2, 0.5],'
        ' "algorithms": ["treesched", "levelsched", "hier", "zsched"],'
        ' "placement": "random", "repetitions": 2, "seed": 5}')
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        proc = subprocess.run([sys.executable, "-m", "pqsched.cli", "experiment", "--spec",
                               str(spec), "--out", str(out)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    same = outs[0] == outs[1]
    report(9, same, f"two experiment runs, {len(outs[0])} bytes, identical: {same}")
    assert same
