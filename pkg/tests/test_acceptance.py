"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones; nothing here is tuned to the outcome.
"""
import math
import random
import time
from collections import Counter

import numpy as np

from rrtpark.car_laws import binary_family, binary_law
from rrtpark.exact_kit import (
    MAX_PLANE_N,
    catalan,
    count_fpt,
    exact_expected_flux,
    first_moment_bound,
    iter_fpt,
    subcritical_constants,
)
from rrtpark.harness import ExperimentConfig, run_experiment
from rrtpark.harness.cli import main
from rrtpark.harness.experiments import tree_at_time_root_visits
from rrtpark.harness.runner import trial_rng
from rrtpark.parking_engine import IncrementalParker, park, park_sequential
from rrtpark.rrt_core import sample_recursive_tree, sample_yule_tree


def test_c01_abelian_invariance(report):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    shuffler = random.Random(101)
    law = binary_law(0.8)
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(1, 201))
        tree = sample_recursive_tree(n, rng)
        cars = law.sample(rng, n)
        ref = park(tree, cars)
        order = [v for v, c in enumerate(cars) for _ in range(int(c))]
        for _ in range(100):
            shuffler.shuffle(order)
            mismatches += park_sequential(tree, cars, order) != ref
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 60
    report(1, ok, f"mismatches={mismatches} over 200x100 orders, {elapsed:.1f}s")
    assert ok


def test_c02_incremental_equals_batch(report):
    start = time.perf_counter()
    bad = 0
    for seed in range(100):
        p = IncrementalParker(binary_law(0.5), np.random.default_rng(seed))
        for _ in range(10_000):
            p.step()
            bad += p.state() != park(p.tree, p.config)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and elapsed < 120
    report(2, ok, f"state mismatches={bad} over 100 seeds x 10^4 steps, {elapsed:.1f}s")
    assert ok


def test_c03_exact_oracle_agreement(report):
    worst = 0.0
    n2 = None
    for alpha in (0.2, 0.5, 1.0):
        cfg = ExperimentConfig("sim-flux", law=f"binary:alpha={alpha}", grid=(2, 3, 4, 5),
                               trials=1_000_000, seed=303)
        for row in run_experiment(cfg).rows:
            exact = exact_expected_flux(row["n"], binary_law(alpha))
            z = abs(row["mean_flux"] - exact) / row["se_flux"]
            worst = max(worst, z)
            if alpha == 0.5 and row["n"] == 2:
                n2 = exact
    ok = worst <= 3 and n2 == 0.3125
    report(3, ok, f"max |MC - exact| / se = {worst:.2f}; oracle(n=2, a=0.5) = {n2}")
    assert ok


def test_c04_enumeration_fixtures(report):
    from rrtpark.exact_kit import enum_plane_trees

    catalan_ok = all(
        sum(1 for _ in enum_plane_trees(n)) == catalan(n - 1) for n in range(1, MAX_PLANE_N + 1)
    )
    fix = (count_fpt(1, 1, 3), count_fpt(2, 2, 3), count_fpt(2, 3, 3))
    # iter_fpt asserts psi[root] = m - n + 1 on every instance it yields
    n_inst = sum(1 for n in range(1, 7) for m in range(n, 3 * n + 1) for _ in iter_fpt(n, m, 3))
    ok = catalan_ok and fix == (1, 2, 3)
    report(4, ok, f"catalan n<=12 ok={catalan_ok}; |FPT|(1,1),(2,2),(2,3) = {fix}; "
                  f"{n_inst} instances checked for root visits")
    assert ok


def test_c05_yule_size_law(report):
    start = time.perf_counter()
    tvs = {}
    for t in (0.5, 1.0, 2.0):
        rng = np.random.default_rng(int(t * 100))
        sizes = Counter(sample_yule_tree(t, rng).n_alive for _ in range(100_000))
        q = math.exp(-t)
        top = max(sizes)
        pmf = {k: q * (1 - q) ** (k - 1) for k in range(1, top + 1)}
        tail = (1 - q) ** top
        tvs[t] = 0.5 * (sum(abs(sizes.get(k, 0) / 1e5 - pmf[k]) for k in pmf) + tail)
    elapsed = time.perf_counter() - start
    ok = max(tvs.values()) <= 0.02 and elapsed < 60
    report(5, ok, "TV to Geometric(e^-t): "
           + ", ".join(f"t={t}: {v:.4f}" for t, v in tvs.items()) + f"; {elapsed:.1f}s")
    assert ok


def test_c06_flux_per_vertex_stabilizes(report):
    start = time.perf_counter()
    cfg = ExperimentConfig("sim-flux", law="binary:alpha=0.5", grid=(10**4, 10**5, 10**6),
                           trials=200, seed=606)
    est = [r["flux_over_n"] for r in run_experiment(cfg).rows]
    rel = [abs(b - a) / a for a, b in zip(est, est[1:])]
    elapsed = time.perf_counter() - start
    ok = all(e > 0 for e in est) and max(rel) < 0.10 and est[-1] > 1e-3 and elapsed < 1200
    report(6, ok, f"flux/n = {[round(e, 5) for e in est]}, successive rel diff "
                  f"{[round(r, 4) for r in rel]}, {elapsed:.1f}s")
    assert ok


def test_c07_empty_root_and_spine_bounds(report):
    start = time.perf_counter()
    worst = -math.inf
    for alpha in (0.5, 1.0):
        cfg = ExperimentConfig("root-empty", law=f"binary:alpha={alpha}", grid=(1.0, 2.0, 4.0),
                               trials=10_000, seed=707)
        for r in run_experiment(cfg).rows:
            worst = max(worst, r["p_empty"] - r["bound"] - 3 * r["se"])
    cfg = ExperimentConfig("spine", law="binary:alpha=0.5", trials=10_000, seed=708,
                           params={"K": 10})
    spine = run_experiment(cfg).rows
    worst_spine = max(r["p_empty"] - r["bound"] - 3 * r["se"] for r in spine)
    elapsed = time.perf_counter() - start
    ok = worst <= 0 and worst_spine <= 0 and elapsed < 600
    report(7, ok, f"max(empirical - bound - 3se): root {worst:.4f}, spine {worst_spine:.4f}; "
                  f"P(S_10 empty) = {spine[-1]['p_empty']:.4f} vs {spine[-1]['bound']:.4f}; "
                  f"{elapsed:.1f}s")
    assert ok


def test_c08_subcritical_first_moment(report):
    fam = binary_family()
    _, c = subcritical_constants(fam)
    cfg = ExperimentConfig("subcritical", law="binary", grid=(5.0, 10.0, 20.0),
                           trials=20_000, seed=808)
    rows = run_experiment(cfg).rows
    means = [r["mean_flux"] for r in rows]
    scaling = [math.sqrt(r["alpha"]) * r["t"] for r in rows]
    trend_ok = all(b <= a for a, b in zip(means, means[1:])) and means[-1] < 0.05
    scale_ok = all(abs(s - c / 2) < 1e-12 for s in scaling)

    b = first_moment_bound(1.0, fam, 0.01, 5, 5)
    law = binary_law(0.01)
    psi = np.array([tree_at_time_root_visits(1.0, law, trial_rng(809, "c08", 0, i))
                    for i in range(200_000)])
    m, se = psi.mean(), psi.std(ddof=1) / math.sqrt(psi.size)
    bound_ok = m <= b.truncated_sum + b.tail + 3 * se
    # the closed form diverges here (C t alpha^(1/2) = 1.2), so also check the finite part
    trunc_ok = m <= b.truncated_sum + 3 * se
    ok = trend_ok and scale_ok and bound_ok and trunc_ok
    report(8, ok, f"E[flux] at t=5,10,20: {means}; E[psi](t=1, a=0.01) = {m:.5f} +- {se:.5f} "
                  f"<= truncated {b.truncated_sum:.5f} + tail {b.tail} (diverged={b.diverged})")
    assert ok


def test_c09_critical_window_trends(report):
    start = time.perf_counter()
    grid = (10**3, 10**4, 10**5, 10**6)
    # P(flux > 0) on the subcritical side falls from ~1.5e-3 to ~2e-4 across the
    # grid; the last step (~1.2e-4) needs ~4e5 trials to be 3 se wide.
    sub_cfg = ExperimentConfig("window", law="binary", grid=grid, p_grid=(3.0,),
                               alpha_c=1.0, trials=400_000, seed=909)
    sup_cfg = ExperimentConfig("window", law="binary", grid=grid, p_grid=(1.0,),
                               alpha_c=1.0, trials=200, seed=910)
    sub = [r["p_flux_pos"] for r in run_experiment(sub_cfg).rows]
    sup = [r["mean_flux"] for r in run_experiment(sup_cfg).rows]
    sub_ok = all(b <= a for a, b in zip(sub, sub[1:])) and sub[-1] < 0.05
    sup_ok = all(b > a for a, b in zip(sup, sup[1:])) and sup[-1] > 10
    elapsed = time.perf_counter() - start
    ok = sub_ok and sup_ok and elapsed < 1800
    report(9, ok, f"p=3 P(flux>0) = {sub} (4e5 trials); p=1 E[flux] = {sup} (200 trials); "
                  f"{elapsed:.1f}s")
    assert ok


def test_c10_theta_loglog_trend(report):
    start = time.perf_counter()
    alphas = (0.05, 0.02, 0.01, 0.005)
    cfg = ExperimentConfig("theta", law="binary", grid=alphas, trials=200, seed=1010,
                           params={"C": 1, "n_cap": 1 << 25})
    rows = run_experiment(cfg).rows
    ratios = [r["median_ratio"] for r in rows]
    censored = [r["median_censored"] for r in rows]
    in_band = all(not c and 0.3 <= x <= 0.8 for c, x in zip(censored, ratios))
    dist = [abs(x - 0.5) for x in ratios]
    toward = sum(b < a for a, b in zip(dist, dist[1:]))
    elapsed = time.perf_counter() - start
    ok = in_band and toward >= 3 and elapsed < 1800
    detail = ", ".join(
        f"a={r['alpha']}: median ratio {r['median_ratio']:.3f} (reached {r['reached']}/200)"
        if not r["median_censored"] else
        f"a={r['alpha']}: median censored at n_cap={r['n_cap']} (reached {r['reached']}/200)"
        for r in rows
    )
    report(10, ok, f"{detail}; steps toward 1/2: {toward}/3; {elapsed:.1f}s")
    assert ok


def test_c11_local_limit_statistics(report):
    cfg = ExperimentConfig("bs-ball", trials=100_000, seed=1111,
                           params={"n": 100_000, "r": 1, "pairs": 1000})
    summary = {r["key"]: r["empirical"] for r in run_experiment(cfg).rows if r["kind"] == "summary"}
    tv = summary["tv_children_geometric"]
    dev = summary["max_joint_minus_product"]
    ok = tv <= 0.02 and dev <= 0.01
    report(11, ok, f"children TV = {tv:.4f}; max joint-minus-product = {dev:.5f}; "
                   f"ball TV to limit = {summary['tv_ball_limit']:.4f}")
    assert ok


def test_c12_reproducible_across_workers(tmp_path, report):
    commands = [
        ["sim-flux", "--n", "4,50,5000", "--trials", "3000"],
        ["window", "--n", "100,10000", "--p", "1,3", "--trials", "120"],
        ["theta", "--alpha", "0.5,0.2", "--trials", "80"],
        ["spine", "--K", "4", "--trials", "1200"],
        ["root-empty", "--t", "0,2", "--trials", "3000"],
        ["bs-ball", "--n", "2000", "--pairs", "100", "--trials", "1000"],
    ]
    same = []
    for cmd in commands:
        outs = []
        for workers in (1, 8):
            path = tmp_path / f"{cmd[0]}-{workers}.csv"
            assert main(cmd + ["--seed", "12", "--workers", str(workers), "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        same.append(outs[0] == outs[1] and len(outs[0]) > 0)
    ok = all(same)
    report(12, ok, "byte-identical CSV with 1 and 8 workers: "
                   + ", ".join(f"{c[0]}={s}" for c, s in zip(commands, same)))
    assert ok
