"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest

from cpe_topk import BanditInstance, Environment, SuperArm, SyntheticSpec, default_support, generate_synthetic
from cpe_topk.algorithms import AlgoConfig, compute_g_allocation, run_icb, run_sa_ex, run_saqm
from cpe_topk.cem import (brute_force_dks, brute_force_qp, eigen_extremes, graph_weight, quadratic_maximize,
                          subsets_of_size_at_least, transform_weights)
from cpe_topk.estimation import LeastSquaresState, diag_bound, ellipsoid_radius, weighted_norm
from cpe_topk.experiments import ExperimentConfig, approx_eval, bench_runtime, run_experiment, sweep
from cpe_topk.instance import all_super_arms, uniform_allocation
from cpe_topk.oracles import argmax_topk, brute_force_cem_gap, second_best_topk, solve_p1

from conftest import random_pd, subsets

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {number} failed: {detail}"

    return emit


def _random_pd_scaled(rng, d):
    # Mix well- and ill-conditioned matrices, sometimes inverted like A^-1.
    W = random_pd(rng, d, floor=float(rng.uniform(0.01, 1.0)))
    return np.linalg.inv(W) if rng.random() < 0.5 else W


def test_c01_approximation_ratio(report):
    rows = approx_eval(10, 5, (0.1, 1.0), reps=10, rounds=10_000, seed=0)
    ratios = np.array([r["ratio"] for r in rows])
    assert len(ratios) == 2 * 10 * 10_000 and not np.isnan(ratios).any()
    mean, share = float(ratios.mean()), float(np.mean(ratios >= 0.9))
    report(1, "approximation ratio Z_t/Z_t^exact", mean >= 0.85 and share >= 0.8,
           f"mean {mean:.4f} (>= 0.85), share >= 0.9: {share:.3f} (>= 0.80), min {ratios.min():.4f}")


def test_c02_theorem_bound_exact_dks(report):
    rng = np.random.default_rng(2)
    violations, worst = 0, math.inf
    for _ in range(200):
        k = int(rng.integers(2, 6))
        d = int(rng.integers(k + 1, 11))
        W = _random_pd_scaled(rng, d)
        opt = brute_force_qp(W, k)[1]
        z = quadratic_maximize(W, k, oracle=brute_force_dks).value
        xi_min, xi_max = eigen_extremes(W)
        bound = xi_min / ((k - 1) * xi_max) * opt
        worst = min(worst, z / bound)
        if z < bound * (1 - 1e-9):
            violations += 1
    report(2, "Z >= (1/(k-1)) (xi_min/xi_max) OPT with exact DkS", violations == 0,
           f"{violations} violations over 200 matrices, smallest Z/bound {worst:.3f}")


def test_c03_lemma_suite(report):
    rng = np.random.default_rng(3)
    bad = {"positive": 0, "wtilde": 0, "ratio": 0}
    checked = 0
    for _ in range(100):
        d = int(rng.integers(2, 9))
        W = _random_pd_scaled(rng, d)
        g = transform_weights(W)
        xi_min, xi_max = eigen_extremes(W)
        scale = float(np.abs(W).max())
        if np.any(g.wtilde[~np.eye(d, dtype=bool)] < -1e-12 * scale):
            bad["positive"] += 1
        for S in subsets_of_size_at_least(d, 2):
            checked += 1
            w, wt = graph_weight(W, S), g.weight(S)
            tol = 1e-9 * max(1.0, abs(wt))
            if w > wt + tol:
                bad["wtilde"] += 1
            if wt > (len(S) - 1) * xi_max / xi_min * w + tol:
                bad["ratio"] += 1
    report(3, "lemma suite (positivity, w <= w~, w~/w ratio)", sum(bad.values()) == 0,
           f"violations {bad} over 100 matrices and {checked} subsets")


def _pac_rows(name: str) -> list:
    exp = ExperimentConfig(algorithms=(name,), d=10, k=5, delta_min=1.0, reps=20, seed=4,
                           algo=AlgoConfig(epsilon=0.5, delta=0.05), workers=1)
    return run_experiment(exp)


@pytest.mark.slow
def test_c04_delta_pac(report):
    summary, ok = [], True
    for name in ("ICB", "SAQM", "CLUCB-QM", "CLUCB"):
        rows = _pac_rows(name)
        good = sum(bool(r["correct"]) for r in rows)
        capped = sum(r["stopped_by"] != "condition-met" for r in rows)
        ok &= good == 20 and capped == 0
        summary.append(f"{name} {good}/20 (median samples {int(np.median([r['samples'] for r in rows]))})")
    report(4, "delta-PAC on synthetic (10,5), Delta_min=1", ok, "; ".join(summary))


@pytest.mark.slow
def test_c05_runtime_separation(report):
    sep = bench_runtime([20], ("SAQM", "SA-Ex"), budget=20_000, exp_budget=30, seed=5, enable_exponential=True)
    t = {r["algorithm"]: r["mean_round_time"] for r in sep}
    scale = bench_runtime([10, 24], ("SAQM",), budget=20_000, seed=5)
    s10, s24 = (r["mean_round_time"] for r in scale)
    ratio, growth = t["SA-Ex"] / t["SAQM"], s24 / s10
    report(5, "per-round runtime separation and scaling", ratio >= 100 and growth <= 20,
           f"SA-Ex/SAQM at (20,10) = {ratio:.0f}x (>= 100), SAQM d=24 vs d=10 = {growth:.2f}x (<= 20); "
           f"SAQM {t['SAQM'] * 1e6:.1f}us, SA-Ex {t['SA-Ex'] * 1e3:.1f}ms per round")


def _instance_shape(rng):
    while True:
        d = int(rng.integers(2, 15))
        k = int(rng.integers(1, d))
        if math.comb(d, k) <= 10**4:
            return d, k


def test_c06_oracle_equivalence(report):
    rng = np.random.default_rng(6)
    mismatches = {"argmax": 0, "second": 0, "p1": 0, "cem_gap": 0, "qm_exact": 0}
    for _ in range(200):
        d, k = _instance_shape(rng)
        X = all_super_arms(d, k)
        w = rng.normal(size=d)
        vals = X @ w
        order = np.argsort(-vals, kind="stable")
        best = argmax_topk(w, k)
        if abs(best.value - vals[order[0]]) > 1e-9:
            mismatches["argmax"] += 1
        second = second_best_topk(w, best.arm)
        rows_other = [i for i in range(len(X)) if not np.array_equal(X[i], best.arm.indicator(d))]
        if abs(second.value - vals[rows_other].max()) > 1e-9:
            mismatches["second"] += 1
        s = rng.uniform(0, 2, size=d)
        c = float(rng.uniform(0, 2))
        diff = np.abs(X - best.arm.indicator(d))
        p1_brute = (vals + c * diff @ s)[rows_other].max()
        if abs(solve_p1(w, s, c, best.arm).value - p1_brute) > 1e-9:
            mismatches["p1"] += 1
        A_inv = np.linalg.inv(random_pd(rng, d))
        dq = X[rows_other] - best.arm.indicator(d)
        gap_brute = float((vals[rows_other] + c * np.sqrt(np.einsum("ij,jk,ik->i", dq, A_inv, dq))).max()
                          - best.value)
        if abs(brute_force_cem_gap(A_inv, w, c, best.arm) - gap_brute) > 1e-9:
            mismatches["cem_gap"] += 1
        # With an exact DkS oracle the result must be the densest set of the transformed graph.
        g = transform_weights(A_inv)
        qm = quadratic_maximize(A_inv, k, oracle=brute_force_dks)
        if k == 1:
            target = float(np.diag(A_inv).max())
            got = qm.value
        else:
            target = max(g.weight(S) for S in subsets(d, k))
            got = g.weight(qm.subset)
        if abs(got - target) > 1e-9 * max(1.0, abs(target)):
            mismatches["qm_exact"] += 1
    report(6, "oracle equivalence vs enumeration", sum(mismatches.values()) == 0,
           f"mismatches {mismatches} over 200 instances")


def test_c07_estimator_properties(report):
    rng = np.random.default_rng(7)
    d, k = 10, 5
    s = LeastSquaresState(d, k, 5.0)
    support = default_support(d, k)
    for arm in support:
        s.update(arm, float(rng.normal()))
    for _ in range(1000):
        s.update(support[int(rng.integers(len(support)))], float(rng.normal()))
    inv_err = s.inverse_error()

    dominance_bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        st = LeastSquaresState(n, 1, 1.0)
        st.A_inv = np.linalg.inv(random_pd(rng, n))
        x = rng.normal(size=n)
        if weighted_norm(st, x) > diag_bound(st, x) + 1e-12:
            dominance_bad += 1

    theta = rng.uniform(-1, 1, size=d)
    env = Environment(BanditInstance(d, k, theta, noise_param=0.0))
    st = LeastSquaresState(d, k, 0.0)
    for arm in support[:d]:
        st.update(arm, env.pull(arm, rng))
    exact_err = float(np.abs(st.theta_hat() - theta).max())
    ok = inv_err < 1e-8 and dominance_bad == 0 and exact_err < 1e-9
    report(7, "estimator properties", ok,
           f"inverse rel. error {inv_err:.2e} (< 1e-8), dominance violations {dominance_bad}/1000, "
           f"noiseless max error {exact_err:.1e} (< 1e-9)")


@pytest.mark.slow
def test_c08_confidence_coverage(report):
    d, k, delta = 6, 3, 0.1
    checkpoints = (10, 100, 1000)
    theta = np.random.default_rng(8).uniform(-1, 1, size=d)
    inst = BanditInstance(d, k, theta, noise="uniform", noise_param=1.0)
    env = Environment(inst)
    alloc = compute_g_allocation(default_support(d, k), d)
    X_all = all_super_arms(d, k)
    true_vals = X_all @ theta
    members = np.stack([a.index for a in alloc.support])
    pair_viol, pairs, hist_viol = 0, 0, 0
    for h in range(500):
        rng = np.random.default_rng(10_000 + h)
        state = LeastSquaresState(d, k, inst.sigma)
        counts = np.zeros(len(members))
        rewards = env.block_rewards(members, checkpoints[-1], rng)
        any_bad = False
        for t in range(checkpoints[-1]):
            # Tracking rule over the fixed allocation (initial rounds pull each support arm once).
            j = t if t < len(members) else int(np.argmin(counts / alloc.weights))
            counts[j] += 1
            state.update_vector(alloc.indicators[j], float(rewards[t, j]))
            if state.t in checkpoints:
                c = ellipsoid_radius(state, len(X_all), delta)
                est = X_all @ state.theta_hat()
                widths = c * np.sqrt(np.einsum("ij,jk,ik->i", X_all, state.A_inv, X_all))
                bad = np.abs(true_vals - est) > widths
                pair_viol += int(bad.sum())
                pairs += len(X_all)
                any_bad |= bool(bad.any())
        hist_viol += any_bad
    freq = pair_viol / pairs
    report(8, "ellipsoid confidence coverage at delta=0.1", freq <= delta,
           f"violating (t, M) pairs {freq:.4f} (<= {delta}), histories with any violation {hist_viol}/500")


def test_c09_tracking_bound(report):
    total, runs = 0, 0
    for d, k in ((10, 5), (7, 3), (12, 4)):
        env = Environment(generate_synthetic(SyntheticSpec(d, k, 0.5, seed=d)))
        support = default_support(d, k)
        for alloc in (compute_g_allocation(support, d), uniform_allocation(support, d)):
            for runner in (run_icb, run_saqm):
                out = runner(env, alloc, AlgoConfig(seed=runs, max_rounds=20_000, check_tracking=True))
                total += out.tracking_violations
                runs += 1
            if math.comb(d, k) <= 300:
                out = run_sa_ex(env, alloc, AlgoConfig(seed=runs, max_rounds=2_000, check_tracking=True))
                total += out.tracking_violations
                runs += 1
    report(9, "tracking-rule count bound", total == 0, f"{total} violations over {runs} static runs")


@pytest.mark.slow
def test_c10_sweep_trend(report):
    grid = (0.2, 0.4, 0.6, 0.8, 1.0)
    exp = ExperimentConfig(algorithms=("SAQM", "ICB"), d=10, k=5, reps=10, seed=10, workers=1)
    rows = sweep(exp, grid)
    ok, parts = True, []
    for name in ("SAQM", "ICB"):
        med = [float(np.median([r["samples"] for r in rows if r["algorithm"] == name and r["delta_min"] == dm]))
               for dm in grid]
        mono = all(b <= a for a, b in zip(med, med[1:]))
        ok &= mono
        parts.append(f"{name} medians {[int(m) for m in med]}")
    capped = sum(r["stopped_by"] != "condition-met" for r in rows)
    ok &= capped == 0
    report(10, "median samples non-increasing in Delta_min", ok, "; ".join(parts) + f"; capped runs {capped}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
