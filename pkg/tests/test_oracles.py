import itertools
import math

import numpy as np
import pytest

from cpe_topk import SuperArm
from cpe_topk.errors import ParameterError
from cpe_topk.instance import all_super_arms
from cpe_topk.oracles import (argmax_topk, brute_force_cem_gap, constrained_superarm, p1_objective,
                              second_best_topk, solve_p1)

from conftest import random_pd, subsets


def _brute_best(w, k, exclude=None):
    best, arg = -math.inf, None
    for S in subsets(len(w), k):
        if exclude is not None and tuple(S) == exclude.members:
            continue
        v = sum(w[i] for i in S)
        if v > best + 1e-12:
            best, arg = v, S
    return arg, best


def test_argmax_examples():
    r = argmax_topk([0.9, 0.8, 0.7, 0.1, 0.2], 2)
    assert r.arm == SuperArm((0, 1)) and r.value == pytest.approx(1.7)
    assert argmax_topk(np.ones(6), 3).arm == SuperArm((0, 1, 2))


def test_second_best_examples():
    r = second_best_topk([0.9, 0.8, 0.7], SuperArm((0, 1)))
    assert r.arm == SuperArm((0, 2)) and r.value == pytest.approx(1.6)
    # All equal: the last member leaves for the first non-member.
    assert second_best_topk(np.ones(5), SuperArm((0, 1, 2))).arm == SuperArm((0, 1, 3))
    with pytest.raises(ParameterError):
        second_best_topk([1.0, 2.0], SuperArm((0, 1)))


def test_topk_oracles_match_enumeration(rng):
    for _ in range(200):
        d = int(rng.integers(2, 12))
        k = int(rng.integers(1, d))
        w = rng.normal(size=d)
        best = argmax_topk(w, k)
        _, bval = _brute_best(w, k)
        assert best.value == pytest.approx(bval, abs=1e-12)
        second = second_best_topk(w, best.arm)
        _, sval = _brute_best(w, k, exclude=best.arm)
        assert second.value == pytest.approx(sval, abs=1e-12)
        assert second.value <= best.value
        assert second.arm != best.arm


def test_solve_p1_hand_instance():
    th = np.array([0.9, 0.8, 0.7, 0.1, 0.2])
    s = np.ones(5)
    mhat = SuperArm((0, 1))
    r = solve_p1(th, s, 0.1, mhat)
    others = [SuperArm(tuple(S)) for S in subsets(5, 2) if tuple(S) != (0, 1)]
    vals = [p1_objective(th, s, 0.1, mhat, M) for M in others]
    assert len(others) == 9
    assert r.value == pytest.approx(max(vals))
    assert r.value == pytest.approx(p1_objective(th, s, 0.1, mhat, r.arm))


def test_solve_p1_zero_radius_is_second_best(rng):
    for _ in range(50):
        th = rng.normal(size=7)
        mhat = argmax_topk(th, 3).arm
        r = solve_p1(th, rng.uniform(size=7), 0.0, mhat)
        assert r.value == pytest.approx(second_best_topk(th, mhat).value)


def test_solve_p1_symmetric_case():
    r = solve_p1(np.zeros(6), np.ones(6), 1.0, SuperArm((0, 1)))
    assert r.arm == SuperArm((2, 3))
    assert r.value == pytest.approx(4.0)


def test_solve_p1_matches_enumeration(rng):
    for _ in range(200):
        d = int(rng.integers(2, 10))
        k = int(rng.integers(1, d))
        th = rng.normal(size=d)
        s = rng.uniform(0, 2, size=d)
        c = float(rng.uniform(0, 2))
        mhat = argmax_topk(th, k).arm
        r = solve_p1(th, s, c, mhat)
        brute = max(p1_objective(th, s, c, mhat, SuperArm(tuple(S))) for S in subsets(d, k)
                    if tuple(S) != mhat.members)
        assert r.value == pytest.approx(brute, abs=1e-9)
        assert r.value == pytest.approx(p1_objective(th, s, c, mhat, r.arm), abs=1e-9)
        assert r.arm != mhat


def test_constrained_superarm_forced():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert constrained_superarm(3, 2, 0, 2, rng) == SuperArm((0, 1))


def test_constrained_superarm_uniform():
    rng = np.random.default_rng(1)
    n = 10_000
    hits = sum(constrained_superarm(4, 2, 0, 3, rng) == SuperArm((0, 1)) for _ in range(n))
    assert abs(hits / n - 0.5) < 0.05


def test_constrained_superarm_swap_pair():
    rng = np.random.default_rng(2)
    for _ in range(100):
        m = constrained_superarm(8, 3, 2, 7, rng)
        swap = SuperArm.of([e for e in m if e != 2] + [7])
        assert 2 in m and 7 not in m
        assert 7 in swap and 2 not in swap
    with pytest.raises(ParameterError):
        constrained_superarm(3, 3, 0, 1, rng)
    with pytest.raises(ParameterError):
        constrained_superarm(5, 2, 1, 1, rng)


def _double_enum_gap(A_inv, th, c, mhat_members, d, k):
    m = np.zeros(d)
    m[list(mhat_members)] = 1
    best = -math.inf
    for S in itertools.combinations(range(d), k):
        if S == tuple(mhat_members):
            continue
        x = np.zeros(d)
        x[list(S)] = 1
        diff = x - m
        best = max(best, th[list(S)].sum() + c * math.sqrt(diff @ A_inv @ diff))
    return best - th[list(mhat_members)].sum()


def test_cem_gap_examples(rng):
    th = rng.normal(size=6)
    mhat = argmax_topk(th, 3).arm
    g0 = brute_force_cem_gap(np.eye(6), th, 0.0, mhat)
    assert g0 == pytest.approx(second_best_topk(th, mhat).value - argmax_topk(th, 3).value)
    assert g0 <= 0
    for _ in range(20):
        A_inv = np.linalg.inv(random_pd(rng, 6))
        c = float(rng.uniform(0, 3))
        assert brute_force_cem_gap(A_inv, th, c, mhat) == pytest.approx(
            _double_enum_gap(A_inv, th, c, mhat.members, 6, 3), abs=1e-9)


def test_cem_gap_identity_design():
    # A = cI and zero estimates: the best set is disjoint from mhat, norm sqrt(2k / c).
    d, k, c_scale = 6, 3, 4.0
    g = brute_force_cem_gap(np.eye(d) / c_scale, np.zeros(d), 1.0, SuperArm((0, 1, 2)))
    assert g == pytest.approx(math.sqrt(2 * k) / math.sqrt(c_scale))


def test_cem_gap_precomputed_enumeration(rng):
    th = rng.normal(size=7)
    mhat = argmax_topk(th, 3).arm
    A_inv = np.linalg.inv(random_pd(rng, 7))
    X = all_super_arms(7, 3)
    assert brute_force_cem_gap(A_inv, th, 1.2, mhat, X=X) == pytest.approx(brute_force_cem_gap(A_inv, th, 1.2, mhat))
