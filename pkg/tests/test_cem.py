import itertools
import math

import numpy as np
import pytest

from cpe_topk import SuperArm
from cpe_topk.cem import (DefinitenessWarning, TransformedGraph, brute_force_dks, brute_force_qp, eigen_extremes,
                          graph_weight, greedy_peel, quadratic_maximize, subset_weight, subsets_of_size_at_least,
                          theoretical_alpha, transform_weights)
from cpe_topk.errors import ParameterError, SizeGuardError, SymmetryError

from conftest import random_pd


def _graph(n, edges):
    W = np.zeros((n, n))
    for (i, j), w in edges.items():
        W[i, j] = W[j, i] = w
    return TransformedGraph(n, W)


def test_transform_identity_and_hand_example():
    g = transform_weights(np.eye(4))
    off = ~np.eye(4, dtype=bool)
    assert np.all(g.wtilde[off] == 2.0) and np.all(np.diag(g.wtilde) == 0)
    g = transform_weights(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert g.wtilde[0, 1] == 3.0


def test_transform_errors():
    with pytest.raises(SymmetryError):
        transform_weights(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.warns(DefinitenessWarning):
        g = transform_weights(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert g.wtilde[0, 1] == 4.0


def test_greedy_peel_examples():
    g = _graph(4, {(0, 1): 3, (0, 2): 1, (0, 3): 1, (1, 2): 1, (1, 3): 1, (2, 3): 1})
    assert greedy_peel(g, 2) == SuperArm((0, 1))
    # Brute force agrees that {0,1} is densest.
    assert brute_force_dks(g, 2) == SuperArm((0, 1))
    assert greedy_peel(g, 4) == SuperArm((0, 1, 2, 3))
    uniform = _graph(5, {(i, j): 1.0 for i, j in itertools.combinations(range(5), 2)})
    assert greedy_peel(uniform, 3) == SuperArm((0, 1, 2))
    with pytest.raises(ParameterError):
        greedy_peel(g, 5)


def test_quadratic_maximize_identity():
    for k in range(1, 6):
        r = quadratic_maximize(np.eye(6), k)
        assert r.value == pytest.approx(k)
        assert r.value / brute_force_qp(np.eye(6), k)[1] == pytest.approx(1.0)
        assert r.alpha_used == 0.9


def test_brute_force_qp_examples():
    assert brute_force_qp(np.eye(5), 2)[1] == 2.0
    arm, val = brute_force_qp(np.array([[2.0, -1.0], [-1.0, 2.0]]), 2)
    assert arm == SuperArm((0, 1)) and val == 2.0
    with pytest.raises(SizeGuardError):
        brute_force_qp(np.eye(40), 20)


def test_exact_oracle_matches_brute_force(rng):
    for _ in range(100):
        d = int(rng.integers(3, 10))
        k = int(rng.integers(1, d))
        W = random_pd(rng, d)
        qm = quadratic_maximize(W, k, oracle=brute_force_dks)
        _, opt = brute_force_qp(W, k)
        # The exact oracle maximizes w~, not the quadratic form, so only the bound is guaranteed.
        assert qm.value <= opt + 1e-9
        assert qm.value >= theoretical_alpha(W, k) * opt - 1e-9 * abs(opt)


def test_approximation_never_exceeds_optimum(rng):
    for _ in range(200):
        d = int(rng.integers(2, 10))
        k = int(rng.integers(1, d + 1))
        W = random_pd(rng, d)
        assert quadratic_maximize(W, k).value <= brute_force_qp(W, k)[1] + 1e-9


def test_fast_path_matches_checked_path(rng):
    for _ in range(50):
        W = np.linalg.inv(random_pd(rng, 8))
        a = quadratic_maximize(W, 4, check=False)
        b = quadratic_maximize(W, 4, check=True)
        assert a.subset == b.subset and a.value == pytest.approx(b.value)


def test_lemmas_on_small_matrix(rng):
    W = random_pd(rng, 6)
    g = transform_weights(W)
    xi_min, xi_max = eigen_extremes(W)
    off = ~np.eye(6, dtype=bool)
    assert np.all(g.wtilde[off] >= 0)
    for S in subsets_of_size_at_least(6, 2):
        w, wt = graph_weight(W, S), g.weight(S)
        assert w <= wt + 1e-9
        assert wt <= (len(S) - 1) * xi_max / xi_min * w + 1e-9


def test_subset_weight_is_quadratic_form(rng):
    W = random_pd(rng, 5)
    x = SuperArm((1, 2, 4)).indicator(5)
    assert subset_weight(W, [1, 2, 4]) == pytest.approx(x @ W @ x)


def test_theoretical_alpha_cases():
    assert theoretical_alpha(np.eye(3), 1) == 1.0
    assert theoretical_alpha(np.diag([1.0, 2.0, 4.0]), 3) == pytest.approx(1 / 8)
    assert theoretical_alpha(np.diag([0.0, 1.0, 1.0]), 2) == 0.0


def test_near_singular_flag():
    W = np.diag([1e-14, 1.0, 1.0])
    with pytest.warns(DefinitenessWarning):
        r = quadratic_maximize(W, 2)
    assert r.near_singular
    assert math.isclose(r.norm, math.sqrt(r.value))
