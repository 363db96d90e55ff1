"""Exact combinatorial subroutines over the class of all size-k subsets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArmError, ParameterError, SizeGuardError
from .instance import SuperArm, all_super_arms


@dataclass(frozen=True)
class ScoredSelection:
    arm: SuperArm
    value: float


def topk_indices(w: np.ndarray, k: int) -> np.ndarray:
    """Sorted indices of the k largest entries; ties go to the lowest index."""
    return np.sort(np.argsort(-w, kind="stable")[:k])


def best_swap(w: np.ndarray, members: np.ndarray) -> tuple[np.ndarray, float]:
    """Best size-k set other than ``members`` when ``members`` maximizes w.

    Drops the weakest member and adds the strongest non-member. On ties the
    highest-index member leaves and the lowest-index non-member enters.
    Returns (sorted index array, loss w(i) - w(j)).
    """
    inside = np.zeros(w.shape[0], dtype=bool)
    inside[members] = True
    mem = np.flatnonzero(inside)
    out = np.flatnonzero(~inside)
    if out.size == 0:
        raise ParameterError("d = k: no second super arm exists")
    wm = w[mem]
    i = mem[len(wm) - 1 - int(np.argmin(wm[::-1]))]
    j = out[int(np.argmax(w[out]))]
    inside[i] = False
    inside[j] = True
    return np.flatnonzero(inside), float(w[i] - w[j])


def argmax_topk(weights, k: int) -> ScoredSelection:
    """The k largest-weight base arms."""
    w = np.asarray(weights, dtype=float)
    if not 1 <= k <= w.shape[0]:
        raise ParameterError(f"k must be in [1, {w.shape[0]}], got {k}")
    idx = topk_indices(w, k)
    return ScoredSelection(SuperArm(tuple(idx.tolist())), float(w[idx].sum()))


def second_best_topk(weights, exclude: SuperArm) -> ScoredSelection:
    """Best size-k set different from ``exclude`` (which must be an argmax)."""
    w = np.asarray(weights, dtype=float)
    d, k = w.shape[0], len(exclude)
    exclude.validate(d, k)
    if d == k:
        raise ParameterError("d = k: no second super arm exists")
    idx, _ = best_swap(w, exclude.index)
    return ScoredSelection(SuperArm(tuple(idx.tolist())), float(w[idx].sum()))


def p1_weights(theta_hat: np.ndarray, diag_radii: np.ndarray, c_t: float, mhat_idx: np.ndarray):
    """Per-arm scores a_i and the constant term of the P1 objective."""
    bonus = c_t * diag_radii
    a = theta_hat + bonus
    a[mhat_idx] -= 2.0 * bonus[mhat_idx]
    return a, float(bonus[mhat_idx].sum())


def solve_p1_idx(theta_hat: np.ndarray, diag_radii: np.ndarray, c_t: float,
                 mhat_idx: np.ndarray) -> tuple[np.ndarray, float]:
    k = mhat_idx.shape[0]
    a, const = p1_weights(theta_hat, diag_radii, c_t, mhat_idx)
    idx = topk_indices(a, k)
    if np.array_equal(idx, mhat_idx):
        idx, _ = best_swap(a, mhat_idx)
    return idx, const + float(a[idx].sum())


def solve_p1(theta_hat, diag_radii, c_t: float, mhat: SuperArm) -> ScoredSelection:
    """Maximize theta_hat(M) + c_t * sum_i |chi_M(i) - chi_mhat(i)| s_i over M != mhat.

    The objective is additive: it equals c_t * s(mhat) + sum_{i in M} a_i with
    a_i = theta_hat_i - c_t s_i inside mhat and theta_hat_i + c_t s_i outside,
    so the top-k of a (or its best swap when that is mhat itself) is optimal.
    """
    th = np.asarray(theta_hat, dtype=float)
    s = np.asarray(diag_radii, dtype=float)
    d, k = th.shape[0], len(mhat)
    if s.shape != (d,):
        raise ParameterError(f"diag_radii must have length {d}")
    if c_t < 0:
        raise ParameterError(f"c_t must be >= 0, got {c_t}")
    mhat.validate(d, k)
    if d == k:
        raise ParameterError("d = k: no feasible super arm besides mhat")
    idx, value = solve_p1_idx(th, s, c_t, mhat.index)
    return ScoredSelection(SuperArm(tuple(idx.tolist())), value)


def p1_objective(theta_hat, diag_radii, c_t: float, mhat: SuperArm, arm: SuperArm) -> float:
    """Direct evaluation of the P1 objective at ``arm`` (for self-checks)."""
    d = len(theta_hat)
    diff = np.abs(arm.indicator(d) - mhat.indicator(d))
    return float(np.asarray(theta_hat)[list(arm.members)].sum() + c_t * diff @ np.asarray(diag_radii))


def constrained_superarm(d: int, k: int, include: int, exclude: int, rng: np.random.Generator) -> SuperArm:
    """Uniform size-k set containing ``include`` and not ``exclude``."""
    if include == exclude:
        raise ParameterError("include and exclude must differ")
    if not (0 <= include < d and 0 <= exclude < d):
        raise InvalidArmError(f"base arms must lie in [0, {d})")
    if d < k + 1:
        raise ParameterError(f"need d >= k + 1, got d={d}, k={k}")
    return SuperArm.of(_constrained_idx(d, k, include, exclude, rng))


def _constrained_idx(d: int, k: int, include: int, exclude: int, rng: np.random.Generator) -> list[int]:
    others = [e for e in range(d) if e != include and e != exclude]
    picks = rng.choice(len(others), size=k - 1, replace=False) if k > 1 else []
    return [include] + [others[int(p)] for p in picks]


def cem_gap_values(X: np.ndarray, A_inv: np.ndarray, theta_hat: np.ndarray, c_t: float,
                   mhat_row: np.ndarray) -> np.ndarray:
    """theta_hat(M) + c_t ||chi_M - chi_mhat||_{A^-1} for every row of X."""
    diff = X - mhat_row
    q = np.einsum("ij,ij->i", diff @ A_inv, diff)
    return X @ theta_hat + c_t * np.sqrt(np.maximum(q, 0.0))


def brute_force_cem_gap(A_inv, theta_hat, c_t: float, mhat: SuperArm, limit: int = 10**6,
                        X: np.ndarray | None = None) -> float:
    """Exact Z*_t = max_{M != mhat}(theta_hat(M) + c_t ||chi_M - chi_mhat||) - theta_hat(mhat).

    Args:
        A_inv: inverse design matrix (plain or regularized).
        theta_hat: current estimate.
        c_t: confidence radius.
        mhat: empirical best super arm.
        limit: refuse enumeration beyond this many super arms.
        X: optional precomputed ``all_super_arms(d, k)``.
    """
    th = np.asarray(theta_hat, dtype=float)
    d, k = th.shape[0], len(mhat)
    mhat.validate(d, k)
    if X is None:
        if math.comb(d, k) > limit:
            raise SizeGuardError(f"C({d},{k}) exceeds the enumeration limit {limit}")
        X = all_super_arms(d, k, limit)
    m_row = mhat.indicator(d)
    vals = cem_gap_values(X, np.asarray(A_inv, dtype=float), th, c_t, m_row)
    vals[np.all(X == m_row, axis=1)] = -np.inf
    return float(vals.max() - th[list(mhat.members)].sum())
