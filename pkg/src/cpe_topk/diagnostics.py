"""Gap and complexity diagnostics of an instance under a static allocation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cem import brute_force_qp, quadratic_maximize
from .errors import AmbiguousInstanceError, RankDeficientError
from .instance import ABS_TOL, SPAN_TOL, Allocation, BanditInstance, SuperArm
from .oracles import argmax_topk, second_best_topk

RHO_EXACT_LIMIT = 10**5


@dataclass(frozen=True)
class GapMetrics:
    """Problem-hardness quantities.

    ``rho_is_lower_bound`` is set when C(d, k) is too large for enumeration
    and rho comes from the quadratic-maximization approximation.
    """

    delta_min: float
    delta_e: np.ndarray
    rho: float
    rho_prime: float
    h_eps: float
    h_eps_prime: float
    rho_is_lower_bound: bool = False


def best_and_second(theta: np.ndarray, k: int) -> tuple[SuperArm, float, SuperArm, float]:
    """Best super arm and runner-up; raises when the best is not unique."""
    best = argmax_topk(theta, k)
    srt = np.sort(theta)[::-1]
    if srt[k - 1] - srt[k] <= ABS_TOL:
        raise AmbiguousInstanceError(
            f"the k-th and (k+1)-th largest means tie ({srt[k - 1]!r} vs {srt[k]!r}); best super arm is not unique"
        )
    second = second_best_topk(theta, best.arm)
    return best.arm, best.value, second.arm, second.value


def per_arm_gaps(theta: np.ndarray, k: int) -> np.ndarray:
    """Delta_e: distance of the best set from the best set that flips e's membership.

    For e outside the best set this is theta_(k) - theta_e; for e inside it is
    theta_e - theta_(k+1), where theta_(j) is the j-th largest mean.
    """
    order = np.argsort(-theta, kind="stable")
    kth, next_ = theta[order[k - 1]], theta[order[k]]
    inside = np.zeros(theta.shape[0], dtype=bool)
    inside[order[:k]] = True
    return np.where(inside, theta - next_, kth - theta)


def rho_prime(design_inv: np.ndarray, k: int) -> float:
    """(max_{M, M'} sum_i |chi_M(i) - chi_M'(i)| sqrt(Lambda^-1(i, i)))^2.

    A symmetric difference can be any set of 2m arms with m = min(k, d - k),
    so the maximum takes the 2m largest diagonal radii.
    """
    s = np.sqrt(np.maximum(np.diag(design_inv), 0.0))
    m = min(k, s.shape[0] - k)
    return float(np.sort(s)[::-1][: 2 * m].sum() ** 2)


def compute_gap_metrics(instance: BanditInstance, alloc: Allocation, eps: float) -> GapMetrics:
    theta, k = instance.theta, instance.k
    _, best_val, _, second_val = best_and_second(theta, k)
    delta_min = best_val - second_val
    Lam = alloc.design_matrix()
    w, V = np.linalg.eigh(Lam)
    if w[0] <= SPAN_TOL:
        raise RankDeficientError("allocation design matrix is singular", null_direction=V[:, 0])
    Lam_inv = (V / w) @ V.T
    lower = math.comb(instance.d, k) > RHO_EXACT_LIMIT
    if lower:
        rho = quadratic_maximize(Lam_inv, k).value
    else:
        rho = brute_force_qp(Lam_inv, k)[1]
    rp = rho_prime(Lam_inv, k)
    denom = (delta_min + eps) ** 2
    return GapMetrics(
        delta_min=delta_min,
        delta_e=per_arm_gaps(theta, k),
        rho=rho,
        rho_prime=rp,
        h_eps=rho / denom,
        h_eps_prime=rp / denom,
        rho_is_lower_bound=lower,
    )
