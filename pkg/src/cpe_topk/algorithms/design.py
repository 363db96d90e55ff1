"""Static allocations over a restricted support of super arms."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import RankDeficientError
from ..instance import Allocation, SuperArm, gram, spans, uniform_allocation

__all__ = ["compute_g_allocation", "g_objective", "uniform_allocation"]


def g_objective(X: np.ndarray, weights: np.ndarray) -> tuple[float, np.ndarray]:
    """max_x ||x||^2_{Lambda(weights)^-1} over the rows of X, and all row norms."""
    Lam = gram(X, weights)
    L = np.linalg.cholesky(Lam)
    Y = np.linalg.solve(L, X.T)
    norms = np.einsum("ij,ij->j", Y, Y)
    return float(norms.max()), norms


def compute_g_allocation(support: Sequence[SuperArm], d: int, iterations: int = 1000,
                         history: list | None = None) -> Allocation:
    """Frank-Wolfe on the simplex over ``support`` for the G-optimal design.

    Starts from the uniform distribution; step ``n`` moves mass 1/(n+2)
    toward the support arm with the largest predicted variance (the
    Fedorov-Wynn step, whose limit is G-optimal by the Kiefer-Wolfowitz
    theorem). Single steps can raise the max-variance objective, so the best
    iterate seen is returned. Every weight stays strictly positive.

    Args:
        support: distinct super arms spanning R^d.
        d: number of base arms.
        iterations: Frank-Wolfe steps.
        history: if given, the best objective so far is appended after every step.
    """
    support = list(support)
    X = np.stack([a.indicator(d) for a in support])
    if not spans(X):
        raise RankDeficientError("support does not span R^d", np.linalg.eigh(gram(X))[1][:, 0])
    n = len(support)
    w = np.full(n, 1.0 / n)
    obj, norms = g_objective(X, w)
    best_obj, best_w = obj, w
    if history is not None:
        history.append(best_obj)
    for it in range(iterations):
        j = int(np.argmax(norms))
        gamma = 1.0 / (it + 2)
        w = (1.0 - gamma) * w
        w[j] += gamma
        obj, norms = g_objective(X, w)
        if obj < best_obj:
            best_obj, best_w = obj, w
        if history is not None:
            history.append(best_obj)
    best_w = best_w / best_w.sum()
    return Allocation(d, tuple(support), best_w)
