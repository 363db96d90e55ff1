"""Approximate confidence-ellipsoid maximization over size-k subsets.

Maximizing ||chi_S||_W over |S| = k is the 0-1 quadratic program
max chi_S^T W chi_S. For positive definite W we move the diagonal onto the
edges, w~_ij = w_ij + w_ii + w_jj, which yields a non-negative complete graph,
hand that graph to a densest-k-subgraph oracle and score the returned subset
on the original W.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ParameterError, SizeGuardError, SymmetryError
from .instance import SuperArm, all_super_arms

DEFAULT_ALPHA = 0.9
SYM_TOL = 1e-10
# xi_min below this fraction of xi_max voids the ratio guarantee.
NEAR_SINGULAR = 1e-12


class DefinitenessWarning(UserWarning):
    """W is not (numerically) positive definite; approximation guarantees are void."""


@dataclass(frozen=True)
class TransformedGraph:
    """Complete graph on d vertices with weights w~_ij (zero diagonal)."""

    n: int
    wtilde: np.ndarray

    def weight(self, subset) -> float:
        """w~(S): total edge weight induced by ``subset``."""
        idx = list(subset)
        return float(self.wtilde[np.ix_(idx, idx)].sum()) / 2.0


@dataclass(frozen=True)
class QMResult:
    """Approximate maximizer of chi_S^T W chi_S.

    ``value`` is the quadratic form on the original W (a squared norm), so
    the ellipsoid width is ``sqrt(value)``.
    """

    subset: SuperArm
    value: float
    alpha_used: float
    near_singular: bool = False

    @property
    def norm(self) -> float:
        return math.sqrt(max(self.value, 0.0))


DkSOracle = Callable[[TransformedGraph, int], SuperArm]


def subset_weight(W: np.ndarray, subset) -> float:
    """w(S) = chi_S^T W chi_S."""
    idx = list(subset)
    return float(W[np.ix_(idx, idx)].sum())


def graph_weight(W: np.ndarray, subset) -> float:
    """w(S) with W read as a graph with self-loops: each pair i < j once plus the loops.

    This is the convention under which the transformed weights satisfy
    w(S) <= w~(S) <= (|S| - 1) xi_max / xi_min * w(S).
    """
    idx = list(subset)
    block = W[np.ix_(idx, idx)]
    return float((block.sum() + np.trace(block)) / 2.0)


def eigen_extremes(W: np.ndarray) -> tuple[float, float]:
    """(xi_min, xi_max) of a symmetric matrix."""
    w = np.linalg.eigvalsh(W)
    return float(w[0]), float(w[-1])


def transform_weights(W: np.ndarray, check: bool = True) -> TransformedGraph:
    """Build the non-negative graph w~_ij = w_ij + w_ii + w_jj, w~_ii = 0.

    Raises SymmetryError for asymmetric input. A matrix that is not
    positive definite only triggers a DefinitenessWarning; the transform is
    still returned.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ParameterError(f"W must be square, got shape {W.shape}")
    if check:
        scale = max(1.0, float(np.abs(W).max()))
        if not np.allclose(W, W.T, rtol=0.0, atol=SYM_TOL * scale):
            raise SymmetryError("W must be symmetric")
        xi_min, xi_max = eigen_extremes(W)
        if xi_min <= 1e-12:
            warnings.warn(f"W is not positive definite (xi_min={xi_min:.3g})", DefinitenessWarning, stacklevel=2)
    diag = np.diag(W)
    wt = W + diag[:, None] + diag[None, :]
    np.fill_diagonal(wt, 0.0)
    return TransformedGraph(W.shape[0], wt)


def _peel(wt: np.ndarray, k: int) -> np.ndarray:
    """Greedy peeling on a weight matrix; returns a sorted index array.

    On ties the highest-index vertex is removed, so lower indices survive.
    """
    n = wt.shape[0]
    deg = wt.sum(axis=1)
    alive = np.ones(n, dtype=bool)
    for _ in range(n - k):
        v = n - 1 - int(deg[::-1].argmin())
        alive[v] = False
        deg -= wt[:, v]
        deg[v] = np.inf
    return np.flatnonzero(alive)


def greedy_peel(graph: TransformedGraph, k: int) -> SuperArm:
    """Drop the minimum weighted-degree vertex until k remain (lower indices survive ties)."""
    if not 1 <= k <= graph.n:
        raise ParameterError(f"k must be in [1, {graph.n}], got {k}")
    return SuperArm.of(_peel(graph.wtilde, k))


def brute_force_dks(graph: TransformedGraph, k: int, limit: int = 10**6) -> SuperArm:
    """Exact densest k-subgraph by enumeration (test oracle)."""
    if not 1 <= k <= graph.n:
        raise ParameterError(f"k must be in [1, {graph.n}], got {k}")
    X = all_super_arms(graph.n, k, limit) if k < graph.n else np.ones((1, graph.n))
    vals = np.einsum("ij,jk,ik->i", X, graph.wtilde, X)
    best = int(np.argmax(vals))
    return SuperArm.of(np.flatnonzero(X[best]))


def quadratic_maximize(W: np.ndarray, k: int, oracle: DkSOracle | None = None,
                       alpha: float = DEFAULT_ALPHA, check: bool = True) -> QMResult:
    """Approximately maximize chi_S^T W chi_S over |S| = k.

    Args:
        W: symmetric positive definite matrix (typically A^{-1}).
        k: subset size.
        oracle: densest-k-subgraph routine; greedy peeling when None.
        alpha: approximation factor reported to stopping rules.
        check: validate symmetry and definiteness (skip in hot loops).
    """
    W = np.asarray(W, dtype=float)
    if not 1 <= k <= W.shape[0]:
        raise ParameterError(f"k must be in [1, {W.shape[0]}], got {k}")
    if k == 1:
        # Singletons induce no edges; the program is a max over the diagonal.
        i = int(np.argmax(np.diag(W)))
        return QMResult(SuperArm((i,)), float(W[i, i]), alpha)
    near_singular = False
    if check:
        xi_min, xi_max = eigen_extremes(W)
        near_singular = xi_min < NEAR_SINGULAR * max(xi_max, 0.0)
    if oracle is None and not check:
        diag = np.diag(W)
        wt = W + diag[:, None] + diag[None, :]
        np.fill_diagonal(wt, 0.0)
        idx = _peel(wt, k)
        return QMResult(SuperArm(tuple(idx.tolist())), float(W[np.ix_(idx, idx)].sum()), alpha)
    graph = transform_weights(W, check=check)
    subset = (oracle or greedy_peel)(graph, k)
    return QMResult(subset, subset_weight(W, subset), alpha, near_singular)


def brute_force_qp(W: np.ndarray, k: int, limit: int = 10**6) -> tuple[SuperArm, float]:
    """Exact maximizer of chi_S^T W chi_S over |S| = k by enumeration."""
    W = np.asarray(W, dtype=float)
    d = W.shape[0]
    if not 1 <= k <= d:
        raise ParameterError(f"k must be in [1, {d}], got {k}")
    if math.comb(d, k) > limit:
        raise SizeGuardError(f"C({d},{k}) exceeds the enumeration limit {limit}")
    X = all_super_arms(d, k, limit) if k < d else np.ones((1, d))
    vals = np.einsum("ij,jk,ik->i", X, W, X)
    best = int(np.argmax(vals))
    return SuperArm.of(np.flatnonzero(X[best])), float(vals[best])


def theoretical_alpha(W: np.ndarray, k: int, alpha_dks: float = 1.0) -> float:
    """Worst-case ratio alpha_DkS / (k - 1) * xi_min / xi_max on the quadratic value.

    Returns 1 for k = 1, where quadratic_maximize takes the diagonal argmax
    exactly. Returns 0 when W is near singular.
    """
    if k <= 1:
        return 1.0
    xi_min, xi_max = eigen_extremes(np.asarray(W, dtype=float))
    if xi_max <= 0 or xi_min < NEAR_SINGULAR * xi_max:
        return 0.0
    return alpha_dks * xi_min / ((k - 1) * xi_max)


def subsets_of_size_at_least(n: int, m: int):
    """Every subset of range(n) with at least m elements (used by lemma checks)."""
    for r in range(m, n + 1):
        yield from itertools.combinations(range(n), r)
