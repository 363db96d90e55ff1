"""Least-squares estimation of base-arm means from summed rewards.

Both estimators keep the Gram matrix A = sum x x^T, the response vector
b = sum x r and an explicitly maintained inverse of A. The inverse is updated
with the Sherman-Morrison formula after each pull and recomputed from A every
``REFRESH_EVERY`` updates to bound floating-point drift.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from .errors import NumericInputError, ParameterError, RankDeficientError
from .instance import SuperArm

REFRESH_EVERY = 512
C_PRIME = 6.0 / math.pi**2
PD_TOL = 1e-10


class _GramState:
    """Shared bookkeeping for the plain and regularized estimators."""

    def __init__(self, d: int, k: int):
        if not 1 <= k <= d:
            raise ParameterError(f"need 1 <= k <= d, got k={k}, d={d}")
        self.d = d
        self.k = k
        self.t = 0
        self.A = np.zeros((d, d))
        self.b = np.zeros(d)
        self.A_inv: np.ndarray | None = None
        self.pull_counts: Counter = Counter()
        self._since_refresh = 0

    def update(self, arm: SuperArm, reward: float) -> None:
        """Record one pull of ``arm`` with observed summed reward."""
        arm.validate(self.d, self.k)
        self.update_vector(arm.indicator(self.d), reward, arm)

    def update_vector(self, x: np.ndarray, reward: float, arm: SuperArm | None = None) -> None:
        """Record a pull given its indicator vector directly (hot path)."""
        if not math.isfinite(reward):
            raise NumericInputError(f"non-finite reward {reward!r}")
        self.A += np.outer(x, x)
        self.b += reward * x
        self.t += 1
        if arm is not None:
            self.pull_counts[arm] += 1
        self._since_refresh += 1
        if self.A_inv is None or self._since_refresh >= REFRESH_EVERY:
            self._refresh()
        else:
            self._rank_one(x)

    def _rank_one(self, x: np.ndarray) -> None:
        Ax = self.A_inv @ x
        denom = 1.0 + x @ Ax
        self.A_inv -= np.outer(Ax, Ax / denom)
        self._after_rank_one(denom)

    def _after_rank_one(self, denom: float) -> None:
        pass

    def _gram(self) -> np.ndarray:
        return self.A

    def _refresh(self) -> None:
        G = self._gram()
        # Cholesky alone can succeed on a numerically singular PSD matrix.
        if self.A_inv is None and (self.t < self.d or float(np.linalg.eigvalsh(G)[0]) <= PD_TOL):
            return
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            self.A_inv = None
            return
        L_inv = np.linalg.inv(L)
        self.A_inv = L_inv.T @ L_inv
        self._since_refresh = 0
        self._after_refresh(L)

    def _after_refresh(self, L: np.ndarray) -> None:
        pass

    def _require_inverse(self) -> np.ndarray:
        if self.A_inv is None:
            w, V = np.linalg.eigh(self._gram())
            raise RankDeficientError(
                f"design matrix is singular after {self.t} pulls (smallest eigenvalue {w[0]:.3g})",
                null_direction=V[:, 0],
            )
        return self.A_inv

    def theta_hat(self) -> np.ndarray:
        return self._require_inverse() @ self.b

    def weighted_norm(self, x: np.ndarray) -> float:
        """||x||_{A^{-1}} = sqrt(x^T A^{-1} x)."""
        return weighted_norm(self, x)

    def diag_bound(self, x: np.ndarray) -> float:
        return diag_bound(self, x)

    def inverse_error(self) -> float:
        """Relative Frobenius distance between A_inv and a fresh inverse of A."""
        direct = np.linalg.inv(self._gram())
        return float(np.linalg.norm(self._require_inverse() - direct) / np.linalg.norm(direct))


class LeastSquaresState(_GramState):
    """Ordinary least squares; valid confidence bounds need a non-adaptive design.

    Args:
        d: number of base arms.
        k: super-arm size.
        sigma: bound on the summed noise, sigma = k * R.
    """

    def __init__(self, d: int, k: int, sigma: float):
        super().__init__(d, k)
        if sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {sigma}")
        self.sigma = float(sigma)


class RegularizedLSState(_GramState):
    """Ridge estimator with A^omega = omega I + sum x x^T.

    ``log_det`` tracks log det(A^omega) through the matrix determinant lemma
    and is recomputed on every full refresh.
    """

    def __init__(self, d: int, k: int, omega: float = 1.0, s_bound: float = 1.0, r_subg: float = 1.0):
        super().__init__(d, k)
        if not omega > 0:
            raise ParameterError(f"omega must be > 0, got {omega}")
        if not s_bound > 0:
            raise ParameterError(f"S must be > 0, got {s_bound}")
        if r_subg < 0:
            raise ParameterError(f"R must be >= 0, got {r_subg}")
        self.omega = float(omega)
        self.s_bound = float(s_bound)
        self.r_subg = float(r_subg)
        self.A_inv = np.eye(d) / omega
        self.log_det = d * math.log(omega)

    @property
    def A_omega(self) -> np.ndarray:
        return self.omega * np.eye(self.d) + self.A

    def _gram(self) -> np.ndarray:
        return self.A_omega

    def _after_rank_one(self, denom: float) -> None:
        self.log_det += math.log(denom)

    def _after_refresh(self, L: np.ndarray) -> None:
        self.log_det = 2.0 * float(np.log(np.diag(L)).sum())


def _check_delta(delta: float, upper_inclusive: bool = False) -> None:
    ok = 0 < delta <= 1 if upper_inclusive else 0 < delta < 1
    if not ok:
        raise ParameterError(f"delta must be in (0, 1{']' if upper_inclusive else ')'}, got {delta}")


def ellipsoid_radius(state: LeastSquaresState, num_arms: int | None, delta: float,
                     log_num_arms: float | None = None) -> float:
    """C_t = 2 sqrt(2) sigma sqrt(log(c' t^2 K / delta)) with c' = 6 / pi^2.

    Pass ``log_num_arms`` instead of ``num_arms`` when K is astronomically
    large. Returns 0 when the log argument is at most 1.
    """
    _check_delta(delta)
    if state.t < 1:
        raise ParameterError("radius needs at least one pull")
    if log_num_arms is None:
        if num_arms is None or num_arms < 1:
            raise ParameterError(f"K must be >= 1, got {num_arms}")
        log_num_arms = math.log(num_arms)
    arg = math.log(C_PRIME) + 2.0 * math.log(state.t) + log_num_arms - math.log(delta)
    if arg <= 0:
        return 0.0
    return 2.0 * math.sqrt(2.0) * state.sigma * math.sqrt(arg)


def independent_radius(state: LeastSquaresState, delta: float) -> float:
    """C_t = sigma sqrt(2 log(c' t^2 d / delta)) for the diagonal relaxation."""
    _check_delta(delta)
    if state.t < 1:
        raise ParameterError("radius needs at least one pull")
    arg = math.log(C_PRIME) + 2.0 * math.log(state.t) + math.log(state.d) - math.log(delta)
    if arg <= 0:
        return 0.0
    return state.sigma * math.sqrt(2.0 * arg)


def regularized_radius(state: RegularizedLSState, delta: float) -> float:
    """Determinant-based radius R sqrt(2k log(det(A^w)^(1/2) / (w^(d/2) delta))) + sqrt(w) S."""
    _check_delta(delta, upper_inclusive=True)
    if not state.log_det > state.d * math.log(state.omega) - 1e-9:
        # det(A^w) >= w^d always; anything else means the state is corrupt.
        raise RankDeficientError("regularized design lost positive definiteness")
    arg = 0.5 * state.log_det - 0.5 * state.d * math.log(state.omega) - math.log(delta)
    core = state.r_subg * math.sqrt(2.0 * state.k * max(arg, 0.0))
    return core + math.sqrt(state.omega) * state.s_bound


def regularized_radius_fallback(state: RegularizedLSState, delta: float) -> float:
    """Closed-form upper bound R sqrt(2kd log((1 + t k / w) / delta)) + sqrt(w) S."""
    _check_delta(delta, upper_inclusive=True)
    arg = math.log1p(state.t * state.k / state.omega) - math.log(delta)
    core = state.r_subg * math.sqrt(2.0 * state.k * state.d * max(arg, 0.0))
    return core + math.sqrt(state.omega) * state.s_bound


def _as_vector(state: _GramState, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (state.d,):
        raise ParameterError(f"expected a vector of length {state.d}, got shape {x.shape}")
    return x


def weighted_norm(state: _GramState, x) -> float:
    x = _as_vector(state, x)
    q = float(x @ state._require_inverse() @ x)
    return math.sqrt(max(q, 0.0))


def diag_bound(state: _GramState, x) -> float:
    """sum_i |x_i| sqrt(A^{-1}(i, i)), an upper bound on weighted_norm."""
    x = _as_vector(state, x)
    s = np.sqrt(np.maximum(np.diag(state._require_inverse()), 0.0))
    return float(np.abs(x) @ s)
