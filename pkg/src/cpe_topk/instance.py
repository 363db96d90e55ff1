"""Problem instances, super arms and static allocations.

A super arm is a size-k subset of the d base arms. Its reward is the sum of
the rewards of its members, and only that sum is ever observed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArmError, NumericInputError, ParameterError, RankDeficientError, SizeGuardError

NOISE_KINDS = ("uniform", "gaussian", "bernoulli")

# Smallest admissible eigenvalue of sum_M chi_M chi_M^T over a support.
SPAN_TOL = 1e-10
ABS_TOL = 1e-9


@dataclass(frozen=True)
class SuperArm:
    """A size-k subset of base arms, stored as a strictly increasing tuple."""

    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(i) for i in self.members)
        object.__setattr__(self, "members", members)
        if any(i < 0 for i in members):
            raise InvalidArmError(f"negative base-arm index in {members}")
        if any(a >= b for a, b in zip(members, members[1:])):
            raise InvalidArmError(f"members must be strictly increasing: {members}")

    @classmethod
    def of(cls, indices: Iterable[int]) -> "SuperArm":
        """Build from any iterable of distinct indices (order ignored)."""
        idx = [int(i) for i in indices]
        if len(set(idx)) != len(idx):
            raise InvalidArmError(f"duplicate base arms in {idx}")
        return cls(tuple(sorted(idx)))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, e) -> bool:
        return e in self.members

    @property
    def index(self) -> np.ndarray:
        return np.fromiter(self.members, dtype=np.intp, count=len(self.members))

    def validate(self, d: int, k: int) -> "SuperArm":
        if len(self.members) != k:
            raise InvalidArmError(f"super arm {self.members} has size {len(self.members)}, expected {k}")
        if self.members and self.members[-1] >= d:
            raise InvalidArmError(f"super arm {self.members} has an index outside [0, {d})")
        return self

    def indicator(self, d: int) -> np.ndarray:
        """Return chi_M as a float vector of length d."""
        if self.members and self.members[-1] >= d:
            raise InvalidArmError(f"super arm {self.members} has an index outside [0, {d})")
        x = np.zeros(d)
        x[list(self.members)] = 1.0
        return x

    def __str__(self) -> str:
        return "{" + ",".join(map(str, self.members)) + "}"


@dataclass(frozen=True)
class BanditInstance:
    """Ground truth of a simulated top-k problem.

    ``noise_param`` is the half-width R for ``uniform`` noise, the standard
    deviation for ``gaussian`` noise and ignored for ``bernoulli`` rewards
    (which are bounded with R = 1). A value of 0 gives a noiseless instance.
    """

    d: int
    k: int
    theta: np.ndarray
    noise: str = "gaussian"
    noise_param: float = 1.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if theta.shape[0] != self.d:
            raise ParameterError(f"theta has {theta.shape[0]} entries, expected d={self.d}")
        if not np.all(np.isfinite(theta)):
            raise NumericInputError("theta must be finite")
        if not 1 <= self.k < self.d:
            raise ParameterError(f"need 1 <= k < d, got k={self.k}, d={self.d}")
        if self.noise not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.noise!r}; expected one of {NOISE_KINDS}")
        if not (math.isfinite(self.noise_param) and self.noise_param >= 0):
            raise ParameterError(f"noise parameter must be >= 0, got {self.noise_param}")

    @property
    def R(self) -> float:
        """Per-base-arm noise scale used by the confidence radii."""
        if self.noise == "bernoulli":
            return 1.0
        return float(self.noise_param)

    @property
    def sigma(self) -> float:
        """Super-arm noise bound k * R."""
        return self.k * self.R

    @property
    def log_num_super_arms(self) -> float:
        return log_binom(self.d, self.k)

    def best_arm(self) -> SuperArm:
        order = np.argsort(-self.theta, kind="stable")
        return SuperArm.of(order[: self.k])

    def expected_reward(self, arm: SuperArm) -> float:
        return expected_reward(self, arm)

    def is_eps_optimal(self, arm: SuperArm, eps: float) -> bool:
        best = float(np.sort(self.theta)[::-1][: self.k].sum())
        return best - expected_reward(self, arm) <= eps + ABS_TOL

    # Flat text record: one "key=value" line per field.
    def to_record(self) -> str:
        lines = [
            f"d={self.d}",
            f"k={self.k}",
            "theta=" + ",".join(repr(float(v)) for v in self.theta),
            f"noise={self.noise}",
            f"noise_param={self.noise_param!r}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_record(cls, text: str) -> "BanditInstance":
        fields = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParameterError(f"malformed instance line: {raw!r}")
            fields[key.strip()] = value.strip()
        missing = {"d", "k", "theta", "noise", "noise_param"} - fields.keys()
        if missing:
            raise ParameterError(f"instance record is missing {sorted(missing)}")
        theta = [float(v) for v in fields["theta"].split(",") if v.strip()]
        return cls(
            d=int(fields["d"]),
            k=int(fields["k"]),
            theta=np.array(theta),
            noise=fields["noise"],
            noise_param=float(fields["noise_param"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_record())

    @classmethod
    def load(cls, path) -> "BanditInstance":
        return cls.from_record(Path(path).read_text())


def expected_reward(instance: BanditInstance, arm: SuperArm) -> float:
    """Return theta(M), the sum of member means."""
    arm.validate(instance.d, instance.k)
    return float(instance.theta[list(arm.members)].sum())


def log_binom(n: int, r: int) -> float:
    """Natural log of C(n, r) via lgamma; never overflows."""
    if r < 0 or r > n:
        raise ParameterError(f"C({n},{r}) undefined")
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def all_super_arms(d: int, k: int, limit: int = 10**6) -> np.ndarray:
    """Indicator rows of every size-k subset, in lexicographic order.

    Raises SizeGuardError when C(d, k) exceeds ``limit``.
    """
    count = math.comb(d, k)
    if count > limit:
        raise SizeGuardError(f"C({d},{k}) = {count} exceeds the enumeration limit {limit}")
    combos = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(d), k)),
        dtype=np.intp,
        count=count * k,
    ).reshape(count, k)
    X = np.zeros((count, d))
    np.put_along_axis(X, combos, 1.0, axis=1)
    return X


def gram(indicators: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """sum_i w_i x_i x_i^T for indicator rows x_i (unit weights by default)."""
    if weights is None:
        return indicators.T @ indicators
    return (indicators * weights[:, None]).T @ indicators


def spans(indicators: np.ndarray) -> bool:
    """True when the rows span R^d, i.e. their Gram matrix is numerically PD."""
    if indicators.shape[0] == 0:
        return False
    return float(np.linalg.eigvalsh(gram(indicators))[0]) > SPAN_TOL


@dataclass(frozen=True)
class Allocation:
    """A distribution over a polynomial-size support of super arms."""

    d: int
    support: tuple[SuperArm, ...]
    weights: np.ndarray
    _X: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        support = tuple(self.support)
        object.__setattr__(self, "support", support)
        w = np.array(self.weights, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if len(support) == 0 or len(support) != w.shape[0]:
            raise ParameterError("support and weights must be non-empty and of equal length")
        if len(set(support)) != len(support):
            raise ParameterError("support arms must be distinct")
        k = len(support[0])
        for arm in support:
            arm.validate(self.d, k)
        if not np.all(w > 0):
            raise ParameterError("every allocation weight must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights sum to {w.sum()!r}, not 1")
        X = np.stack([a.indicator(self.d) for a in support])
        X.setflags(write=False)
        object.__setattr__(self, "_X", X)
        if not spans(X):
            raise RankDeficientError(
                "allocation support does not span R^d",
                null_direction=np.linalg.eigh(gram(X))[1][:, 0],
            )

    @property
    def k(self) -> int:
        return len(self.support[0])

    @property
    def indicators(self) -> np.ndarray:
        return self._X

    def design_matrix(self) -> np.ndarray:
        """Lambda_lambda = sum_M lambda_M chi_M chi_M^T."""
        return gram(self._X, self.weights)


def uniform_allocation(support: Sequence[SuperArm], d: int) -> Allocation:
    n = len(support)
    return Allocation(d, tuple(support), np.full(n, 1.0 / n))


# Candidate base sets scanned per base arm when the cyclic windows do not span.
CIRCULANT_SCAN = 20


def _circulant_base(d: int, k: int) -> tuple[int, ...] | None:
    """Best-conditioned spanning base set B (0 in B) among the first lexicographic candidates.

    The shifts {i + b mod d : b in B} have a circulant Gram matrix whose
    eigenvalues are |DFT(chi_B)|^2, so B spans iff its DFT has no zero.
    """
    budget = CIRCULANT_SCAN * d
    best, best_gain = None, SPAN_TOL
    combos = itertools.islice(itertools.combinations(range(1, d), k - 1), budget)
    while True:
        chunk = list(itertools.islice(combos, 1024))
        if not chunk:
            return best
        ind = np.zeros((len(chunk), d))
        ind[:, 0] = 1.0
        np.put_along_axis(ind, np.array(chunk, dtype=np.intp).reshape(len(chunk), k - 1), 1.0, axis=1)
        gain = np.abs(np.fft.fft(ind, axis=1)).min(axis=1) ** 2
        i = int(np.argmax(gain))
        if gain[i] > best_gain * (1 + 1e-9):
            best, best_gain = (0,) + tuple(chunk[i]), float(gain[i])


def default_support(d: int, k: int, seed: int = 0) -> list[SuperArm]:
    """d cyclic shifts of a base set, repaired to full rank if needed.

    The base set is the window {1, ..., k}, which spans when gcd(d, k) = 1.
    Otherwise the best-conditioned spanning base set among the first
    CIRCULANT_SCAN * d lexicographic candidates is used, which keeps the
    design circulant. If none spans, uniformly random size-k sets are appended
    to the windows (only those that raise the rank), with at most 3d draws.
    """
    if not 1 <= k < d:
        raise ParameterError(f"need 1 <= k < d, got k={k}, d={d}")
    support = [SuperArm.of((i + j) % d for j in range(1, k + 1)) for i in range(d)]
    if math.gcd(d, k) == 1:
        return support
    base = _circulant_base(d, k)
    if base is not None:
        return [SuperArm.of((i + b) % d for b in base) for i in range(d)]
    X = np.stack([a.indicator(d) for a in support])
    rank = np.linalg.matrix_rank(X)
    rng = np.random.default_rng(seed)
    seen = set(support)
    for _ in range(3 * d):
        cand = SuperArm.of(rng.choice(d, size=k, replace=False))
        if cand in seen:
            continue
        X_new = np.vstack([X, cand.indicator(d)])
        new_rank = np.linalg.matrix_rank(X_new)
        if new_rank > rank:
            support.append(cand)
            seen.add(cand)
            X, rank = X_new, new_rank
            if rank == d:
                return support
    raise RankDeficientError(f"could not repair the cyclic support for d={d}, k={k} within {3 * d} draws")
