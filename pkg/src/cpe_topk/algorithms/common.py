"""Configuration, outcome and trace types shared by every algorithm."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

from ..cem import DEFAULT_ALPHA
from ..environments import Environment
from ..errors import ParameterError
from ..instance import SuperArm

CONDITION_MET = "condition-met"
ROUND_CAP = "round-cap"


@dataclass(frozen=True)
class AlgoConfig:
    """Run parameters.

    Attributes:
        epsilon: accuracy; the output must be within epsilon of optimal.
        delta: confidence level in (0, 1).
        alpha: approximation factor assumed for the CEM oracle, in (0, 1].
        omega: ridge weight for the adaptive (regularized) algorithms.
        s_bound: bound S on ||theta||_2; defaults to sqrt(d) (means in [-1, 1]).
        max_rounds: hard cap on the number of pulls.
        seed: seed of the run's random generator.
        noise_bound: per-base-arm noise scale R used by the radii; defaults
            to the environment's own value.
        trace: record one TraceRow per round.
        exact_ratio: also solve CEM exactly each round (small instances only).
        check_tracking: verify the tracking-rule count bounds every round.
    """

    epsilon: float = 0.5
    delta: float = 0.05
    alpha: float = DEFAULT_ALPHA
    omega: float = 1.0
    s_bound: float | None = None
    max_rounds: int = 10**7
    seed: int = 0
    noise_bound: float | None = None
    trace: bool = False
    exact_ratio: bool = False
    check_tracking: bool = False

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise ParameterError(f"epsilon must be a finite value >= 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ParameterError(f"delta must be in (0, 1), got {self.delta}")
        if not 0 < self.alpha <= 1:
            raise ParameterError(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.omega > 0:
            raise ParameterError(f"omega must be > 0, got {self.omega}")
        if self.s_bound is not None and not self.s_bound > 0:
            raise ParameterError(f"s_bound must be > 0, got {self.s_bound}")
        if self.noise_bound is not None and self.noise_bound < 0:
            raise ParameterError(f"noise_bound must be >= 0, got {self.noise_bound}")

    def R(self, env: Environment) -> float:
        return env.instance.R if self.noise_bound is None else self.noise_bound

    def S(self, env: Environment) -> float:
        return math.sqrt(env.d) if self.s_bound is None else self.s_bound

    def check_budget(self, d: int) -> None:
        if self.max_rounds < d:
            raise ParameterError(f"max_rounds must be >= d={d}, got {self.max_rounds}")


class TraceRow(NamedTuple):
    """One round of a run.

    ``z`` is the statistic the stopping rule compares (Z_t for the CEM-based
    rules, Z*_t for the exhaustive and independent rules, the CLUCB gap for
    CLUCB). ``z_exact`` is filled only when exact ratios are requested.
    """

    round: int
    radius: float
    z: float
    z_exact: float
    empirical_best: float
    round_time: float

    @property
    def ratio(self) -> float:
        if math.isnan(self.z_exact) or self.z_exact <= 0:
            return math.nan
        return self.z / self.z_exact


@dataclass
class RunOutcome:
    algorithm: str
    output: SuperArm
    samples: int
    wall_time: float
    stopped_by: str
    trace: list[TraceRow] = field(default_factory=list)
    mean_round_time: float = math.nan
    tracking_violations: int = 0

    def fingerprint(self) -> tuple:
        """Everything except timings; equal across repeated seeded runs."""
        # NaN never compares equal, so it is mapped to None.
        rows = tuple(tuple(None if isinstance(v, float) and math.isnan(v) else v
                           for v in (r.round, r.radius, r.z, r.z_exact, r.empirical_best))
                     for r in self.trace)
        return (self.algorithm, self.output.members, self.samples, self.stopped_by, rows,
                self.tracking_violations)


class RoundClock:
    """Monotonic per-round timer that drops the first (warm-up) round."""

    def __init__(self):
        self.start = time.perf_counter()
        self._last = self.start
        self._rounds = 0
        self._total = 0.0

    def tick(self) -> float:
        now = time.perf_counter()
        dt = now - self._last
        self._last = now
        self._rounds += 1
        if self._rounds > 1:
            self._total += dt
        return dt

    def restart_round(self) -> None:
        self._last = time.perf_counter()

    @property
    def mean(self) -> float:
        n = self._rounds - 1
        return self._total / n if n > 0 else math.nan

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start
