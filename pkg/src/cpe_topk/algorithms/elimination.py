"""Two-stage baselines built on single-arm top-k identification.

Stage 1 fixes a random pad A of k-1 arms and finds good arms among the
remaining set B by pulling padded super arms {e} + A. Stage 2 repeats the
search on B* + A, padded by k-1 discarded arms of B. When B \\ B* holds fewer
than k-1 arms the pad is completed from A, so some candidates sit inside
their own pad. Such a candidate e is probed through the pair

    r(pad + {s}) - r(pad - {e} + {x, s}) = theta(e) - theta(x),

then shifted by the estimate of a regular candidate x, which puts it on the
same theta(e) + theta(pad) scale as every other candidate. A probe costs two
pulls.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..environments import Environment
from ..errors import ParameterError
from ..instance import SuperArm
from .common import CONDITION_MET, ROUND_CAP, AlgoConfig, RunOutcome


class _BudgetExhausted(Exception):
    pass


def me_sample_count(k: int, eps: float, delta: float) -> int:
    """Pulls per arm in one elimination phase: ceil(2 sqrt(k) / eps^2 ln(3k / delta))."""
    if eps <= 0 or not 0 < delta < 1:
        raise ParameterError("need eps > 0 and delta in (0, 1)")
    return math.ceil(2.0 * math.sqrt(k) / eps**2 * math.log(3.0 * k / delta))


def lucb_beta(k: int, n_cands: int, t: int, delta: float, counts: np.ndarray) -> np.ndarray:
    """beta(e, t) = sqrt(k / (2 T_e) ln(5 |B| t^4 / (4 delta)))."""
    arg = math.log(5.0 * n_cands / (4.0 * delta)) + 4.0 * math.log(max(t, 1))
    return np.sqrt(k / (2.0 * counts) * max(arg, 0.0))


def num_phases(n_cands: int, k: int) -> int:
    return max(0, math.ceil(math.log2(n_cands / k))) if n_cands > k else 0


class _PaddedSampler:
    """Pull accounting and padded-probe construction for one subroutine call."""

    def __init__(self, env: Environment, rng: np.random.Generator, pad: list[int], budget: list[int]):
        self.env = env
        self.rng = rng
        self.pad = sorted(pad)
        self.budget = budget  # [pulls used, cap], shared across stages
        outside = [e for e in range(env.d) if e not in set(self.pad)]
        self.outside = outside

    def _spend(self, n: int) -> None:
        if self.budget[0] + n > self.budget[1]:
            raise _BudgetExhausted
        self.budget[0] += n

    def padded(self, e: int, n: int) -> float:
        """Sum of n rewards of {e} + pad (e outside the pad)."""
        self._spend(n)
        idx = np.array(sorted(self.pad + [e]))
        return float(self.env.pull_many(idx, n, self.rng).sum())

    def probe(self, e: int, x: int, n: int) -> float:
        """Sum of n samples of theta(e) - theta(x) for e inside the pad."""
        s = next(a for a in self.outside if a != x)
        self._spend(2 * n)
        first = np.array(sorted(self.pad + [s]))
        second = np.array(sorted([a for a in self.pad if a != e] + [x, s]))
        return float(self.env.pull_many(first, n, self.rng).sum() - self.env.pull_many(second, n, self.rng).sum())


def _ranked(values: dict, k_keep: int) -> list[int]:
    order = sorted(values, key=lambda e: (-values[e], e))
    return sorted(order[:k_keep])


def me_subroutine(sampler: _PaddedSampler, cands: list[int], k: int, eps: float, delta: float) -> list[int]:
    """Median elimination over ``cands`` with padded pulls."""
    current = sorted(cands)
    eps_l, delta_l = eps, delta / 2.0
    in_pad = set(sampler.pad)
    for _ in range(num_phases(len(current), k)):
        n = me_sample_count(k, eps_l, delta_l)
        regular = [e for e in current if e not in in_pad]
        p_hat = {e: sampler.padded(e, n) / n for e in regular}
        x = regular[0]
        for e in current:
            if e in in_pad:
                p_hat[e] = sampler.probe(e, x, n) / n + p_hat[x]
        current = _ranked(p_hat, max(math.ceil(len(current) / 2), k))
        eps_l, delta_l = 0.75 * eps_l, 0.5 * delta_l
    return current


def lucb_subroutine(sampler: _PaddedSampler, cands: list[int], k: int, eps: float, delta: float) -> list[int]:
    """LUCB over ``cands`` with padded pulls; returns High at stopping."""
    cands = sorted(cands)
    if len(cands) <= k:
        return cands
    in_pad = set(sampler.pad)
    pos = {e: i for i, e in enumerate(cands)}
    x = next(e for e in cands if e not in in_pad)
    sums = np.zeros(len(cands))
    counts = np.zeros(len(cands))
    t = 0

    def sample(e: int) -> None:
        nonlocal t
        i = pos[e]
        sums[i] += sampler.probe(e, x, 1) if e in in_pad else sampler.padded(e, 1)
        counts[i] += 1
        t += 1

    for e in cands:
        sample(e)
    xi = pos[x]
    pad_mask = np.array([e in in_pad for e in cands])
    while True:
        means = sums / counts
        means[pad_mask] += means[xi]
        beta = lucb_beta(k, len(cands), t, delta, counts)
        order = np.argsort(-means, kind="stable")
        high, low = order[:k], order[k:]
        h = high[int(np.argmin(means[high] - beta[high]))]
        l_ = low[int(np.argmax(means[low] + beta[low]))]
        if (means[l_] + beta[l_]) - (means[h] - beta[h]) < eps:
            return sorted(cands[i] for i in high)
        sample(cands[h])
        sample(cands[l_])


def _two_stage(name: str, env: Environment, cfg: AlgoConfig, subroutine) -> RunOutcome:
    d, k = env.d, env.k
    if d < k + 1:
        raise ParameterError(f"need d >= k + 1, got d={d}, k={k}")
    cfg.check_budget(d)
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    eps, delta = cfg.epsilon / (2 * k), cfg.delta / 2.0
    if eps <= 0:
        raise ParameterError("the two-stage baselines need epsilon > 0")
    budget = [0, cfg.max_rounds]
    perm = rng.permutation(d)
    A = sorted(int(a) for a in perm[: k - 1])
    B = sorted(int(b) for b in perm[k - 1:])
    stopped_by = CONDITION_MET
    output = None
    try:
        b_star = subroutine(_PaddedSampler(env, rng, A, budget), B, k, eps, delta)
        leftover = [e for e in B if e not in b_star]
        n_bad = min(k - 1, len(leftover))
        bad = sorted(int(e) for e in rng.choice(leftover, size=n_bad, replace=False)) if n_bad else []
        if len(bad) < k - 1:
            bad += sorted(int(a) for a in rng.choice(A, size=k - 1 - len(bad), replace=False))
        output = subroutine(_PaddedSampler(env, rng, bad, budget), sorted(set(b_star) | set(A)), k, eps, delta)
    except _BudgetExhausted:
        stopped_by = ROUND_CAP
    if output is None:
        # Cap hit mid-run: no estimate covers every arm, report a seeded guess.
        output = sorted(int(e) for e in rng.choice(d, size=k, replace=False))
    wall = time.perf_counter() - start
    # Elimination has no natural round; report overall time per sample.
    per_sample = wall / budget[0] if budget[0] else math.nan
    return RunOutcome(name, SuperArm(tuple(output)), budget[0], wall, stopped_by, mean_round_time=per_sample)


def run_me(env: Environment, cfg: AlgoConfig) -> RunOutcome:
    """Two-stage framework with median elimination (ME)."""
    return _two_stage("ME", env, cfg, me_subroutine)


def run_lucb(env: Environment, cfg: AlgoConfig) -> RunOutcome:
    """Two-stage framework with the LUCB subroutine."""
    return _two_stage("LUCB", env, cfg, lucb_subroutine)
