"""Simulated full-bandit environments.

An environment only ever returns the summed reward of a pulled super arm;
per-base-arm outcomes are never exposed.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArmError, ParameterError
from .instance import ABS_TOL, BanditInstance, SuperArm


@dataclass(frozen=True)
class SyntheticSpec:
    d: int
    k: int
    delta_min: float
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta_min <= 1:
            raise ParameterError(f"delta_min must be in (0, 1], got {self.delta_min}")
        if not 1 <= self.k < self.d:
            raise ParameterError(f"need 1 <= k < d, got k={self.k}, d={self.d}")
        if self.noise_std < 0:
            raise ParameterError(f"noise_std must be >= 0, got {self.noise_std}")


def generate_synthetic(spec: SyntheticSpec) -> BanditInstance:
    """Draw an instance whose super-arm minimum gap equals ``spec.delta_min``.

    The top-k means are uniform on [0, 1]. The (k+1)-th mean is placed at
    (smallest top-k mean) - delta_min and the rest are uniform below it on
    [-1, that value], so the best swap loses exactly delta_min. Arm positions
    are shuffled.
    """
    rng = np.random.default_rng(spec.seed)
    d, k = spec.d, spec.k
    while True:
        top = rng.uniform(0.0, 1.0, size=k)
        runner_up = top.min() - spec.delta_min
        rest = rng.uniform(-1.0, runner_up, size=d - k - 1)
        # Probability-zero degeneracies: a rest arm touching the runner-up.
        if rest.size and rest.max() >= runner_up - ABS_TOL:
            continue
        break
    theta = np.concatenate([top, [runner_up], rest])
    theta = theta[rng.permutation(d)]
    return BanditInstance(d, k, theta, noise="gaussian", noise_param=spec.noise_std)


class Environment:
    """Stochastic reward oracle around a BanditInstance.

    Noise model by ``instance.noise``:
      gaussian  - one N(0, noise_param^2) draw added to the sum;
      uniform   - independent U[-R, R] noise on every member, summed;
      bernoulli - independent Bernoulli(theta_e) per member, summed.
    """

    def __init__(self, instance: BanditInstance):
        self.instance = instance
        self._theta = np.asarray(instance.theta)
        if instance.noise == "bernoulli" and not np.all((self._theta >= 0) & (self._theta <= 1)):
            raise ParameterError("bernoulli rewards need every mean in [0, 1]")

    @property
    def d(self) -> int:
        return self.instance.d

    @property
    def k(self) -> int:
        return self.instance.k

    def pull(self, arm: SuperArm, rng: np.random.Generator) -> float:
        arm.validate(self.d, self.k)
        return self.pull_idx(arm.index, rng)

    def pull_idx(self, idx, rng: np.random.Generator) -> float:
        """Pull by member index array (no validation; hot path)."""
        inst = self.instance
        mean = self._theta[idx].sum()
        if inst.noise == "gaussian":
            if inst.noise_param == 0:
                return float(mean)
            return float(mean + inst.noise_param * rng.standard_normal())
        if inst.noise == "uniform":
            if inst.noise_param == 0:
                return float(mean)
            return float(mean + rng.uniform(-inst.noise_param, inst.noise_param, size=len(idx)).sum())
        return float((rng.random(len(idx)) < self._theta[idx]).sum())

    def pull_many(self, idx, n: int, rng: np.random.Generator) -> np.ndarray:
        """n independent pulls of the same super arm; returns the n rewards."""
        inst = self.instance
        mean = self._theta[idx].sum()
        if n <= 0:
            return np.empty(0)
        if inst.noise == "gaussian":
            if inst.noise_param == 0:
                return np.full(n, float(mean))
            return mean + inst.noise_param * rng.standard_normal(n)
        if inst.noise == "uniform":
            if inst.noise_param == 0:
                return np.full(n, float(mean))
            return mean + rng.uniform(-inst.noise_param, inst.noise_param, size=(n, len(idx))).sum(axis=1)
        return (rng.random((n, len(idx))) < self._theta[idx]).sum(axis=1).astype(float)


    def block_rewards(self, members: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        """Rewards for n future rounds, for each candidate super arm.

        ``members`` is an (m, k) index array. Entry (i, j) is the reward that
        round i would yield if arm j were pulled. All arms share one noise draw
        per round, so reading one entry per round is distributed exactly like a
        sequence of independent pulls.
        """
        inst = self.instance
        members = np.asarray(members)
        means = self._theta[members].sum(axis=1)
        if inst.noise == "gaussian":
            if inst.noise_param == 0:
                return np.broadcast_to(means, (n, means.shape[0])).copy()
            return means[None, :] + inst.noise_param * rng.standard_normal(n)[:, None]
        if inst.noise == "uniform":
            if inst.noise_param == 0:
                return np.broadcast_to(means, (n, means.shape[0])).copy()
            noise = rng.uniform(-inst.noise_param, inst.noise_param, size=(n, members.shape[1])).sum(axis=1)
            return means[None, :] + noise[:, None]
        u = rng.random((n, members.shape[1]))
        return (u[:, None, :] < self._theta[members][None, :, :]).sum(axis=2).astype(float)


def pull(env: Environment, arm: SuperArm, rng: np.random.Generator) -> float:
    return env.pull(arm, rng)


class CrowdEnvironment(Environment):
    """Workers as base arms; a pull asks k workers one fresh question each.

    The reward is the number of correct answers, a sum of independent
    Bernoulli(accuracy) draws, so it always lies in [0, k].
    """

    def __init__(self, accuracies: Sequence[float], k: int, worker_ids: Sequence | None = None):
        acc = np.asarray(accuracies, dtype=float)
        if not np.all((acc >= 0) & (acc <= 1)):
            raise ParameterError("accuracies must lie in [0, 1]")
        super().__init__(BanditInstance(acc.shape[0], k, acc, noise="bernoulli", noise_param=1.0))
        self.accuracies = acc
        self.worker_ids = list(worker_ids) if worker_ids is not None else list(range(acc.shape[0]))
        if len(self.worker_ids) != acc.shape[0]:
            raise ParameterError("one worker id per accuracy is required")
        self._pos = {w: i for i, w in enumerate(self.worker_ids)}

    def index_of(self, worker_id) -> int:
        try:
            return self._pos[worker_id]
        except KeyError:
            raise InvalidArmError(f"unknown worker {worker_id!r}") from None

    def arm_of(self, worker_ids: Iterable) -> SuperArm:
        return SuperArm.of(self.index_of(w) for w in worker_ids)

    @property
    def tied_boundary(self) -> bool:
        """True when the k-th and (k+1)-th best accuracies coincide."""
        srt = np.sort(self.accuracies)[::-1]
        return bool(srt[self.k - 1] - srt[self.k] <= ABS_TOL)


def _as_key(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def load_crowd_labels(rows: Iterable[Sequence], k: int) -> CrowdEnvironment:
    """Per-worker accuracy from (task_id, worker_id, given_label, true_label) records."""
    correct: dict = defaultdict(int)
    total: dict = defaultdict(int)
    for row in rows:
        if len(row) < 4:
            raise ParameterError(f"label record needs 4 fields, got {row!r}")
        _, worker, given, truth = (str(v).strip() for v in row[:4])
        worker = _as_key(worker)
        total[worker] += 1
        correct[worker] += int(given == truth)
    if not total:
        raise ParameterError("no label records")
    workers = sorted(total, key=lambda w: (isinstance(w, str), w))
    acc = [correct[w] / total[w] for w in workers]
    if k >= len(workers):
        raise ParameterError(f"k={k} must be smaller than the number of workers ({len(workers)})")
    return CrowdEnvironment(acc, k, workers)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_label_file(path) -> list[list[str]]:
    """Parse a delimiter-separated label file; a non-numeric first field marks a header."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"label file not found: {p}")
    text = p.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParameterError(f"label file is empty: {p}")
    sample = "\n".join(lines[:20])
    try:
        dialect = csv.Sniffer().sniff(sample, delimiters=",\t; |")
        rows = list(csv.reader(io.StringIO("\n".join(lines)), dialect))
    except csv.Error:
        rows = [ln.split() for ln in lines]
    rows = [[f.strip() for f in r] for r in rows if r]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    if not rows:
        raise ParameterError(f"label file has a header but no records: {p}")
    return rows


def write_label_file(rows: Iterable[Sequence], path, header: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["task_id", "worker_id", "given_label", "true_label"])
        w.writerows(rows)


# (tasks, workers, average accuracy, best accuracy, minimum accuracy gap)
CROWD_PRESETS = {
    "it": (25, 36, 0.54, 0.84, 0.04),
    "medicine": (36, 45, 0.48, 0.92, 0.03),
    "chinese": (24, 50, 0.37, 0.79, 0.04),
    "pokemon": (20, 55, 0.28, 1.00, 0.05),
    "english": (30, 63, 0.26, 0.70, 0.03),
    "science": (20, 111, 0.29, 0.85, 0.05),
}


def make_crowd_labels(n_tasks: int, n_workers: int, average: float, best: float, gap: float,
                      k: int, seed: int = 0) -> list[list]:
    """Synthetic binary label records with prescribed accuracy statistics.

    Each worker answers every task and is correct on an exact number of
    tasks, so accuracies are multiples of 1/n_tasks. The best worker scores
    ``best``, the k-th and (k+1)-th best workers are ``gap`` apart, and the
    mean accuracy is close to ``average``.
    """
    if not 1 <= k < n_workers:
        raise ParameterError(f"need 1 <= k < n_workers, got k={k}")
    rng = np.random.default_rng(seed)
    top = int(round(best * n_tasks))
    step = max(1, int(round(gap * n_tasks)))
    # Top k spread below the best; everyone else at most kth - step.
    kth = max(step, int(round(min(best, max(average, 0.0) + (best - average) / 2) * n_tasks)))
    kth = min(kth, top)
    upper = np.sort(rng.integers(kth, top + 1, size=k - 1))[::-1] if k > 1 else np.empty(0, dtype=int)
    counts_top = np.concatenate([[top], upper])
    counts_top[-1] = kth if k > 1 else top
    cap = int(counts_top.min()) - step
    if cap < 0:
        raise ParameterError("gap too large for the requested accuracies")
    n_rest = n_workers - k
    need = average * n_workers * n_tasks - counts_top.sum()
    mean_rest = float(np.clip(need / n_rest, 0, cap))
    rest = np.clip(np.round(rng.normal(mean_rest, max(1.0, 0.15 * n_tasks), size=n_rest)), 0, cap).astype(int)
    rest[0] = cap
    counts = np.concatenate([counts_top, rest]).astype(int)
    counts = counts[rng.permutation(n_workers)]
    truth = rng.integers(0, 2, size=n_tasks)
    rows = []
    for w, c in enumerate(counts):
        right = np.zeros(n_tasks, dtype=bool)
        right[rng.choice(n_tasks, size=int(c), replace=False)] = True
        for task in range(n_tasks):
            given = truth[task] if right[task] else 1 - truth[task]
            rows.append([task, w, int(given), int(truth[task])])
    return rows


def crowd_preset(name: str, k: int = 10, seed: int = 0) -> CrowdEnvironment:
    n_tasks, n_workers, average, best, gap = CROWD_PRESETS[name.lower()]
    return load_crowd_labels(make_crowd_labels(n_tasks, n_workers, average, best, gap, k, seed), k)
