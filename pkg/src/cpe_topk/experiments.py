"""Experiment driver: seeded repetitions, sweeps, runtime and approximation studies.

Every function returns plain row dicts so the CLI, the tests and notebooks
share one code path. Per-run seeds are spawned from a master seed with
``numpy.random.SeedSequence``, so the master seed fixes every output.
"""

from __future__ import annotations

import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .algorithms import (ADAPTIVE_ALGORITHMS, ALGORITHMS, EXPONENTIAL, STATIC_ALGORITHMS, AlgoConfig,
                         RunOutcome, compute_g_allocation, uniform_allocation)
from .algorithms.static import EXACT_LIMIT
from .environments import (CROWD_PRESETS, Environment, SyntheticSpec, crowd_preset, generate_synthetic,
                           load_crowd_labels, read_label_file)
from .errors import ParameterError, SizeGuardError
from .instance import Allocation, default_support

SUMMARY_FIELDS = ("algorithm", "seed", "d", "k", "delta_min", "dataset", "rep", "epsilon", "delta",
                  "samples", "correct", "wall_time", "mean_round_time", "stopped_by")
TRACE_FIELDS = ("round", "radius", "z", "z_exact", "empirical_best", "round_time")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: which algorithms, on which instances, how many times.

    Exactly one instance source is used: ``labels`` (a label file), then
    ``dataset`` (a built-in crowdsourcing preset), else the synthetic
    generator with ``d``, ``k`` and ``delta_min``.
    """

    algorithms: tuple[str, ...] = ("SAQM",)
    d: int = 10
    k: int = 5
    delta_min: float = 1.0
    noise_std: float = 1.0
    labels: str | None = None
    dataset: str | None = None
    algo: AlgoConfig = field(default_factory=AlgoConfig)
    alloc: str | None = None
    reps: int = 1
    seed: int = 0
    exact_ratio: bool = False
    enable_exponential: bool = False
    workers: int = 1
    trace_dir: str | None = None

    def __post_init__(self):
        if self.reps < 1:
            raise ParameterError(f"reps must be >= 1, got {self.reps}")
        if self.workers < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ParameterError(f"unknown algorithm(s) {unknown}; choose from {list(ALGORITHMS)}")
        if not self.algorithms:
            raise ParameterError("no algorithm selected")
        if self.alloc not in (None, "uniform", "g"):
            raise ParameterError(f"alloc must be 'uniform' or 'g', got {self.alloc!r}")
        if self.dataset is not None and self.dataset.lower() not in CROWD_PRESETS:
            raise ParameterError(f"unknown dataset {self.dataset!r}; choose from {sorted(CROWD_PRESETS)}")
        if self.labels is None and self.dataset is None:
            SyntheticSpec(self.d, self.k, self.delta_min, self.noise_std)

    @property
    def synthetic(self) -> bool:
        return self.labels is None and self.dataset is None

    @property
    def alloc_kind(self) -> str:
        # G-allocation on synthetic data, uniform on crowdsourcing data.
        if self.alloc is not None:
            return self.alloc
        return "g" if self.synthetic else "uniform"


def spawn_seeds(master: int, n: int) -> list[tuple[int, int]]:
    """(instance seed, run seed) pairs for n repetitions."""
    children = np.random.SeedSequence(master).spawn(n)
    return [tuple(int(v) for v in c.generate_state(2, dtype=np.uint32)) for c in children]


def resolve_seed(seed: int) -> int:
    """CPE_SEED in the environment overrides the given seed."""
    env = os.environ.get("CPE_SEED")
    if env is None or env.strip() == "":
        return seed
    try:
        return int(env)
    except ValueError:
        raise ParameterError(f"CPE_SEED must be an integer, got {env!r}") from None


def make_allocation(kind: str, d: int, k: int) -> Allocation:
    support = default_support(d, k)
    if kind == "g":
        return compute_g_allocation(support, d)
    return uniform_allocation(support, d)


def build_environment(exp: ExperimentConfig, instance_seed: int) -> Environment:
    if exp.labels is not None:
        return load_crowd_labels(read_label_file(exp.labels), exp.k)
    if exp.dataset is not None:
        return crowd_preset(exp.dataset, k=exp.k, seed=0)
    spec = SyntheticSpec(exp.d, exp.k, exp.delta_min, exp.noise_std, seed=instance_seed)
    return Environment(generate_synthetic(spec))


def check_guards(exp: ExperimentConfig, d: int, k: int) -> None:
    """Refuse exponential work that is disabled or too large."""
    big = math.comb(d, k) > EXACT_LIMIT
    for name in exp.algorithms:
        if name in EXPONENTIAL:
            if not exp.enable_exponential:
                raise ParameterError(f"{name} is exponential-time; pass --enable-exponential to run it")
            if big:
                raise SizeGuardError(f"{name} refuses C({d},{k}) > {EXACT_LIMIT} super arms")
    if exp.exact_ratio and big:
        raise SizeGuardError(f"exact ratios refuse C({d},{k}) > {EXACT_LIMIT} super arms")


def run_algorithm(name: str, env: Environment, alloc: Allocation | None, cfg: AlgoConfig) -> RunOutcome:
    if name in STATIC_ALGORITHMS:
        return STATIC_ALGORITHMS[name](env, alloc, cfg)
    return ADAPTIVE_ALGORITHMS[name](env, cfg)


def _run_task(task: tuple) -> tuple[dict, list]:
    exp, name, rep, inst_seed, run_seed = task
    env = build_environment(exp, inst_seed)
    cfg = replace(exp.algo, seed=run_seed, exact_ratio=exp.exact_ratio, trace=exp.algo.trace or bool(exp.trace_dir))
    alloc = make_allocation(exp.alloc_kind, env.d, env.k) if name in STATIC_ALGORITHMS else None
    out = run_algorithm(name, env, alloc, cfg)
    row = {
        "algorithm": name,
        "seed": run_seed,
        "d": env.d,
        "k": env.k,
        "delta_min": exp.delta_min if exp.synthetic else "",
        "dataset": "" if exp.synthetic else (exp.dataset or Path(exp.labels).name),
        "rep": rep,
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "samples": out.samples,
        "correct": env.instance.is_eps_optimal(out.output, cfg.epsilon),
        "wall_time": out.wall_time,
        "mean_round_time": out.mean_round_time,
        "stopped_by": out.stopped_by,
    }
    return row, [tuple(r) for r in out.trace]


def _execute(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps submission order, so results are written deterministically.
        return list(pool.map(_run_task, tasks))


def run_experiment(exp: ExperimentConfig) -> list[dict]:
    """All selected algorithms on ``reps`` seeded instances; one summary row per run."""
    if exp.labels is not None and not Path(exp.labels).is_file():
        raise FileNotFoundError(f"label file not found: {exp.labels}")
    check_guards(exp, exp.d, exp.k)
    seeds = spawn_seeds(exp.seed, exp.reps)
    tasks = [(exp, name, rep, s_inst, s_run) for rep, (s_inst, s_run) in enumerate(seeds)
             for name in exp.algorithms]
    results = _execute(tasks, exp.workers)
    if exp.trace_dir:
        out_dir = Path(exp.trace_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for row, trace in results:
            tag = f"dm{row['delta_min']}" if exp.synthetic else row["dataset"]
            write_rows(out_dir / f"{row['algorithm']}_{tag}_rep{row['rep']}.csv",
                       [dict(zip(TRACE_FIELDS, r)) for r in trace], TRACE_FIELDS)
    return [row for row, _ in results]


def sweep(exp: ExperimentConfig, grid: Sequence[float]) -> list[dict]:
    """run_experiment at every delta_min of ``grid`` (long format)."""
    if not grid:
        raise ParameterError("empty delta_min grid")
    rows = []
    for dm in grid:
        rows.extend(run_experiment(replace(exp, delta_min=float(dm))))
    return rows


def bench_runtime(d_list: Sequence[int], algorithms: Sequence[str], budget: int = 20000,
                  exp_budget: int = 30, seed: int = 0, enable_exponential: bool = False) -> list[dict]:
    """Mean per-round wall time on synthetic (d, d/2) instances over a fixed pull budget.

    Exponential references run for only ``exp_budget`` rounds after
    initialization and only when enabled and within the size guard.
    """
    if not d_list:
        raise ParameterError("empty d list")
    rows = []
    for d in d_list:
        k = d // 2
        if k < 1:
            raise ParameterError(f"d={d} is too small")
        env = Environment(generate_synthetic(SyntheticSpec(d, k, 0.1, seed=seed)))
        alloc = make_allocation("g", d, k)
        for name in algorithms:
            exponential = name in EXPONENTIAL
            if exponential and (not enable_exponential or math.comb(d, k) > EXACT_LIMIT):
                continue
            n = (exp_budget if exponential else budget) + 3 * d
            cfg = AlgoConfig(epsilon=0.0, delta=0.05, seed=seed, max_rounds=n)
            # Warm-up: compile kernels and fill caches outside the timed run.
            run_algorithm(name, env, alloc, replace(cfg, max_rounds=min(n, 3 * d + 2)))
            out = run_algorithm(name, env, alloc, cfg)
            rows.append({"algorithm": name, "d": d, "k": k, "rounds": out.samples,
                         "mean_round_time": out.mean_round_time})
    return rows


def approx_eval(d: int = 10, k: int = 5, delta_mins: Sequence[float] = (0.1, 1.0), reps: int = 10,
                rounds: int = 10000, seed: int = 0, alpha: float = 0.9, delta: float = 0.05,
                epsilon: float = 0.5) -> list[dict]:
    """Per-round Z_t / Z_t^exact of SAQM for the first ``rounds`` rounds after initialization.

    ``additive_error`` is Z_t^exact - Z_t, which equals Z_t^exact (1 - ratio).
    """
    if math.comb(d, k) > EXACT_LIMIT:
        raise SizeGuardError(f"exact ratios refuse C({d},{k}) > {EXACT_LIMIT} super arms")
    alloc = make_allocation("g", d, k)
    rows = []
    for dm in delta_mins:
        for rep, (s_inst, s_run) in enumerate(spawn_seeds(seed, reps)):
            env = Environment(generate_synthetic(SyntheticSpec(d, k, dm, seed=s_inst)))
            cfg = AlgoConfig(epsilon=epsilon, delta=delta, alpha=alpha, seed=s_run, trace=True,
                             exact_ratio=True, max_rounds=len(alloc.support) + rounds)
            out = STATIC_ALGORITHMS["SAQM"](env, alloc, cfg)
            for r in out.trace:
                rows.append({"delta_min": dm, "rep": rep, "round": r.round, "z": r.z, "z_exact": r.z_exact,
                             "ratio": r.ratio, "additive_error": r.z_exact - r.z})
    return rows


def write_rows(path, rows: Iterable[dict], fields: Sequence[str]) -> None:
    """Header plus one comma-separated line per row; ``path`` None or '-' means stdout."""
    rows = list(rows)
    if path is None or str(path) == "-":
        _write(sys.stdout, rows, fields)
        return
    with open(path, "w", newline="") as fh:
        _write(fh, rows, fields)


def _write(fh, rows: list[dict], fields: Sequence[str]) -> None:
    w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v
