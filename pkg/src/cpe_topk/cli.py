"""Command-line driver: ``cpe-topk {run,sweep,bench-runtime,approx-eval,gen-instance}``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .algorithms import ALGORITHMS, AlgoConfig
from .environments import SyntheticSpec, generate_synthetic
from .errors import CPEError
from .experiments import (SUMMARY_FIELDS, ExperimentConfig, approx_eval, bench_runtime, resolve_seed,
                          run_experiment, sweep, write_rows)

USAGE_ERROR = 2
DEFAULT_GRID = (0.2, 0.4, 0.6, 0.8, 1.0)


def _algos(text: str) -> tuple[str, ...]:
    names = tuple(a.strip() for a in text.split(",") if a.strip())
    lookup = {a.lower(): a for a in ALGORITHMS}
    out = []
    for n in names:
        if n.lower() not in lookup:
            raise argparse.ArgumentTypeError(f"unknown algorithm {n!r}; choose from {', '.join(ALGORITHMS)}")
        out.append(lookup[n.lower()])
    return tuple(out)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, algo_default: str = "SAQM") -> None:
    p.add_argument("--algo", type=_algos, default=_algos(algo_default),
                   help=f"comma-separated algorithms ({', '.join(ALGORITHMS)})")
    p.add_argument("--d", type=int, default=10, help="number of base arms (synthetic)")
    p.add_argument("--k", type=int, default=5, help="super-arm size")
    p.add_argument("--eps", type=float, default=0.5, help="accuracy epsilon")
    p.add_argument("--delta", type=float, default=0.05, help="confidence delta")
    p.add_argument("--alpha", type=float, default=0.9, help="assumed CEM approximation factor")
    p.add_argument("--omega", type=float, default=1.0, help="ridge weight (CLUCB family)")
    p.add_argument("--s-bound", type=float, default=None, help="bound S on ||theta|| (default sqrt(d))")
    p.add_argument("--alloc", choices=("uniform", "g"), default=None,
                   help="static allocation (default: g on synthetic, uniform on label data)")
    p.add_argument("--reps", type=int, default=1, help="independent seeded repetitions")
    p.add_argument("--seed", type=int, default=0, help="master seed (CPE_SEED overrides)")
    p.add_argument("--labels", default=None, help="label file: task_id, worker_id, given_label, true_label")
    p.add_argument("--dataset", default=None, help="built-in crowdsourcing-like preset (e.g. it, medicine)")
    p.add_argument("--out", default="-", help="summary output path ('-' for stdout)")
    p.add_argument("--trace-dir", default=None, help="directory for per-run trace files")
    p.add_argument("--exact-ratio", action="store_true", help="also solve CEM exactly each round")
    p.add_argument("--enable-exponential", action="store_true", help="allow SA-Ex and CLUCB-Ex")
    p.add_argument("--max-rounds", type=int, default=10**7, help="hard cap on pulls per run")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpe-topk", description="Top-k pure exploration with full-bandit feedback.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="seeded repetitions of one or more algorithms")
    _common(p)
    p.add_argument("--delta-min", type=float, default=1.0, help="minimum gap of the synthetic instance")

    p = sub.add_parser("sweep", help="repeat 'run' over a grid of delta_min values")
    _common(p, "SAQM,ICB")
    p.add_argument("--delta-min", type=_floats, default=list(DEFAULT_GRID), help="comma-separated grid")

    p = sub.add_parser("bench-runtime", help="mean per-round time on (d, d/2) instances")
    p.add_argument("--algo", type=_algos, default=_algos("SAQM,ICB,CLUCB-QM"))
    p.add_argument("--d", type=_ints, default=[10, 12, 14, 16, 18, 20, 22, 24], help="comma-separated d values")
    p.add_argument("--max-rounds", type=int, default=20000, help="pull budget per run")
    p.add_argument("--enable-exponential", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("approx-eval", help="per-round SAQM approximation ratios against exact CEM")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--delta-min", type=_floats, default=[0.1, 1.0])
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--max-rounds", type=int, default=10000, help="rounds recorded after initialization")
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")

    p = sub.add_parser("gen-instance", help="write a synthetic instance record")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--delta-min", type=float, default=1.0)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    return parser


def _experiment(args, delta_min: float) -> ExperimentConfig:
    algo = AlgoConfig(epsilon=args.eps, delta=args.delta, alpha=args.alpha, omega=args.omega,
                      s_bound=args.s_bound, max_rounds=args.max_rounds)
    return ExperimentConfig(algorithms=args.algo, d=args.d, k=args.k, delta_min=delta_min, labels=args.labels,
                            dataset=args.dataset, algo=algo, alloc=args.alloc, reps=args.reps,
                            seed=resolve_seed(args.seed), exact_ratio=args.exact_ratio,
                            enable_exponential=args.enable_exponential, workers=args.workers,
                            trace_dir=args.trace_dir)


def _dispatch(args) -> int:
    if args.command == "run":
        write_rows(args.out, run_experiment(_experiment(args, args.delta_min)), SUMMARY_FIELDS)
    elif args.command == "sweep":
        rows = sweep(_experiment(args, args.delta_min[0] if args.delta_min else 1.0), args.delta_min)
        write_rows(args.out, rows, SUMMARY_FIELDS)
    elif args.command == "bench-runtime":
        rows = bench_runtime(args.d, args.algo, budget=args.max_rounds, seed=resolve_seed(args.seed),
                             enable_exponential=args.enable_exponential)
        write_rows(args.out, rows, ("algorithm", "d", "k", "rounds", "mean_round_time"))
    elif args.command == "approx-eval":
        rows = approx_eval(args.d, args.k, args.delta_min, args.reps, args.max_rounds,
                           seed=resolve_seed(args.seed), alpha=args.alpha)
        write_rows(args.out, rows, ("delta_min", "rep", "round", "z", "z_exact", "ratio", "additive_error"))
        ratios = np.array([r["ratio"] for r in rows])
        if ratios.size:
            print(f"mean ratio {np.nanmean(ratios):.4f}, share >= 0.9: {np.mean(ratios >= 0.9):.3f}",
                  file=sys.stderr)
    elif args.command == "gen-instance":
        inst = generate_synthetic(SyntheticSpec(args.d, args.k, args.delta_min, args.noise_std,
                                                seed=resolve_seed(args.seed)))
        if args.out == "-":
            sys.stdout.write(inst.to_record())
        else:
            inst.save(args.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except FileNotFoundError as exc:
        print(f"cpe-topk: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (CPEError, ValueError) as exc:
        print(f"cpe-topk: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
