"""Pure-exploration algorithms for top-k selection under full-bandit feedback."""

from .adaptive import run_clucb, run_clucb_ex, run_clucb_qm
from .common import CONDITION_MET, ROUND_CAP, AlgoConfig, RunOutcome, TraceRow
from .design import compute_g_allocation, g_objective, uniform_allocation
from .elimination import me_sample_count, run_lucb, run_me
from .static import run_icb, run_sa_ex, run_saqm

STATIC_ALGORITHMS = {"ICB": run_icb, "SAQM": run_saqm, "SA-Ex": run_sa_ex}
ADAPTIVE_ALGORITHMS = {"CLUCB-QM": run_clucb_qm, "CLUCB": run_clucb, "CLUCB-Ex": run_clucb_ex,
                       "ME": run_me, "LUCB": run_lucb}
EXPONENTIAL = ("SA-Ex", "CLUCB-Ex")
ALGORITHMS = tuple(STATIC_ALGORITHMS) + tuple(ADAPTIVE_ALGORITHMS)

__all__ = [
    "ADAPTIVE_ALGORITHMS", "ALGORITHMS", "AlgoConfig", "CONDITION_MET", "EXPONENTIAL", "ROUND_CAP",
    "RunOutcome", "STATIC_ALGORITHMS", "TraceRow", "compute_g_allocation", "g_objective", "me_sample_count",
    "run_clucb", "run_clucb_ex", "run_clucb_qm", "run_icb", "run_lucb", "run_me", "run_sa_ex", "run_saqm",
    "uniform_allocation",
]
