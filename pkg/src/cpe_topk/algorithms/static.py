"""Algorithms that sample from a fixed allocation via the tracking rule.

All three share the sampling rule: pull every support arm once, then pull
argmin_M T_M(t) / lambda_M. They differ only in the stopping test:

* ICB  - independent (diagonal) confidence bounds, solved exactly;
* SAQM - ellipsoidal bounds with the CEM width from quadratic maximization;
* SA-Ex - ellipsoidal bounds with the CEM gap solved by enumeration.
"""

from __future__ import annotations

import math
import time
from functools import lru_cache
from typing import Callable

import numpy as np

from ..cem import DkSOracle, _peel, quadratic_maximize
from ..environments import Environment
from ..estimation import C_PRIME, REFRESH_EVERY, LeastSquaresState
from ..instance import Allocation, SuperArm, all_super_arms, log_binom
from ..oracles import cem_gap_values, solve_p1_idx, topk_indices
from . import _kernels as _k
from .common import CONDITION_MET, ROUND_CAP, AlgoConfig, RunOutcome, TraceRow

EXACT_LIMIT = 10**6
BLOCK = 256

# check(state, t) -> (stop, radius, z, z_exact, empirical_best, output index array)
StopCheck = Callable[[LeastSquaresState], tuple]


@lru_cache(maxsize=8)
def _enumeration(d: int, k: int) -> np.ndarray:
    X = all_super_arms(d, k, EXACT_LIMIT)
    X.setflags(write=False)
    return X


def _log_radius_term(t: int, log_count: float, delta: float) -> float:
    return math.log(C_PRIME) + 2.0 * math.log(t) + log_count - math.log(delta)


def qm_stop(A_inv: np.ndarray, b: np.ndarray, k: int, c_t: float, cfg: AlgoConfig,
            oracle: DkSOracle | None = None, X_all: np.ndarray | None = None) -> tuple:
    """The quadratic-maximization stopping test shared by SAQM and CLUCB-QM.

    Returns (stop, c_t, Z_t, exact Z_t or nan, empirical best value, M_hat index array).
    """
    d = b.shape[0]
    if oracle is None and X_all is None:
        best, second, q, nm, mhat = _k.qm_terms(A_inv, b, k)
        z = c_t * math.sqrt(max(q, 0.0))
        stop = best - c_t * math.sqrt(max(nm, 0.0)) >= second + z / cfg.alpha - cfg.epsilon
        return stop, c_t, z, math.nan, best, mhat
    th = A_inv @ b
    order = np.argsort(-th, kind="stable")
    mhat = np.sort(order[:k])
    best = float(th[mhat].sum())
    # Exact runner-up: swap the weakest member for the strongest non-member.
    second = best - float(th[order[k - 1]] - th[order[k]])
    if oracle is None and k > 1:
        diag = A_inv.diagonal()
        wt = A_inv + diag[:, None] + diag[None, :]
        np.fill_diagonal(wt, 0.0)
        x = np.zeros(d)
        x[_peel(wt, k)] = 1.0
        q = float(x @ A_inv @ x)
    else:
        q = quadratic_maximize(A_inv, k, oracle=oracle, alpha=cfg.alpha, check=False).value
    z = c_t * math.sqrt(max(q, 0.0))
    z_exact = math.nan
    if X_all is not None:
        opt = float(np.einsum("ij,ij->i", X_all @ A_inv, X_all).max())
        z_exact = c_t * math.sqrt(max(opt, 0.0))
    m = np.zeros(d)
    m[mhat] = 1.0
    norm_m = math.sqrt(max(float(m @ A_inv @ m), 0.0))
    stop = best - c_t * norm_m >= second + z / cfg.alpha - cfg.epsilon
    return stop, c_t, z, z_exact, best, mhat


def _tracked_run(name: str, env: Environment, alloc: Allocation, cfg: AlgoConfig, mode: int,
                 log_count: float, py_check: StopCheck | None = None,
                 X_all: np.ndarray | None = None) -> RunOutcome:
    """Tracking-rule sampling with either a compiled or a Python stopping test.

    Rounds after initialization draw rewards in blocks of BLOCK rounds (one
    shared noise draw per round), so the reward sequence depends only on the
    seed and never on which stopping test is used.
    """
    d, k = env.d, env.k
    cfg.check_budget(d)
    start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    state = LeastSquaresState(d, k, k * cfg.R(env))
    X = np.ascontiguousarray(alloc.indicators, dtype=float)
    lam = np.ascontiguousarray(alloc.weights, dtype=float)
    members = np.stack([a.index for a in alloc.support])
    n_supp = len(members)
    counts = np.zeros(n_supp)

    for j in range(n_supp):
        if state.t >= cfg.max_rounds:
            break
        state.update_vector(X[j], env.pull_idx(members[j], rng))
        counts[j] += 1

    st = np.array([state.t, state._since_refresh, 0, REFRESH_EVERY, 0], dtype=np.int64)
    params = np.array([k, cfg.delta, cfg.epsilon, cfg.alpha, state.sigma, log_count,
                       float(cfg.check_tracking), math.log(C_PRIME)])
    x_all = np.ascontiguousarray(X_all, dtype=float) if X_all is not None else np.zeros((0, d))
    kmode = _k.MODE_UPDATE_ONLY if py_check is not None else mode
    bufs = [np.full(BLOCK, np.nan) for _ in range(4)]
    mhat_buf = np.arange(k, dtype=np.int64)
    trace: list[TraceRow] = []
    stopped_by = ROUND_CAP
    out_idx = None
    timed_rounds, timed_secs = 0, 0.0
    first_block = True
    first_timing = (0, 0.0)
    while state.t < cfg.max_rounds and state.A_inv is not None:
        rewards = env.block_rewards(members, BLOCK, rng)
        end = min(BLOCK, cfg.max_rounds - state.t)
        t0_round = state.t
        tic = time.perf_counter()
        pos, stop = 0, False
        while True:
            pos, code = _k.static_rounds(kmode, X, lam, rewards, pos, end, state.A, state.A_inv, state.b,
                                         counts, st, params, x_all, *bufs, mhat_buf)
            state.t, state._since_refresh = int(st[0]), int(st[1])
            if code == _k.NEED_REFRESH:
                state._refresh()
                st[1] = state._since_refresh
                st[4] = 1
                continue
            if code == _k.NEED_CHECK:
                stop, radius, z, z_exact, best_val, idx = py_check(state)
                for buf, v in zip(bufs, (radius, z, z_exact, best_val)):
                    buf[pos] = v
                mhat_buf[:] = idx
                if stop:
                    break
                pos += 1
                continue
            stop = code == _k.STOPPED
            break
        done = pos + 1 if stop else pos
        secs = time.perf_counter() - tic
        if done:
            # The first block carries one-off compilation and cache warm-up.
            if first_block:
                first_block = False
                first_timing = (done, secs)
            else:
                timed_rounds += done
                timed_secs += secs
        if cfg.trace:
            dt = secs / done if done else math.nan
            trace.extend(TraceRow(t0_round + i + 1, float(bufs[0][i]), float(bufs[1][i]), float(bufs[2][i]),
                                  float(bufs[3][i]), dt) for i in range(done))
        if stop:
            out_idx = mhat_buf.copy()
            stopped_by = CONDITION_MET
            break
    if stopped_by == ROUND_CAP:
        out_idx = topk_indices(state.theta_hat(), k) if state.A_inv is not None else np.arange(k)
    if timed_rounds == 0:
        timed_rounds, timed_secs = first_timing
    return RunOutcome(
        algorithm=name,
        output=SuperArm(tuple(int(i) for i in out_idx)),
        samples=state.t,
        wall_time=time.perf_counter() - start,
        stopped_by=stopped_by,
        trace=trace,
        mean_round_time=timed_secs / timed_rounds if timed_rounds else math.nan,
        tracking_violations=int(st[2]),
    )


def run_icb(env: Environment, alloc: Allocation, cfg: AlgoConfig, reference: bool = False) -> RunOutcome:
    """Static allocation with independent confidence bounds.

    Stops when Z*_t - theta_hat(M_hat) < epsilon, where Z*_t solves
    max_{M != M_hat} theta_hat(M) + C_t sum_i |chi_M(i) - chi_M_hat(i)| sqrt(A^-1(i, i))
    and C_t = sigma sqrt(2 log(c' t^2 d / delta)). ``reference=True`` runs the
    Python version of the test instead of the compiled one.
    """
    check = (lambda state: icb_check(state, cfg)) if reference else None
    return _tracked_run("ICB", env, alloc, cfg, _k.MODE_ICB, math.log(env.d), py_check=check)


def icb_check(state: LeastSquaresState, cfg: AlgoConfig) -> tuple:
    """Python reference of the ICB stopping test (same return layout as qm_stop)."""
    A_inv = state.A_inv
    th = A_inv @ state.b
    mhat = topk_indices(th, state.k)
    arg = _log_radius_term(state.t, math.log(state.d), cfg.delta)
    c_t = state.sigma * math.sqrt(2.0 * arg) if arg > 0 else 0.0
    s = np.sqrt(np.maximum(np.diag(A_inv), 0.0))
    _, z = solve_p1_idx(th, s, c_t, mhat)
    best = float(th[mhat].sum())
    return z - best < cfg.epsilon, c_t, z - best, math.nan, best, mhat


def saqm_radius(state: LeastSquaresState, log_k: float, delta: float) -> float:
    arg = _log_radius_term(state.t, log_k, delta)
    return 2.0 * math.sqrt(2.0) * state.sigma * math.sqrt(arg) if arg > 0 else 0.0


def run_saqm(env: Environment, alloc: Allocation, cfg: AlgoConfig, oracle: DkSOracle | None = None,
             reference: bool = False) -> RunOutcome:
    """Static allocation with quadratic maximization.

    Stops when
        theta_hat(M_hat) - C_t ||chi_M_hat|| >= max_{M != M_hat} theta_hat(M) + Z_t / alpha - epsilon,
    with Z_t = C_t ||chi_S||_{A^-1} for S returned by quadratic maximization on
    A^-1 and C_t = 2 sqrt(2) sigma sqrt(log(c' t^2 K / delta)), K = C(d, k).

    With the default greedy-peeling oracle the test runs compiled; a custom
    ``oracle`` or ``reference=True`` evaluates it in Python instead.
    """
    d, k = env.d, env.k
    log_k = log_binom(d, k)
    X_all = _enumeration(d, k) if cfg.exact_ratio else None
    if oracle is None and not reference:
        return _tracked_run("SAQM", env, alloc, cfg, _k.MODE_SAQM, log_k, X_all=X_all)

    def check(state: LeastSquaresState):
        return qm_stop(state.A_inv, state.b, k, saqm_radius(state, log_k, cfg.delta), cfg, oracle, X_all)

    return _tracked_run("SAQM", env, alloc, cfg, _k.MODE_SAQM, log_k, py_check=check)


def run_sa_ex(env: Environment, alloc: Allocation, cfg: AlgoConfig) -> RunOutcome:
    """Static allocation with exhaustive search: stop once Z*_t < epsilon.

    Z*_t = max_{M != M_hat}(theta_hat(M) + C_t ||chi_M - chi_M_hat||_{A^-1}) - theta_hat(M_hat)
    is computed over all C(d, k) super arms, so this is exponential in k.
    """
    d, k = env.d, env.k
    X_all = _enumeration(d, k)
    log_k = log_binom(d, k)

    def check(state: LeastSquaresState):
        A_inv = state.A_inv
        th = A_inv @ state.b
        mhat = topk_indices(th, k)
        best = float(th[mhat].sum())
        c_t = saqm_radius(state, log_k, cfg.delta)
        m_row = np.zeros(d)
        m_row[mhat] = 1.0
        vals = cem_gap_values(X_all, A_inv, th, c_t, m_row)
        vals[_row_of(mhat, d)] = -np.inf
        z = float(vals.max()) - best
        return z < cfg.epsilon, c_t, z, math.nan, best, mhat

    return _tracked_run("SA-Ex", env, alloc, cfg, _k.MODE_SAQM, log_k, py_check=check)


def _row_of(idx: np.ndarray, d: int) -> int:
    """Position of a sorted k-subset in lexicographic combination order."""
    k = len(idx)
    rank = 0
    prev = -1
    for pos, v in enumerate(int(i) for i in idx):
        for skipped in range(prev + 1, v):
            rank += math.comb(d - skipped - 1, k - pos - 1)
        prev = v
    return rank
