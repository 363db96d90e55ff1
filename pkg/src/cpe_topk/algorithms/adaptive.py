"""Adaptive lower-upper confidence bound algorithms (CLUCB family).

Each iteration compares the empirical best set with the set favoured by
per-arm confidence radii, picks the most uncertain arm e_t in their
symmetric difference and pulls two super arms that differ only in e_t and
a fixed reference arm e'. The three variants differ in the stopping test:

* CLUCB    - native per-arm gap test on the paired-difference estimator;
* CLUCB-QM - SAQM's ellipsoidal test on the ridge estimator;
* CLUCB-Ex - the exact exhaustive ellipsoidal test on the ridge estimator.
"""

from __future__ import annotations

import math

import numpy as np

from ..cem import DkSOracle
from ..environments import Environment
from ..estimation import RegularizedLSState
from ..errors import ParameterError
from ..instance import SuperArm, default_support
from ..oracles import _constrained_idx, cem_gap_values, topk_indices
from .common import CONDITION_MET, ROUND_CAP, AlgoConfig, RoundClock, RunOutcome, TraceRow
from .static import _enumeration, _row_of, qm_stop


def clucb_radii(R: float, k: int, d: int, t: int, delta: float, counts: np.ndarray) -> np.ndarray:
    """rad_t(e) = R sqrt(2k log(4 d t^3 / delta) / T_e(t))."""
    arg = math.log(4.0 * d) + 3.0 * math.log(t) - math.log(delta)
    return R * np.sqrt(2.0 * k * max(arg, 0.0) / counts)


def _challenger(theta: np.ndarray, rad: np.ndarray, k: int):
    """Empirical best, the radius-adjusted challenger and their scores."""
    mhat = topk_indices(theta, k)
    tilde = theta + rad
    tilde[mhat] -= 2.0 * rad[mhat]
    mtil = topk_indices(tilde, k)
    return mhat, mtil, tilde


def _pick_arm(mhat: np.ndarray, mtil: np.ndarray, rad: np.ndarray) -> int | None:
    in_diff = np.zeros(rad.shape[0], dtype=bool)
    in_diff[mhat] = True
    in_diff[mtil] ^= True
    if not in_diff.any():
        return None
    diff = np.flatnonzero(in_diff)
    return int(diff[int(np.argmax(rad[diff]))])


def _paired(d: int, k: int, e: int, ref: int, rng: np.random.Generator) -> tuple[list[int], list[int]]:
    """M containing e but not ref, and its swap pair M' = M - {e} + {ref}."""
    m = _constrained_idx(d, k, e, ref, rng)
    m_swap = [ref] + m[1:]
    return sorted(m), sorted(m_swap)


def _window(d: int, k: int, start: int) -> list[int]:
    return sorted((start + j) % d for j in range(k))


def _check_shape(env: Environment, cfg: AlgoConfig) -> None:
    if env.d < env.k + 1:
        raise ParameterError(f"need d >= k + 1, got d={env.d}, k={env.k}")
    if env.k == env.d - 1 and env.d < 3:
        raise ParameterError("paired pulls need at least three base arms")
    cfg.check_budget(env.d)


def _regularized_run(name: str, env: Environment, cfg: AlgoConfig, stop_check) -> RunOutcome:
    """Shared CLUCB-style sampling on the ridge estimator with a pluggable stop test."""
    _check_shape(env, cfg)
    d, k = env.d, env.k
    R = cfg.R(env)
    rng = np.random.default_rng(cfg.seed)
    state = RegularizedLSState(d, k, cfg.omega, cfg.S(env), R)
    ref, ref_alt = d - 1, d - 2
    T = np.ones(d)
    trace: list[TraceRow] = []
    clock = RoundClock()

    # Fallback tracking over the default support (uniform weights).
    fallback = [a.index for a in default_support(d, k)]
    fb_counts = np.zeros(len(fallback))

    def pull(idx) -> None:
        idx = np.asarray(idx)
        r = env.pull_idx(idx, rng)
        x = np.zeros(d)
        x[idx] = 1.0
        state.update_vector(x, r)

    for e in range(d):
        if state.t >= cfg.max_rounds:
            break
        pull(_window(d, k, e))
    clock.restart_round()
    stopped_by = ROUND_CAP
    out_idx = None
    while state.t < cfg.max_rounds:
        th = state.theta_hat()
        rad = clucb_radii(R, k, d, state.t + 2, cfg.delta, T)
        mhat, mtil, _ = _challenger(th, rad, k)
        e_t = _pick_arm(mhat, mtil, rad)
        if e_t is None:
            j = int(np.argmin(fb_counts))
            fb_counts[j] += 1
            pull(fallback[j])
        else:
            T[e_t] += 1
            other = ref if e_t != ref else ref_alt
            m, m_swap = _paired(d, k, e_t, other, rng)
            pull(m)
            if state.t >= cfg.max_rounds:
                break
            pull(m_swap)
        stop, radius, z, z_exact, best_val, out_idx = stop_check(state)
        dt = clock.tick()
        if cfg.trace:
            trace.append(TraceRow(state.t, radius, z, z_exact, best_val, dt))
        if stop:
            stopped_by = CONDITION_MET
            break
    if out_idx is None:
        out_idx = topk_indices(state.theta_hat(), k)
    return RunOutcome(name, SuperArm(tuple(int(i) for i in out_idx)), state.t, clock.elapsed,
                      stopped_by, trace, clock.mean)


def _regularized_c(state: RegularizedLSState, delta: float) -> float:
    arg = 0.5 * state.log_det - 0.5 * state.d * math.log(state.omega) - math.log(delta)
    return state.r_subg * math.sqrt(2.0 * state.k * max(arg, 0.0)) + math.sqrt(state.omega) * state.s_bound


def run_clucb_qm(env: Environment, cfg: AlgoConfig, oracle: DkSOracle | None = None) -> RunOutcome:
    """CLUCB sampling with the quadratic-maximization stopping test on the ridge estimator."""
    d, k = env.d, env.k
    X_all = _enumeration(d, k) if cfg.exact_ratio else None

    def check(state: RegularizedLSState):
        return qm_stop(state.A_inv, state.b, k, _regularized_c(state, cfg.delta), cfg, oracle, X_all)

    return _regularized_run("CLUCB-QM", env, cfg, check)


def run_clucb_ex(env: Environment, cfg: AlgoConfig) -> RunOutcome:
    """CLUCB sampling with the exhaustive stopping test Z*_t < epsilon (exponential time)."""
    d, k = env.d, env.k
    X_all = _enumeration(d, k)

    def check(state: RegularizedLSState):
        A_inv = state.A_inv
        th = A_inv @ state.b
        mhat = topk_indices(th, k)
        best = float(th[mhat].sum())
        c_t = _regularized_c(state, cfg.delta)
        m_row = np.zeros(d)
        m_row[mhat] = 1.0
        vals = cem_gap_values(X_all, A_inv, th, c_t, m_row)
        vals[_row_of(mhat, d)] = -np.inf
        z = float(vals.max()) - best
        return z < cfg.epsilon, c_t, z, math.nan, best, mhat

    return _regularized_run("CLUCB-Ex", env, cfg, check)


def run_clucb(env: Environment, cfg: AlgoConfig) -> RunOutcome:
    """CLUCB on the paired-difference gap estimator.

    theta'(e) estimates theta(e) - theta(e') from r(M) - r(M - {e} + {e'}).
    The reference arm e' = d - 1 has theta'(e') = 0 exactly. Stops when
    theta~'(M~) - theta~'(M_hat) <= epsilon.
    """
    _check_shape(env, cfg)
    d, k = env.d, env.k
    R = cfg.R(env)
    rng = np.random.default_rng(cfg.seed)
    ref = d - 1
    sums = np.zeros(d)
    T = np.ones(d)
    t = 0
    trace: list[TraceRow] = []
    clock = RoundClock()

    def paired_sample(e: int) -> float:
        nonlocal t
        m, m_swap = _paired(d, k, e, ref, rng)
        r1 = env.pull_idx(np.asarray(m), rng)
        r2 = env.pull_idx(np.asarray(m_swap), rng)
        t += 2
        return r1 - r2

    for e in range(d - 1):
        if t + 2 > cfg.max_rounds:
            break
        sums[e] = paired_sample(e)
    clock.restart_round()
    stopped_by = ROUND_CAP
    while True:
        theta = sums / T
        theta[ref] = 0.0
        rad = clucb_radii(R, k, d, t + 2, cfg.delta, T)
        rad[ref] = 0.0
        mhat, mtil, tilde = _challenger(theta, rad, k)
        gap = float(tilde[mtil].sum() - tilde[mhat].sum())
        best_val = float(theta[mhat].sum())
        if gap <= cfg.epsilon:
            stopped_by = CONDITION_MET
            dt = clock.tick()
            if cfg.trace:
                trace.append(TraceRow(t, float(rad.max()), gap, math.nan, best_val, dt))
            break
        if t + 2 > cfg.max_rounds:
            break
        e_t = _pick_arm(mhat, mtil, rad)
        T[e_t] += 1
        sums[e_t] += paired_sample(e_t)
        dt = clock.tick()
        if cfg.trace:
            trace.append(TraceRow(t, float(rad.max()), gap, math.nan, best_val, dt))
    return RunOutcome("CLUCB", SuperArm(tuple(int(i) for i in mhat)), t, clock.elapsed, stopped_by, trace,
                      clock.mean)
