"""Compiled inner loop for static-allocation runs.

The loop replays exactly the Python reference arithmetic: tracking-rule
pull, Gram/vector update, Sherman-Morrison inverse update and the ICB or
SAQM stopping test. Full inverse refreshes stay in Python; the kernel
returns to the caller whenever one is due.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

MODE_ICB = 0
MODE_SAQM = 1
MODE_UPDATE_ONLY = 2

END = 0
STOPPED = 1
NEED_REFRESH = 2
NEED_CHECK = 3

# st layout: t, since_refresh, tracking violations, refresh period, resume flag
ST_T, ST_SINCE, ST_VIOL, ST_PERIOD, ST_RESUME = range(5)
# params layout: k, delta, epsilon, alpha, sigma, log count, check tracking, log c'
P_K, P_DELTA, P_EPS, P_ALPHA, P_SIGMA, P_LOGCOUNT, P_TRACK, P_LOGC = range(8)


@njit(cache=True)
def _matvec(M, v):
    # Plain loops keep the kernel free of BLAS (and so of a scipy dependency).
    n = M.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(v.shape[0]):
            s += M[i, j] * v[j]
        out[i] = s
    return out


@njit(cache=True)
def _stable_desc_order(v):
    return np.argsort(-v, kind="mergesort")


@njit(cache=True)
def _peel_value(W, k):
    """Greedy peeling on the transformed weights of W; returns chi_S^T W chi_S."""
    n = W.shape[0]
    if k == 1:
        best = W[0, 0]
        for i in range(1, n):
            if W[i, i] > best:
                best = W[i, i]
        return best
    deg = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            if i != j:
                s += W[i, j] + W[i, i] + W[j, j]
        deg[i] = s
    alive = np.ones(n, dtype=np.bool_)
    for _ in range(n - k):
        # Highest index among the minima, matching the Python peel.
        v = 0
        for i in range(1, n):
            if deg[i] <= deg[v]:
                v = i
        alive[v] = False
        for i in range(n):
            if i != v:
                deg[i] -= W[i, v] + W[i, i] + W[v, v]
        deg[v] = np.inf
    q = 0.0
    for i in range(n):
        if alive[i]:
            for j in range(n):
                if alive[j]:
                    q += W[i, j]
    return q


@njit(cache=True)
def _set_form(W, mask):
    q = 0.0
    n = W.shape[0]
    for i in range(n):
        if mask[i]:
            for j in range(n):
                if mask[j]:
                    q += W[i, j]
    return q


@njit(cache=True)
def _exact_max_form(W, X_all):
    best = -np.inf
    for r in range(X_all.shape[0]):
        q = 0.0
        for i in range(W.shape[0]):
            if X_all[r, i] != 0.0:
                for j in range(W.shape[0]):
                    if X_all[r, j] != 0.0:
                        q += W[i, j]
        if q > best:
            best = q
    return best


@njit(cache=True)
def _check(mode, A_inv, b, params, t, X_all, out_radius, out_z, out_zex, out_best, out_mhat, i):
    d = b.shape[0]
    k = int(params[P_K])
    th = _matvec(A_inv, b)
    order = _stable_desc_order(th)
    mask = np.zeros(d, dtype=np.bool_)
    best = 0.0
    for p in range(k):
        mask[order[p]] = True
        best += th[order[p]]
    arg = params[P_LOGC] + 2.0 * math.log(t) + params[P_LOGCOUNT] - math.log(params[P_DELTA])
    z_exact = np.nan
    if mode == MODE_ICB:
        c = params[P_SIGMA] * math.sqrt(2.0 * arg) if arg > 0 else 0.0
        a = np.empty(d)
        const = 0.0
        for e in range(d):
            bonus = c * math.sqrt(max(A_inv[e, e], 0.0))
            if mask[e]:
                a[e] = th[e] - bonus
                const += bonus
            else:
                a[e] = th[e] + bonus
        a_order = _stable_desc_order(a)
        same = True
        for p in range(k):
            if not mask[a_order[p]]:
                same = False
        val = const
        if same:
            # Best swap on a: weakest member (highest index on ties) for strongest outsider.
            for p in range(k - 1):
                val += a[a_order[p]]
            val += a[a_order[k]]
        else:
            for p in range(k):
                val += a[a_order[p]]
        z = val - best
        stop = z < params[P_EPS]
        radius = c
    else:
        c = 2.0 * math.sqrt(2.0) * params[P_SIGMA] * math.sqrt(arg) if arg > 0 else 0.0
        second = best - (th[order[k - 1]] - th[order[k]])
        q = _peel_value(A_inv, k)
        z = c * math.sqrt(max(q, 0.0))
        if X_all.shape[0] > 0:
            z_exact = c * math.sqrt(max(_exact_max_form(A_inv, X_all), 0.0))
        norm_m = math.sqrt(max(_set_form(A_inv, mask), 0.0))
        stop = best - c * norm_m >= second + z / params[P_ALPHA] - params[P_EPS]
        radius = c
    out_radius[i] = radius
    out_z[i] = z
    out_zex[i] = z_exact
    out_best[i] = best
    p = 0
    for e in range(d):
        if mask[e]:
            out_mhat[p] = e
            p += 1
    return stop


@njit(cache=True)
def static_rounds(mode, X, lam, rewards, pos, end, A, A_inv, b, counts, st, params, X_all,
                  out_radius, out_z, out_zex, out_best, out_mhat):
    """Advance a tracked run from block row ``pos`` to ``end``.

    Returns (row, code). ``code`` is END (block exhausted), STOPPED (stopping
    test held at ``row``), NEED_REFRESH (``row`` was recorded but the inverse
    must be rebuilt; call again with the resume flag set) or NEED_CHECK
    (update-only mode: ``row`` was recorded, the caller evaluates the test).
    """
    d = b.shape[0]
    n_supp = X.shape[0]
    i = pos
    while i < end:
        if st[ST_RESUME] == 0:
            ratio = counts / lam
            j = 0
            for m in range(1, n_supp):
                if ratio[m] < ratio[j]:
                    j = m
            r = rewards[i, j]
            for p in range(d):
                xp = X[j, p]
                if xp != 0.0:
                    b[p] += r * xp
                    for q in range(d):
                        A[p, q] += xp * X[j, q]
            st[ST_T] += 1
            st[ST_SINCE] += 1
            counts[j] += 1.0
            if params[P_TRACK] != 0.0:
                t = st[ST_T]
                for m in range(n_supp):
                    slack = counts[m] - lam[m] * t
                    if slack > 1.0 + 1e-9 or slack < -n_supp - 1e-9:
                        st[ST_VIOL] += 1
            if st[ST_SINCE] >= st[ST_PERIOD]:
                return i, NEED_REFRESH
            x = X[j]
            Ax = _matvec(A_inv, x)
            denom = 1.0
            for p in range(d):
                denom += x[p] * Ax[p]
            scaled = Ax / denom
            for p in range(d):
                for q in range(d):
                    A_inv[p, q] -= Ax[p] * scaled[q]
        st[ST_RESUME] = 0
        if mode == MODE_UPDATE_ONLY:
            return i, NEED_CHECK
        if _check(mode, A_inv, b, params, st[ST_T], X_all, out_radius, out_z, out_zex, out_best, out_mhat, i):
            return i, STOPPED
        i += 1
    return end, END


@njit(cache=True)
def qm_terms(A_inv, b, k):
    """Pieces of the quadratic-maximization stopping test under greedy peeling.

    Returns (theta_hat(M_hat), runner-up value, peeled chi^T A^-1 chi,
    ||chi_M_hat||^2, M_hat as a sorted index array).
    """
    d = b.shape[0]
    th = _matvec(A_inv, b)
    order = _stable_desc_order(th)
    mask = np.zeros(d, dtype=np.bool_)
    best = 0.0
    for p in range(k):
        mask[order[p]] = True
        best += th[order[p]]
    second = best - (th[order[k - 1]] - th[order[k]])
    q = _peel_value(A_inv, k)
    mhat = np.empty(k, dtype=np.int64)
    p = 0
    for e in range(d):
        if mask[e]:
            mhat[p] = e
            p += 1
    return best, second, q, _set_form(A_inv, mask), mhat
