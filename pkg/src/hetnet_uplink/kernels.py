"""Compiled inner loops for the power fixed point and pruning gains.

Everything in here operates on raw dense arrays: h (N, M, K) gains,
active (N, M, K) bool association, p (N, M, K) powers in watts. Powers
are kept at zero wherever active is False.

The interference seen by user i at BS j on sub-channel k is decomposed as

    I = T[j, k] - h[i, j, k] * u[i, k] - (V[j, k] - p[i, j, k] * h[i, j, k])

where u[i, k] is user i's total transmit power on k, T[j, k] is the total
received power at BS j on k from every transmission in the network, and
V[j, k] is the part of T contributed by transmissions directed at BS j
itself. The two subtractions remove user i's own transmissions and
co-located transmissions at BS j, which do not interfere.

Falls back to pure Python if numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn

LOG2 = np.log(2.0)


@njit(cache=True)
def waterfill_core(xi: np.ndarray, budget: float) -> np.ndarray:
    """Exact water-filling by the sorted-breakpoint method.

    Returns p with p[k] = max(0, mu - xi[k]) and sum(p) == budget.
    """
    n = xi.shape[0]
    order = np.argsort(xi)
    csum = 0.0
    mu = 0.0
    for t in range(n):
        csum += xi[order[t]]
        mu = (budget + csum) / (t + 1)
        if t + 1 < n and mu <= xi[order[t + 1]]:
            break
    out = np.empty(n)
    for t in range(n):
        v = mu - xi[t]
        out[t] = v if v > 0.0 else 0.0
    return out


@njit(cache=True)
def _state_tables(h, active, p):
    n_users, n_bs, n_ch = h.shape
    u = np.zeros((n_users, n_ch))
    v = np.zeros((n_bs, n_ch))
    t = np.zeros((n_bs, n_ch))
    for i in range(n_users):
        for j in range(n_bs):
            for k in range(n_ch):
                if active[i, j, k]:
                    u[i, k] += p[i, j, k]
                    v[j, k] += p[i, j, k] * h[i, j, k]
    for j in range(n_bs):
        for k in range(n_ch):
            acc = 0.0
            for l in range(n_users):
                acc += u[l, k] * h[l, j, k]
            t[j, k] = acc
    return u, v, t


@njit(cache=True)
def _entry_interference(h, p, u, v, t, i, j, k):
    interf = t[j, k] - h[i, j, k] * u[i, k] - (v[j, k] - p[i, j, k] * h[i, j, k])
    if interf < 0.0:  # guard against roundoff in the incremental tables
        interf = 0.0
    return interf


@njit(cache=True)
def total_sum_rate_core(h, active, p, noise_w):
    """Network sum rate in bps/Hz over all active entries."""
    n_users, n_bs, n_ch = h.shape
    u, v, t = _state_tables(h, active, p)
    sr = 0.0
    for i in range(n_users):
        for j in range(n_bs):
            for k in range(n_ch):
                if active[i, j, k]:
                    interf = _entry_interference(h, p, u, v, t, i, j, k)
                    sr += np.log(1.0 + p[i, j, k] * h[i, j, k]
                                 / (interf + noise_w)) / LOG2
    return sr


@njit(cache=True)
def user_rates_core(h, active, p, noise_w):
    """Per-user rates in bps/Hz."""
    n_users, n_bs, n_ch = h.shape
    u, v, t = _state_tables(h, active, p)
    rates = np.zeros(n_users)
    for i in range(n_users):
        for j in range(n_bs):
            for k in range(n_ch):
                if active[i, j, k]:
                    interf = _entry_interference(h, p, u, v, t, i, j, k)
                    rates[i] += np.log(1.0 + p[i, j, k] * h[i, j, k]
                                       / (interf + noise_w)) / LOG2
    return rates


@njit(cache=True)
def gauss_seidel_core(h, active, p, noise_w, budgets, tol, max_sweeps):
    """In-place Gauss-Seidel power sweeps; each user water-fills in turn.

    Users with no active entries are skipped. Returns (sweeps, converged,
    max_deltas, sum_rates) with one trace point per completed sweep.
    """
    n_users, n_bs, n_ch = h.shape
    u, v, t = _state_tables(h, active, p)
    max_deltas = np.zeros(max_sweeps)
    sum_rates = np.zeros(max_sweeps)
    xi = np.empty(n_bs * n_ch)
    ent_j = np.empty(n_bs * n_ch, np.int64)
    ent_k = np.empty(n_bs * n_ch, np.int64)
    sweeps = 0
    converged = False
    for sweep in range(max_sweeps):
        delta_max = 0.0
        for i in range(n_users):
            n_e = 0
            for j in range(n_bs):
                for k in range(n_ch):
                    if active[i, j, k]:
                        ent_j[n_e] = j
                        ent_k[n_e] = k
                        n_e += 1
            if n_e == 0:
                continue
            for e in range(n_e):
                j = ent_j[e]
                k = ent_k[e]
                interf = _entry_interference(h, p, u, v, t, i, j, k)
                xi[e] = (interf + noise_w) / h[i, j, k]
            p_new = waterfill_core(xi[:n_e], budgets[i])
            for e in range(n_e):
                j = ent_j[e]
                k = ent_k[e]
                dp = p_new[e] - p[i, j, k]
                if dp != 0.0:
                    if abs(dp) > delta_max:
                        delta_max = abs(dp)
                    p[i, j, k] = p_new[e]
                    u[i, k] += dp
                    v[j, k] += dp * h[i, j, k]
                    for jj in range(n_bs):
                        t[jj, k] += dp * h[i, jj, k]
        sr = 0.0
        for i in range(n_users):
            for j in range(n_bs):
                for k in range(n_ch):
                    if active[i, j, k]:
                        interf = _entry_interference(h, p, u, v, t, i, j, k)
                        sr += np.log(1.0 + p[i, j, k] * h[i, j, k]
                                     / (interf + noise_w)) / LOG2
        max_deltas[sweep] = delta_max
        sum_rates[sweep] = sr
        sweeps = sweep + 1
        if delta_max < tol:
            converged = True
            break
    return sweeps, converged, max_deltas[:sweeps], sum_rates[:sweeps]


@njit(cache=True)
def anderson_core(h, active, p, noise_w, budgets, tol, mems, spans, max_evals):
    """Anderson-extrapolated fixed-point iteration on the sweep map, in place.

    Runs restart rounds r = 0, 1, ...: round r keeps a history of the last
    mems[r] iterate/residual pairs and may spend spans[r] sweep evaluations;
    each round starts over from the lowest-residual point seen so far. The
    extrapolation coefficients solve the normal equations of the residual
    least-squares problem, with the Gram matrix maintained incrementally as
    history columns enter and leave. Iterates are projected back onto the
    feasible set (inactive entries zero, active entries nonnegative and
    rescaled to each user's budget) after every step.

    Stops once the residual of a genuine sweep drops below tol — p then
    holds the output of that sweep — or after max_evals sweeps in total,
    in which case p holds the best iterate. Returns
    (evals, converged, deltas[:evals], rates[:evals]).
    """
    n_users, n_bs, n_ch = h.shape
    nf = n_users * n_bs * n_ch
    per_user = n_bs * n_ch

    act = np.empty(nf, np.bool_)
    pf = np.empty(nf)
    e = 0
    for i in range(n_users):
        for j in range(n_bs):
            for k in range(n_ch):
                act[e] = active[i, j, k]
                pf[e] = p[i, j, k] if active[i, j, k] else 0.0
                e += 1

    deltas = np.empty(max_evals)
    rates = np.empty(max_evals)
    p_best = pf.copy()
    best_rn = np.inf
    evals = 0
    q = np.empty((n_users, n_bs, n_ch))

    for r in range(mems.shape[0]):
        mcap = mems[r]
        hist_p = np.empty((mcap, nf))
        hist_r = np.empty((mcap, nf))
        diffs = np.empty((mcap - 1, nf))   # residual differences
        gram = np.zeros((mcap - 1, mcap - 1))
        hl = 0
        for _ in range(spans[r]):
            if evals >= max_evals:
                break
            # one genuine sweep from pf
            e = 0
            for i in range(n_users):
                for j in range(n_bs):
                    for k in range(n_ch):
                        q[i, j, k] = pf[e]
                        e += 1
            _, _, sw_d, sw_r = gauss_seidel_core(h, active, q, noise_w,
                                                 budgets, 0.0, 1)
            rn = sw_d[0]
            deltas[evals] = rn
            rates[evals] = sw_r[0]
            evals += 1
            gpf = np.empty(nf)
            e = 0
            for i in range(n_users):
                for j in range(n_bs):
                    for k in range(n_ch):
                        gpf[e] = q[i, j, k]
                        e += 1
            if rn < tol:
                for e in range(nf):
                    pf[e] = gpf[e]
                e = 0
                for i in range(n_users):
                    for j in range(n_bs):
                        for k in range(n_ch):
                            p[i, j, k] = pf[e]
                            e += 1
                return evals, True, deltas[:evals], rates[:evals]
            if rn < best_rn:
                best_rn = rn
                for e in range(nf):
                    p_best[e] = pf[e]
            resid = gpf - pf
            # shift the history window once it is full
            if hl == mcap:
                for t in range(mcap - 1):
                    hist_p[t] = hist_p[t + 1]
                    hist_r[t] = hist_r[t + 1]
                for t in range(mcap - 2):
                    diffs[t] = diffs[t + 1]
                    for s in range(mcap - 2):
                        gram[t, s] = gram[t + 1, s + 1]
                hl -= 1
            hist_p[hl] = pf
            hist_r[hl] = resid
            hl += 1
            if hl >= 2:
                nd = hl - 1  # columns in the difference history
                diffs[nd - 1] = hist_r[hl - 1] - hist_r[hl - 2]
                for t in range(nd):
                    acc = 0.0
                    for e in range(nf):
                        acc += diffs[t, e] * diffs[nd - 1, e]
                    gram[t, nd - 1] = acc
                    gram[nd - 1, t] = acc
                sys = np.empty((nd, nd))
                rhs = np.empty(nd)
                ridge = 0.0
                for t in range(nd):
                    ridge += gram[t, t]
                ridge = 1e-10 * ridge / nd + 1e-300
                for t in range(nd):
                    for s in range(nd):
                        sys[t, s] = gram[t, s]
                    sys[t, t] += ridge
                    acc = 0.0
                    for e in range(nf):
                        acc += diffs[t, e] * resid[e]
                    rhs[t] = acc
                gamma = np.linalg.solve(sys, rhs)
                p_next = gpf.copy()
                for t in range(nd):
                    g = gamma[t]
                    if g != 0.0:
                        for e in range(nf):
                            p_next[e] -= g * (hist_p[t + 1, e] - hist_p[t, e]
                                              + diffs[t, e])
            else:
                p_next = gpf
            # project onto the feasible set
            for i in range(n_users):
                s = 0.0
                base = i * per_user
                for e in range(base, base + per_user):
                    if not act[e]:
                        p_next[e] = 0.0
                    elif p_next[e] < 0.0:
                        p_next[e] = 0.0
                    else:
                        s += p_next[e]
                if s > 0.0:
                    scale = budgets[i] / s
                    for e in range(base, base + per_user):
                        p_next[e] *= scale
            pf = p_next
        if evals >= max_evals:
            break
        pf = p_best.copy()
    e = 0
    for i in range(n_users):
        for j in range(n_bs):
            for k in range(n_ch):
                p[i, j, k] = p_best[e]
                e += 1
    return evals, False, deltas[:evals], rates[:evals]


@njit(cache=True)
def channel_sum_rate_core(h, active, p, noise_w, k, skip_i, skip_j):
    """Sum rate restricted to sub-channel k, optionally with one entry
    (skip_i, skip_j) treated as removed. Pass skip_i = -1 for no removal."""
    n_users, n_bs, _ = h.shape
    uk = np.zeros(n_users)
    vk = np.zeros(n_bs)
    rk = np.zeros(n_bs)
    for i in range(n_users):
        for j in range(n_bs):
            if active[i, j, k] and not (i == skip_i and j == skip_j):
                uk[i] += p[i, j, k]
                vk[j] += p[i, j, k] * h[i, j, k]
    for j in range(n_bs):
        acc = 0.0
        for l in range(n_users):
            acc += uk[l] * h[l, j, k]
        rk[j] = acc
    sr = 0.0
    for i in range(n_users):
        for j in range(n_bs):
            if active[i, j, k] and not (i == skip_i and j == skip_j):
                interf = rk[j] - h[i, j, k] * uk[i] \
                    - (vk[j] - p[i, j, k] * h[i, j, k])
                if interf < 0.0:
                    interf = 0.0
                sr += np.log(1.0 + p[i, j, k] * h[i, j, k]
                             / (interf + noise_w)) / LOG2
    return sr
