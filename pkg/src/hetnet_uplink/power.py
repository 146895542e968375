"""Per-user water-filling and the network-wide power fixed point.

Each user maximizes its own sum rate sum_k log2(1 + p_k / xi_k) subject to
its power budget, where xi is the interference-plus-noise at the serving
BS normalized by the user's own gain. The network solution alternates
these per-user water-fillings in a Gauss-Seidel sweep over users until the
powers stop moving.

When many users share a sub-channel the plain best-response iteration can
settle into a limit cycle instead of the fixed point: marginal entries keep
flipping in and out of each user's water-filled set. update_powers therefore
falls back to Anderson extrapolation over the sweep map, which converges to
the same fixed point the plain sweeps circle around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelTensor
from .config import ChannelParams
from .errors import ContractViolationError, FairnessViolationError
from .kernels import (anderson_core, gauss_seidel_core, user_rates_core,
                      waterfill_core)

BUDGET_EPS = 1e-9  # watts; slack allowed on the per-user power budget

DEFAULT_MAX_SWEEPS = 200

# Plain sweeps attempted before switching to Anderson extrapolation. Warm
# starts (after a single pruning step) usually converge well within this.
PLAIN_SWEEP_LIMIT = 30

# Anderson restarts: (history depth, sweep budget) per round. Each round
# resumes from the best iterate seen so far; deeper histories only run for
# the hard instances that shallow ones fail to close. The overall sweep
# budget (max_iters) truncates the schedule; budgets beyond one pass cycle
# through the schedule again, so arbitrarily large budgets keep restarting.
ANDERSON_SCHEDULE = ((8, 600), (12, 300), (20, 300), (30, 300),
                     (8, 300), (12, 300), (20, 300), (30, 300),
                     (12, 500), (20, 500), (30, 500), (40, 500))


def _schedule_arrays(budget: int) -> tuple[np.ndarray, np.ndarray]:
    """Restart rounds (history depths, sweep spans) covering the budget."""
    total = sum(s for _, s in ANDERSON_SCHEDULE)
    repeats = max(1, -(-budget // total))
    mems = np.array([m for m, _ in ANDERSON_SCHEDULE] * repeats,
                    dtype=np.int64)
    spans = np.array([s for _, s in ANDERSON_SCHEDULE] * repeats,
                     dtype=np.int64)
    return mems, spans


def default_tolerance(params: ChannelParams) -> float:
    """Power convergence tolerance: 1e-6 of the per-user budget, in watts."""
    return 1e-6 * params.p_max_w


@dataclass(frozen=True)
class EffectiveNoiseVector:
    """One user's normalized interference-plus-noise over its active entries."""

    entries: np.ndarray  # (n, 2) of (bs, subchannel) indices
    xi: np.ndarray       # (n,) watts-equivalent, > 0


@dataclass
class PowerTrace:
    """Per-sweep record of one power fixed-point run."""

    sum_rates: np.ndarray = field(default_factory=lambda: np.empty(0))
    max_deltas: np.ndarray = field(default_factory=lambda: np.empty(0))
    converged: bool = False

    @property
    def sweeps(self) -> int:
        return len(self.max_deltas)

    @property
    def final_sum_rate(self) -> float:
        return float(self.sum_rates[-1])

    @property
    def final_max_delta(self) -> float:
        return float(self.max_deltas[-1])


def water_fill(budget: float, xi: np.ndarray) -> np.ndarray:
    """Optimal power split over parallel channels with effective noise xi.

    Returns p with p[k] = max(0, mu - xi[k]) where the water level mu
    spends the whole budget.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.size == 0:
        raise ContractViolationError("water_fill needs at least one entry")
    if budget <= 0.0:
        raise ContractViolationError("water_fill budget must be positive")
    if not np.all((xi > 0.0) & np.isfinite(xi)):
        raise ContractViolationError("effective noise values must be positive")
    return waterfill_core(xi, float(budget))


def effective_noise(i: int, x: np.ndarray, p: np.ndarray,
                    channels: ChannelTensor, params: ChannelParams
                    ) -> EffectiveNoiseVector:
    """Effective noise xi for user i over its active (BS, sub-channel) entries.

    xi = (interference + noise) / own gain, so the user's rate on the entry
    is log2(1 + p / xi).
    """
    h = channels.h
    js, ks = np.nonzero(x[i])
    if js.size == 0:
        raise FairnessViolationError(f"user {i} has no active entries")
    xi = np.empty(js.size)
    for e, (j, k) in enumerate(zip(js, ks)):
        mask = x[:, :, k].astype(float)
        mask[i, :] = 0.0
        mask[:, j] = 0.0
        tx = (mask * p[:, :, k]).sum(axis=1)
        interference = float(tx @ h[:, j, k])
        xi[e] = (interference + params.noise_w) / h[i, j, k]
    return EffectiveNoiseVector(entries=np.column_stack([js, ks]), xi=xi)


def best_response_residual(x: np.ndarray, p: np.ndarray,
                           channels: ChannelTensor,
                           params: ChannelParams) -> float:
    """Distance of p from the water-filling fixed point, in watts.

    Each user's optimal power split against the other users' current
    powers is compared with its actual powers; the residual is the largest
    per-entry difference over all users. At a fixed point the residual is
    zero, and unlike the per-sweep delta of the iteration it does not
    depend on user ordering or on the local stability of the sweep map,
    so it measures convergence even where the fixed point is repelling.
    """
    h = channels.h
    noise_w = params.noise_w
    # total interference at BS j on channel k, excluding same-BS uplinks:
    # t[j, k] = sum_l h[l, j, k] * (sum_{s != j} p[l, s, k])
    row = p.sum(axis=1)                                # (n, K) per-user
    t = np.einsum('ljk,lk->jk', h, row) - (h * p).sum(axis=0)
    own = h * (row[:, None, :] - p)                    # user's own share
    xi = (t[None, :, :] - own + noise_w) / h
    worst = 0.0
    for i in range(x.shape[0]):
        js, ks = np.nonzero(x[i])
        if js.size == 0:
            continue
        br = waterfill_core(xi[i, js, ks], params.p_max_w)
        worst = max(worst, float(np.abs(br - p[i, js, ks]).max()))
    return worst


def _exact_fixed_point(h: np.ndarray, x: np.ndarray, p: np.ndarray,
                       noise_w: float, p_max: float, tol: float,
                       max_solves: int = 80) -> np.ndarray:
    """Solve the power fixed point exactly on a frozen water-filling support.

    At the fixed point every positive power satisfies p + xi(p) = mu_user
    with xi linear in the powers, plus each user's budget equation -- a
    linear system once the support (set of positive entries) is known. The
    support is guessed from the current iterate and then repaired by a
    depth-first search over single-entry flips: each candidate support is
    solved, its KKT violations (negative supported powers, or off-support
    entries whose effective noise lies below the user's water level)
    propose child supports, and the search descends along the worst
    violation, backtracking to the nearest alternative on dead ends.
    Visited supports are never revisited, so marginal entries of
    substitutable users cannot trap the search in a flip cycle. The
    search stops at a violation-free support or after max_solves linear
    solves, returning the least-violating solution found; the caller
    certifies the result against the true best-response residual. This
    closes the limit-cycling instances where sweep-based iteration keeps
    flipping marginal entries.
    """
    n, m, kk = x.shape
    ei, ej, ek = np.nonzero(x)
    if ei.size == 0:
        return p.copy()
    users = np.unique(ei)
    urow = -np.ones(n, dtype=np.int64)
    urow[users] = np.arange(users.size)
    nu = users.size
    eps_add = 0.05 * tol

    def solve_support(supp):
        """Fixed-point solve on one support; returns (violation, powers,
        ranked repair moves)."""
        sel = np.nonzero(supp)[0]
        n_sel = sel.size
        si, sj, sk = ei[sel], ej[sel], ek[sel]
        h_own = h[si, sj, sk]
        mat = np.zeros((n_sel + nu, n_sel + nu))
        rhs = np.zeros(n_sel + nu)
        mat[np.arange(n_sel), np.arange(n_sel)] = 1.0
        for k in range(kk):
            rows = np.nonzero(sk == k)[0]
            if rows.size < 2:
                continue
            li, lj = si[rows], sj[rows]
            sq = (rows.size, rows.size)
            cross = h[np.broadcast_to(li[None, :], sq),
                      np.broadcast_to(lj[:, None], sq), k]
            mask = (li[None, :] != li[:, None]) & (lj[None, :] != lj[:, None])
            mat[np.ix_(rows, rows)] += np.where(
                mask, cross / h_own[rows][:, None], 0.0)
        mat[np.arange(n_sel), n_sel + urow[si]] = -1.0
        rhs[:n_sel] = -noise_w / h_own
        mat[n_sel + urow[si], np.arange(n_sel)] = 1.0
        rhs[n_sel:] = p_max
        try:
            z = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError:
            z, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
        pvec = z[:n_sel]
        mu = z[n_sel:]

        per_user = np.bincount(urow[si], minlength=nu)
        removable = (pvec < -1e-15) & (per_user[urow[si]] > 1)
        p_try = np.zeros((n, m, kk))
        p_try[si, sj, sk] = np.maximum(pvec, 0.0)

        moves = [(-float(pvec[q]), False, int(sel[q]))
                 for q in np.nonzero(removable)[0]]
        viol = max(0.0, -float(pvec.min())) if n_sel else 0.0
        for t in np.nonzero(~supp)[0]:
            i, j, k = ei[t], ej[t], ek[t]
            rows = np.nonzero(sk == k)[0]
            li, lj = si[rows], sj[rows]
            use = (li != i) & (lj != j)
            inter = float((p_try[li[use], lj[use], k]
                           * h[li[use], j, k]).sum())
            gap = float(mu[urow[i]]) - (inter + noise_w) / h[i, j, k]
            viol = max(viol, gap)
            if gap > eps_add:
                moves.append((gap, True, int(t)))
        moves.sort(reverse=True)
        return viol, sel, pvec, moves

    supp = p[ei, ej, ek] > 0.0
    for i in users:
        mine = np.nonzero(ei == i)[0]
        if not supp[mine].any():
            supp[mine[np.argmax(p[ei[mine], ej[mine], ek[mine]])]] = True

    seen = {supp.tobytes()}
    viol, sel, pvec, moves = solve_support(supp)
    best = (viol, sel, pvec)
    solves = 1
    # depth-first descent with backtracking: always follow the worst
    # unexplored repair of the current support; on a dead end (all repairs
    # already visited) back up to the nearest alternative
    stack = [(supp, moves, 0)]
    while stack and best[0] >= eps_add and solves < max_solves:
        supp, moves, next_i = stack[-1]
        if next_i >= len(moves):
            stack.pop()
            continue
        stack[-1] = (supp, moves, next_i + 1)
        _, adding, t = moves[next_i]
        child = supp.copy()
        child[t] = adding
        mine = np.nonzero(ei == ei[t])[0]
        if not child[mine].any():
            continue  # never strip a user's last entry
        key = child.tobytes()
        if key in seen:
            continue
        seen.add(key)
        cviol, csel, cpvec, cmoves = solve_support(child)
        solves += 1
        if cviol < best[0]:
            best = (cviol, csel, cpvec)
        if not cmoves:
            break
        stack.append((child, cmoves, 0))

    _, sel, pvec = best
    out = np.zeros((n, m, kk))
    out[ei[sel], ej[sel], ek[sel]] = np.maximum(pvec, 0.0)
    for i in users:
        s = out[i].sum()
        if s > 0.0:
            out[i] *= p_max / s
    return out


def update_powers(x: np.ndarray, p: np.ndarray, channels: ChannelTensor,
                  params: ChannelParams, tol: float | None = None,
                  max_iters: int = DEFAULT_MAX_SWEEPS,
                  accelerate: bool = True, exact_fallback: bool = False
                  ) -> tuple[np.ndarray, PowerTrace]:
    """Drive the transmit powers to the water-filling fixed point.

    Plain Gauss-Seidel sweeps (users in index order) run first; if they have
    not converged within PLAIN_SWEEP_LIMIT sweeps, Anderson extrapolation
    takes over on the remaining max_iters budget. With exact_fallback, a
    remaining failure triggers a direct linear solve of the fixed point on
    the frozen water-filling support. Convergence means the largest
    per-entry power change of an unextrapolated sweep fell below tol
    (default: 1e-6 of the power budget) or, on the exact-fallback path,
    that the best-response residual of the returned powers is below tol;
    failure to converge is reported via trace.converged, not raised. The
    input tensor is not modified.
    """
    if tol is None:
        tol = default_tolerance(params)
    n_users = x.shape[0]
    p_out = np.where(x, p, 0.0).astype(float)
    budgets = np.full(n_users, params.p_max_w)

    plain_budget = min(max_iters, PLAIN_SWEEP_LIMIT) if accelerate else max_iters
    sweeps, converged, max_deltas, sum_rates = gauss_seidel_core(
        channels.h, x, p_out, params.noise_w, budgets, float(tol),
        int(plain_budget))
    delta_parts = [max_deltas]
    rate_parts = [sum_rates]

    if accelerate and not converged and sweeps < max_iters:
        mems, spans = _schedule_arrays(int(max_iters) - int(sweeps))
        _, converged, aa_deltas, aa_rates = anderson_core(
            channels.h, x, p_out, params.noise_w, budgets, float(tol),
            mems, spans, int(max_iters) - int(sweeps))
        delta_parts.append(aa_deltas)
        rate_parts.append(aa_rates)

    if exact_fallback and not converged:
        p_exact = _exact_fixed_point(channels.h, x, p_out, params.noise_w,
                                     params.p_max_w, float(tol))
        # certify with the order-invariant fixed-point residual: near a
        # repelling fixed point a further sweep amplifies any remaining
        # error, so the sweep delta cannot certify the solved point
        res_exact = best_response_residual(x, p_exact, channels, params)
        res_iter = best_response_residual(x, p_out, channels, params)
        if res_exact < res_iter:
            p_out[:] = p_exact
        residual = min(res_exact, res_iter)
        converged = residual < tol
        delta_parts.append(np.array([residual]))
        rate_parts.append(np.array(
            [float(user_rates_core(channels.h, x, p_out,
                                   params.noise_w).sum())]))

    trace = PowerTrace(sum_rates=np.concatenate(rate_parts),
                       max_deltas=np.concatenate(delta_parts),
                       converged=bool(converged))
    return p_out, trace
