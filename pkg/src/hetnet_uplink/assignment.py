"""Joint sub-channel assignment, cell association and power control.

Starting from every user active on every allowed (BS, sub-channel) entry,
the solver alternates between (a) converging the transmit powers and
(b) removing one user from an overloaded (BS, sub-channel) pair, chosen
as the removal that most increases the network sum rate at the current
powers. With the fairness guard on, a user is never stripped of its last
entry. The loop ends when every (BS, sub-channel) hosts at most one user.

Fairness can deadlock: every user still on an overloaded pair may be down
to that single entry, so none of them can be pruned. The solver then
relocates users off the pair one at a time, moving each onto an
already-settled (BS, sub-channel) whose occupant still holds other
entries; the displaced occupant is removed from that entry instead. The
relocation target is the one with the best sum-rate change at the current
powers. Every relocation keeps each user's entry count at one or more and
strictly shrinks the total number of active entries, so termination is
preserved.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelTensor, NetworkTopology
from .config import ChannelParams
from .errors import ContractViolationError
from .kernels import channel_sum_rate_core, user_rates_core
from .power import PowerTrace, default_tolerance, update_powers

# Sweep budget for the first and last power stages, where converged powers
# matter most: the first stage is the hardest fixed-point instance the
# solver ever sees, and the last one determines the reported rates. These
# stages also get the exact fixed-point fallback, so the sweep budget only
# needs to produce a good support guess, not close the fixed point itself.
ENDPOINT_SWEEPS = 300

# Sweep budget for the stages between removals. A drop performs on the
# order of N*M*K removals, so these stages must stay cheap; when the
# budget runs out the best powers found are kept and the stage is marked
# non-converged, which later stages recover from.
INTERIOR_SWEEPS = 24


@dataclass(frozen=True)
class SolveOptions:
    fairness: bool = True
    tol: float | None = None
    max_sweeps: int = ENDPOINT_SWEEPS
    interior_sweeps: int = INTERIOR_SWEEPS
    # drive every interior stage to full convergence (slow; used to study
    # the convergence structure of a single drop)
    full_convergence: bool = False
    accelerate: bool = True


@dataclass(frozen=True)
class PruneEvent:
    """One removal of a user from a (BS, sub-channel) pair."""

    user: int
    bs: int
    subchannel: int
    delta: float    # sum-rate gain of the removal, bps/Hz
    stage: int = -1  # index of the power stage preceding this event


@dataclass(frozen=True)
class RelocationEvent:
    """One fairness repair: a user moved to a settled pair, displacing
    the occupant from that entry."""

    user: int
    src_bs: int
    src_subchannel: int
    dst_bs: int
    dst_subchannel: int
    displaced: int  # user removed from the destination entry, or -1
    delta: float    # sum-rate change of the move, bps/Hz
    stage: int = -1


@dataclass
class AllocationResult:
    """Converged association and powers for one drop, plus diagnostics."""

    x: np.ndarray                      # (N, M, K) bool
    p: np.ndarray                      # (N, M, K) watts
    per_user_rate: np.ndarray          # (N,) bps/Hz
    sum_rate: float
    trace: list[PowerTrace] = field(default_factory=list)
    prune_events: list[PruneEvent] = field(default_factory=list)
    relocation_events: list[RelocationEvent] = field(default_factory=list)
    removal_count: int = 0
    all_converged: bool = True
    fairness_conflicts: list[tuple[int, int]] = field(default_factory=list)

    @property
    def subchannels_per_user(self) -> np.ndarray:
        return self.x.sum(axis=(1, 2))

    @property
    def events(self) -> list[PruneEvent | RelocationEvent]:
        """All assignment changes in chronological (stage) order."""
        merged = [*self.prune_events, *self.relocation_events]
        return sorted(merged, key=lambda e: e.stage)


def delta_for_removal(i: int, j: int, k_prime: int, x: np.ndarray,
                      p: np.ndarray, channels: ChannelTensor,
                      params: ChannelParams) -> float:
    """Sum-rate change from removing user i from (j, k_prime), at the
    current powers (no re-optimization). Only rates on k_prime move, so
    the difference is evaluated on that sub-channel alone."""
    if not x[i, j, k_prime]:
        raise ContractViolationError(
            f"delta requested for inactive entry ({i}, {j}, {k_prime})")
    before = channel_sum_rate_core(channels.h, x, p, params.noise_w,
                                   k_prime, -1, -1)
    after = channel_sum_rate_core(channels.h, x, p, params.noise_w,
                                  k_prime, i, j)
    return float(after - before)


def prune_subchannel(j: int, k_prime: int, x: np.ndarray, p: np.ndarray,
                     channels: ChannelTensor, params: ChannelParams,
                     fairness: bool) -> PruneEvent | None:
    """Remove the highest-gain user from (j, k_prime), in place.

    Under fairness, users whose only active entry is this one are skipped;
    if every user on the pair is such a user, nothing is removed and None
    is returned. Ties break toward the lower user index.
    """
    users = np.nonzero(x[:, j, k_prime])[0]
    if users.size < 2:
        raise ContractViolationError(
            f"prune needs >= 2 users on ({j}, {k_prime})")
    deltas = np.array([
        delta_for_removal(int(i), j, k_prime, x, p, channels, params)
        for i in users])
    # stable sort on -delta keeps the lower user index first on ties
    for pos in np.argsort(-deltas, kind="stable"):
        i = int(users[pos])
        if fairness and int(x[i].sum()) <= 1:
            continue
        x[i, j, k_prime] = False
        p[i, j, k_prime] = 0.0
        return PruneEvent(user=i, bs=j, subchannel=k_prime,
                          delta=float(deltas[pos]))
    return None


def _relocation_gain(i: int, j: int, k_prime: int, s: int, t: int,
                     displaced: int, x: np.ndarray, p: np.ndarray,
                     budget: float, channels: ChannelTensor,
                     params: ChannelParams) -> float:
    """Sum-rate change, at current powers, of moving user i from
    (j, k_prime) to (s, t) while removing `displaced` (or -1) from (s, t).
    Only sub-channels k_prime and t are affected."""
    h, noise = channels.h, params.noise_w
    x2 = x.copy()
    p2 = p.copy()
    x2[i, j, k_prime] = False
    p2[i, j, k_prime] = 0.0
    if displaced >= 0:
        x2[displaced, s, t] = False
        p2[displaced, s, t] = 0.0
    x2[i, s, t] = True
    p2[i, s, t] = budget  # its only entry; powers re-converge afterwards
    gain = 0.0
    for ch in {k_prime, t}:
        gain += channel_sum_rate_core(h, x2, p2, noise, ch, -1, -1) \
            - channel_sum_rate_core(h, x, p, noise, ch, -1, -1)
    return float(gain)


def relocate_from_deadlock(j: int, k_prime: int, x: np.ndarray,
                           p: np.ndarray, topology: NetworkTopology,
                           channels: ChannelTensor, params: ChannelParams
                           ) -> RelocationEvent | None:
    """Resolve one step of a fairness deadlock on (j, k_prime), in place.

    Among the users stuck on the pair, the one whose removal helps the sum
    rate most is moved to the best already-settled (BS, sub-channel) — one
    visited before (j, k_prime) in scan order whose occupant still has two
    or more entries. The occupant loses that entry. Returns None when no
    user has a feasible destination.
    """
    users = np.nonzero(x[:, j, k_prime])[0]
    deltas = np.array([
        delta_for_removal(int(i), j, k_prime, x, p, channels, params)
        for i in users])

    # settled pairs, i.e. already scanned: (s, t) with s < j, or s == j
    # and t < k_prime, that are usable on this deployment
    targets = []
    allowed = topology.allowed_subchannels
    for s in range(x.shape[1]):
        for t in range(x.shape[2]):
            if (s, t) >= (j, k_prime):
                break
            if not allowed[s, t]:
                continue
            occupants = np.nonzero(x[:, s, t])[0]
            if occupants.size == 0:
                targets.append((s, t, -1))
            elif occupants.size == 1 and int(x[occupants[0]].sum()) >= 2:
                targets.append((s, t, int(occupants[0])))
        else:
            continue
        break

    if not targets:
        return None

    budget = params.p_max_w
    # most-beneficial removal moves first; ties toward the lower user index
    for pos in np.argsort(-deltas, kind="stable"):
        i = int(users[pos])
        best = None
        for s, t, displaced in targets:
            gain = _relocation_gain(i, j, k_prime, s, t, displaced, x, p,
                                    budget, channels, params)
            if best is None or gain > best[0]:
                best = (gain, s, t, displaced)
        if best is None:
            continue
        gain, s, t, displaced = best
        x[i, j, k_prime] = False
        p[i, j, k_prime] = 0.0
        if displaced >= 0:
            x[displaced, s, t] = False
            p[displaced, s, t] = 0.0
        x[i, s, t] = True
        p[i, s, t] = budget
        return RelocationEvent(user=i, src_bs=j, src_subchannel=k_prime,
                               dst_bs=s, dst_subchannel=t,
                               displaced=displaced, delta=gain)
    return None


def solve(topology: NetworkTopology, channels: ChannelTensor,
          params: ChannelParams, options: SolveOptions = SolveOptions()
          ) -> AllocationResult:
    """Run the full alternating allocation for one drop."""
    n, m, k = topology.num_users, topology.num_bs, topology.num_subchannels
    tol = options.tol if options.tol is not None else default_tolerance(params)

    x = np.broadcast_to(topology.allowed_subchannels, (n, m, k)).copy()
    p = np.where(x, params.p_max_w / (m * k), 0.0)

    result = AllocationResult(x=x, p=p, per_user_rate=np.zeros(n), sum_rate=0.0)
    max_removals = n * m * k

    interior = options.max_sweeps if options.full_convergence \
        else options.interior_sweeps

    def converge(budget, exact=False):
        nonlocal p
        p, trace = update_powers(x, p, channels, params, tol=tol,
                                 max_iters=budget,
                                 accelerate=options.accelerate,
                                 exact_fallback=exact)
        result.trace.append(trace)
        if not trace.converged:
            result.all_converged = False

    def count_removal():
        result.removal_count += 1
        if result.removal_count > max_removals:
            raise ContractViolationError(
                "pruning exceeded the N*M*K removal bound")

    converge(options.max_sweeps, exact=True)
    for j in range(m):
        for k_prime in range(k):
            while int(x[:, j, k_prime].sum()) > 1:
                stage = len(result.trace) - 1
                active_before = int(x.sum())
                event = prune_subchannel(j, k_prime, x, p, channels, params,
                                         options.fairness)
                if event is not None:
                    assert int(x.sum()) == active_before - 1
                    result.prune_events.append(
                        dataclasses.replace(event, stage=stage))
                    count_removal()
                    converge(interior, exact=options.full_convergence)
                    continue
                # fairness deadlock: everyone left on the pair is at its
                # last entry, so repair by relocation instead of pruning
                move = relocate_from_deadlock(j, k_prime, x, p, topology,
                                              channels, params)
                if move is None:
                    result.fairness_conflicts.append((j, k_prime))
                    break
                assert int(x.sum()) <= active_before
                result.relocation_events.append(
                    dataclasses.replace(move, stage=stage))
                if move.displaced >= 0:
                    count_removal()
                converge(interior, exact=options.full_convergence)

    # polish the final powers with the full budget before reporting rates
    converge(options.max_sweeps, exact=True)

    result.x = x
    result.p = p
    result.per_user_rate = user_rates_core(channels.h, x, p, params.noise_w)
    result.sum_rate = float(result.per_user_rate.sum())
    return result
