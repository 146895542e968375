"""Rate statistics: per-user rates, empirical CDF, outage, pooling.

user_rate / sum_rate_from_state recompute rates straight from the SINR
definition, independently of the solver's incremental bookkeeping, so
they double as a consistency check on AllocationResult.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import AllocationResult
from .channel import ChannelTensor, sinr
from .config import ChannelParams

DEFAULT_GAMMA_TH = 0.6  # bps/Hz outage threshold


def user_rate(i: int, x: np.ndarray, p: np.ndarray, channels: ChannelTensor,
              params: ChannelParams) -> float:
    """Rate of user i in bps/Hz, summed over its active entries."""
    total = 0.0
    for j, k in zip(*np.nonzero(x[i])):
        total += np.log2(1.0 + sinr(i, int(j), int(k), x, p, channels, params))
    return float(total)


def sum_rate_from_state(x: np.ndarray, p: np.ndarray, channels: ChannelTensor,
                        params: ChannelParams) -> float:
    return sum(user_rate(i, x, p, channels, params) for i in range(x.shape[0]))


@dataclass(frozen=True)
class RateReport:
    """Pooled rate statistics over one or more drops."""

    per_user_rate: np.ndarray        # pooled user rates, users x drops
    sum_rate: float                  # total over the pooled list
    mean_sum_rate: float             # mean per-drop sum rate
    stderr_sum_rate: float
    cdf: np.ndarray                  # (n, 2) of (rate, cumulative fraction)
    outage: float
    gamma_th: float
    subchannels_per_user: np.ndarray  # pooled active-entry counts

    def to_dict(self) -> dict:
        return {
            "per_user_rate": self.per_user_rate.tolist(),
            "sum_rate": self.sum_rate,
            "mean_sum_rate": self.mean_sum_rate,
            "stderr_sum_rate": self.stderr_sum_rate,
            "cdf": self.cdf.tolist(),
            "outage": self.outage,
            "gamma_th": self.gamma_th,
            "subchannels_per_user": self.subchannels_per_user.tolist(),
        }


def empirical_cdf(values: np.ndarray) -> np.ndarray:
    """Step CDF over the unique sorted values; last fraction is 1.0."""
    vals, counts = np.unique(np.asarray(values, dtype=float),
                             return_counts=True)
    frac = np.cumsum(counts) / counts.sum()
    return np.column_stack([vals, frac])


def aggregate(results: list[AllocationResult],
              gamma_th: float = DEFAULT_GAMMA_TH) -> RateReport:
    """Pool per-user rates over drops and compute the summary statistics."""
    if not results:
        raise ValueError("aggregate needs at least one result")
    rates = np.concatenate([r.per_user_rate for r in results])
    sums = np.array([r.sum_rate for r in results])
    stderr = float(np.std(sums, ddof=1) / np.sqrt(len(sums))) \
        if len(sums) > 1 else 0.0
    counts = np.concatenate([r.subchannels_per_user for r in results])
    return RateReport(
        per_user_rate=rates,
        sum_rate=float(rates.sum()),
        mean_sum_rate=float(sums.mean()),
        stderr_sum_rate=stderr,
        cdf=empirical_cdf(rates),
        outage=float(np.mean(rates < gamma_th)),
        gamma_th=gamma_th,
        subchannels_per_user=counts,
    )
