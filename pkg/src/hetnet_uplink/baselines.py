"""Max-SINR association baseline with equal power per sub-channel.

Each user attaches to a single BS chosen by mean channel gain over
sub-channels (equivalent to picking the max-SINR BS under equal transmit
power and a common noise floor), with the femto tier treated as closed
access: a femto only admits a user whose gain towards it beats the user's
macro gain by a large margin, which in practice restricts femtocells to
the users right next to them (indoor users) and sends everyone else to
the macro cell. Each BS then hands out its allowed sub-channels
round-robin over its users in user-index order, and every user splits its
power budget equally over the sub-channels it received. Users left
without a sub-channel (a BS can host at most as many users as it has
channels) transmit nothing and count towards outage.
"""

from __future__ import annotations

import numpy as np

from .assignment import AllocationResult
from .channel import ChannelTensor, NetworkTopology
from .config import ChannelParams
from .kernels import user_rates_core

# Closed-access admission margin: a femto's mean gain must exceed the
# macro's by this much (in dB) before a user attaches to it. 50 dB keeps
# femtocells to users within roughly 50 m under the default path-loss laws.
FEMTO_ADMISSION_MARGIN_DB = 50.0


def max_sinr_baseline(topology: NetworkTopology, channels: ChannelTensor,
                      params: ChannelParams,
                      femto_margin_db: float = FEMTO_ADMISSION_MARGIN_DB
                      ) -> AllocationResult:
    n, m, k = topology.num_users, topology.num_bs, topology.num_subchannels
    mean_gain_db = 10.0 * np.log10(channels.h.mean(axis=2))  # (N, M)
    handicapped = mean_gain_db.copy()
    handicapped[:, 1:] -= femto_margin_db
    serving = np.argmax(handicapped, axis=1)   # single BS per user

    x = np.zeros((n, m, k), dtype=bool)
    for j in range(m):
        users = np.nonzero(serving == j)[0]
        if users.size == 0:
            continue
        chans = np.nonzero(topology.allowed_subchannels[j])[0]
        # One channel per turn; with more users than channels the trailing
        # users get nothing (zero rate, counted as outage).
        for idx, ch in enumerate(chans):
            x[users[idx % users.size], j, ch] = True

    p = np.zeros((n, m, k))
    counts = x.sum(axis=(1, 2))
    for i in range(n):
        if counts[i] > 0:
            p[i][x[i]] = params.p_max_w / counts[i]

    rates = user_rates_core(channels.h, x, p, params.noise_w)
    return AllocationResult(x=x, p=p, per_user_rate=rates,
                            sum_rate=float(rates.sum()))
