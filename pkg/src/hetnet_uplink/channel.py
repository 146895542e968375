"""Network drops, stochastic channel gains and the uplink SINR.

The channel between user i and BS j on sub-channel k is h = g * f, where
g = 10^(-(L(d) + S)/10) is the linear large-scale gain (path loss plus
log-normal shadowing, frequency flat) and f ~ Exp(1) is the small-scale
fading power gain, drawn independently per sub-channel. h is then
exponentially distributed with mean g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ChannelParams, SimConfig
from .errors import ConfigurationError, ContractViolationError

MACRO = 0  # BS index of the macro cell


@dataclass(frozen=True)
class NetworkTopology:
    """One drop's node placement and per-BS sub-channel availability."""

    macro_position: np.ndarray       # (2,)
    femto_positions: np.ndarray      # (M-1, 2)
    user_positions: np.ndarray       # (N, 2)
    num_subchannels: int
    allowed_subchannels: np.ndarray  # (M, K) bool, row 0 = macro
    area_side: float

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def num_bs(self) -> int:
        return 1 + self.femto_positions.shape[0]

    @property
    def bs_positions(self) -> np.ndarray:
        return np.vstack([self.macro_position[None, :], self.femto_positions])


@dataclass(frozen=True)
class ChannelTensor:
    """Linear power gains h[i, j, k] for one drop."""

    h: np.ndarray  # (N, M, K), strictly positive
    seed: int


def _uniform_square(rng, n, side):
    return rng.uniform(-side / 2.0, side / 2.0, size=(n, 2))


def _uniform_disk(rng, n, centers, radius):
    """n points uniform in disks of given radius around centers (n, 2)."""
    r = radius * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return centers + np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate_topology(config: SimConfig, rng_seed: int) -> NetworkTopology:
    """Draw one network drop; deterministic for a given seed."""
    if config.num_users < 1 or config.num_subchannels < 1:
        raise ConfigurationError("need at least one user and one sub-channel")
    rng = np.random.default_rng(rng_seed)
    side = config.area_side
    n = config.num_users

    if config.random_femtos:
        femtos = _uniform_square(rng, config.num_femtos, side)
    else:
        femtos = np.array(config.femto_positions, dtype=float).reshape(
            config.num_femtos, 2)

    if config.placement == "uniform":
        users = _uniform_square(rng, n, side)
    else:
        # clustered placements put a fixed fraction of the users near the
        # chosen tier and spread the rest uniformly, so both tiers stay
        # populated (the outdoor remainder is what loads the other tier)
        n_near = int(round(config.cluster_fraction * n))
        if config.placement == "near-macro":
            near = _uniform_disk(rng, n_near, np.zeros((n_near, 2)),
                                 config.near_macro_radius)
        else:  # near-femto
            if config.num_femtos == 0:
                raise ConfigurationError("near-femto placement requires femtos")
            idx = rng.integers(0, config.num_femtos, size=n_near)
            near = _uniform_disk(rng, n_near, femtos[idx],
                                 config.near_femto_radius)
        users = np.vstack([near, _uniform_square(rng, n - n_near, side)])
    users = np.clip(users, -side / 2.0, side / 2.0)
    femtos = np.clip(femtos, -side / 2.0, side / 2.0)

    k = config.num_subchannels
    allowed = np.ones((config.num_bs, k), dtype=bool)
    allowed[MACRO, config.macro_subchannels:] = False

    return NetworkTopology(
        macro_position=np.zeros(2),
        femto_positions=femtos,
        user_positions=users,
        num_subchannels=k,
        allowed_subchannels=allowed,
        area_side=side,
    )


def path_loss_db(distance_m: float, tier: str, params: ChannelParams) -> float:
    """Distance-dependent path loss in dB; distance clamped below d_min."""
    d = max(float(distance_m), params.d_min_m)
    if tier == "macro":
        return params.l_fixed_macro_db + 10.0 * params.alpha_macro * np.log10(d)
    if tier == "femto":
        return params.l_fixed_femto_db + 10.0 * params.alpha_femto * np.log10(d)
    raise ValueError(f"unknown tier {tier!r}")


def large_scale_gain(topology: NetworkTopology, params: ChannelParams,
                     shadow_db: np.ndarray | None = None) -> np.ndarray:
    """Linear large-scale gains g[i, j]; shadow_db is an (N, M) dB offset."""
    d = np.linalg.norm(
        topology.user_positions[:, None, :] - topology.bs_positions[None, :, :],
        axis=2)
    d = np.maximum(d, params.d_min_m)
    l_fixed = np.full(topology.num_bs, params.l_fixed_femto_db)
    alpha = np.full(topology.num_bs, params.alpha_femto)
    l_fixed[MACRO] = params.l_fixed_macro_db
    alpha[MACRO] = params.alpha_macro
    attn_db = l_fixed[None, :] + 10.0 * alpha[None, :] * np.log10(d)
    if shadow_db is not None:
        attn_db = attn_db + shadow_db
    return 10.0 ** (-attn_db / 10.0)


def generate_channel_tensor(topology: NetworkTopology, params: ChannelParams,
                            rng_seed: int, unit_fading: bool = False
                            ) -> ChannelTensor:
    """Draw the gain tensor for one drop.

    Shadowing is drawn once per (user, BS) pair and shared across
    sub-channels; fading is drawn per (user, BS, sub-channel). With
    unit_fading=True the fast-fading draw is skipped and f = 1 (test hook).
    """
    rng = np.random.default_rng(rng_seed)
    n, m, k = topology.num_users, topology.num_bs, topology.num_subchannels
    shadow = rng.normal(0.0, params.shadow_sigma_db, size=(n, m))
    g = large_scale_gain(topology, params, shadow)
    if unit_fading:
        f = np.ones((n, m, k))
    else:
        f = rng.standard_exponential(size=(n, m, k))
        f = np.maximum(f, np.finfo(float).tiny)  # keep gains strictly positive
    return ChannelTensor(h=g[:, :, None] * f, seed=rng_seed)


def sinr(i: int, j: int, k: int, x: np.ndarray, p: np.ndarray,
         channels: ChannelTensor, params: ChannelParams) -> float:
    """Uplink SINR of user i at BS j on sub-channel k.

    Interference comes from users other than i that transmit to BSs other
    than j on the same sub-channel, weighted by their gain toward BS j.
    """
    if not x[i, j, k]:
        raise ContractViolationError(
            f"sinr requested for inactive entry ({i}, {j}, {k})")
    h = channels.h
    mask = x[:, :, k].astype(float)
    mask[i, :] = 0.0
    mask[:, j] = 0.0
    tx = (mask * p[:, :, k]).sum(axis=1)          # per interfering user
    interference = float(tx @ h[:, j, k])
    return float(p[i, j, k] * h[i, j, k] / (interference + params.noise_w))
