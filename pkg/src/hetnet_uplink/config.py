"""Simulation configuration: channel parameters and campaign settings.

Defaults correspond to the standard two-tier scenario used throughout the
experiments: 1 macro BS at the origin, 4 femto BSs, 25 users in a
1000 m x 1000 m square, 20 sub-channels of 180 kHz each.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from .errors import ConfigurationError

ALGORITHMS = ("proposed", "max-sinr")
PLACEMENTS = ("uniform", "near-macro", "near-femto")

# Default femto layout: symmetric around the macro BS at the origin.
DEFAULT_FEMTO_POSITIONS = (
    (250.0, 250.0),
    (250.0, -250.0),
    (-250.0, 250.0),
    (-250.0, -250.0),
)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    """Large/small-scale fading and radio parameters (dB/dBm where noted)."""

    l_fixed_macro_db: float = 34.0
    l_fixed_femto_db: float = 37.0
    alpha_macro: float = 4.0
    alpha_femto: float = 3.0
    shadow_sigma_db: float = 8.0
    # Total noise power per sub-channel (N0 * bandwidth), in dBm.
    noise_dbm: float = -111.45
    subchannel_bandwidth_hz: float = 180e3
    p_max_dbm: float = 20.0
    d_min_m: float = 1.0

    def __post_init__(self):
        import math

        for name in ("l_fixed_macro_db", "l_fixed_femto_db", "alpha_macro",
                     "alpha_femto", "shadow_sigma_db", "noise_dbm", "p_max_dbm"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite")
        if self.subchannel_bandwidth_hz <= 0:
            raise ConfigurationError("subchannel_bandwidth_hz must be positive")
        if self.d_min_m <= 0:
            raise ConfigurationError("d_min_m must be positive")

    @property
    def noise_w(self) -> float:
        """Noise power per sub-channel in watts."""
        return dbm_to_watt(self.noise_dbm)

    @property
    def p_max_w(self) -> float:
        """Per-user transmit power budget in watts."""
        return dbm_to_watt(self.p_max_dbm)


@dataclass(frozen=True)
class SimConfig:
    """Full description of one Monte Carlo campaign."""

    num_users: int = 25
    num_femtos: int = 4
    num_subchannels: int = 20
    macro_subchannels: int = 20
    area_side: float = 1000.0
    femto_positions: tuple = DEFAULT_FEMTO_POSITIONS
    random_femtos: bool = False
    channel: ChannelParams = field(default_factory=ChannelParams)
    algorithm: str = "proposed"
    fairness: bool = True
    drops: int = 100
    seed: int = 1
    placement: str = "uniform"
    near_macro_radius: float = 200.0
    near_femto_radius: float = 40.0
    # fraction of users clustered by the near-macro / near-femto placements;
    # the remainder is uniform over the area
    cluster_fraction: float = 0.8
    output: str | None = None

    def __post_init__(self):
        if self.num_users < 1:
            raise ConfigurationError("num_users must be >= 1")
        if self.num_subchannels < 1:
            raise ConfigurationError("num_subchannels must be >= 1")
        if not (1 <= self.macro_subchannels <= self.num_subchannels):
            raise ConfigurationError(
                "macro_subchannels must be in [1, num_subchannels]")
        if self.num_femtos < 0:
            raise ConfigurationError("num_femtos must be >= 0")
        if self.drops < 1:
            raise ConfigurationError("drops must be >= 1")
        if self.area_side < 0:
            raise ConfigurationError("area_side must be >= 0")
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}")
        if self.placement not in PLACEMENTS:
            raise ConfigurationError(f"unknown placement {self.placement!r}")
        if not 0.0 <= self.cluster_fraction <= 1.0:
            raise ConfigurationError("cluster_fraction must be in [0, 1]")
        if not self.random_femtos and len(self.femto_positions) != self.num_femtos:
            raise ConfigurationError(
                "femto_positions length must equal num_femtos "
                "(or set random_femtos=True)")

    @property
    def num_bs(self) -> int:
        return 1 + self.num_femtos

    def with_overrides(self, **kwargs) -> "SimConfig":
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["femto_positions"] = [list(p) for p in self.femto_positions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "channel" in d and isinstance(d["channel"], dict):
            d["channel"] = ChannelParams(**d["channel"])
        if "femto_positions" in d:
            d["femto_positions"] = tuple(tuple(p) for p in d["femto_positions"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_json_file(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
