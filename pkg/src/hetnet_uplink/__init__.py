"""Uplink power control, sub-channel assignment and cell association for
two-tier heterogeneous cellular networks, with a Monte Carlo harness."""

from .assignment import (AllocationResult, PruneEvent, RelocationEvent,
                         SolveOptions, delta_for_removal, prune_subchannel,
                         relocate_from_deadlock, solve)
from .baselines import max_sinr_baseline
from .campaign import CampaignOutput, run_campaign, run_drop, sweep
from .channel import (ChannelTensor, NetworkTopology, generate_channel_tensor,
                      generate_topology, path_loss_db, sinr)
from .config import ChannelParams, SimConfig, dbm_to_watt
from .errors import (ConfigurationError, ContractViolationError,
                     FairnessViolationError)
from .metrics import (RateReport, aggregate, empirical_cdf,
                      sum_rate_from_state, user_rate)
from .power import (EffectiveNoiseVector, PowerTrace, effective_noise,
                    update_powers, water_fill)

__all__ = [
    "AllocationResult", "CampaignOutput", "ChannelParams", "ChannelTensor",
    "ConfigurationError", "ContractViolationError", "EffectiveNoiseVector",
    "FairnessViolationError", "NetworkTopology", "PowerTrace", "PruneEvent",
    "RateReport", "RelocationEvent", "SimConfig", "SolveOptions", "aggregate",
    "dbm_to_watt", "delta_for_removal", "effective_noise", "empirical_cdf",
    "generate_channel_tensor", "generate_topology", "max_sinr_baseline",
    "path_loss_db", "prune_subchannel", "relocate_from_deadlock",
    "run_campaign", "run_drop", "sinr", "solve", "sum_rate_from_state",
    "sweep", "update_powers", "user_rate",
]

__version__ = "0.1.0"
