"""Seeded Monte Carlo campaigns and structured result files.

A campaign runs `drops` independent drops of the configured scenario.
Every drop's seeds are derived from (base seed, drop index), so a
campaign is fully reproducible: the same config and seed produce
byte-identical output files.

Output layout (all writes go through a temp file + atomic rename):
    results.json    config echo, per-drop summaries, pooled report,
                    full convergence trace of drop 0 (schema_version 1)
    user_rates.csv  drop, user, rate_bpshz
    rate_cdf.csv    rate, cdf
    sweep_summary.csv  (sweeps only) value, mean_sum_rate, stderr_sum_rate
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .assignment import AllocationResult, SolveOptions, solve
from .baselines import max_sinr_baseline
from .channel import generate_channel_tensor, generate_topology
from .config import SimConfig
from .errors import ConfigurationError
from .metrics import DEFAULT_GAMMA_TH, RateReport, aggregate

SCHEMA_VERSION = 1

SWEEPABLE = ("num_users", "macro_subchannels")


def drop_seeds(base_seed: int, drop_index: int) -> tuple[int, int]:
    """Derive the (topology, channel) seeds for one drop."""
    state = np.random.SeedSequence([base_seed, drop_index]).generate_state(2)
    return int(state[0]), int(state[1])


def run_drop(config: SimConfig, drop_index: int) -> AllocationResult:
    topo_seed, chan_seed = drop_seeds(config.seed, drop_index)
    topology = generate_topology(config, topo_seed)
    channels = generate_channel_tensor(topology, config.channel, chan_seed)
    if config.algorithm == "proposed":
        return solve(topology, channels, config.channel,
                     SolveOptions(fairness=config.fairness))
    return max_sinr_baseline(topology, channels, config.channel)


@dataclass(frozen=True)
class DropSummary:
    drop: int
    topo_seed: int
    chan_seed: int
    sum_rate: float
    per_user_rate: list[float]
    subchannels_per_user: list[int]
    removal_count: int
    relocation_count: int
    power_stages: int
    all_converged: bool
    fairness_conflicts: list[list[int]]

    @classmethod
    def from_result(cls, config, drop, result: AllocationResult):
        topo_seed, chan_seed = drop_seeds(config.seed, drop)
        return cls(
            drop=drop,
            topo_seed=topo_seed,
            chan_seed=chan_seed,
            sum_rate=result.sum_rate,
            per_user_rate=[float(r) for r in result.per_user_rate],
            subchannels_per_user=[int(c) for c in result.subchannels_per_user],
            removal_count=result.removal_count,
            relocation_count=len(result.relocation_events),
            power_stages=len(result.trace),
            all_converged=result.all_converged,
            fairness_conflicts=[list(c) for c in result.fairness_conflicts],
        )


@dataclass
class CampaignOutput:
    config: SimConfig
    summaries: list[DropSummary]
    report: RateReport
    results: list[AllocationResult] = field(default_factory=list, repr=False)

    def trace_dict(self, drop: int = 0) -> dict:
        """Serializable convergence trace of one drop."""
        result = self.results[drop]
        return {
            "drop": drop,
            "stages": [
                {
                    "sweeps": stage.sweeps,
                    "converged": stage.converged,
                    "sum_rates": [float(v) for v in stage.sum_rates],
                    "max_deltas": [float(v) for v in stage.max_deltas],
                }
                for stage in result.trace
            ],
            "prune_events": [
                {"user": e.user, "bs": e.bs, "subchannel": e.subchannel,
                 "delta": e.delta, "stage": e.stage}
                for e in result.prune_events
            ],
            "relocation_events": [
                {"user": e.user, "src_bs": e.src_bs,
                 "src_subchannel": e.src_subchannel, "dst_bs": e.dst_bs,
                 "dst_subchannel": e.dst_subchannel,
                 "displaced": e.displaced, "delta": e.delta,
                 "stage": e.stage}
                for e in result.relocation_events
            ],
        }

def run_campaign(config: SimConfig,
                 gamma_th: float = DEFAULT_GAMMA_TH) -> CampaignOutput:
    """Run every drop, pool the metrics, and write output files if a path
    is configured."""
    results = [run_drop(config, d) for d in range(config.drops)]
    summaries = [DropSummary.from_result(config, d, r)
                 for d, r in enumerate(results)]
    out = CampaignOutput(config=config, summaries=summaries,
                         report=aggregate(results, gamma_th), results=results)
    if config.output:
        write_campaign(config.output, out)
    return out


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_campaign(out_dir: str, campaign: CampaignOutput) -> None:
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": campaign.config.to_dict(),
        "drops": [vars(s) for s in campaign.summaries],
        "report": campaign.report.to_dict(),
        "trace": campaign.trace_dict(0),
    }
    _atomic_write(os.path.join(out_dir, "results.json"),
                  json.dumps(doc, sort_keys=True, indent=1))

    n = campaign.config.num_users
    lines = ["drop,user,rate_bpshz"]
    for s in campaign.summaries:
        for i in range(n):
            lines.append(f"{s.drop},{i},{s.per_user_rate[i]!r}")
    _atomic_write(os.path.join(out_dir, "user_rates.csv"),
                  "\n".join(lines) + "\n")

    lines = ["rate,cdf"]
    for rate, frac in campaign.report.cdf:
        lines.append(f"{float(rate)!r},{float(frac)!r}")
    _atomic_write(os.path.join(out_dir, "rate_cdf.csv"),
                  "\n".join(lines) + "\n")


def sweep(config: SimConfig, parameter: str,
          values: list[int]) -> list[CampaignOutput]:
    """One campaign per parameter value, same base seed throughout (common
    random numbers across points). Writes per-value subdirectories and a
    summary table when config.output is set."""
    if parameter not in SWEEPABLE:
        raise ConfigurationError(f"cannot sweep {parameter!r}; "
                                 f"choose one of {SWEEPABLE}")
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    outputs = []
    for value in values:
        sub_out = os.path.join(config.output, f"{parameter}={value}") \
            if config.output else None
        cfg = config.with_overrides(**{parameter: int(value)}, output=sub_out)
        outputs.append(run_campaign(cfg))
    if config.output:
        lines = ["value,mean_sum_rate,stderr_sum_rate"]
        for value, out in zip(values, outputs):
            lines.append(f"{value},{out.report.mean_sum_rate!r},"
                         f"{out.report.stderr_sum_rate!r}")
        os.makedirs(config.output, exist_ok=True)
        _atomic_write(os.path.join(config.output, "sweep_summary.csv"),
                      "\n".join(lines) + "\n")
    return outputs
