"""Training orchestration: episode loop, reward-shaping wiring, metric
collection, and the convergence/final-performance statistics."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import shaping
from .agent import (
    AgentConfig,
    Observation,
    PolicyState,
    ReplayBuffer,
    Transition,
    dqn_update,
    encode,
    epsilon_at,
    q_values,
    select_action,
    sync_target,
)
from .errors import ConfigError, MetricUndefinedError
from .net import NUM_PHASES, build_grid
from .netio import ArrivalProfile, generate_flow
from .nn.model import csr_neighborhoods
from .shaping import IAConfig
from .sim import SimConfig, TrafficSim


@dataclass
class ExperimentConfig:
    rows: int = 2
    cols: int = 2
    link_travel_s: float = 30.0
    saturation_rate: float = 0.5
    dt: float = 10.0
    episodes: int = 100
    steps_per_episode: int = 1440
    arrival_mean: float = 526.63  # vehicles per bin over the whole grid
    arrival_std: float = 86.70
    arrival_bin_s: float = 300.0
    ia: IAConfig = field(default_factory=IAConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    seed: int = 0
    repetition: int = 0
    flow_mode: str = "resample"  # resample per episode | fixed (replay identical flow)
    policy: str = "dqn"  # dqn | fixed (cycling fixed-time baseline)
    fixed_hold_steps: int = 3  # steps each phase is held by the fixed policy
    bypass_shaping: bool = False

    def validate(self):
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ConfigError("episodes and steps_per_episode must be >= 1")
        if self.flow_mode not in ("resample", "fixed"):
            raise ConfigError(f"unknown flow_mode {self.flow_mode!r}")
        if self.policy not in ("dqn", "fixed"):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.fixed_hold_steps < 1:
            raise ConfigError("fixed_hold_steps must be >= 1")
        self.ia.validate()
        self.agent.validate()


@dataclass
class EpisodeMetrics:
    travel_times: list = field(default_factory=list)  # float or None when undefined
    mean_extrinsic: list = field(default_factory=list)
    mean_intrinsic: list = field(default_factory=list)
    mean_shaped: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)


@dataclass
class ConvergenceIndices:
    loose_index: int | None
    tight_index: int | None
    threshold: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    metrics: EpisodeMetrics
    summary: dict


def config_hash(cfg) -> str:
    doc = json.dumps(dataclasses.asdict(cfg), sort_keys=True)
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()[:16]


def final_performance(series) -> float:
    """Mean travel time over the last 20 episodes."""
    if len(series) < 20:
        raise ConfigError("final performance needs at least 20 episodes")
    tail = series[-20:]
    if any(v is None for v in tail):
        raise MetricUndefinedError("missing travel-time values in the last 20 episodes")
    return float(np.mean(tail))


def convergence_indices(series, search_lo: int = 50, search_hi: int = 100) -> ConvergenceIndices:
    """Earliest episodes in [lo, hi] whose suffix maximum stays below 1.2x
    and 1.1x the final-performance threshold."""
    if len(series) < search_hi:
        raise ConfigError(f"series must have at least {search_hi} episodes")
    if any(v is None for v in series):
        raise MetricUndefinedError("missing travel-time values in the series")
    threshold = final_performance(series)
    values = np.asarray(series, dtype=float)
    suffix_max = np.maximum.accumulate(values[::-1])[::-1]
    hi = min(search_hi, len(series) - 1)
    loose = tight = None
    for ep in range(search_lo, hi + 1):
        if loose is None and suffix_max[ep] < 1.2 * threshold:
            loose = ep
        if tight is None and suffix_max[ep] < 1.1 * threshold:
            tight = ep
        if loose is not None and tight is not None:
            break
    return ConvergenceIndices(loose, tight, threshold)


def _flow_seed(cfg: ExperimentConfig, episode: int):
    return np.random.SeedSequence([cfg.seed, cfg.repetition, 1_000_003, episode])


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run one full training (or fixed-policy) experiment, deterministically.

    Per step: observe -> encode -> Q values -> epsilon-greedy actions ->
    simulator step -> extrinsic rewards -> memory/intrinsic/shaped rewards ->
    replay -> one DQN update once the buffer is warm. Target sync and metric
    recording happen per episode.
    """
    cfg.validate()
    net = build_grid(cfg.rows, cfg.cols, cfg.link_travel_s)
    n_agents = len(net.intersections)
    ptr, idx = csr_neighborhoods(net.neighborhoods())
    sim = TrafficSim(net, SimConfig(saturation_rate=cfg.saturation_rate))

    root = np.random.SeedSequence([cfg.seed, cfg.repetition])
    params_seq, action_seq, replay_seq = root.spawn(3)
    policy = PolicyState.create(cfg.agent, np.random.default_rng(params_seq))
    action_rng = np.random.default_rng(action_seq)
    replay_rng = np.random.default_rng(replay_seq)
    buffer = ReplayBuffer(cfg.agent.replay_capacity)

    profile = ArrivalProfile(
        mean=cfg.arrival_mean,
        std=cfg.arrival_std,
        duration_s=cfg.steps_per_episode * cfg.dt,
        bin_width_s=cfg.arrival_bin_s,
    )
    fixed_flow = None
    if cfg.flow_mode == "fixed":
        fixed_flow = generate_flow(profile, net, _flow_seed(cfg, 0))

    total_steps = cfg.episodes * cfg.steps_per_episode
    global_step = 0
    metrics = EpisodeMetrics()

    for episode in range(cfg.episodes):
        flow = fixed_flow if fixed_flow is not None else generate_flow(
            profile, net, _flow_seed(cfg, episode)
        )
        sim.reset(flow.entries)
        memory = shaping.initial_memory(n_agents)
        ep_e, ep_i, ep_r = [], [], []
        pending = None
        epsilon = epsilon_at(global_step, total_steps, cfg.agent)

        def observe():
            feats = [
                encode(
                    Observation(sim.queue_lengths(k), sim.signals[k].phase),
                    queue_cap=cfg.agent.queue_cap,
                )
                for k in sim.intersection_ids
            ]
            return np.ascontiguousarray(np.stack(feats))

        def train_on(transition):
            buffer.push(transition)
            if cfg.policy == "dqn" and len(buffer) >= cfg.agent.batch_size:
                dqn_update(policy, buffer.sample(replay_rng, cfg.agent.batch_size), ptr, idx)

        for step in range(cfg.steps_per_episode):
            feats = observe()
            if pending is not None:
                train_on(Transition(*pending, next_feats=feats))
                pending = None
            if cfg.policy == "fixed":
                phase = (step // cfg.fixed_hold_steps) % NUM_PHASES
                actions = np.full(n_agents, phase, dtype=np.int64)
            else:
                epsilon = epsilon_at(global_step, total_steps, cfg.agent)
                q = q_values(policy, feats, ptr, idx)
                actions = np.array(
                    [select_action(q[i], epsilon, action_rng) for i in range(n_agents)],
                    dtype=np.int64,
                )
            sim.step(actions, cfg.dt)
            extrinsic = sim.extrinsic_rewards()
            if cfg.bypass_shaping:
                intrinsic = np.zeros(n_agents)
                rewards = cfg.ia.mix_e * extrinsic
            else:
                memory = shaping.update_memory(memory, extrinsic, cfg.ia)
                if n_agents >= 2:
                    intrinsic = shaping.intrinsic_rewards(memory, cfg.ia)
                else:
                    intrinsic = np.zeros(n_agents)
                rewards = shaping.shaped_rewards(extrinsic, intrinsic, cfg.ia)
            pending = (feats, actions, rewards)
            ep_e.append(float(np.mean(extrinsic)))
            ep_i.append(float(np.mean(intrinsic)))
            ep_r.append(float(np.mean(rewards)))
            global_step += 1

        if pending is not None:
            train_on(Transition(*pending, next_feats=observe()))
        if cfg.policy == "dqn":
            sync_target(policy)

        try:
            tt = sim.average_travel_time(at_episode_end=True)
        except MetricUndefinedError:
            tt = None
        metrics.travel_times.append(tt)
        metrics.mean_extrinsic.append(float(np.mean(ep_e)))
        metrics.mean_intrinsic.append(float(np.mean(ep_i)))
        metrics.mean_shaped.append(float(np.mean(ep_r)))
        metrics.epsilon.append(epsilon)

    summary = summarize(cfg, metrics)
    result = ExperimentResult(config=cfg, metrics=metrics, summary=summary)
    if out_dir is not None:
        write_result(result, out_dir)
    return result


def summarize(cfg: ExperimentConfig, metrics: EpisodeMetrics) -> dict:
    series = metrics.travel_times
    summary = {
        "config_hash": config_hash(cfg),
        "episodes": len(series),
        "final_performance": None,
        "final_performance_basis": None,
        "loose_index": None,
        "tight_index": None,
        "threshold": None,
    }
    usable = [v for v in series if v is not None]
    if len(series) >= 20 and all(v is not None for v in series[-20:]):
        summary["final_performance"] = final_performance(series)
        summary["final_performance_basis"] = "last20"
    elif usable:
        # short runs fall back to the mean over available episodes, flagged
        summary["final_performance"] = float(np.mean(usable))
        summary["final_performance_basis"] = "mean_all"
    if len(series) >= 100 and all(v is not None for v in series):
        ci = convergence_indices(series)
        summary["loose_index"] = ci.loose_index
        summary["tight_index"] = ci.tight_index
        summary["threshold"] = ci.threshold
    return summary


def _fmt(value) -> str:
    if value is None:
        return "NA"
    return repr(float(value) + 0.0)  # +0.0 collapses -0.0 for stable output


def write_result(result: ExperimentResult, out_dir) -> None:
    """Emit metrics.csv (one row per episode) and summary.json, byte-stable."""
    os.makedirs(out_dir, exist_ok=True)
    m = result.metrics
    lines = ["episode,avg_travel_time_s,mean_extrinsic,mean_intrinsic,mean_shaped,epsilon"]
    for ep in range(len(m.travel_times)):
        lines.append(
            ",".join(
                [
                    str(ep),
                    _fmt(m.travel_times[ep]),
                    _fmt(m.mean_extrinsic[ep]),
                    _fmt(m.mean_intrinsic[ep]),
                    _fmt(m.mean_shaped[ep]),
                    _fmt(m.epsilon[ep]),
                ]
            )
        )
    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(result.summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
