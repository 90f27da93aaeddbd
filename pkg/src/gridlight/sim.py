"""Discrete-time point-queue simulation of a signalized grid.

Vehicles traverse links in free-flow time, then wait in a per-movement FIFO
queue at the stop line until their movement is green and lane capacity
(saturation rate) lets them discharge onto the next link. Phase changes pass
through a fixed yellow + all-red interlock. The engine advances in 1 s ticks;
`step` bundles `dt` ticks under one joint action.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidActionError, MetricUndefinedError, ValidationError
from .net import (
    APPROACHES,
    LANE_TYPES,
    NUM_PHASES,
    PHASE_MOVEMENTS,
    RoadNetwork,
    lane_index,
)

GREEN, YELLOW, ALLRED = "green", "yellow", "allred"


@dataclass
class SimConfig:
    saturation_rate: float = 0.5  # vehicles / lane / second during green
    yellow_s: int = 3
    allred_s: int = 2

    def validate(self):
        if self.saturation_rate <= 0:
            raise ConfigError("saturation_rate must be positive")
        if self.yellow_s < 0 or self.allred_s < 2:
            raise ConfigError("interlock requires yellow >= 0 and all-red >= 2 s")


@dataclass
class SignalState:
    phase: int = 0
    mode: str = GREEN
    timer: int = 0
    pending: int = 0
    phase_elapsed: int = 0


@dataclass
class Vehicle:
    id: int
    route: tuple  # link ids, entry link first, exit link last
    entry_time: float
    exit_time: float | None = None
    leg: int = 0
    mode: str = "travel"  # travel | queued
    remaining: float = 0.0


def extrinsic_reward(queues, d: int) -> float:
    """Negative mean queue length over the intersection's d entrances."""
    if d < 1:
        raise ConfigError("entrance count d must be >= 1")
    return -float(np.sum(queues)) / d


class TrafficSim:
    """Mutable simulation engine over a RoadNetwork.

    A single instance is single-threaded; independent instances share nothing.
    """

    def __init__(self, net: RoadNetwork, config: SimConfig | None = None,
                 record_signal_trace: bool = False):
        self.net = net
        self.config = config or SimConfig()
        self.config.validate()
        self.record_signal_trace = record_signal_trace
        self.intersection_ids = sorted(i.id for i in net.intersections)
        # per intersection: map incoming link id -> approach letter
        self._approach_of_link = {}
        self._entrances = {}
        for k in self.intersection_ids:
            in_links = net.in_links(k)
            self._entrances[k] = len(in_links)
            for ln in in_links:
                self._approach_of_link[ln.id] = net.approach(ln)
        self._movement_cache = {}
        self.reset([])

    # -- lifecycle ------------------------------------------------------

    def reset(self, flow):
        """Reset to an empty network at clock 0 with a (t, route) schedule."""
        self.clock = 0
        self.vehicles: dict[int, Vehicle] = {}
        self.queues = {
            k: [deque() for _ in range(len(APPROACHES) * len(LANE_TYPES))]
            for k in self.intersection_ids
        }
        self._credit = {k: np.zeros(len(APPROACHES) * len(LANE_TYPES)) for k in self.intersection_ids}
        self.signals = {k: SignalState() for k in self.intersection_ids}
        self.entered = 0
        self.exited = 0
        self._traveling: dict[int, None] = {}
        self.signal_trace = []
        self._schedule = sorted(
            ((float(t), tuple(route)) for t, route in flow), key=lambda e: e[0]
        )
        for _, route in self._schedule:
            self._validate_route(route)
        self._next_entry = 0
        self._next_vehicle_id = 0

    def _validate_route(self, route):
        if not route:
            raise ValidationError("empty route")
        links = [self.net.link(lid) for lid in route]
        if self.net.is_intersection(links[0].src):
            raise ValidationError("route must start on an entry link")
        if self.net.is_intersection(links[-1].dst):
            raise ValidationError("route must end on an exit link")
        for a, b in zip(links, links[1:]):
            if a.dst != b.src:
                raise ValidationError(f"route disconnected between links {a.id} and {b.id}")

    # -- observation ----------------------------------------------------

    def queue_lengths(self, k: int) -> np.ndarray:
        """Queued-vehicle count per incoming lane (E,N,W,S x left,straight,right)."""
        if k not in self.queues:
            raise ValidationError(f"unknown intersection {k}")
        return np.array([len(q) for q in self.queues[k]], dtype=np.int64)

    def entrances(self, k: int) -> int:
        return self._entrances[k]

    def extrinsic_rewards(self) -> np.ndarray:
        return np.array(
            [extrinsic_reward(self.queue_lengths(k), self._entrances[k]) for k in self.intersection_ids]
        )

    def on_network(self) -> int:
        return len(self.vehicles) - self.exited

    def check_conservation(self) -> bool:
        return self.entered == self.on_network() + self.exited

    def average_travel_time(self, at_episode_end: bool = True) -> float:
        """Mean travel time; stranded vehicles contribute clock - entry when
        at_episode_end is set."""
        if self.entered == 0:
            raise MetricUndefinedError("no vehicle has entered the network")
        total, n = 0.0, 0
        for v in self.vehicles.values():
            if v.exit_time is not None:
                total += v.exit_time - v.entry_time
                n += 1
            elif at_episode_end:
                total += self.clock - v.entry_time
                n += 1
        if n == 0:
            raise MetricUndefinedError("no vehicle has completed or been measured")
        return total / n

    # -- dynamics -------------------------------------------------------

    def step(self, joint_action, dt: float = 10.0):
        """Apply one phase action per intersection, then advance dt seconds."""
        if dt <= 0:
            raise ConfigError("dt must be positive")
        ticks = int(round(dt))
        if abs(ticks - dt) > 1e-9 or ticks < 1:
            raise ConfigError("dt must be a whole number of seconds")
        actions = self._normalize_actions(joint_action)
        for k, a in actions.items():
            sig = self.signals[k]
            if sig.mode == GREEN:
                if a != sig.phase:
                    sig.mode = YELLOW
                    sig.timer = self.config.yellow_s + self.config.allred_s
                    sig.pending = a
            else:
                sig.pending = a
        for _ in range(ticks):
            self._tick()
        return self

    def _normalize_actions(self, joint_action):
        if isinstance(joint_action, dict):
            items = joint_action
        else:
            if len(joint_action) != len(self.intersection_ids):
                raise InvalidActionError("need one action per intersection")
            items = dict(zip(self.intersection_ids, joint_action))
        if set(items) != set(self.intersection_ids):
            raise InvalidActionError("actions must cover every intersection exactly once")
        for k, a in items.items():
            if not (0 <= int(a) < NUM_PHASES):
                raise InvalidActionError(f"action {a} out of range at intersection {k}")
        return {k: int(a) for k, a in items.items()}

    def _tick(self):
        self.clock += 1
        self._update_signals()
        self._advance_traveling()
        self._discharge()
        self._admit_entries()
        if self.record_signal_trace:
            for k in self.intersection_ids:
                sig = self.signals[k]
                self.signal_trace.append((self.clock, k, sig.mode, sig.phase))

    def _update_signals(self):
        # timer counts remaining interlock ticks (yellow then all-red); the
        # pending phase turns green on the tick after the timer empties
        for sig in self.signals.values():
            if sig.mode == GREEN:
                sig.phase_elapsed += 1
            elif sig.timer > 0:
                sig.timer -= 1
                sig.mode = YELLOW if sig.timer >= self.config.allred_s else ALLRED
            else:
                sig.mode = GREEN
                sig.phase = sig.pending
                sig.phase_elapsed = 0

    def _movement(self, in_link_id: int, out_link_id: int):
        key = (in_link_id, out_link_id)
        mv = self._movement_cache.get(key)
        if mv is None:
            in_link = self.net.link(in_link_id)
            out_link = self.net.link(out_link_id)
            mv = (self._approach_of_link[in_link_id], self.net.turn_type(in_link, out_link))
            self._movement_cache[key] = mv
        return mv

    def _advance_traveling(self):
        arrived = []
        for vid in self._traveling:
            v = self.vehicles[vid]
            v.remaining -= 1.0
            if v.remaining <= 1e-9:
                arrived.append(vid)
        for vid in arrived:
            del self._traveling[vid]
            v = self.vehicles[vid]
            link = self.net.link(v.route[v.leg])
            if not self.net.is_intersection(link.dst):
                v.exit_time = float(self.clock)
                v.mode = "exited"
                self.exited += 1
                continue
            approach, turn = self._movement(v.route[v.leg], v.route[v.leg + 1])
            v.mode = "queued"
            self.queues[link.dst][lane_index(approach, turn)].append(vid)

    def _green_lanes(self, sig: SignalState):
        if sig.mode != GREEN:
            return None
        lanes = [lane_index(a, "right") for a in APPROACHES]
        lanes += [lane_index(a, t) for a, t in PHASE_MOVEMENTS[sig.phase]]
        return lanes

    def _discharge(self):
        rate = self.config.saturation_rate
        for k in self.intersection_ids:
            sig = self.signals[k]
            green = self._green_lanes(sig)
            credit = self._credit[k]
            if green is None:
                credit[:] = 0.0
                continue
            green_set = set(green)
            for lane in range(len(credit)):
                if lane not in green_set:
                    credit[lane] = 0.0
                    continue
                credit[lane] += rate
                q = self.queues[k][lane]
                while credit[lane] >= 1.0 - 1e-9 and q:
                    vid = q.popleft()
                    credit[lane] -= 1.0
                    v = self.vehicles[vid]
                    v.leg += 1
                    nxt = self.net.link(v.route[v.leg])
                    v.mode = "travel"
                    v.remaining = nxt.travel_time_s
                    self._traveling[vid] = None
                if not q:
                    credit[lane] = min(credit[lane], 1.0)

    def _admit_entries(self):
        while self._next_entry < len(self._schedule) and self._schedule[self._next_entry][0] <= self.clock:
            _, route = self._schedule[self._next_entry]
            self._next_entry += 1
            vid = self._next_vehicle_id
            self._next_vehicle_id += 1
            first = self.net.link(route[0])
            v = Vehicle(
                id=vid,
                route=route,
                entry_time=float(self.clock),
                leg=0,
                mode="travel",
                remaining=first.travel_time_s,
            )
            self.vehicles[vid] = v
            self._traveling[vid] = None
            self.entered += 1
