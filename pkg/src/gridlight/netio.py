"""Road-network and vehicle-flow files, plus synthetic flow generation.

Both file formats are JSON with a schema_version field. Flow generation draws
per-bin vehicle counts from a normal distribution truncated at zero, places
arrival instants uniformly within each bin, and routes vehicles along
shortest paths between sampled boundary origin/destination nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import ConfigError, ValidationError
from .net import Intersection, Link, RoadNetwork, validate_network

ROADNET_SCHEMA_VERSION = 1
FLOW_SCHEMA_VERSION = 1


@dataclass
class FlowSpec:
    entries: list = field(default_factory=list)  # (entry_time_s, route link-id tuple)

    def __post_init__(self):
        self.entries = sorted(
            ((float(t), tuple(int(l) for l in route)) for t, route in self.entries),
            key=lambda e: e[0],
        )

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, FlowSpec) and self.entries == other.entries


@dataclass
class ArrivalProfile:
    mean: float  # vehicles per bin
    std: float
    duration_s: float
    bin_width_s: float = 300.0
    od_weights: dict | None = None  # (source, sink) -> weight; default uniform

    def validate(self):
        if self.mean < 0 or self.std < 0:
            raise ConfigError("arrival mean and std must be non-negative")
        if self.bin_width_s <= 0 or self.duration_s <= 0:
            raise ConfigError("bin width and duration must be positive")


# -- roadnet serialization ---------------------------------------------


def save_roadnet(net: RoadNetwork, path) -> None:
    doc = {
        "schema_version": ROADNET_SCHEMA_VERSION,
        "rows": net.rows,
        "cols": net.cols,
        "intersections": [
            {"id": i.id, "x": i.x, "y": i.y, "neighbors": list(i.neighbors)}
            for i in net.intersections
        ],
        "links": [
            {"id": ln.id, "from": ln.src, "to": ln.dst,
             "travel_time_s": ln.travel_time_s, "lanes": ln.lanes}
            for ln in net.links
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_roadnet(path) -> RoadNetwork:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    try:
        if doc.get("schema_version") != ROADNET_SCHEMA_VERSION:
            raise ValidationError(f"unsupported roadnet schema_version {doc.get('schema_version')}")
        intersections = [
            Intersection(int(i["id"]), int(i["x"]), int(i["y"]), tuple(int(n) for n in i["neighbors"]))
            for i in doc["intersections"]
        ]
        links = [
            Link(int(l["id"]), _node(l["from"]), _node(l["to"]),
                 float(l["travel_time_s"]), int(l["lanes"]))
            for l in doc["links"]
        ]
        net = RoadNetwork(int(doc["rows"]), int(doc["cols"]), intersections, links)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed roadnet document: {exc}") from exc
    validate_network(net)
    return net


def _node(value):
    return int(value) if isinstance(value, (int, float)) and not isinstance(value, bool) else str(value)


# -- flow serialization ------------------------------------------------


def save_flow(flow: FlowSpec, path) -> None:
    doc = {
        "schema_version": FLOW_SCHEMA_VERSION,
        "flows": [{"t": t, "route": list(route)} for t, route in flow.entries],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_flow(path, net: RoadNetwork | None = None) -> FlowSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    try:
        if doc.get("schema_version") != FLOW_SCHEMA_VERSION:
            raise ValidationError(f"unsupported flow schema_version {doc.get('schema_version')}")
        entries = [(float(e["t"]), tuple(int(l) for l in e["route"])) for e in doc["flows"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed flow document: {exc}") from exc
    flow = FlowSpec(entries)
    if net is not None:
        for t, route in flow.entries:
            for lid in route:
                net.link(lid)  # raises ValidationError for unknown ids
    return flow


# -- synthetic flow generation -----------------------------------------


def _link_graph(net: RoadNetwork):
    g = nx.DiGraph()
    for ln in net.links:
        # keep the lowest link id for parallel edges
        if g.has_edge(ln.src, ln.dst) and g[ln.src][ln.dst]["link"] <= ln.id:
            continue
        g.add_edge(ln.src, ln.dst, weight=ln.travel_time_s, link=ln.id)
    return g


def od_pairs(net: RoadNetwork):
    """All routable (source, sink) boundary pairs in sorted order."""
    g = _link_graph(net)
    pairs = []
    for s in net.source_nodes():
        for t in net.sink_nodes():
            if nx.has_path(g, s, t):
                pairs.append((s, t))
    return pairs


def _route_links(net: RoadNetwork, g, source, sink):
    nodes = nx.shortest_path(g, source, sink, weight="weight")
    return tuple(g[u][v]["link"] for u, v in zip(nodes, nodes[1:]))


def generate_flow(profile: ArrivalProfile, net: RoadNetwork, seed: int) -> FlowSpec:
    """Sample a FlowSpec from the arrival profile; deterministic given seed."""
    profile.validate()
    sources = net.source_nodes()
    if not sources:
        raise ConfigError("network has no boundary sources")
    pairs = od_pairs(net)
    if not pairs:
        raise ConfigError("network has no routable origin-destination pairs")
    weights = None
    if profile.od_weights is not None:
        weights = np.array([profile.od_weights.get(p, 0.0) for p in pairs], dtype=float)
        if weights.sum() <= 0:
            raise ConfigError("od_weights assign zero total weight to routable pairs")
        weights = weights / weights.sum()

    g = _link_graph(net)
    route_cache = {}
    rng = np.random.default_rng(seed)
    n_bins = int(math.ceil(profile.duration_s / profile.bin_width_s))
    entries = []
    for b in range(n_bins):
        lo = b * profile.bin_width_s
        hi = min((b + 1) * profile.bin_width_s, profile.duration_s)
        frac = (hi - lo) / profile.bin_width_s
        mean, std = profile.mean * frac, profile.std * frac
        draw = mean if std == 0 else rng.normal(mean, std)
        count = int(round(max(0.0, draw)))
        if count == 0:
            continue
        times = np.sort(rng.uniform(lo, hi, size=count))
        if weights is None:
            pair_idx = rng.integers(0, len(pairs), size=count)
        else:
            pair_idx = rng.choice(len(pairs), size=count, p=weights)
        for t, pi in zip(times, pair_idx):
            pair = pairs[int(pi)]
            route = route_cache.get(pair)
            if route is None:
                route = _route_links(net, g, *pair)
                route_cache[pair] = route
            entries.append((float(t), route))
    return FlowSpec(entries)
