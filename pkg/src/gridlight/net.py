"""Grid road-network topology: intersections, links, phases, movement geometry."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ConfigError, ValidationError

APPROACHES = ("E", "N", "W", "S")
LANE_TYPES = ("left", "straight", "right")
LANES_PER_INTERSECTION = len(APPROACHES) * len(LANE_TYPES)  # 12

# Heading = direction of travel along a link, as a compass letter.
HEADING_VEC = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
OPPOSITE = {"E": "W", "W": "E", "N": "S", "S": "N"}

NUM_PHASES = 4
# Phase id -> set of (approach, lane_type) movements given green.
# Right turns are always permitted and are not listed here.
PHASE_MOVEMENTS = (
    frozenset({("E", "straight"), ("W", "straight")}),
    frozenset({("N", "straight"), ("S", "straight")}),
    frozenset({("E", "left"), ("W", "left")}),
    frozenset({("N", "left"), ("S", "left")}),
)

_BOUNDARY_RE = re.compile(r"^(in|out)_([ENWS])_(\d+)$")


@dataclass(frozen=True)
class Link:
    id: int
    src: object  # intersection id (int) or boundary node name (str)
    dst: object
    travel_time_s: float
    lanes: int = 3


@dataclass(frozen=True)
class Intersection:
    id: int
    x: int
    y: int
    neighbors: tuple = ()


def lane_index(approach: str, lane_type: str) -> int:
    return APPROACHES.index(approach) * len(LANE_TYPES) + LANE_TYPES.index(lane_type)


@dataclass
class RoadNetwork:
    rows: int
    cols: int
    intersections: list
    links: list
    _by_id: dict = field(default_factory=dict, repr=False)
    _pos: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_id = {ln.id: ln for ln in self.links}
        self._pos = {i.id: (i.x, i.y) for i in self.intersections}

    # -- geometry -------------------------------------------------------

    def node_pos(self, node):
        if node in self._pos:
            return self._pos[node]
        m = _BOUNDARY_RE.match(str(node))
        if not m:
            raise ValidationError(f"unknown node {node!r}")
        side, k = m.group(2), int(m.group(3))
        if side == "W":
            return (-1, k)
        if side == "E":
            return (self.cols, k)
        if side == "S":
            return (k, -1)
        return (k, self.rows)

    def link(self, link_id: int) -> Link:
        try:
            return self._by_id[link_id]
        except KeyError:
            raise ValidationError(f"unknown link id {link_id}") from None

    def heading(self, link: Link) -> str:
        x0, y0 = self.node_pos(link.src)
        x1, y1 = self.node_pos(link.dst)
        dx, dy = x1 - x0, y1 - y0
        for h, (hx, hy) in HEADING_VEC.items():
            if (dx > 0) - (dx < 0) == hx and (dy > 0) - (dy < 0) == hy:
                return h
        raise ValidationError(f"link {link.id} is not axis-aligned")

    def approach(self, link: Link) -> str:
        """Approach side at the link's downstream intersection."""
        return OPPOSITE[self.heading(link)]

    def turn_type(self, in_link: Link, out_link: Link) -> str:
        hi = HEADING_VEC[self.heading(in_link)]
        ho = HEADING_VEC[self.heading(out_link)]
        if hi == ho:
            return "straight"
        cross = hi[0] * ho[1] - hi[1] * ho[0]
        # U-turns share the left-turn gate.
        return "right" if cross < 0 else "left"

    # -- topology helpers -----------------------------------------------

    def is_intersection(self, node) -> bool:
        return node in self._pos

    def neighborhoods(self):
        """Per-intersection neighbor id lists including self, id order."""
        out = []
        for i in sorted(self.intersections, key=lambda n: n.id):
            out.append([i.id] + sorted(i.neighbors))
        return out

    def source_nodes(self):
        return sorted({ln.src for ln in self.links if not self.is_intersection(ln.src)})

    def sink_nodes(self):
        return sorted({ln.dst for ln in self.links if not self.is_intersection(ln.dst)})

    def out_links(self, node):
        return [ln for ln in self.links if ln.src == node]

    def in_links(self, node):
        return [ln for ln in self.links if ln.dst == node]


def build_grid(rows: int, cols: int, link_travel_s: float = 30.0) -> RoadNetwork:
    """Build a rows x cols signalized grid with boundary sources and sinks.

    Interior intersections have degree 4; every boundary side of an edge
    intersection carries one entry link (from a source node) and one exit
    link (to a sink node).
    """
    if rows < 1 or cols < 1:
        raise ConfigError(f"grid dimensions must be >= 1, got {rows}x{cols}")
    if link_travel_s <= 0:
        raise ConfigError("link_travel_s must be positive")

    def node_id(r, c):
        return r * cols + c

    intersections = []
    for r in range(rows):
        for c in range(cols):
            nbrs = []
            if c + 1 < cols:
                nbrs.append(node_id(r, c + 1))
            if c - 1 >= 0:
                nbrs.append(node_id(r, c - 1))
            if r + 1 < rows:
                nbrs.append(node_id(r + 1, c))
            if r - 1 >= 0:
                nbrs.append(node_id(r - 1, c))
            intersections.append(Intersection(node_id(r, c), x=c, y=r, neighbors=tuple(sorted(nbrs))))

    links = []

    def add(src, dst):
        links.append(Link(len(links), src, dst, float(link_travel_s)))

    # internal links, both directions
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                add(node_id(r, c), node_id(r, c + 1))
                add(node_id(r, c + 1), node_id(r, c))
            if r + 1 < rows:
                add(node_id(r, c), node_id(r + 1, c))
                add(node_id(r + 1, c), node_id(r, c))

    # boundary entry/exit links
    for r in range(rows):
        add(f"in_W_{r}", node_id(r, 0))
        add(node_id(r, 0), f"out_W_{r}")
        add(f"in_E_{r}", node_id(r, cols - 1))
        add(node_id(r, cols - 1), f"out_E_{r}")
    for c in range(cols):
        add(f"in_S_{c}", node_id(0, c))
        add(node_id(0, c), f"out_S_{c}")
        add(f"in_N_{c}", node_id(rows - 1, c))
        add(node_id(rows - 1, c), f"out_N_{c}")

    return RoadNetwork(rows=rows, cols=cols, intersections=intersections, links=links)


def validate_network(net: RoadNetwork) -> None:
    """Check RoadNetwork invariants; raise ValidationError on the first failure."""
    if net.rows < 1 or net.cols < 1:
        raise ValidationError("rows and cols must be >= 1")
    if not net.intersections:
        raise ValidationError("intersections list is empty")
    ids = [i.id for i in net.intersections]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate intersection ids")
    idset = set(ids)
    for i in net.intersections:
        if len(i.neighbors) > 4:
            raise ValidationError(f"intersection {i.id} has more than 4 neighbors")
        for j in i.neighbors:
            if j not in idset:
                raise ValidationError(f"intersection {i.id} lists unknown neighbor {j}")
    by_id = {i.id: i for i in net.intersections}
    for i in net.intersections:
        for j in i.neighbors:
            if i.id not in by_id[j].neighbors:
                raise ValidationError(f"neighbor relation not symmetric: {i.id}<->{j}")
    seen = set()
    for ln in net.links:
        if ln.id in seen:
            raise ValidationError(f"duplicate link id {ln.id}")
        seen.add(ln.id)
        if ln.travel_time_s <= 0:
            raise ValidationError(f"link {ln.id} has non-positive travel time")
        if ln.lanes < 1:
            raise ValidationError(f"link {ln.id} has no lanes")
        for node in (ln.src, ln.dst):
            if net.is_intersection(node):
                continue
            m = _BOUNDARY_RE.match(str(node))
            if not m:
                raise ValidationError(f"link {ln.id} references unknown node {node!r}")
            side, k = m.group(2), int(m.group(3))
            limit = net.rows if side in "EW" else net.cols
            if k >= limit:
                raise ValidationError(f"link {ln.id} boundary node {node!r} out of range")
        if not (net.is_intersection(ln.src) or net.is_intersection(ln.dst)):
            raise ValidationError(f"link {ln.id} connects two boundary nodes")
        net.heading(ln)  # raises if not axis-aligned
