"""Road elements, their composition into networks, actors and behaviors.

Local frames: a straight segment runs along +x from its ONE end (x = 0) to
its TWO end (x = length).  Lane +k lies on the right of the direction of
travel ONE -> TWO (lateral offset -(k - 1/2) * lane_width); lane -k is its
mirror image and is driven TWO -> ONE.  Intersections are squares of side
nlanes * lane_width centred on their origin, with ports ONE (east), TWO
(south), THREE (west) and, for a cross, FOUR (north).
"""

from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import networkx as nx
import numpy as np

from .param_space import ConfigError, DomainError
from .reactive import Stream

LANE_WIDTH = 3.5
SIDEWALK_WIDTH = 2.0
SIDEWALK = 100  # lane sentinel: +SIDEWALK right kerb, -SIDEWALK left kerb
POS_TOL = 1e-6
HEADING_TOL = 1e-9


class ValidationError(ValueError):
    """A road composition violates a structural rule."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        super().__init__(message)
        self.violations = list(violations)


def wrap_angle(a: float) -> float:
    """Map an angle to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _cos_sin(a: float) -> tuple[float, float]:
    # exact values on right angles keep composed poses free of 1e-16 noise
    c, s = math.cos(a), math.sin(a)
    return (0.0 if abs(c) < 1e-15 else c), (0.0 if abs(s) < 1e-15 else s)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def compose(self, local: "Pose") -> "Pose":
        """World pose of ``local`` expressed in this frame."""
        c, s = _cos_sin(self.heading)
        return Pose(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            wrap_angle(self.heading + local.heading),
        )

    def inverse(self) -> "Pose":
        c, s = _cos_sin(self.heading)
        return Pose(-(c * self.x + s * self.y), s * self.x - c * self.y, wrap_angle(-self.heading))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


ORIGIN = Pose(0.0, 0.0, 0.0)
_ids = itertools.count(1)


class RoadElement:
    kind = "element"
    ONE, TWO, THREE, FOUR = "ONE", "TWO", "THREE", "FOUR"
    SideWalk = SIDEWALK

    def __init__(self, nlanes: int, lane_width: float = LANE_WIDTH, id: str | None = None):
        if nlanes not in (2, 4, 6):
            raise ConfigError(f"nlanes must be one of 2, 4, 6, got {nlanes!r}")
        if not lane_width > 0:
            raise ConfigError("lane_width must be positive")
        self.nlanes = int(nlanes)
        self.lane_width = float(lane_width)
        self.id = id or f"{self.kind}{next(_ids)}"
        self.pose: Pose | None = None

    @property
    def width(self) -> float:
        return self.nlanes * self.lane_width

    def local_ports(self) -> dict[str, Pose]:
        raise NotImplementedError

    def local_footprint(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def world(self) -> Pose:
        return self.pose or ORIGIN

    def port(self, name: str) -> Pose:
        ports = self.local_ports()
        if name not in ports:
            raise ValidationError(f"{self.id} has no port {name!r}; ports are {sorted(ports)}")
        return self.world.compose(ports[name])

    def footprint(self) -> np.ndarray:
        w = self.world
        c, s = _cos_sin(w.heading)
        rot = np.array([[c, -s], [s, c]])
        return self.local_footprint() @ rot.T + np.array([w.x, w.y])

    def connect(self, *bindings) -> "RoadNetwork":
        return connect(self, list(bindings))

    def __repr__(self):
        return f"<{type(self).__name__} {self.id} nlanes={self.nlanes}>"


class StraightRoad(RoadElement):
    kind = "straight"

    def __init__(self, length: float, nlanes: int = 2, lane_width: float = LANE_WIDTH, id: str | None = None):
        if not length > 0:
            raise ConfigError(f"road length must be positive, got {length!r}")
        self.length = float(length)
        super().__init__(nlanes, lane_width, id)

    def local_ports(self):
        return {"ONE": Pose(0.0, 0.0, math.pi), "TWO": Pose(self.length, 0.0, 0.0)}

    def local_footprint(self):
        h = self.width / 2
        return np.array([[0, -h], [self.length, -h], [self.length, h], [0, h]], dtype=float)

    def lateral(self, lane: int) -> float:
        half = self.nlanes // 2
        if abs(lane) == SIDEWALK:
            off = self.width / 2 + SIDEWALK_WIDTH / 2
            return -off if lane > 0 else off
        if lane == 0 or abs(lane) > half:
            raise DomainError(
                f"lane {lane} out of range for {self.nlanes}-lane road "
                f"(use 1..{half}, -1..-{half} or +/-SIDEWALK)"
            )
        off = (abs(lane) - 0.5) * self.lane_width
        return -off if lane > 0 else off

    def on_lane(self, lane: int, at: float, units: str = "fraction") -> Pose:
        """World pose on a lane centreline.

        ``at`` is a fraction of the length by default, or metres from the ONE
        end when ``units == "meters"``.
        """
        if units == "fraction":
            if not 0.0 <= at <= 1.0:
                raise DomainError(f"fraction {at} outside [0, 1]")
            s = at * self.length
        elif units == "meters":
            if not 0.0 <= at <= self.length:
                raise DomainError(f"position {at} m outside [0, {self.length}]")
            s = float(at)
        else:
            raise ConfigError(f"units must be 'fraction' or 'meters', got {units!r}")
        y = self.lateral(lane)
        heading = 0.0 if lane > 0 else math.pi
        return self.world.compose(Pose(s, y, heading))

    onLane = on_lane


class Intersection(RoadElement):
    _port_names: tuple[str, ...] = ()

    def local_ports(self):
        h = self.width / 2
        all_ports = {
            "ONE": Pose(h, 0.0, 0.0),
            "TWO": Pose(0.0, -h, -math.pi / 2),
            "THREE": Pose(-h, 0.0, -math.pi),
            "FOUR": Pose(0.0, h, math.pi / 2),
        }
        return {k: all_ports[k] for k in self._port_names}

    def local_footprint(self):
        h = self.width / 2
        return np.array([[-h, -h], [h, -h], [h, h], [-h, h]], dtype=float)


class TIntersection(Intersection):
    kind = "t_intersection"
    _port_names = ("ONE", "TWO", "THREE")


class CrossIntersection(Intersection):
    kind = "cross_intersection"
    _port_names = ("ONE", "TWO", "THREE", "FOUR")


KIND_CLASSES = {"straight": StraightRoad, "t_intersection": TIntersection,
                "cross_intersection": CrossIntersection}


def make_element(decl: dict) -> RoadElement:
    kind = decl.get("kind")
    if kind not in KIND_CLASSES:
        raise ConfigError(f"unknown road kind {kind!r}; expected one of {sorted(KIND_CLASSES)}")
    kw = {"nlanes": int(decl.get("nlanes", 2)), "id": decl.get("id")}
    if "lane_width" in decl:
        kw["lane_width"] = float(decl["lane_width"])
    if kind == "straight":
        if "length" not in decl:
            raise ConfigError(f"straight road {decl.get('id')!r} needs a length")
        return StraightRoad(float(decl["length"]), **kw)
    return KIND_CLASSES[kind](**kw)


@dataclass(frozen=True)
class Connection:
    parent: str
    parent_port: str
    child: str
    child_port: str


@dataclass
class RoadNetwork:
    """Placed road elements plus the port connections between them."""

    elements: dict[str, RoadElement] = field(default_factory=dict)
    connections: list[Connection] = field(default_factory=list)

    def __getitem__(self, eid: str) -> RoadElement:
        return self.elements[eid]

    def bound_ports(self) -> set[tuple[str, str]]:
        out = set()
        for c in self.connections:
            out.add((c.parent, c.parent_port))
            out.add((c.child, c.child_port))
        return out

    @property
    def free_ports(self) -> dict[str, Pose]:
        bound = self.bound_ports()
        out = {}
        for eid, el in self.elements.items():
            for p in el.local_ports():
                if (eid, p) not in bound:
                    out[f"{eid}.{p}"] = el.port(p)
        return out

    def resolve_port(self, ref: str) -> tuple[RoadElement, str]:
        if "." in ref:
            eid, p = ref.split(".", 1)
        elif len(self.elements) == 1:
            eid, p = next(iter(self.elements)), ref
        else:
            raise ValidationError(f"port reference {ref!r} must be 'element.PORT' on a composite")
        if eid not in self.elements:
            raise ValidationError(f"unknown element {eid!r} in port reference {ref!r}")
        el = self.elements[eid]
        el.port(p)  # raises on unknown port
        return el, p

    def transform(self, pose: Pose) -> None:
        """Apply a rigid motion to every element."""
        for el in self.elements.values():
            el.pose = pose.compose(el.world)

    def connect(self, *bindings) -> "RoadNetwork":
        return connect(self, list(bindings))

    def join(self, a: str, b: str) -> "RoadNetwork":
        """Record a connection between two already placed free ports (closes loops)."""
        net = copy.deepcopy(self)
        ea, pa = net.resolve_port(a)
        eb, pb = net.resolve_port(b)
        bound = net.bound_ports()
        for e, p in ((ea, pa), (eb, pb)):
            if (e.id, p) in bound:
                raise ValidationError(f"port {e.id}.{p} is already connected")
        _check_lanes(ea, eb)
        net.connections.append(Connection(ea.id, pa, eb.id, pb))
        bad = _port_violations(net, [net.connections[-1]])
        if bad:
            raise ValidationError(bad[0], bad)
        return net

    def overlay(self) -> nx.DiGraph:
        return overlay_graph(self)


def _as_network(x) -> RoadNetwork:
    if isinstance(x, RoadNetwork):
        return copy.deepcopy(x)
    if isinstance(x, RoadElement):
        el = copy.deepcopy(x)
        return RoadNetwork({el.id: el}, [])
    raise ConfigError(f"cannot connect a {type(x).__name__}")


def _check_lanes(a: RoadElement, b: RoadElement) -> None:
    if a.nlanes != b.nlanes:
        raise ValidationError(
            f"lane count mismatch: {a.id} has {a.nlanes} lanes, {b.id} has {b.nlanes} lanes",
            [f"lane mismatch {a.id}({a.nlanes}) / {b.id}({b.nlanes})"],
        )


def _port_ref(x, port: str) -> str:
    if isinstance(x, RoadElement) and "." not in port:
        return f"{x.id}.{port}"
    return port


def connect(parent, bindings: Sequence[tuple]) -> RoadNetwork:
    """Pose each child so that its port meets the parent's port head-on.

    ``parent`` and children may be single elements or composites; a child
    composite moves rigidly.  Ports of composites are named ``"id.PORT"``.
    """
    net = _as_network(parent)
    used: set[tuple[str, str]] = set()
    for b in bindings:
        if len(b) != 3:
            raise ConfigError(f"a binding is (parent_port, child, child_port), got {b!r}")
        pport, child, cport = b
        pel, pp = net.resolve_port(_port_ref(parent, pport) if isinstance(parent, RoadElement) else pport)
        sub = _as_network(child)
        cel, cp = sub.resolve_port(_port_ref(child, cport))
        clash = set(sub.elements) & set(net.elements)
        if clash:
            raise ValidationError(f"element ids already present in the network: {sorted(clash)}")
        if (pel.id, pp) in net.bound_ports() or (pel.id, pp) in used:
            raise ValidationError(f"port {pel.id}.{pp} is already connected")
        if (cel.id, cp) in sub.bound_ports():
            raise ValidationError(f"port {cel.id}.{cp} is already connected")
        _check_lanes(pel, cel)
        target = pel.port(pp)
        current = cel.port(cp)
        # rigid motion taking the child port onto the parent port, facing back
        want = Pose(target.x, target.y, wrap_angle(target.heading + math.pi))
        sub.transform(want.compose(current.inverse()))
        net.elements.update(sub.elements)
        net.connections.extend(sub.connections)
        net.connections.append(Connection(pel.id, pp, cel.id, cp))
        used.add((pel.id, pp))
    return net


def _port_violations(net: RoadNetwork, conns) -> list[str]:
    out = []
    for c in conns:
        a = net.elements[c.parent].port(c.parent_port)
        b = net.elements[c.child].port(c.child_port)
        gap = math.hypot(a.x - b.x, a.y - b.y)
        twist = abs(wrap_angle(a.heading - b.heading - math.pi))
        if gap > POS_TOL or twist > HEADING_TOL:
            out.append(
                f"port pose mismatch {c.parent}.{c.parent_port} / {c.child}.{c.child_port}: "
                f"offset {gap:.3g} m, heading error {twist:.3g} rad"
            )
    return out


def polygons_overlap(p: np.ndarray, q: np.ndarray, tol: float = 1e-7) -> bool:
    """Separating-axis test for convex polygons; touching edges do not count."""
    for poly in (p, q):
        n = len(poly)
        for i in range(n):
            e = poly[(i + 1) % n] - poly[i]
            axis = np.array([-e[1], e[0]])
            norm = np.hypot(*axis)
            if norm == 0:
                continue
            axis = axis / norm
            pa, qa = p @ axis, q @ axis
            if pa.max() <= qa.min() + tol or qa.max() <= pa.min() + tol:
                return False
    return True


def validate_network(net: RoadNetwork) -> list[str]:
    """All structural violations of ``net``; empty means valid."""
    out = []
    for c in net.connections:
        a, b = net.elements[c.parent], net.elements[c.child]
        if a.nlanes != b.nlanes:
            out.append(f"lane mismatch {a.id}({a.nlanes}) / {b.id}({b.nlanes})")
    out += _port_violations(net, net.connections)
    els = list(net.elements.values())
    prints = [e.footprint() for e in els]
    for i, j in itertools.combinations(range(len(els)), 2):
        if polygons_overlap(prints[i], prints[j]):
            out.append(f"footprint overlap {els[i].id} / {els[j].id}")
    return out


# -- overlay routing graph ------------------------------------------------------
#
# Nodes are (element, port, "in"|"out", slot): slot j is the j-th lane from the
# centre on the right-hand side of travel through that port.


def _slot_point(el: RoadElement, port: str, direction: str, slot: int) -> tuple[float, float]:
    p = el.port(port)
    # port heading points out of the element; travel "out" follows it
    h = p.heading if direction == "out" else p.heading + math.pi
    off = (slot - 0.5) * el.lane_width
    return (p.x + off * math.sin(h), p.y - off * math.cos(h))


def overlay_graph(net: RoadNetwork) -> nx.DiGraph:
    g = nx.DiGraph()
    for el in net.elements.values():
        ports = list(el.local_ports())
        slots = range(1, el.nlanes // 2 + 1)
        for p in ports:
            for d in ("in", "out"):
                for j in slots:
                    g.add_node((el.id, p, d, j), xy=_slot_point(el, p, d, j))
        pairs = [("ONE", "TWO"), ("TWO", "ONE")] if isinstance(el, StraightRoad) else [
            (a, b) for a in ports for b in ports if a != b]
        for a, b in pairs:
            for j in slots:
                targets = [j] if isinstance(el, StraightRoad) else slots
                for k in targets:
                    u, v = (el.id, a, "in", j), (el.id, b, "out", k)
                    d = math.dist(g.nodes[u]["xy"], g.nodes[v]["xy"])
                    g.add_edge(u, v, weight=d)
    for c in net.connections:
        a, b = net.elements[c.parent], net.elements[c.child]
        for j in range(1, a.nlanes // 2 + 1):
            g.add_edge((a.id, c.parent_port, "out", j), (b.id, c.child_port, "in", j), weight=0.0)
            g.add_edge((b.id, c.child_port, "out", j), (a.id, c.parent_port, "in", j), weight=0.0)
    return g


def lane_entry(el: StraightRoad, lane: int) -> tuple:
    if lane == 0 or abs(lane) > el.nlanes // 2:
        raise DomainError(f"lane {lane} not drivable on {el.id}")
    return (el.id, "ONE", "in", lane) if lane > 0 else (el.id, "TWO", "in", -lane)


def route_waypoints(net: RoadNetwork, start_road: str, lane: int,
                    goal: tuple[str, int] | None = None) -> list[tuple[float, float]]:
    """Lane-level waypoints from the entry of ``lane`` on ``start_road``.

    Without a goal the route runs to the far end of the starting lane; with
    ``goal = (road, lane)`` it follows the shortest overlay path to the end
    of that lane.
    """
    el = net.elements.get(start_road)
    if not isinstance(el, StraightRoad):
        raise ConfigError(f"route must start on a straight road, got {start_road!r}")
    g = overlay_graph(net)
    src = lane_entry(el, lane)
    if goal is None:
        dst_el, dst_lane = el, lane
    else:
        dst_el = net.elements.get(goal[0])
        if not isinstance(dst_el, StraightRoad):
            raise ConfigError(f"route goal must be a straight road, got {goal[0]!r}")
        dst_lane = goal[1]
    end_port = "TWO" if dst_lane > 0 else "ONE"
    dst = (dst_el.id, end_port, "out", abs(dst_lane))
    try:
        path = nx.shortest_path(g, src, dst, weight="weight")
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise ConfigError(f"no route from {start_road} lane {lane} to {goal}") from None
    pts: list[tuple[float, float]] = []
    for n in path:
        xy = g.nodes[n]["xy"]
        if not pts or math.dist(pts[-1], xy) > 1e-9:
            pts.append(xy)
    return pts


def grid_world(blocks_x: int = 3, blocks_y: int = 3, block: float = 50.0, nlanes: int = 2,
               lane_width: float = LANE_WIDTH) -> RoadNetwork:
    """A city grid made by repeating one block: a cross intersection with a
    road leaving east and one leaving south.  Roads that close a block are
    attached with ``join``, so every loop is checked for pose agreement."""
    if blocks_x < 1 or blocks_y < 1:
        raise ConfigError("a grid needs at least one block in each direction")

    def x(r, c):
        return CrossIntersection(nlanes, lane_width, id=f"x{r}_{c}")

    net = connect(x(0, 0), [])
    for r in range(blocks_y + 1):
        for c in range(blocks_x + 1):
            here = f"x{r}_{c}"
            if c < blocks_x:
                h = f"h{r}_{c}"
                net = net.connect((f"{here}.ONE", StraightRoad(block, nlanes, lane_width, id=h), "ONE"))
                nxt = f"x{r}_{c + 1}"
                if nxt in net.elements:
                    net = net.join(f"{h}.TWO", f"{nxt}.THREE")
                else:
                    net = net.connect((f"{h}.TWO", x(r, c + 1), "THREE"))
            if r < blocks_y:
                v = f"v{r}_{c}"
                net = net.connect((f"{here}.TWO", StraightRoad(block, nlanes, lane_width, id=v), "ONE"))
                below = f"x{r + 1}_{c}"
                if below in net.elements:
                    net = net.join(f"{v}.TWO", f"{below}.FOUR")
                else:
                    net = net.connect((f"{v}.TWO", x(r + 1, c), "FOUR"))
    return net


# -- world, actors, behaviors ----------------------------------------------------


@dataclass(frozen=True)
class World:
    light: float = 1.0
    fog: float = 0.0

    def __post_init__(self):
        for k in ("light", "fog"):
            v = getattr(self, k)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"world {k} {v} outside [0, 1]")

    @property
    def visibility(self) -> float:
        """Perception scale factor in [0, 1]."""
        return (1.0 - self.fog) * (0.5 + 0.5 * self.light)


ACTOR_KINDS = ("autonomous_vehicle", "scripted_vehicle", "pedestrian")
DEFAULT_SIZE = {"autonomous_vehicle": (4.5, 1.8), "scripted_vehicle": (4.5, 1.8), "pedestrian": (0.5, 0.5)}


@dataclass
class ActorSpec:
    id: str
    kind: str
    start: Pose
    length: float
    width: float
    speed: float = 0.0  # initial speed for vehicles, walking speed for pedestrians
    max_speed: float | None = None
    trigger_distance: float | None = None
    target: Pose | None = None
    watch: str | None = None
    controller: dict | None = None
    route: list[tuple[float, float]] | None = None
    accel: float = 2.0
    color: Any = None  # carried as metadata only

    def __post_init__(self):
        if self.kind not in ACTOR_KINDS:
            raise ConfigError(f"actor {self.id}: unknown kind {self.kind!r}")
        if not (self.length > 0 and self.width > 0):
            raise ConfigError(f"actor {self.id}: geometry must have positive dimensions")
        if not all(math.isfinite(v) for v in (self.start.x, self.start.y, self.start.heading)):
            raise ConfigError(f"actor {self.id}: start pose is not finite")


def pedestrian_behavior(spec: ActorSpec, car_pos: Stream, tick: Stream, dt: float) -> Stream:
    """Position stream of a pedestrian who waits at ``spec.start`` until the
    watched car comes closer than ``spec.trigger_distance``, then walks to
    ``spec.target`` at ``spec.speed``.

    Returns the position stream (a numpy xy per tick); its ``done`` attribute
    fires on arrival.
    """
    if not spec.speed > 0:
        raise ConfigError(f"pedestrian {spec.id}: speed must be positive, got {spec.speed}")
    if spec.target is None or spec.trigger_distance is None:
        raise ConfigError(f"pedestrian {spec.id}: needs a target and a trigger distance")
    start = spec.start.xy
    target = spec.target.xy
    span = float(np.linalg.norm(target - start))
    unit = (target - start) / span if span > 0 else np.zeros(2)
    step = spec.speed * dt
    dist = spec.trigger_distance
    g = tick.graph

    def at(m: int) -> np.ndarray:
        return target.copy() if m * step >= span else start + unit * (m * step)

    trigger = car_pos.filter(lambda p: float(np.linalg.norm(np.asarray(p) - start)) < dist)
    done = g.register(name=f"{spec.id}.done")
    walking = tick.skip_until(trigger).take_until(done)
    steps = walking.scan(lambda n, _: n + 1, 0)
    pos = tick.with_latest_from(steps, lambda _, m: at(m), default=0).named(f"{spec.id}.pos")
    tol = step / 2
    arrived = pos.filter(lambda p: float(np.linalg.norm(p - target)) <= tol).first()
    done.feed_from(arrived)
    pos.done = arrived
    pos.trigger = trigger
    return pos


def _pure_pursuit(pose: Pose, waypoints, lookahead: float, omega_dt: float) -> float:
    """Steering command in [-1, 1] toward the route point ``lookahead``
    metres past the vehicle's projection onto the route polyline."""
    if not waypoints or len(waypoints) < 2 or omega_dt <= 0:
        return 0.0
    pts = np.asarray(waypoints, dtype=float)
    here = np.array([pose.x, pose.y])
    seg = np.diff(pts, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    seg_len[seg_len == 0] = 1e-12
    t = np.clip(np.einsum("ij,ij->i", here - pts[:-1], seg) / seg_len**2, 0.0, 1.0)
    proj = pts[:-1] + seg * t[:, None]
    i = int(np.argmin(np.linalg.norm(proj - here, axis=1)))
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s_goal = cum[i] + t[i] * seg_len[i] + lookahead
    if s_goal >= cum[-1]:
        end = pts[-1] - pts[-2]
        goal = pts[-1] + end / np.linalg.norm(end) * (s_goal - cum[-1])
    else:
        j = int(np.searchsorted(cum, s_goal, side="right")) - 1
        goal = pts[j] + seg[j] * ((s_goal - cum[j]) / seg_len[j])
    want = math.atan2(goal[1] - here[1], goal[0] - here[0])
    err = wrap_angle(want - pose.heading)
    return max(-1.0, min(1.0, err / omega_dt))


def scripted_vehicle_behavior(spec: ActorSpec, state: Stream, dt: float,
                              a_max: float = 4.0, omega_max: float = 0.5) -> Stream:
    """Control stream ``(throttle, steering)`` for scripted traffic.

    ``state`` carries ``(pose, speed)`` each tick.  The vehicle speeds up to
    ``spec.max_speed`` at no more than ``spec.accel`` m/s^2 and steers along
    ``spec.route``.
    """
    vmax = spec.max_speed if spec.max_speed is not None else spec.speed
    if vmax < 0:
        raise ConfigError(f"{spec.id}: max speed must be non-negative")
    frac = min(1.0, spec.accel / a_max)
    route = spec.route

    def control(st):
        pose, v = st
        if vmax == 0:
            return (-1.0 if v > 0 else 0.0, 0.0)
        dv = vmax - v
        throttle = max(-1.0, min(frac, dv / (a_max * dt)))
        steer = _pure_pursuit(pose, route, max(5.0, v), omega_max * dt)
        return (throttle, steer)

    return state.map(control).named(f"{spec.id}.control")
