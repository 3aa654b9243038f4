"""Fixed-step 2D kinematic simulation of one test iteration.

Per tick ``t`` the loop (1) detects collisions in state ``t``, (2) feeds
positions, speeds and collision events into the iteration's stream graph,
(3) reads pedestrian positions for state ``t + 1`` from their behaviour
streams, (4) asks each vehicle's controller for throttle and steering and
(5) integrates the vehicles over one step.
"""

from __future__ import annotations

import math
import traceback
from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .monitors import IterationStreams, Monitor, MonitorVerdict, make_monitor
from .param_space import ConfigError, TestVector
from .reactive import NOEVENT, StreamGraph
from .scene import ActorSpec, Pose, RoadNetwork, World, pedestrian_behavior, scripted_vehicle_behavior

A_FORWARD = 4.0  # m/s^2 at throttle +1
A_BRAKE = 8.0  # m/s^2 at throttle -1
V_MAX = 40.0
OMEGA_MAX = 0.5  # rad/s at steering +-1


class SimulationError(RuntimeError):
    """The iteration cannot continue (non-finite controls or state)."""


@dataclass(frozen=True)
class ActorState:
    id: str
    kind: str
    x: float
    y: float
    heading: float
    speed: float
    length: float
    width: float

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def velocity(self) -> np.ndarray:
        return self.speed * np.array([math.cos(self.heading), math.sin(self.heading)])

    def corners(self) -> np.ndarray:
        c, s = math.cos(self.heading), math.sin(self.heading)
        hl, hw = self.length / 2, self.width / 2
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        return local @ np.array([[c, s], [-s, c]]) + self.xy


@dataclass(frozen=True)
class SimState:
    tick: int
    actors: dict[str, ActorState]
    world: World
    dt: float

    @property
    def time(self) -> float:
        return self.tick * self.dt


@dataclass(frozen=True)
class CollisionEvent:
    actors: tuple[str, str]
    relative_speed: float
    tick: int

    def to_json(self) -> dict:
        return {"tick": self.tick, "actors": list(self.actors), "relative_speed": self.relative_speed}


def _advance_1d(v: float, a: float, dt: float, vmax: float) -> tuple[float, float]:
    """Speed and distance after ``dt`` of constant acceleration, with the
    speed held inside [0, vmax]."""
    v1 = v + a * dt
    if v1 < 0.0:
        t = v / -a if a < 0 else 0.0
        return 0.0, v * t + 0.5 * a * t * t
    if v1 > vmax:
        t = (vmax - v) / a if a > 0 else 0.0
        t = min(max(t, 0.0), dt)
        return vmax, v * t + 0.5 * a * t * t + vmax * (dt - t)
    return v1, v * dt + 0.5 * a * dt * dt


def step_physics(state: SimState, controls: dict[str, tuple[float, float]], dt: float | None = None,
                 v_max: float = V_MAX) -> SimState:
    """Integrate every controlled vehicle one step; other actors are unchanged.

    Throttle maps to ``A_FORWARD`` when positive and ``A_BRAKE`` when
    negative; within a step acceleration is constant, so displacement is exact
    (a full stop from v takes v/8 s and covers v^2/16 m).
    """
    dt = state.dt if dt is None else dt
    if not dt > 0:
        raise SimulationError(f"dt must be positive, got {dt}")
    actors = dict(state.actors)
    for aid, (throttle, steering) in controls.items():
        if not (math.isfinite(throttle) and math.isfinite(steering)):
            raise SimulationError(f"non-finite control for {aid}: throttle={throttle}, steering={steering}")
        a = actors[aid]
        throttle = max(-1.0, min(1.0, throttle))
        steering = max(-1.0, min(1.0, steering))
        acc = throttle * (A_FORWARD if throttle >= 0 else A_BRAKE)
        v1, dist = _advance_1d(a.speed, acc, dt, v_max)
        h1 = a.heading + steering * OMEGA_MAX * dt
        hm = 0.5 * (a.heading + h1)
        actors[aid] = replace(a, x=a.x + dist * math.cos(hm), y=a.y + dist * math.sin(hm),
                              heading=h1, speed=v1)
    return SimState(state.tick + 1, actors, state.world, dt)


def rectangles_overlap(a: ActorState, b: ActorState) -> bool:
    """Separating-axis test on two oriented rectangles (touching is not overlap)."""
    pa, pb = a.corners(), b.corners()
    for h in (a.heading, b.heading):
        for axis in ((math.cos(h), math.sin(h)), (-math.sin(h), math.cos(h))):
            ax = np.array(axis)
            qa, qb = pa @ ax, pb @ ax
            if qa.max() <= qb.min() or qb.max() <= qa.min():
                return False
    return True


def detect_collisions(state: SimState, seen: set | None = None,
                      velocities: dict[str, np.ndarray] | None = None) -> list[CollisionEvent]:
    """New overlaps in ``state``; pairs in ``seen`` are skipped and then added."""
    seen = set() if seen is None else seen
    ids = sorted(state.actors)
    out = []
    for i, ai in enumerate(ids):
        a = state.actors[ai]
        for bj in ids[i + 1:]:
            if (ai, bj) in seen:
                continue
            b = state.actors[bj]
            if math.hypot(a.x - b.x, a.y - b.y) > 0.5 * (math.hypot(a.length, a.width) + math.hypot(b.length, b.width)):
                continue
            if rectangles_overlap(a, b):
                va = velocities[ai] if velocities and ai in velocities else a.velocity
                vb = velocities[bj] if velocities and bj in velocities else b.velocity
                out.append(CollisionEvent((ai, bj), float(np.linalg.norm(va - vb)), state.tick))
                seen.add((ai, bj))
    return out


# -- controllers -----------------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    tick: int
    dt: float
    speed: float
    lead_gap: float | None  # m, nearest vehicle ahead in the lane corridor
    pedestrian_gap: float | None  # m, nearest pedestrian ahead in the corridor
    visibility: float  # perception scale in [0, 1]


def observe(state: SimState, ego_id: str, margin: float = 0.25) -> Observation:
    """Ideal sensing: bumper gaps to obstacles whose footprint reaches the
    ego's corridor (its own width plus ``margin`` each side)."""
    ego = state.actors[ego_id]
    c, s = math.cos(ego.heading), math.sin(ego.heading)
    lead = ped = None
    for oid, o in state.actors.items():
        if oid == ego_id:
            continue
        dx, dy = o.x - ego.x, o.y - ego.y
        lon = dx * c + dy * s
        lat = -dx * s + dy * c
        if lon <= 0 or abs(lat) >= ego.width / 2 + o.width / 2 + margin:
            continue
        gap = lon - ego.length / 2 - o.length / 2
        if o.kind == "pedestrian":
            ped = gap if ped is None else min(ped, gap)
        else:
            lead = gap if lead is None else min(lead, gap)
    return Observation(state.tick, state.dt, ego.speed, lead, ped, state.world.visibility)


class Controller:
    def act(self, obs: Observation) -> tuple[float, float]:
        raise NotImplementedError


def _track(speed: float, target: float, dt: float) -> float:
    dv = target - speed
    a = A_FORWARD if dv >= 0 else A_BRAKE
    return max(-1.0, min(1.0, dv / (a * dt)))


class ProximityBrakeController(Controller):
    """Scripted stand-in for a learned driving policy.

    Holds ``cruise_speed`` and brakes fully once an obstacle has been inside
    the effective perception range for ``reaction_delay`` seconds.  The range
    shrinks with visibility: R_eff = R * (1 - fog) * (0.5 + 0.5 * light).

    Optional knobs used by the car-following scenario:
    ``follow_distance`` caps the braking trigger distance; ``visibility_speed``
    scales the cruise target by visibility; below ``min_range`` of effective
    perception the car refuses to move.
    """

    def __init__(self, cruise_speed: float, perception_range: float, reaction_delay: float = 0.0,
                 follow_distance: float | None = None, visibility_speed: bool = False,
                 min_range: float = 0.0, corridor_margin: float = 0.25):
        if not perception_range > 0:
            raise ConfigError("perception_range must be positive")
        if reaction_delay < 0:
            raise ConfigError("reaction_delay must be non-negative")
        if cruise_speed < 0:
            raise ConfigError("cruise_speed must be non-negative")
        self.cruise_speed = float(cruise_speed)
        self.perception_range = float(perception_range)
        self.reaction_delay = float(reaction_delay)
        self.follow_distance = follow_distance
        self.visibility_speed = visibility_speed
        self.min_range = float(min_range)
        self.corridor_margin = float(corridor_margin)
        self._seen_since: int | None = None

    def effective_range(self, visibility: float) -> float:
        return self.perception_range * visibility

    def act(self, obs):
        r_eff = self.effective_range(obs.visibility)
        if r_eff < self.min_range:
            return (-1.0 if obs.speed > 0 else 0.0, 0.0)
        trigger = r_eff if self.follow_distance is None else min(r_eff, self.follow_distance)
        gaps = [g for g in (obs.lead_gap, obs.pedestrian_gap) if g is not None]
        if gaps and min(gaps) < trigger:
            if self._seen_since is None:
                self._seen_since = obs.tick
            if (obs.tick - self._seen_since) * obs.dt >= self.reaction_delay - 1e-9:
                return (-1.0, 0.0)
        else:
            self._seen_since = None
        target = self.cruise_speed * (obs.visibility if self.visibility_speed else 1.0)
        return (_track(obs.speed, target, obs.dt), 0.0)


class IdleController(Controller):
    def act(self, obs):
        return (0.0, 0.0)


CONTROLLERS: dict[str, Callable[..., Controller]] = {
    "proximity_brake": ProximityBrakeController,
    "idle": IdleController,
}


def make_controller(decl: dict) -> Controller:
    decl = dict(decl)
    cid = decl.pop("id", None)
    if cid not in CONTROLLERS:
        raise ConfigError(f"unknown controller {cid!r}; registered: {sorted(CONTROLLERS)}")
    try:
        return CONTROLLERS[cid](**decl)
    except TypeError as e:
        raise ConfigError(f"controller {cid!r}: {e}") from None


# -- iterations --------------------------------------------------------------------


@dataclass
class ScenarioInstance:
    """A scenario with every parameter bound to a concrete value."""

    world: World
    network: RoadNetwork
    actors: list[ActorSpec]
    monitors: list[dict]
    duration: float = 15.0
    dt: float = 0.05

    @property
    def duration_ticks(self) -> int:
        return math.ceil(self.duration / self.dt - 1e-9)


@dataclass
class IterationReport:
    index: int
    vector: TestVector | None
    status: str  # ok | errored
    ticks: int
    verdicts: list[MonitorVerdict] = field(default_factory=list)
    aggregates: dict[str, Any] = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    error: str | None = None

    def verdict(self, monitor_id: str) -> MonitorVerdict:
        for v in self.verdicts:
            if v.monitor == monitor_id:
                return v
        raise KeyError(monitor_id)

    def score(self, monitor_id: str) -> float | None:
        return self.verdict(monitor_id).score

    @property
    def failed(self) -> bool:
        return any(v.outcome == "fail" for v in self.verdicts)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "status": self.status,
            "ticks": self.ticks,
            "verdicts": [v.to_json() for v in self.verdicts],
            "aggregates": self.aggregates,
            "error": self.error,
        }


def _initial_state(inst: ScenarioInstance) -> SimState:
    actors = {}
    for a in inst.actors:
        speed = a.speed if a.kind != "pedestrian" else 0.0
        actors[a.id] = ActorState(a.id, a.kind, a.start.x, a.start.y, a.start.heading, float(speed),
                                  a.length, a.width)
    return SimState(0, actors, inst.world, inst.dt)


def run_iteration(inst: ScenarioInstance, vector: TestVector | None = None, index: int = 0,
                  monitors: list[Monitor] | None = None, record_events: bool = True) -> IterationReport:
    """Simulate one iteration until the time-out or a terminating monitor."""
    dt = inst.dt
    T = inst.duration_ticks
    monitors = monitors if monitors is not None else [make_monitor(m) for m in inst.monitors]
    events: list[dict] = []
    try:
        g = StreamGraph(record=record_events)
        io = IterationStreams(g, g.tick, dt=dt)
        for a in inst.actors:
            io.pos[a.id] = g.source(f"{a.id}.pos")
            io.speed[a.id] = g.source(f"{a.id}.speed")
            io.pose[a.id] = g.source(f"{a.id}.pose")
            io.collider[a.id] = g.source(f"{a.id}.collider")
            io.size[a.id] = (a.length, a.width)
        controllers: dict[str, Controller] = {}
        behaviors = {}
        for a in inst.actors:
            if a.kind == "autonomous_vehicle":
                controllers[a.id] = make_controller(a.controller or {"id": "idle"})
            elif a.kind == "scripted_vehicle":
                st = io.pose[a.id].zip(io.speed[a.id]).map(lambda ps: (Pose(*ps[0]), ps[1]))
                behaviors[a.id] = scripted_vehicle_behavior(a, st, dt, A_FORWARD, OMEGA_MAX)
            else:
                if a.watch not in io.pos:
                    raise ConfigError(f"pedestrian {a.id} watches unknown actor {a.watch!r}")
                behaviors[a.id] = pedestrian_behavior(a, io.pos[a.watch], g.tick, dt)
        for m in monitors:
            m.attach(io)
        terminating = [m for m in monitors if m.terminating]

        state = _initial_state(inst)
        seen: set = set()
        velocities: dict[str, np.ndarray] = {}
        ticks = T
        for t in range(T + 1):
            hits = detect_collisions(state, seen, velocities)
            inputs: dict = {}
            for aid, s in state.actors.items():
                inputs[io.pos[aid]] = s.xy
                inputs[io.speed[aid]] = s.speed
                inputs[io.pose[aid]] = (s.x, s.y, s.heading)
            for ev in hits:
                for aid in ev.actors:
                    inputs.setdefault(io.collider[aid], ev)
                if record_events:
                    events.append({"tick": t, "kind": "collision", "actors": list(ev.actors),
                                   "data": {"relative_speed": ev.relative_speed}})
            g.advance(t, inputs)
            for aid, b in behaviors.items():
                trig = getattr(b, "trigger", None)
                if record_events and trig is not None and trig.fired == 1 and g.event(trig) is not NOEVENT:
                    events.append({"tick": t, "kind": "trigger", "actors": [aid], "data": {}})
            if any(m.triggered() for m in terminating) or t == T:
                ticks = t
                break
            controls = {}
            for aid, c in controllers.items():
                controls[aid] = tuple(float(x) for x in c.act(observe(state, aid, getattr(c, "corridor_margin", 0.25))))
            peds = {}
            for aid, b in behaviors.items():
                ev = g.event(b)
                if state.actors[aid].kind == "pedestrian":
                    peds[aid] = np.asarray(ev if ev is not NOEVENT else state.actors[aid].xy, dtype=float)
                elif ev is not NOEVENT:
                    controls[aid] = ev
            nxt = step_physics(state, controls, dt)
            actors = dict(nxt.actors)
            velocities = {}
            for aid, p in peds.items():
                old = state.actors[aid]
                d = p - old.xy
                dist = float(np.linalg.norm(d))
                heading = math.atan2(d[1], d[0]) if dist > 0 else old.heading
                actors[aid] = replace(old, x=float(p[0]), y=float(p[1]), heading=heading, speed=dist / dt)
                velocities[aid] = d / dt
            state = SimState(nxt.tick, actors, nxt.world, dt)
            for s in state.actors.values():
                if not (math.isfinite(s.x) and math.isfinite(s.y) and math.isfinite(s.speed)):
                    raise SimulationError(f"non-finite state for {s.id} at tick {state.tick}")
        g.complete()
    except ConfigError:
        raise
    except Exception as e:  # the campaign records the failure and moves on
        why = f"{type(e).__name__}: {e}"
        return IterationReport(index, vector, "errored", 0, [m.errored(why) for m in monitors], {},
                               events, error=why + "\n" + traceback.format_exc(limit=3))
    aggregates: dict[str, Any] = {}
    for m in monitors:
        aggregates.update(m.aggregates())
    return IterationReport(index, vector, "ok", ticks, [m.verdict() for m in monitors], aggregates, events)
