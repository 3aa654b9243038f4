"""Monitors: pass/fail assertions and numeric scores built from iteration streams.

Each monitor wires itself into the iteration's stream graph through
``attach`` and produces exactly one ``MonitorVerdict`` after the graph
completes.  Terminating monitors end the iteration on their first event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .param_space import ConfigError
from .reactive import Stream, StreamGraph


@dataclass
class IterationStreams:
    """The per-actor streams a simulation exposes to monitors."""

    graph: StreamGraph
    tick: Stream
    pos: dict[str, Stream] = field(default_factory=dict)  # xy ndarray
    speed: dict[str, Stream] = field(default_factory=dict)  # m/s
    pose: dict[str, Stream] = field(default_factory=dict)  # (x, y, heading)
    collider: dict[str, Stream] = field(default_factory=dict)  # CollisionEvent
    size: dict[str, tuple[float, float]] = field(default_factory=dict)  # (length, width)
    dt: float = 0.05


@dataclass
class MonitorVerdict:
    monitor: str
    outcome: str  # pass | fail | errored
    score: float | None = None
    evidence: Any = None

    def to_json(self) -> dict:
        return {"monitor": self.monitor, "outcome": self.outcome, "score": self.score,
                "evidence": self.evidence}


def _need(io: IterationStreams, actor: str, what: str = "pos") -> None:
    if actor not in getattr(io, what):
        raise ConfigError(f"monitor refers to unknown actor {actor!r}")


class Monitor:
    kind = "monitor"
    terminating = False
    quantitative = False
    objective = "maximize"

    def __init__(self, id: str):
        self.id = id

    def attach(self, io: IterationStreams) -> None:
        raise NotImplementedError

    def triggered(self) -> bool:
        """True once a terminating monitor has seen its event."""
        return False

    def verdict(self) -> MonitorVerdict:
        raise NotImplementedError

    def errored(self, why: str) -> MonitorVerdict:
        return MonitorVerdict(self.id, "errored", None, {"error": why})

    def aggregates(self) -> dict[str, float]:
        return {}


class CollisionMonitor(Monitor):
    """Fails on the first collision involving ``vehicle``; ends the iteration."""

    kind = "collision"
    terminating = True

    def __init__(self, id: str, vehicle: str):
        super().__init__(id)
        self.vehicle = vehicle
        self.hit = None

    def attach(self, io):
        _need(io, self.vehicle, "collider")
        io.collider[self.vehicle].first().for_each(self._record).named(f"{self.id}.hit")

    def _record(self, ev):
        self.hit = ev

    def triggered(self):
        return self.hit is not None

    def verdict(self):
        if self.hit is None:
            return MonitorVerdict(self.id, "pass")
        return MonitorVerdict(self.id, "fail", None, self.hit.to_json())


def path_length_stream(pos: Stream) -> Stream:
    """Running polyline length of a position stream."""
    previous = pos.take(1).concat(pos)
    step = pos.zip(previous).map(lambda pq: float(np.linalg.norm(np.asarray(pq[0]) - np.asarray(pq[1]))))
    return step.sum()


class DistanceMonitor(Monitor):
    """Fails when the vehicle's total path length is below ``min_distance``."""

    kind = "distance"

    def __init__(self, id: str, vehicle: str, min_distance: float = 5.0):
        super().__init__(id)
        if min_distance < 0:
            raise ConfigError("min_distance must be non-negative")
        self.vehicle = vehicle
        self.min_distance = float(min_distance)
        self.total = None

    def attach(self, io):
        _need(io, self.vehicle)
        d = path_length_stream(io.pos[self.vehicle]).last().default_if_empty(0.0)
        d.for_each(self._record).named(f"{self.id}.D")

    def _record(self, v):
        self.total = float(v)

    def verdict(self):
        d = self.total if self.total is not None else 0.0
        ok = d >= self.min_distance
        return MonitorVerdict(self.id, "pass" if ok else "fail", None,
                              {"path_length": d, "min_distance": self.min_distance})

    def aggregates(self):
        return {"path_length": self.total if self.total is not None else 0.0}


class CollisionSpeedScore(Monitor):
    """Score = the vehicle's speed at its first collision, 0 without one."""

    kind = "collision_speed"
    quantitative = True

    def __init__(self, id: str, vehicle: str):
        super().__init__(id)
        self.vehicle = vehicle
        self.value = 0.0

    def attach(self, io):
        _need(io, self.vehicle, "collider")
        at_hit = io.speed[self.vehicle].combine_latest(io.collider[self.vehicle], lambda s, c: s).first()
        at_hit.last().default_if_empty(0.0).for_each(self._record).named(f"{self.id}.score")

    def _record(self, v):
        self.value = float(v)

    def verdict(self):
        return MonitorVerdict(self.id, "pass", self.value, {"speed_at_collision": self.value})


class AlmostFailingScore(Monitor):
    """Score 0 on a vehicle/pedestrian collision, else 1 / (closest centre distance)."""

    kind = "almost_failing"
    quantitative = True

    def __init__(self, id: str, vehicle: str, pedestrian: str):
        super().__init__(id)
        self.vehicle = vehicle
        self.pedestrian = pedestrian
        self.value = 0.0
        self.min_gap = math.inf

    def attach(self, io):
        _need(io, self.vehicle)
        _need(io, self.pedestrian)
        gap = io.pos[self.vehicle].zip(io.pos[self.pedestrian]).map(
            lambda pq: float(np.linalg.norm(np.asarray(pq[0]) - np.asarray(pq[1]))))
        closest = gap.min().last()
        ped = self.pedestrian
        clean = io.collider[self.vehicle].filter(lambda ev: ped in ev.actors).is_empty()
        score = closest.combine_latest(clean, self._score)
        score.for_each(self._record).named(f"{self.id}.score")

    def _score(self, dmin, clean):
        self.min_gap = dmin
        if not clean or dmin <= 0:
            return 0.0
        return 1.0 / dmin

    def _record(self, v):
        self.value = float(v)

    def verdict(self):
        return MonitorVerdict(self.id, "pass", self.value, {"min_distance": self.min_gap})

    def aggregates(self):
        return {"min_distance": self.min_gap}


def longitudinal_gap(ego: tuple, other: tuple, ego_len: float, other_len: float) -> float:
    """Bumper-to-bumper gap from ``ego`` to ``other`` along the ego heading."""
    x, y, h = ego
    lon = (other[0] - x) * math.cos(h) + (other[1] - y) * math.sin(h)
    return lon - ego_len / 2 - other_len / 2


class MeanGapAggregate(Monitor):
    """Mean longitudinal gap from ``vehicle`` to ``lead`` over the run."""

    kind = "mean_gap"

    def __init__(self, id: str, vehicle: str, lead: str):
        super().__init__(id)
        self.vehicle = vehicle
        self.lead = lead
        self.value = None

    def attach(self, io):
        _need(io, self.vehicle, "pose")
        _need(io, self.lead, "pose")
        le, ll = io.size[self.vehicle][0], io.size[self.lead][0]
        gaps = io.pose[self.vehicle].zip(io.pose[self.lead]).map(
            lambda ab: longitudinal_gap(ab[0], ab[1], le, ll))
        acc = gaps.scan(lambda s, g: (s[0] + g, s[1] + 1), (0.0, 0))
        acc.last().for_each(self._record).named(f"{self.id}.mean")

    def _record(self, sn):
        total, n = sn
        self.value = total / n if n else None

    def verdict(self):
        return MonitorVerdict(self.id, "pass", None, {"mean_gap": self.value})

    def aggregates(self):
        return {"mean_gap": self.value}


MONITOR_KINDS = {
    "collision": (CollisionMonitor, ("vehicle",)),
    "distance": (DistanceMonitor, ("vehicle", "min_distance")),
    "collision_speed": (CollisionSpeedScore, ("vehicle",)),
    "almost_failing": (AlmostFailingScore, ("vehicle", "pedestrian")),
    "mean_gap": (MeanGapAggregate, ("vehicle", "lead")),
}


def make_monitor(decl: dict) -> Monitor:
    kind = decl.get("kind")
    if kind not in MONITOR_KINDS:
        raise ConfigError(f"unknown monitor kind {kind!r}; expected one of {sorted(MONITOR_KINDS)}")
    cls, args = MONITOR_KINDS[kind]
    extra = set(decl) - {"id", "kind", *args}
    if extra:
        raise ConfigError(f"monitor {decl.get('id')!r}: unexpected fields {sorted(extra)}")
    kw = {a: decl[a] for a in args if a in decl}
    try:
        return cls(decl.get("id", kind), **kw)
    except TypeError as e:
        raise ConfigError(f"monitor {decl.get('id')!r}: {e}") from None


__all__ = [
    "IterationStreams", "MonitorVerdict", "Monitor", "CollisionMonitor", "DistanceMonitor",
    "CollisionSpeedScore", "AlmostFailingScore", "MeanGapAggregate", "MONITOR_KINDS",
    "make_monitor", "path_length_stream", "longitudinal_gap",
]
