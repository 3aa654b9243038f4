import math

import numpy as np
import pytest

from avtest.orchestrator import ScenarioConfig
from avtest.scene import World
from avtest.sim import (
    ActorState,
    Observation,
    ProximityBrakeController,
    SimState,
    SimulationError,
    detect_collisions,
    make_controller,
    rectangles_overlap,
    run_iteration,
    step_physics,
)
from avtest.param_space import ConfigError


def car(x=0.0, y=0.0, speed=0.0, heading=0.0, aid="car", kind="autonomous_vehicle"):
    return ActorState(aid, kind, x, y, heading, speed, 4.5, 1.8)


def state(*actors, dt=0.05):
    return SimState(0, {a.id: a for a in actors}, World(), dt)


def test_uniform_motion():
    s = step_physics(state(car(speed=10.0)), {"car": (0.0, 0.0)})
    a = s.actors["car"]
    assert a.x == pytest.approx(0.5) and a.speed == 10.0 and a.heading == 0.0 and s.tick == 1


def test_full_brake_distance():
    s = state(car(speed=12.0))
    for _ in range(100):
        s = step_physics(s, {"car": (-1.0, 0.0)})
    a = s.actors["car"]
    assert a.speed == 0.0
    assert a.x == pytest.approx(12.0 ** 2 / 16, abs=1e-12)


def test_speed_clamped_and_zero_throttle_still():
    s = state(car(speed=0.0))
    for _ in range(20):
        s = step_physics(s, {"car": (0.0, 0.0)})
    assert s.actors["car"].x == 0.0
    s = step_physics(state(car(speed=39.99)), {"car": (5.0, 0.0)})
    assert s.actors["car"].speed == 40.0


def test_steering_turns():
    s = step_physics(state(car(speed=5.0)), {"car": (0.0, 1.0)})
    assert s.actors["car"].heading == pytest.approx(0.5 * 0.05)


def test_nan_control_aborts():
    with pytest.raises(SimulationError):
        step_physics(state(car()), {"car": (math.nan, 0.0)})


def test_collisions():
    a, b = car(), car(aid="b", speed=0.0, kind="scripted_vehicle")
    assert rectangles_overlap(a, b)
    far = car(x=10.0, aid="b", kind="scripted_vehicle")
    assert detect_collisions(state(a, far)) == []
    touching = car(x=4.5, aid="b", kind="scripted_vehicle")
    assert not rectangles_overlap(a, touching)
    ped = ActorState("p", "pedestrian", 2.0, 0.0, 0.0, 0.0, 0.5, 0.5)
    seen = set()
    ev = detect_collisions(state(car(speed=10.0), ped), seen)
    assert len(ev) == 1 and ev[0].relative_speed == pytest.approx(10.0)
    assert detect_collisions(state(car(speed=10.0), ped), seen) == []


def test_rotated_rectangles_separated_by_axis():
    a = car()
    b = ActorState("b", "scripted_vehicle", 3.6, 0.0, math.pi / 4, 0.0, 4.5, 1.8)
    c = ActorState("c", "scripted_vehicle", 4.8, 0.0, math.pi / 4, 0.0, 4.5, 1.8)
    assert rectangles_overlap(a, b)
    assert not rectangles_overlap(a, c)


def obs(tick, gap=None, speed=10.0, vis=1.0):
    return Observation(tick, 0.05, speed, None, gap, vis)


def test_brake_after_delay():
    c = ProximityBrakeController(10.0, 40.0, reaction_delay=0.1)
    assert c.act(obs(0, gap=30.0))[0] > -1.0
    assert c.act(obs(1, gap=29.0))[0] > -1.0
    assert c.act(obs(2, gap=28.0)) == (-1.0, 0.0)
    # corridor clears: back to cruise tracking
    assert c.act(obs(3, gap=None, speed=5.0))[0] == 1.0


def test_fog_blinds_the_controller():
    c = ProximityBrakeController(10.0, 40.0)
    assert c.effective_range(World(1.0, 1.0).visibility) == 0.0
    assert c.act(obs(0, gap=1.0, vis=0.0))[0] == 0.0  # at cruise, never brakes


def test_controller_registry():
    assert isinstance(make_controller({"id": "proximity_brake", "cruise_speed": 5, "perception_range": 10}),
                      ProximityBrakeController)
    with pytest.raises(ConfigError):
        make_controller({"id": "cnn"})
    with pytest.raises(ConfigError):
        make_controller({"id": "proximity_brake", "cruise_speed": 5, "perception_range": 0})


def _cruise_cfg(speed=5.0, fog=0.0, ped=None, duration=15):
    raw = {
        "name": "cruise",
        "params": [{"name": "dummy", "kind": "interval", "low": 0, "high": 1}],
        "world": {"light": 1.0, "fog": fog},
        "roads": [{"id": "r", "kind": "straight", "nlanes": 2, "length": 300}],
        "actors": [{"id": "car", "kind": "autonomous_vehicle", "start": {"road": "r", "lane": 1, "at": 0.0},
                    "speed": speed, "controller": {"id": "proximity_brake", "cruise_speed": speed,
                                                   "perception_range": 40.0, "reaction_delay": 0.6}}],
        "monitors": [{"id": "collision", "kind": "collision", "vehicle": "car"},
                     {"id": "moved", "kind": "distance", "vehicle": "car", "min_distance": 5}],
        "test": {"duration": duration, "dt": 0.05},
    }
    if ped:
        raw["actors"].append(ped)
        raw["monitors"].append({"id": "speed", "kind": "collision_speed", "vehicle": "car"})
    return ScenarioConfig.from_dict(raw)


def test_constant_speed_full_run():
    cfg = _cruise_cfg(5.0)
    rep = run_iteration(cfg.instantiate(cfg.probe_vector()))
    assert rep.status == "ok" and rep.ticks == 300
    assert rep.aggregates["path_length"] == pytest.approx(75.0, abs=1e-9)
    assert not rep.failed


def _ped(speed, trigger):
    return {"id": "ped", "kind": "pedestrian", "watch": "car", "speed": speed, "trigger_distance": trigger,
            "start": {"road": "r", "lane": "-sidewalk", "at": 100, "units": "meters"},
            "target": {"road": "r", "lane": "sidewalk", "at": 100, "units": "meters"}}


def test_slow_pedestrian_far_trigger_passes():
    cfg = _cruise_cfg(15.0, ped=_ped(1.0, 30.0))
    rep = run_iteration(cfg.instantiate(cfg.probe_vector()))
    assert rep.verdict("collision").outcome == "pass"


def test_fast_pedestrian_close_trigger_collides():
    cfg = _cruise_cfg(15.0, ped=_ped(10.0, 12.0))
    rep = run_iteration(cfg.instantiate(cfg.probe_vector()))
    v = rep.verdict("collision")
    assert v.outcome == "fail"
    assert rep.ticks == v.evidence["tick"]
    assert 0 < rep.score("speed") <= 15.0
    assert any(e["kind"] == "collision" for e in rep.events)


def test_iteration_is_deterministic():
    cfg = _cruise_cfg(15.0, ped=_ped(6.0, 40.0))
    a = run_iteration(cfg.instantiate(cfg.probe_vector()))
    b = run_iteration(cfg.instantiate(cfg.probe_vector()))
    assert a.to_json() == b.to_json() and a.events == b.events


def test_controller_exception_marks_errored(monkeypatch):
    cfg = _cruise_cfg(5.0)

    def boom(self, o):
        raise RuntimeError("sensor fault")

    monkeypatch.setattr(ProximityBrakeController, "act", boom)
    rep = run_iteration(cfg.instantiate(cfg.probe_vector()))
    assert rep.status == "errored" and "sensor fault" in rep.error
    assert all(v.outcome == "errored" for v in rep.verdicts)


def test_relative_speed_bounded():
    cfg = _cruise_cfg(15.0, ped=_ped(10.0, 12.0))
    rep = run_iteration(cfg.instantiate(cfg.probe_vector()))
    for e in rep.events:
        if e["kind"] == "collision":
            assert e["data"]["relative_speed"] <= 15.0 + 10.0 + 1e-9
    assert np.isfinite(rep.score("speed"))
