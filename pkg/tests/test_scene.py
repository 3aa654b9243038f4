import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avtest.param_space import ConfigError, DomainError
from avtest.reactive import StreamGraph
from avtest.scene import (
    SIDEWALK,
    ActorSpec,
    CrossIntersection,
    Pose,
    RoadNetwork,
    StraightRoad,
    TIntersection,
    ValidationError,
    World,
    connect,
    grid_world,
    pedestrian_behavior,
    route_waypoints,
    validate_network,
)


def t_composite(nlanes=2, length=50.0):
    t = TIntersection(nlanes, id="t")
    e = StraightRoad(length, nlanes, id="e")
    s = StraightRoad(length, nlanes, id="s")
    w = StraightRoad(length, nlanes, id="w")
    return t.connect((t.ONE, e, e.TWO), (t.TWO, s, s.ONE), (t.THREE, w, w.ONE))


def test_on_lane_positions():
    r = StraightRoad(100, 2, id="r")
    p = r.on_lane(1, 0.1)
    assert (p.x, p.y, p.heading) == pytest.approx((10.0, -1.75, 0.0))
    assert r.on_lane(1, 0.0).x == 0.0 and r.on_lane(1, 1.0).x == 100.0
    back = r.on_lane(-1, 0.1)
    assert abs(back.heading) == pytest.approx(math.pi)
    assert back.y == pytest.approx(1.75)
    assert r.on_lane(1, 25, units="meters").x == 25.0
    with pytest.raises(DomainError):
        r.on_lane(2, 0.5)
    side = r.on_lane(SIDEWALK, 0.5)
    assert side.y == pytest.approx(-(3.5 + 1.0))


def test_t_composite_valid_and_posed():
    net = t_composite()
    assert validate_network(net) == []
    assert len(net.elements) == 4 and len(net.connections) == 3
    for c in net.connections:
        a = net[c.parent].port(c.parent_port)
        b = net[c.child].port(c.child_port)
        assert math.dist(a.xy, b.xy) < 1e-9
        assert abs(abs(a.heading - b.heading) - math.pi) < 1e-9


def test_lane_mismatch_rejected_with_counts():
    a = StraightRoad(50, 2, id="two")
    b = StraightRoad(50, 6, id="six")
    with pytest.raises(ValidationError, match="2 lanes.*6 lanes"):
        a.connect((a.TWO, b, b.ONE))


def test_port_reuse_rejected():
    a = StraightRoad(50, 2, id="a")
    b = StraightRoad(50, 2, id="b")
    c = StraightRoad(50, 2, id="c")
    net = a.connect((a.TWO, b, b.ONE))
    with pytest.raises(ValidationError, match="already connected"):
        net.connect(("a.TWO", c, "ONE"))


def test_empty_bindings_is_parent_alone():
    x = CrossIntersection(2, id="x")
    net = x.connect()
    assert list(net.elements) == ["x"] and net.connections == []


def test_crossing_segments_overlap():
    a = StraightRoad(40, 2, id="a")
    b = StraightRoad(40, 2, id="b")
    a.pose = Pose(-20, 0, 0)
    b.pose = Pose(0, -20, math.pi / 2)
    net = RoadNetwork({"a": a, "b": b}, [])
    bad = validate_network(net)
    assert any("overlap" in v for v in bad)


def test_grid_world_valid():
    net = grid_world(3, 3)
    assert validate_network(net) == []
    assert sum(isinstance(e, CrossIntersection) for e in net.elements.values()) == 16


def test_connect_associative():
    def parts():
        return (StraightRoad(30, 2, id="a"), CrossIntersection(2, id="x"), StraightRoad(20, 2, id="b"))

    a, x, b = parts()
    left = connect(connect(a, [(a.TWO, x, x.THREE)]), [("x.ONE", b, "ONE")])
    a, x, b = parts()
    right = connect(a, [(a.TWO, connect(x, [(x.ONE, b, b.ONE)]), "x.THREE")])
    for eid in ("a", "x", "b"):
        p, q = left[eid].world, right[eid].world
        assert (p.x, p.y, p.heading) == pytest.approx((q.x, q.y, q.heading), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["straight", "t", "x"]), st.floats(5, 80)), min_size=1, max_size=6),
       st.sampled_from([2, 4]))
def test_chain_builder_always_valid(pieces, nlanes):
    # a chain that always continues straight ahead cannot overlap itself
    net = connect(StraightRoad(20, nlanes, id="r0"), [])
    tail = "r0.TWO"
    for i, (kind, length) in enumerate(pieces, start=1):
        if kind == "straight":
            el, entry, exit_ = StraightRoad(length, nlanes, id=f"r{i}"), "ONE", "TWO"
        elif kind == "t":
            el, entry, exit_ = TIntersection(nlanes, id=f"r{i}"), "THREE", "ONE"
        else:
            el, entry, exit_ = CrossIntersection(nlanes, id=f"r{i}"), "THREE", "ONE"
        net = net.connect((tail, el, entry))
        tail = f"r{i}.{exit_}"
    assert validate_network(net) == []


def test_overlay_routes_through_junction():
    net = t_composite()
    # lane -1 on w drives towards the junction; turn into s lane 1 (away from it)
    pts = route_waypoints(net, "w", -1, ("s", 1))
    end = net["s"].on_lane(1, 1.0)
    assert math.dist(pts[-1], end.xy) < 1e-9
    assert len(pts) >= 4
    with pytest.raises(ConfigError):
        route_waypoints(net, "t", 1)


def test_world_visibility_bounds():
    assert World(1.0, 0.0).visibility == 1.0
    assert World(0.0, 1.0).visibility == 0.0
    with pytest.raises(DomainError):
        World(1.5, 0.0)


def _walk(trigger, ticks=80, speed=2.0, dt=0.05, car_x=None):
    start, target = Pose(0, 3, -math.pi / 2), Pose(0, -3, -math.pi / 2)
    spec = ActorSpec(id="p", kind="pedestrian", start=start, length=0.5, width=0.5, speed=speed,
                     trigger_distance=trigger, target=target)
    g = StreamGraph()
    car = g.source("car")
    pos = pedestrian_behavior(spec, car, g.tick, dt)
    seen = []
    pos.for_each(lambda p: seen.append(np.array(p)))
    for t in range(ticks):
        x = car_x(t) if car_x else -50 + t
        g.advance(t, {"car": np.array([x, 0.0])})
    return seen


def test_pedestrian_never_triggered_stays():
    seen = _walk(trigger=5.0, car_x=lambda t: -100.0)
    assert all(np.allclose(p, [0, 3]) for p in seen)


def test_pedestrian_walks_closed_form_and_stops():
    seen = _walk(trigger=math.inf, ticks=100)
    ys = [p[1] for p in seen]
    step = 2.0 * 0.05
    # walks from tick 1 at speed * dt per tick
    assert ys[0] == 3.0
    for m in range(1, 40):
        assert ys[m] == pytest.approx(3.0 - min(m * step, 6.0))
    assert ys[-1] == pytest.approx(-3.0)
    disp = [abs(3.0 - y) for y in ys]
    assert max(disp) <= 6.0 + 1e-9


def test_pedestrian_rejects_non_positive_speed():
    spec = ActorSpec(id="p", kind="pedestrian", start=Pose(0, 0, 0), length=0.5, width=0.5, speed=0.0,
                     trigger_distance=1.0, target=Pose(1, 0, 0))
    g = StreamGraph()
    with pytest.raises(ConfigError):
        pedestrian_behavior(spec, g.source("car"), g.tick, 0.05)
