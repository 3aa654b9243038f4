"""Acceptance suite: one or more tests per criterion, tagged with ``criterion(n)``.

The terminal summary prints a PASS/FAIL line per criterion (see conftest.py).
"""

import csv
import json
import math
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from avtest.coverage import covering_family_size, dispersion_exact, k_epsilon_report, kwise_coverage
from avtest.monitors import DistanceMonitor
from avtest.opendrive import OpenDriveDocument
from avtest.orchestrator import ScenarioConfig, parse_buckets, run_campaign, summarize_by_bucket
from avtest.param_space import ParameterSpace
from avtest.sampler import Strategy, halton_point, sample_mixed
from avtest.scene import StraightRoad, ValidationError, grid_world, validate_network
from avtest.sim import run_iteration

import marbles
from dispersion_oracle import brute_force_dispersion
from jaywalk_oracle import collision_window, predicts_collision
from test_monitors import drive
from test_scene import t_composite

DATA = Path(__file__).parent / "data"


def scenario(name, **test):
    raw = json.loads(resources.files("avtest").joinpath(f"scenarios/{name}.json").read_text())
    raw["test"].update(test)
    return ScenarioConfig.from_dict(raw)


def halton2(n):
    return np.array([halton_point(i, (2, 3)) for i in range(1, n + 1)])


# -- 1 ---------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_halton_reproduces_car_detection_table():
    with open(DATA / "car_detection_halton.csv") as f:
        table = list(csv.DictReader(f))
    space = ParameterSpace.from_json(json.loads(
        resources.files("avtest").joinpath("scenarios/objseg.json").read_text())["params"])
    t0 = time.perf_counter()
    ss = sample_mixed(space, Strategy("halton", 100), seed=0)
    elapsed = time.perf_counter() - t0
    assert len(table) == 100
    worst = 0.0
    for row, v in zip(table, ss.vectors):
        for col in ("height", "pitch", "focal"):
            worst = max(worst, abs(v.continuous[col] - float(row[col])))
    assert worst <= 5e-4
    assert elapsed < 1.0


# -- 2 ---------------------------------------------------------------------------

HALTON_TABLE = {50: (0.083, 0.006), 100: (0.041, 0.005), 200: (0.029, 0.004), 400: (0.011, 0.003)}


@pytest.mark.criterion(2)
def test_halton_dispersion_table():
    t0 = time.perf_counter()
    got = {n: dispersion_exact(halton2(n)).value for n in HALTON_TABLE}
    assert time.perf_counter() - t0 < 10.0
    for n, (want, tol) in HALTON_TABLE.items():
        assert abs(got[n] - want) <= tol, (n, got[n])


# -- 3 ---------------------------------------------------------------------------

RANDOM_COLUMN = {50: 0.200, 100: 0.105, 200: 0.051, 400: 0.025}


@pytest.mark.criterion(3)
@pytest.mark.parametrize("n", sorted(RANDOM_COLUMN))
def test_random_disperses_worse_than_halton(n):
    seeds = 30
    vals = np.array([dispersion_exact(np.random.default_rng(s).random((n, 2))).value for s in range(seeds)])
    halton = dispersion_exact(halton2(n)).value
    mean, sem = vals.mean(), vals.std(ddof=1) / math.sqrt(seeds)
    assert mean - 3 * sem > halton
    assert 0.5 * RANDOM_COLUMN[n] <= mean <= 1.5 * RANDOM_COLUMN[n]


# -- 4 ---------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_covering_family_bound():
    k, n_bits, delta, trials = 3, 10, 0.05, 400
    m = covering_family_size(k, n_bits, delta)
    assert m == math.ceil(8 * (3 * math.log(10) - math.log(0.05)))
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    hits = sum(kwise_coverage(rng.integers(0, 2, (m, n_bits)), k).is_covering_family for _ in range(trials))
    assert time.perf_counter() - t0 < 30.0
    p = 1 - delta
    assert hits >= trials * p - 3 * math.sqrt(trials * p * (1 - p))


# -- 5 ---------------------------------------------------------------------------


def _strictly_empty(points, low, high):
    p = np.asarray(points)
    inside = np.all((p > np.asarray(low)) & (p < np.asarray(high)), axis=1)
    return not inside.any()


@pytest.mark.criterion(5)
def test_exact_dispersion_equals_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 26))
        pts = rng.random((n, 2))
        got = dispersion_exact(pts)
        want, _ = brute_force_dispersion(pts)
        assert got.value == want
        assert np.all(np.asarray(got.low) >= 0) and np.all(np.asarray(got.high) <= 1)
        assert _strictly_empty(pts, got.low, got.high)
        assert math.prod(h - lo for lo, h in zip(got.low, got.high)) == pytest.approx(got.value, rel=1e-12)


# -- 6 ---------------------------------------------------------------------------

# (build, marbles, expected) for every combinator
MARBLES = [
    (lambda g, a: a.map(lambda x: x * 2), {"a": [1, None, 3]}, [(0, 2), (2, 6)]),
    (lambda g, a: a.filter(lambda x: x > 1), {"a": [1, 2, 3]}, [(1, 2), (2, 3)]),
    (lambda g, a, b: a.zip(b), {"a": [1, 2, None], "b": [None, 10, 20]}, [(1, (1, 10)), (2, (2, 20))]),
    (lambda g, a, b: a.combine_latest(b), {"a": [1, None, 2], "b": [None, 5, None]}, [(1, (1, 5)), (2, (2, 5))]),
    (lambda g, a: a.take(2), {"a": [1, 2, 3]}, [(0, 1), (1, 2)]),
    (lambda g, a: a.skip(2), {"a": [1, 2, 3]}, [(2, 3)]),
    (lambda g, a, b: a.skip_until(b), {"a": [1, 2, 3], "b": [None, 0]}, [(2, 3)]),
    (lambda g, a, b: a.take_until(b), {"a": [1, 2, 3], "b": [None, 0]}, [(0, 1)]),
    (lambda g, a: a.first(), {"a": [None, 4, 5]}, [(1, 4)]),
    (lambda g, a: a.last(), {"a": [4, 5, None]}, [(3, 5)]),
    (lambda g, a: a.scan(lambda s, x: s + x, 0), {"a": [1, 2, 3]}, [(0, 1), (1, 3), (2, 6)]),
    (lambda g, a: a.sum(), {"a": [1, 2, 3]}, [(0, 1), (1, 3), (2, 6)]),
    (lambda g, a: a.min(), {"a": [3, 1, 2]}, [(0, 3), (1, 1), (2, 1)]),
    (lambda g, a: a.max(), {"a": [1, 3, 2]}, [(0, 1), (1, 3), (2, 3)]),
    (lambda g, a, b: a.with_latest_from(b, lambda x, y: x + y), {"a": [1, 2, 3], "b": [None, 10]},
     [(1, 12), (2, 13)]),
    (lambda g, a: a.default_if_empty(9), {"a": [None, None]}, [(2, 9)]),
    (lambda g, a: a.is_empty(), {"a": [None, None]}, [(2, True)]),
]


@pytest.mark.criterion(6)
@pytest.mark.parametrize("case", range(len(MARBLES)))
def test_combinator_marbles(case):
    build, streams, want = MARBLES[case]
    assert marbles.run(build, **streams) == want


@pytest.mark.criterion(6)
def test_path_length_pipeline_matches_direct_sum():
    rng = np.random.default_rng(6)
    for _ in range(100):
        n = int(rng.integers(1, 200))
        xy = np.cumsum(rng.normal(size=(n, 2)), axis=0)
        log = [{"car": (x, y, 0.0)} for x, y in xy]
        m = DistanceMonitor("d", "car", 0.0)
        drive(m, log)
        direct = float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))
        assert m.total == pytest.approx(direct, rel=1e-9, abs=1e-12)


# -- 7 ---------------------------------------------------------------------------


@pytest.mark.criterion(7)
def test_scene_validity():
    assert validate_network(t_composite()) == []
    two, six = StraightRoad(50, 2, id="two"), StraightRoad(50, 6, id="six")
    with pytest.raises(ValidationError, match="2 lanes.*6 lanes"):
        two.connect((two.TWO, six, six.ONE))
    assert validate_network(grid_world(3, 3)) == []


# -- 8 ---------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_simulation_agrees_with_stopping_oracle():
    cfg = scenario("jaywalk", iterations=1000)
    ctrl = cfg.raw["actors"][0]["controller"]
    cruise, delay, dt = ctrl["cruise_speed"], ctrl["reaction_delay"], cfg.dt
    ss = sample_mixed(cfg.space, Strategy("halton", 1000), seed=0)
    t0 = time.perf_counter()
    disagree = []
    for v in ss.vectors:
        rep = run_iteration(cfg.instantiate(v), v, record_events=False)
        sim = rep.verdict("collision").outcome == "fail"
        s, trig = v.continuous["ped_speed"], v.continuous["trigger_distance"]
        if sim != predicts_collision(s, trig, cruise=cruise, delay=delay, dt=dt):
            disagree.append((s, trig))
    elapsed = time.perf_counter() - t0
    assert len(disagree) <= 50
    for s, trig in disagree:
        assert in_boundary_band(s, trig, cruise=cruise, delay=delay, dt=dt), (s, trig)
    assert elapsed < 60.0


def in_boundary_band(s, trig, dt, **kw):
    """True if one tick of timing jitter can change the outcome.

    The simulator notices the trigger and checks contact only on ticks, so a
    pedestrian or brake start can slip by up to dt, and after that slip an
    overlap shorter than dt can fall between two samples."""
    delay = kw.pop("delay")
    windows = [collision_window(s, trig, dt=dt, delay=delay + dd, walk_shift=dw, **kw)
               for dw in (-dt, 0.0, dt) for dd in (-dt, 0.0, dt)]
    hit = [lo < hi for lo, hi in windows]
    return any(hit) and (not all(hit) or any(hi - lo <= dt for lo, hi in windows))


# -- 9 ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def jaywalk_plain():
    return run_campaign(scenario("jaywalk", iterations=100, seed=0))


@pytest.fixture(scope="module")
def jaywalk_opt():
    return [run_campaign(scenario("jaywalk", iterations=100, seed=s, strategy={"kind": "halton+opt"}))
            for s in range(20)]


@pytest.mark.criterion(9)
def test_plain_halton_fail_rate_in_tuning_band(jaywalk_plain):
    assert 5.0 <= jaywalk_plain.summary["fail_pct"] <= 15.0


@pytest.mark.criterion(9)
def test_opt_fails_more_and_harder(jaywalk_plain, jaywalk_opt):
    base = jaywalk_plain.summary
    base_max = base["monitors"]["collision_speed"]["max_score"]
    wins = sum(1 for r in jaywalk_opt
               if r.summary["fail_pct"] >= base["fail_pct"]
               and r.summary["monitors"]["collision_speed"]["max_score"] >= base_max)
    assert wins >= 16


@pytest.mark.criterion(9)
def test_opt_dispersion_not_lower(jaywalk_plain, jaywalk_opt):
    plain = jaywalk_plain.summary["coverage"]["dispersion"]["value"]
    assert all(r.summary["coverage"]["dispersion"]["value"] >= plain for r in jaywalk_opt)


# -- 10 --------------------------------------------------------------------------


@pytest.mark.criterion(10)
def test_acc_fog_buckets():
    rep = run_campaign(scenario("acc", iterations=100))
    low, high = summarize_by_bucket(rep, parse_buckets("fog:0.5"))
    assert low["fog"] == "[0,0.5)" and high["fog"] == "[0.5,1]"
    assert low["collisions"] > high["collisions"]
    assert high["inactivity"] > low["inactivity"]


@pytest.mark.criterion(10)
def test_acc_three_wise_coverage_at_100():
    space = scenario("acc").space
    assert space.n_bits == 3
    seeds = 100
    covered = 0
    for s in range(seeds):
        kw, _ = k_epsilon_report(sample_mixed(space, Strategy("halton", 100), seed=s), k=3, probe_budget=10)
        covered += kw.is_covering_family
    assert covered >= 0.95 * seeds


# -- 11 --------------------------------------------------------------------------


def _cli_run(out, *args):
    subprocess.run([sys.executable, "-m", "avtest.cli", "run", *args, "--out-dir", str(out)],
                   check=True, capture_output=True)
    return (out / "report.csv").read_bytes()


@pytest.mark.criterion(11)
@pytest.mark.parametrize("args", [
    ("--scenario", "jaywalk", "--strategy", "halton+opt", "--seed", "7"),
    ("--scenario", "acc", "--iterations", "40", "--seed", "3"),
    ("--scenario", "tjunction", "--iterations", "30", "--strategy", "random", "--seed", "5"),
], ids=["jaywalk-opt", "acc", "tjunction-random"])
def test_reports_are_byte_identical(tmp_path, args):
    a = _cli_run(tmp_path / "a", *args, "--jobs", "1")
    b = _cli_run(tmp_path / "b", *args, "--jobs", "1")
    c = _cli_run(tmp_path / "c", *args, "--jobs", "4")
    assert a == b == c


# -- 12 --------------------------------------------------------------------------


@pytest.mark.criterion(12)
def test_tjunction_exports(tmp_path):
    cfg = scenario("tjunction")
    run_campaign(cfg, export_dir=tmp_path)
    files = sorted(tmp_path.glob("*.xodr"))
    assert len(files) == cfg.iterations
    for f in files:
        text = f.read_text()
        ET.fromstring(text)
        doc = OpenDriveDocument.from_xml(text)
        assert doc.structural_problems() == [], f.name
        assert max(doc.continuity_errors()) < 1e-6, f.name
        assert OpenDriveDocument.from_xml(doc.to_xml()).to_xml() == doc.to_xml()
