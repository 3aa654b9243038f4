"""Campaigns: bind sampled parameters into scenarios, run them, report.

Scenario files are JSON::

    {
      "name": "...",
      "params": [{"name": "speed", "kind": "interval", "low": 2, "high": 10}, ...],
      "world": {"light": 1.0, "fog": "$param:fog"},
      "roads": [{"id": "r", "kind": "straight", "nlanes": 2, "length": 200}],
      "connections": [["t", "ONE", "e", "TWO"]],
      "actors": [...],
      "monitors": [{"id": "collision", "kind": "collision", "vehicle": "car"}],
      "test": {"iterations": 100, "duration": 15, "dt": 0.05, "seed": 0,
               "strategy": {"kind": "halton"}, "objective": "speed", "k": 3}
    }

Any value may be ``"$param:<name>"``; see README for the actor schema.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import itertools
import json
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .coverage import k_epsilon_report
from .monitors import MONITOR_KINDS, make_monitor
from .param_space import ConfigError, ParameterSpace, TestVector
from .sampler import SampleMeta, SampleSet, Strategy, local_search, sample_mixed, with_scores
from .scene import (
    DEFAULT_SIZE,
    SIDEWALK,
    ActorSpec,
    Pose,
    RoadNetwork,
    StraightRoad,
    ValidationError,
    World,
    connect,
    make_element,
    route_waypoints,
    validate_network,
)
from .sim import CONTROLLERS, IterationReport, ScenarioInstance, run_iteration

PARAM_PREFIX = "$param:"
QUANTITATIVE = {"collision_speed", "almost_failing"}


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def config_hash(raw: dict) -> str:
    return "sha256:" + hashlib.sha256(canonical_json(raw).encode()).hexdigest()


def _bind(obj: Any, values: dict, used: set | None = None) -> Any:
    if isinstance(obj, str) and obj.startswith(PARAM_PREFIX):
        name = obj[len(PARAM_PREFIX):]
        if name not in values:
            raise ConfigError(f"unresolved parameter reference {obj!r}")
        if used is not None:
            used.add(name)
        return values[name]
    if isinstance(obj, dict):
        return {k: _bind(v, values, used) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_bind(v, values, used) for v in obj]
    return obj


def _lane(v) -> int:
    if isinstance(v, str):
        key = v.strip().lower()
        if key in ("sidewalk", "+sidewalk"):
            return SIDEWALK
        if key == "-sidewalk":
            return -SIDEWALK
        try:
            return int(key)
        except ValueError:
            raise ConfigError(f"bad lane {v!r}") from None
    return int(v)


def _number(v, what: str) -> float:
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{what}: expected a number, got {v!r}") from None


@dataclass
class ScenarioConfig:
    raw: dict
    name: str
    space: ParameterSpace
    monitors: list[dict]
    iterations: int = 100
    duration: float = 15.0
    dt: float = 0.05
    seed: int = 0
    strategy: dict = field(default_factory=lambda: {"kind": "halton"})
    objective: str | None = None
    k: int = 3
    probes: int = 20000

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    # -- loading -------------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        raw = copy.deepcopy(raw)
        if not isinstance(raw, dict):
            raise ConfigError("scenario must be a JSON object")
        for key in ("params", "roads", "actors", "monitors"):
            if key not in raw:
                raise ConfigError(f"scenario is missing {key!r}")
        space = ParameterSpace.from_json(raw["params"])
        test = raw.get("test", {})
        strategy = test.get("strategy", {"kind": "halton"})
        if isinstance(strategy, str):
            strategy = {"kind": strategy}
        monitors = raw["monitors"]
        ids = [m.get("id") for m in monitors]
        if len(set(ids)) != len(ids) or None in ids:
            raise ConfigError(f"monitor ids must be present and unique, got {ids}")
        for m in monitors:
            make_monitor(m)
        cfg = cls(
            raw=raw,
            name=str(raw.get("name", "scenario")),
            space=space,
            monitors=monitors,
            iterations=int(test.get("iterations", 100)),
            duration=float(test.get("duration", 15.0)),
            dt=float(test.get("dt", 0.05)),
            seed=int(test.get("seed", 0)),
            strategy=dict(strategy),
            objective=test.get("objective"),
            k=int(test.get("k", 3)),
            probes=int(test.get("probes", 20000)),
        )
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(raw)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with test-block fields replaced (``None`` leaves a field alone)."""
        raw = copy.deepcopy(self.raw)
        test = raw.setdefault("test", {})
        for k, v in kw.items():
            if v is None:
                continue
            if k == "strategy":
                base = test.get("strategy", {"kind": "halton"})
                base = {"kind": base} if isinstance(base, str) else dict(base)
                base.update(v if isinstance(v, dict) else {"kind": v})
                test["strategy"] = base
            else:
                test[k] = v
        return ScenarioConfig.from_dict(raw)

    def validate(self) -> None:
        if self.iterations < 0:
            raise ConfigError("iterations must be non-negative")
        if not self.dt > 0 or not self.duration > 0:
            raise ConfigError("duration and dt must be positive")
        names = set(self.space.names)
        refs: set = set()
        _bind({k: v for k, v in self.raw.items() if k not in ("params", "test")},
              {n: 0 for n in names}, refs)
        avs = [a for a in self.raw["actors"] if a.get("kind") == "autonomous_vehicle"]
        if len(avs) != 1:
            raise ConfigError(f"exactly one autonomous_vehicle is required, found {len(avs)}")
        ctrl = (avs[0].get("controller") or {}).get("id")
        if ctrl not in CONTROLLERS:
            raise ConfigError(f"autonomous vehicle controller {ctrl!r} is not registered ({sorted(CONTROLLERS)})")
        if self.objective is not None:
            kinds = {m["id"]: m["kind"] for m in self.monitors}
            if self.objective not in kinds:
                raise ConfigError(f"objective monitor {self.objective!r} not among {sorted(kinds)}")
            if kinds[self.objective] not in QUANTITATIVE:
                raise ConfigError(f"objective monitor {self.objective!r} is not quantitative")
        strat = self.make_strategy()
        if strat.optimizing and self.objective is None:
            raise ConfigError(f"strategy {strat.kind!r} needs test.objective naming a score monitor")
        # build one instance so structural problems surface before any run
        self.instantiate(self.probe_vector())

    def probe_vector(self) -> TestVector:
        vals = {p.name: p.values[0] for p in self.space.discrete}
        vals.update({p.name: p.from_unit(0.5) for p in self.space.continuous})
        return self.space.vector(vals)

    def make_strategy(self, iterations: int | None = None) -> Strategy:
        s = dict(self.strategy)
        kind = s.pop("kind", "halton")
        n = self.iterations if iterations is None else iterations
        opt = kind.endswith("+opt")
        top_m = int(s.pop("top_m", 5))
        sa_iters = int(s.pop("sa_iters", 3))
        base = s.pop("base_count", None)
        if s:
            raise ConfigError(f"unknown strategy fields {sorted(s)}")
        if opt and base is None:
            if n and n < top_m * sa_iters:
                raise ConfigError(f"{kind}: {n} iterations cannot hold {top_m} chains of {sa_iters} steps")
            base = max(0, n - top_m * sa_iters)
            if n == 0:
                top_m = 0
        return Strategy(kind=kind, budget=n, base_count=base, top_m=top_m, sa_iters=sa_iters,
                        objective="maximize")

    # -- instantiation ----------------------------------------------------------

    def instantiate(self, v: TestVector) -> ScenarioInstance:
        values = v.as_dict()
        world = World(**{k: float(x) for k, x in _bind(self.raw.get("world", {}), values).items()})
        net = self._network(_bind(self.raw["roads"], values), _bind(self.raw.get("connections", []), values))
        bad = validate_network(net)
        if bad:
            raise ValidationError("invalid road network: " + "; ".join(bad), bad)
        actors = self._actors(_bind(self.raw["actors"], values), net)
        return ScenarioInstance(world, net, actors, self.monitors, self.duration, self.dt)

    @staticmethod
    def _network(roads: list, conns: list) -> RoadNetwork:
        els = {}
        for r in roads:
            el = make_element(r)
            if el.id in els:
                raise ConfigError(f"duplicate road id {el.id!r}")
            els[el.id] = el
        if not els:
            raise ConfigError("at least one road is required")
        root = next(iter(els.values()))
        net = connect(root, [])
        pending = list(conns)
        while pending:
            progress = False
            for c in list(pending):
                if len(c) != 4:
                    raise ConfigError(f"connection must be [parent, port, child, port], got {c}")
                p, pp, ch, cp = c
                for eid in (p, ch):
                    if eid not in els:
                        raise ConfigError(f"connection refers to unknown road {eid!r}")
                if p in net.elements and ch in net.elements:
                    net = net.join(f"{p}.{pp}", f"{ch}.{cp}")
                elif p in net.elements:
                    net = net.connect((f"{p}.{pp}", els[ch], cp))
                elif ch in net.elements:
                    net = net.connect((f"{ch}.{cp}", els[p], pp))
                else:
                    continue
                pending.remove(c)
                progress = True
            if not progress:
                raise ConfigError(f"connections do not link to the first road: {pending}")
        loose = set(els) - set(net.elements)
        if loose:
            raise ConfigError(f"roads not connected to the network: {sorted(loose)}")
        return net

    def _pose(self, spec: dict, net: RoadNetwork, placed: dict, what: str) -> tuple[Pose, tuple | None]:
        if "ahead_of" in spec:
            ref = spec["ahead_of"]
            other = placed.get(ref.get("actor"))
            if other is None:
                raise ConfigError(f"{what}: 'ahead_of' must name an earlier actor")
            o, lane_ref = other
            gap = _number(ref.get("gap", 0.0), what)
            own_len = spec.get("_length", 4.5)
            d = o.length / 2 + gap + own_len / 2
            p = Pose(o.start.x + d * math.cos(o.start.heading), o.start.y + d * math.sin(o.start.heading),
                     o.start.heading)
            return p, lane_ref
        road = net.elements.get(spec.get("road"))
        if not isinstance(road, StraightRoad):
            raise ConfigError(f"{what}: 'road' must name a straight road, got {spec.get('road')!r}")
        lane = _lane(spec.get("lane", 1))
        at = _number(spec.get("at", 0.0), what)
        pose = road.on_lane(lane, at, spec.get("units", "fraction"))
        return pose, (road.id, lane)

    def _actors(self, decls: list, net: RoadNetwork) -> list[ActorSpec]:
        out: list[ActorSpec] = []
        placed: dict[str, tuple[ActorSpec, tuple | None]] = {}
        for d in decls:
            aid = d.get("id")
            kind = d.get("kind")
            if not aid or kind not in DEFAULT_SIZE:
                raise ConfigError(f"actor needs an id and a valid kind, got {d}")
            if aid in placed:
                raise ConfigError(f"duplicate actor id {aid!r}")
            length, width = d.get("size", DEFAULT_SIZE[kind])
            start_spec = dict(d.get("start", {}))
            start_spec["_length"] = float(length)
            start, lane_ref = self._pose(start_spec, net, placed, f"actor {aid}")
            target = None
            if "target" in d:
                target, _ = self._pose(d["target"], net, placed, f"actor {aid} target")
            route = None
            if kind == "scripted_vehicle":
                goal = d.get("route", {}).get("goal")
                if lane_ref is None:
                    raise ConfigError(f"actor {aid}: cannot route from this start")
                route = route_waypoints(net, lane_ref[0], lane_ref[1], tuple(goal) if goal else None)
            trig = d.get("trigger_distance")
            spec = ActorSpec(
                id=aid, kind=kind, start=start, length=float(length), width=float(width),
                speed=_number(d.get("speed", 0.0), f"actor {aid} speed"),
                max_speed=None if d.get("max_speed") is None else _number(d["max_speed"], f"actor {aid}"),
                trigger_distance=None if trig is None else _number(trig, f"actor {aid} trigger"),
                target=target, watch=d.get("watch"), controller=d.get("controller"), route=route,
                accel=_number(d.get("accel", 2.0), f"actor {aid} accel"), color=d.get("color"),
            )
            out.append(spec)
            placed[aid] = (spec, lane_ref)
        return out


# -- evaluation -------------------------------------------------------------------


class Evaluator:
    """Picklable ``TestVector -> (score, IterationReport)`` for one scenario."""

    def __init__(self, config: ScenarioConfig, objective: str | None):
        self.config = config
        self.objective = objective

    def __call__(self, v: TestVector):
        try:
            inst = self.config.instantiate(v)
        except (ConfigError, ValidationError) as e:
            rep = IterationReport(0, v, "errored", 0, [make_monitor(m).errored(str(e)) for m in self.config.monitors],
                                  error=str(e))
            return None, rep
        rep = run_iteration(inst, v)
        rep.events = []  # keep payloads small across processes
        score = rep.score(self.objective) if self.objective and rep.status == "ok" else None
        return score, rep


# -- reports ----------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return f"{v:.6f}"
    return str(v)


def _round6(space: ParameterSpace, v: TestVector) -> TestVector:
    return TestVector(dict(v.discrete), {k: float(f"{x:.6f}") for k, x in v.continuous.items()})


@dataclass
class TestReport:
    """Per-iteration rows plus a campaign summary."""

    __test__ = False

    space: ParameterSpace
    monitors: list[dict]
    rows: list[dict]
    summary: dict

    @property
    def aggregate_names(self) -> list[str]:
        names = set()
        for r in self.rows:
            names.update(r["aggregates"])
        return sorted(names)

    def columns(self) -> list[str]:
        cols = ["index", "origin", *self.space.names, "status", "ticks", "failed"]
        for m in self.monitors:
            cols.append(f"{m['id']}.outcome")
            if m["kind"] in QUANTITATIVE:
                cols.append(f"{m['id']}.score")
        cols += self.aggregate_names
        return cols

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# space: " + canonical_json(self.space.to_json()) + "\n")
        buf.write("# monitors: " + canonical_json([{"id": m["id"], "kind": m["kind"]} for m in self.monitors]) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns()
        w.writerow(cols)
        for r in self.rows:
            flat = {"index": r["index"], "origin": r["origin"], "status": r["status"],
                    "ticks": r["ticks"], "failed": r["failed"]}
            flat.update(r["values"])
            for m in self.monitors:
                v = r["verdicts"].get(m["id"], {})
                flat[f"{m['id']}.outcome"] = v.get("outcome")
                flat[f"{m['id']}.score"] = v.get("score")
            flat.update(r["aggregates"])
            w.writerow([_fmt(flat.get(c)) for c in cols])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"summary": self.summary}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TestReport":
        lines = text.splitlines()
        meta = {}
        while lines and lines[0].startswith("#"):
            key, _, val = lines.pop(0)[1:].partition(":")
            meta[key.strip()] = json.loads(val)
        if "space" not in meta:
            raise ConfigError("report CSV lacks its '# space:' header line")
        space = ParameterSpace.from_json(meta["space"])
        monitors = meta.get("monitors", [])
        reader = csv.DictReader(lines)
        rows = []
        skip = {"index", "origin", "status", "ticks", "failed", *space.names}
        mon_cols = set()
        for m in monitors:
            mon_cols |= {f"{m['id']}.outcome", f"{m['id']}.score"}
        for rec in reader:
            values = {}
            for p in space.discrete:
                values[p.name] = p.parse(rec[p.name])
            for p in space.continuous:
                values[p.name] = float(rec[p.name])
            verdicts = {}
            for m in monitors:
                sc = rec.get(f"{m['id']}.score")
                verdicts[m["id"]] = {"outcome": rec.get(f"{m['id']}.outcome") or None,
                                     "score": float(sc) if sc not in (None, "") else None}
            aggs = {k: (float(v) if v != "" else None) for k, v in rec.items()
                    if k not in skip and k not in mon_cols}
            rows.append({"index": int(rec["index"]), "origin": rec["origin"], "values": values,
                         "status": rec["status"], "ticks": int(rec["ticks"]),
                         "failed": rec["failed"] == "true", "verdicts": verdicts, "aggregates": aggs})
        return cls(space, monitors, rows, {})

    def sample_set(self) -> SampleSet:
        ss = SampleSet(self.space)
        for r in self.rows:
            ss.append(self.space.vector(r["values"]), SampleMeta(kind=r["origin"], index=r["index"]))
        return ss


def _row(index: int, origin: str, space: ParameterSpace, v: TestVector, rep: IterationReport) -> dict:
    return {
        "index": index,
        "origin": origin,
        "values": {**v.discrete, **v.continuous},
        "status": rep.status,
        "ticks": rep.ticks,
        "failed": rep.failed,
        "verdicts": {x.monitor: {"outcome": x.outcome, "score": x.score} for x in rep.verdicts},
        "aggregates": {k: (None if val is None else float(val)) for k, val in sorted(rep.aggregates.items())},
    }


def coverage_summary(space: ParameterSpace, vectors: Sequence[TestVector], k: int, probes: int,
                     seed: int = 0) -> dict:
    """(k, epsilon) summary of a vector list, with k clamped to the bit count."""
    if not vectors:
        return {"kwise": None, "dispersion": None}
    ss = SampleSet(space, [_round6(space, v) for v in vectors],
                   [SampleMeta("report", i + 1) for i in range(len(vectors))])
    k_eff = min(k, space.n_bits) if space.n_bits else k
    kw, disp = k_epsilon_report(ss, k=max(1, k_eff), probe_budget=probes, seed=seed)
    return {
        "kwise": None if kw is None else {**kw.to_json(), "requested_k": k},
        "dispersion": None if disp is None else disp.to_json(),
    }


def summarize(space: ParameterSpace, monitors: list[dict], rows: list[dict]) -> dict:
    n = len(rows)
    kinds = {m["id"]: m["kind"] for m in monitors}
    out: dict[str, Any] = {"iterations": n, "no_data": n == 0}
    fails = sum(1 for r in rows if r["failed"])
    out["failures"] = fails
    out["fail_pct"] = 100.0 * fails / n if n else None
    out["errored"] = sum(1 for r in rows if r["status"] == "errored")
    per = {}
    for mid, kind in kinds.items():
        rec = {"kind": kind, "fail": sum(1 for r in rows if r["verdicts"].get(mid, {}).get("outcome") == "fail")}
        if kind in QUANTITATIVE:
            scores = [r["verdicts"][mid]["score"] for r in rows if r["verdicts"].get(mid, {}).get("score") is not None]
            rec["max_score"] = max(scores) if scores else None
        per[mid] = rec
    out["monitors"] = per
    return out


def run_campaign(config: ScenarioConfig, executor: Executor | None = None,
                 export_dir: str | Path | None = None) -> TestReport:
    """Sample, simulate every vector, optionally refine by local search."""
    strat = config.make_strategy()
    space = config.space
    evaluator = Evaluator(config, config.objective)
    base = sample_mixed(space, strat, config.seed)
    mapper = executor.map if executor is not None else map
    results = list(mapper(evaluator, base.vectors))
    rows: list[dict] = []
    vectors: list[TestVector] = []
    for i, (v, (_, rep)) in enumerate(zip(base.vectors, results)):
        rows.append(_row(i + 1, strat.base_kind, space, v, rep))
        vectors.append(v)
    if strat.optimizing and strat.sa_iters and strat.top_m and base.vectors:
        scored = with_scores(base, [s for s, _ in results])
        full = local_search(scored, evaluator, strat, config.seed, executor=executor)
        for j in range(len(base), len(full)):
            v, m = full.vectors[j], full.meta[j]
            rep = m.payload
            if rep is None:
                rep = IterationReport(j + 1, v, "errored", 0, [make_monitor(x).errored("evaluation failed")
                                                                for x in config.monitors], error="evaluation failed")
            rows.append(_row(j + 1, f"opt{m.chain}", space, v, rep))
            vectors.append(v)
    summary = summarize(space, config.monitors, rows)
    summary.update({
        "scenario": config.name,
        "seed": config.seed,
        "strategy": strat.to_json(),
        "objective": config.objective,
        "config_hash": config.hash,
        "coverage": coverage_summary(space, vectors, config.k, config.probes, config.seed),
    })
    if export_dir is not None:
        from .opendrive import export_network

        out = Path(export_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r, v in zip(rows, vectors):
            try:
                net = config.instantiate(v).network
            except (ConfigError, ValidationError):
                continue
            export_network(net, out / f"{config.name}_iter{r['index']:04d}.xodr")
    return TestReport(space, [{"id": m["id"], "kind": m["kind"]} for m in config.monitors], rows, summary)


# -- bucketing --------------------------------------------------------------------


@dataclass(frozen=True)
class BucketAxis:
    param: str
    thresholds: tuple[float, ...] = ()  # empty => group by discrete value

    @classmethod
    def parse(cls, text: str) -> "BucketAxis":
        """``"fog:0.5"`` splits a continuous parameter; ``"nlanes"`` groups by value."""
        name, _, rest = text.partition(":")
        name = name.strip()
        if not name:
            raise ConfigError(f"bad bucket spec {text!r}")
        if not rest:
            return cls(name)
        try:
            th = tuple(sorted(float(x) for x in rest.split("|")))
        except ValueError:
            raise ConfigError(f"bad thresholds in bucket spec {text!r}") from None
        return cls(name, th)


def parse_buckets(spec: str) -> list[BucketAxis]:
    return [BucketAxis.parse(t) for t in spec.split(",") if t.strip()]


def _labels(space: ParameterSpace, axis: BucketAxis) -> list[str]:
    p = space[axis.param]
    if not axis.thresholds:
        if hasattr(p, "values"):
            return [str(x) for x in p.values]
        return ["all"]
    edges = [p.low, *axis.thresholds, p.high] if hasattr(p, "low") else [-math.inf, *axis.thresholds, math.inf]
    out = []
    for i in range(len(edges) - 1):
        hi = "]" if i == len(edges) - 2 else ")"
        out.append(f"[{edges[i]:g},{edges[i + 1]:g}{hi}")
    return out


def _label_of(space: ParameterSpace, axis: BucketAxis, value) -> str:
    if not axis.thresholds:
        p = space[axis.param]
        return str(value) if hasattr(p, "values") else "all"
    labels = _labels(space, axis)
    i = int(np.searchsorted(np.asarray(axis.thresholds), float(value), side="right"))
    return labels[i]


def summarize_by_bucket(report: TestReport, axes: Sequence[BucketAxis]) -> list[dict]:
    """Per-bucket counts (iterations, failures, collisions, inactivity) and
    the mean of each aggregate over passing iterations."""
    for a in axes:
        try:
            report.space[a.param]
        except KeyError:
            raise ConfigError(f"unknown bucket parameter {a.param!r}; known: {report.space.names}") from None
    kinds = {m["id"]: m["kind"] for m in report.monitors}
    label_sets = [_labels(report.space, a) for a in axes]
    groups: dict[tuple, list[dict]] = {}
    for combo in itertools.product(*label_sets):
        groups[combo] = []
    for r in report.rows:
        key = tuple(_label_of(report.space, a, r["values"][a.param]) for a in axes)
        groups[key].append(r)
    aggs = report.aggregate_names
    out = []
    for key, rows in groups.items():
        rec: dict[str, Any] = {a.param: lab for a, lab in zip(axes, key)}
        rec["iterations"] = len(rows)
        rec["failures"] = sum(1 for r in rows if r["failed"])
        rec["collisions"] = sum(1 for r in rows for mid, k in kinds.items()
                                if k == "collision" and r["verdicts"].get(mid, {}).get("outcome") == "fail")
        rec["inactivity"] = sum(1 for r in rows for mid, k in kinds.items()
                                if k == "distance" and r["verdicts"].get(mid, {}).get("outcome") == "fail")
        passing = [r for r in rows if not r["failed"] and r["status"] == "ok"]
        for a in aggs:
            vals = [r["aggregates"].get(a) for r in passing]
            vals = [x for x in vals if x is not None and math.isfinite(x)]
            rec[a if a.startswith("mean_") else f"mean_{a}"] = float(np.mean(vals)) if vals else None
        out.append(rec)
    return out


def buckets_to_csv(table: list[dict]) -> str:
    buf = io.StringIO()
    if not table:
        return ""
    cols = list(table[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rec in table:
        w.writerow([_fmt(rec[c]) if rec[c] is not None else "NA" for c in cols])
    return buf.getvalue()


def load_report_csv(path: str | Path) -> TestReport:
    return TestReport.from_csv(Path(path).read_text())


__all__ = [
    "ScenarioConfig", "TestReport", "Evaluator", "run_campaign", "summarize_by_bucket", "BucketAxis",
    "parse_buckets", "buckets_to_csv", "coverage_summary", "config_hash", "load_report_csv", "MONITOR_KINDS",
]
