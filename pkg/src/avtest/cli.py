"""Command line entry point: ``avtest <subcommand> ...``.

Exit status: 0 on success, 1 when ``run --fail-on-violation`` saw a failing
iteration, 2 for usage or configuration errors.  Diagnostics go to stderr
as a single ``avtest: error: <kind>: <message>`` line.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

from . import CONFIG_SCHEMA_VERSION, __version__
from .coverage import dispersion_estimate, dispersion_exact, kwise_coverage
from .fsutil import write_text_atomic
from .opendrive import export_network
from .orchestrator import (
    ScenarioConfig,
    TestReport,
    buckets_to_csv,
    canonical_json,
    parse_buckets,
    run_campaign,
    summarize_by_bucket,
)
from .param_space import ConfigError, DomainError, ParameterSpace
from .sampler import SampleMeta, SampleSet, Strategy, sample_mixed
from .scene import ValidationError


class UsageFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # one line instead of usage + message
        raise UsageFailure(message)


def _resolve(path: str) -> Path:
    """A file path, or the name of a scenario shipped with the package."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".json" else f"{p.name}.json"
    shipped = resources.files("avtest") / "scenarios" / name
    if shipped.is_file():
        return Path(str(shipped))
    raise FileNotFoundError(f"no such file: {path}")


def _load_json(path: str):
    p = _resolve(path)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{p}: invalid JSON ({e})") from None


def _space_from(obj) -> ParameterSpace:
    decls = obj["params"] if isinstance(obj, dict) else obj
    if not isinstance(decls, list):
        raise ConfigError("space file must be a list of parameters or an object with 'params'")
    return ParameterSpace.from_json(decls)


def _read_points(path: str, space: ParameterSpace | None) -> SampleSet:
    """Sample or report CSV -> SampleSet; an explicit ``space`` wins over ``# space:``."""
    text = _resolve(path).read_text()
    lines = text.splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        key, _, val = lines.pop(0)[1:].partition(":")
        meta[key.strip()] = val
    if space is None and "space" in meta:
        space = ParameterSpace.from_json(json.loads(meta["space"]))
    elif space is None:
        raise ConfigError(f"{path}: no '# space:' header; pass --space")
    reader = csv.DictReader(lines)
    missing = [n for n in space.names if n not in (reader.fieldnames or [])]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    ss = SampleSet(space)
    for i, rec in enumerate(reader, start=1):
        vals = {p.name: p.parse(rec[p.name]) for p in space.discrete}
        vals.update({p.name: float(rec[p.name]) for p in space.continuous})
        ss.append(space.vector(vals), SampleMeta("csv", int(rec.get("index") or i)))
    return ss


def _points_csv(ss: SampleSet) -> str:
    return "# space: " + canonical_json(ss.space.to_json()) + "\n" + ss.to_csv()


# -- subcommands -------------------------------------------------------------------


def cmd_sample(a) -> int:
    space = _space_from(_load_json(a.space))
    if a.n < 0:
        raise ConfigError("--n must be non-negative")
    ss = sample_mixed(space, Strategy(kind=a.strategy, budget=a.n), a.seed)
    write_text_atomic(a.out, _points_csv(ss))
    return 0


def cmd_coverage(a) -> int:
    ss = _read_points(a.points, _space_from(_load_json(a.space)) if a.space else None)
    if len(ss) == 0:
        raise DomainError("no points to analyse")
    out: dict = {"points": len(ss)}
    if ss.space.n_bits:
        out["kwise"] = kwise_coverage(ss.bit_vectors(), a.k).to_json()
    d = len(ss.space.continuous)
    if d:
        pts = ss.unit_points()
        if a.estimate or d > 2:
            res = dispersion_estimate(pts, d, a.probes, a.seed)
        else:
            res = dispersion_exact(pts, d)
        out["dispersion"] = res.to_json()
    write_text_atomic(a.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def _config(a) -> ScenarioConfig:
    cfg = ScenarioConfig.load(_resolve(a.scenario))
    strategy = None
    if a.strategy or a.top_m is not None or a.sa_iters is not None:
        strategy = {}
        if a.strategy:
            strategy["kind"] = a.strategy
        if a.top_m is not None:
            strategy["top_m"] = a.top_m
        if a.sa_iters is not None:
            strategy["sa_iters"] = a.sa_iters
    return cfg.with_overrides(iterations=a.iterations, seed=a.seed, strategy=strategy,
                              objective=a.objective, k=a.k)


def cmd_run(a) -> int:
    cfg = _config(a)
    out = Path(a.out_dir)
    export = out / "opendrive" if a.export_opendrive else None
    if a.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    if a.jobs == 1:
        report = run_campaign(cfg, None, export)
    else:
        with ProcessPoolExecutor(max_workers=a.jobs) as pool:
            report = run_campaign(cfg, pool, export)
    write_text_atomic(out / "report.csv", report.to_csv())
    write_text_atomic(out / "report.json", report.to_json())
    s = report.summary
    fail = "NA" if s["fail_pct"] is None else f"{s['fail_pct']:.1f}%"
    print(f"{cfg.name}: {s['iterations']} iterations, {s['failures']} failed ({fail}), "
          f"{s['errored']} errored -> {out}")
    if a.fail_on_violation and s["failures"]:
        return 1
    return 0


def cmd_report(a) -> int:
    report = TestReport.from_csv(_resolve(a.input).read_text())
    table = summarize_by_bucket(report, parse_buckets(a.buckets))
    text = buckets_to_csv(table)
    if a.out:
        write_text_atomic(a.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_export(a) -> int:
    cfg = ScenarioConfig.load(_resolve(a.scenario))
    picks: list[tuple[int, object]] = []
    if a.vector.isdigit():
        idx = int(a.vector)
        if idx < 1:
            raise ConfigError("--vector row index starts at 1")
        plan = sample_mixed(cfg.space, Strategy(kind=cfg.make_strategy().base_kind, budget=idx), cfg.seed)
        picks.append((idx, plan.vectors[idx - 1]))
    else:
        ss = _read_points(a.vector, cfg.space)
        picks.extend((m.index, v) for v, m in zip(ss.vectors, ss.meta))
    out = Path(a.out)
    for idx, v in picks:
        path = export_network(cfg.instantiate(v).network, out / f"{cfg.name}_iter{idx:04d}.xodr")
        print(path)
    return 0


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="avtest", description="Scenario-based testing of driving controllers.")
    p.add_argument("--version", action="version",
                   version=f"avtest {__version__} (config schema {CONFIG_SCHEMA_VERSION})")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample", help="draw test vectors from a parameter space")
    s.add_argument("--space", required=True, help="JSON list of parameters, or a scenario file")
    s.add_argument("--strategy", choices=["halton", "random"], default="halton")
    s.add_argument("--n", type=int, required=True, help="number of vectors")
    s.add_argument("--seed", type=int, default=0, help="seed for discrete and random draws")
    s.add_argument("--out", required=True, help="output CSV")
    s.set_defaults(func=cmd_sample)

    c = sub.add_parser("coverage", help="k-wise coverage and dispersion of a point set")
    c.add_argument("--points", required=True, help="CSV written by 'sample' or 'run'")
    c.add_argument("--space", help="parameter space, if the CSV lacks a '# space:' header")
    c.add_argument("--k", type=int, default=3)
    g = c.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="exact dispersion (d <= 2, the default there)")
    g.add_argument("--estimate", action="store_true", help="randomized lower bound (used for d >= 3)")
    c.add_argument("--probes", type=int, default=20000, help="probe budget for --estimate")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True, help="output JSON")
    c.set_defaults(func=cmd_coverage)

    r = sub.add_parser("run", help="run a test campaign")
    r.add_argument("--scenario", required=True, help="scenario JSON, or a shipped name such as 'jaywalk'")
    r.add_argument("--iterations", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--strategy", choices=["halton", "random", "halton+opt", "random+opt"])
    r.add_argument("--top-m", type=int, help="annealing chains for +opt strategies")
    r.add_argument("--sa-iters", type=int, help="annealing steps per chain")
    r.add_argument("--objective", help="id of the score monitor that +opt maximizes")
    r.add_argument("--k", type=int, help="interaction strength for the coverage summary")
    r.add_argument("--jobs", type=int, default=1, help="worker processes")
    r.add_argument("--export-opendrive", action="store_true",
                   help="write one OpenDRIVE file per iteration under <out-dir>/opendrive")
    r.add_argument("--fail-on-violation", action="store_true", help="exit 1 if any iteration failed")
    r.add_argument("--out-dir", required=True)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("report", help="bucketed summary of a report CSV")
    b.add_argument("--in", dest="input", required=True, help="report.csv from 'run'")
    b.add_argument("--buckets", required=True,
                   help="comma-separated axes: 'param' groups by value, 'param:t1|t2' splits at thresholds")
    b.add_argument("--out", help="output CSV (default: stdout)")
    b.set_defaults(func=cmd_report)

    e = sub.add_parser("export", help="write a scenario's road network as OpenDRIVE")
    e.add_argument("--scenario", required=True)
    e.add_argument("--vector", required=True,
                   help="1-based index into the scenario's sample plan, or a CSV of vectors")
    e.add_argument("--out", required=True, help="output directory")
    e.set_defaults(func=cmd_export)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        return a.func(a)
    except UsageFailure as e:
        kind, msg = "usage", str(e)
    except (ConfigError, DomainError) as e:
        kind, msg = "config", str(e)
    except ValidationError as e:
        kind, msg = "invalid-network", str(e)
    except FileNotFoundError as e:
        kind, msg = "file", str(e)
    except (KeyError, ValueError) as e:
        kind, msg = "input", str(e)
    msg = " ".join(msg.split())
    print(f"avtest: error: {kind}: {msg}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
