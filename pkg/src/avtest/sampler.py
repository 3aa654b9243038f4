"""Test-vector generation: Halton / uniform sampling and annealing local search."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .param_space import (
    ConfigError,
    DomainError,
    ParameterSpace,
    TestVector,
    denormalize,
    normalize,
)

KINDS = ("random", "halton", "random+opt", "halton+opt")
OBJECTIVES = ("maximize", "minimize")


def primes(n: int) -> list[int]:
    """The first ``n`` primes."""
    out: list[int] = []
    c = 2
    while len(out) < n:
        if all(c % p for p in out if p * p <= c):
            out.append(c)
        c += 1
    return out


def radical_inverse(base: int, index: int) -> float:
    if base < 2:
        raise DomainError(f"base must be >= 2, got {base}")
    if index < 1:
        raise DomainError(f"Halton indices start at 1, got {index}")
    inv = 1.0 / base
    f = inv
    r = 0.0
    i = index
    while i > 0:
        i, digit = divmod(i, base)
        r += digit * f
        f *= inv
    return r


def halton_point(index: int, bases: Sequence[int]) -> np.ndarray:
    if len(set(bases)) != len(bases):
        raise ConfigError(f"Halton bases must be distinct, got {list(bases)}")
    return np.array([radical_inverse(b, index) for b in bases], dtype=float)


@dataclass(frozen=True)
class Strategy:
    kind: str = "halton"
    budget: int = 100
    base_count: int | None = None
    top_m: int = 5
    sa_iters: int = 3
    objective: str = "maximize"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown strategy kind {self.kind!r}; expected one of {KINDS}")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        if self.budget < 0 or self.top_m < 0 or self.sa_iters < 0:
            raise ConfigError("budget, top_m and sa_iters must be non-negative")
        if self.base_count is None:
            base = self.budget - self.top_m * self.sa_iters if self.optimizing else self.budget
            object.__setattr__(self, "base_count", base)
        if self.optimizing:
            if self.budget != self.base_count + self.top_m * self.sa_iters:
                raise ConfigError(
                    f"budget {self.budget} != base_count {self.base_count} + "
                    f"top_m {self.top_m} x sa_iters {self.sa_iters}"
                )
        elif self.base_count != self.budget:
            raise ConfigError(f"budget {self.budget} != base_count {self.base_count}")
        if self.base_count < 0:
            raise ConfigError("base_count must be non-negative")

    @property
    def optimizing(self) -> bool:
        return self.kind.endswith("+opt")

    @property
    def base_kind(self) -> str:
        return self.kind.removesuffix("+opt")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "budget": self.budget,
            "base_count": self.base_count,
            "top_m": self.top_m,
            "sa_iters": self.sa_iters,
            "objective": self.objective,
        }


@dataclass(frozen=True)
class SampleMeta:
    kind: str
    index: int  # Halton index or RNG draw counter
    score: float | None = None
    status: str = "unscored"  # unscored | ok | failed-evaluation
    chain: int | None = None
    payload: Any = field(default=None, compare=False, repr=False)


@dataclass
class SampleSet:
    space: ParameterSpace
    vectors: list[TestVector] = field(default_factory=list)
    meta: list[SampleMeta] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.vectors)

    def append(self, v: TestVector, m: SampleMeta) -> None:
        self.vectors.append(v)
        self.meta.append(m)

    def scores(self) -> list[float | None]:
        return [m.score for m in self.meta]

    def unit_points(self) -> np.ndarray:
        pts = [normalize(self.space, v)[1] for v in self.vectors]
        return np.array(pts, dtype=float).reshape(len(pts), len(self.space.continuous))

    def bit_vectors(self) -> np.ndarray:
        bits = [normalize(self.space, v)[0] for v in self.vectors]
        return np.array(bits, dtype=np.uint8).reshape(len(bits), self.space.n_bits)

    def to_csv(self) -> str:
        """Raw values, one row per vector, 6 decimals for reals."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", *self.space.names])
        for i, v in enumerate(self.vectors):
            w.writerow([i + 1, *format_values(self.space, v)])
        return buf.getvalue()


def format_values(space: ParameterSpace, v: TestVector) -> list[str]:
    out = [str(v.discrete[p.name]) for p in space.discrete]
    out += [f"{v.continuous[p.name]:.6f}" for p in space.continuous]
    return out


def _discrete_bits(space: ParameterSpace, rng: np.random.Generator) -> list[int]:
    bits: list[int] = []
    for p in space.discrete:
        bits.extend(p.encode(p.values[int(rng.integers(len(p.values)))]))
    return bits


def sample_mixed(space: ParameterSpace, strategy: Strategy, seed: int) -> SampleSet:
    """Draw ``strategy.base_count`` vectors.

    Continuous coordinates come from the Halton sequence (indices 1..n, one
    prime per continuous parameter in declaration order) or i.i.d. uniform
    draws; discrete coordinates are always uniform draws from ``seed``.
    """
    kind = strategy.base_kind
    n = strategy.base_count
    rng = np.random.default_rng(seed)
    bases = primes(len(space.continuous))
    out = SampleSet(space)
    for i in range(1, n + 1):
        bits = _discrete_bits(space, rng)
        if kind == "halton":
            unit = halton_point(i, bases)
        else:
            unit = rng.random(len(space.continuous))
        out.append(denormalize(space, bits, unit), SampleMeta(kind=kind, index=i))
    return out


# -- local search ---------------------------------------------------------------


def _neighbor(space: ParameterSpace, v: TestVector, rng: np.random.Generator) -> TestVector:
    bits, unit = normalize(space, v)
    unit = np.clip(unit + rng.normal(0.0, 0.05, size=unit.shape), 0.0, 1.0)
    values = dict(v.discrete)
    for p in space.discrete:
        if rng.random() < 0.2:
            values[p.name] = p.values[int(rng.integers(len(p.values)))]
    bits = []
    for p in space.discrete:
        bits.extend(p.encode(values[p.name]))
    return denormalize(space, bits, unit)


def _evaluate(score_of, v):
    try:
        res = score_of(v)
    except Exception:  # evaluator failure is data, not a crash
        return None, None, "failed-evaluation"
    payload = None
    if isinstance(res, tuple):
        res, payload = res
    if res is None or not math.isfinite(float(res)):
        return None, payload, "failed-evaluation"
    return float(res), payload, "ok"


def _run_chain(args) -> list[tuple[TestVector, SampleMeta]]:
    space, start, start_score, score_of, sign, t0, sa_iters, seed, chain, kind = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5A, chain]))
    cur, cur_s = start, start_score
    temp = t0
    out = []
    for step in range(sa_iters):
        cand = _neighbor(space, cur, rng)
        s, payload, status = _evaluate(score_of, cand)
        out.append((cand, SampleMeta(kind=kind, index=step + 1, score=s, status=status,
                                     chain=chain, payload=payload)))
        u = rng.random()
        if s is not None:
            delta = sign * (s - cur_s)
            if delta >= 0 or u < math.exp(delta / temp):
                cur, cur_s = cand, s
        temp *= 0.5
    return out


def local_search(
    base: SampleSet,
    score_of: Callable[[TestVector], Any],
    strategy: Strategy,
    seed: int,
    executor: Executor | None = None,
) -> SampleSet:
    """Simulated-annealing refinement from the ``top_m`` best base vectors.

    ``score_of`` returns a float, or ``(float, payload)``; payloads are kept
    on the resulting meta records.  Chains are independent and may run on
    ``executor``; within a chain evaluation is sequential.
    """
    if not strategy.optimizing:
        raise ConfigError(f"local search needs a +opt strategy, got {strategy.kind!r}")
    scored = [(m.score, i) for i, m in enumerate(base.meta) if m.score is not None]
    if any(m.status == "unscored" for m in base.meta):
        raise ConfigError("every base vector must be scored before local search")
    out = SampleSet(base.space, list(base.vectors), list(base.meta))
    if strategy.sa_iters == 0 or strategy.top_m == 0 or not scored:
        return out
    sign = 1.0 if strategy.objective == "maximize" else -1.0
    # stable ranking: best score first, earlier index breaks ties
    ranked = sorted(scored, key=lambda t: (-sign * t[0], t[1]))
    seeds = [i for _, i in ranked[: strategy.top_m]]
    values = [s for s, _ in scored]
    spread = max(values) - min(values)
    t0 = 0.1 * spread if spread > 0 else 1.0
    kind = strategy.kind
    jobs = [
        (base.space, base.vectors[i], base.meta[i].score, score_of, sign, t0,
         strategy.sa_iters, seed, c, kind)
        for c, i in enumerate(seeds)
    ]
    results: Iterable = executor.map(_run_chain, jobs) if executor else map(_run_chain, jobs)
    for chain_out in results:
        for v, m in chain_out:
            out.append(v, replace(m, index=len(out) + 1))
    return out


def best_score(samples: SampleSet, objective: str = "maximize") -> float | None:
    vals = [s for s in samples.scores() if s is not None]
    if not vals:
        return None
    return max(vals) if objective == "maximize" else min(vals)


def with_scores(samples: SampleSet, scores: Sequence[float | None]) -> SampleSet:
    """Copy of ``samples`` with the given per-vector scores attached."""
    meta = [
        replace(m, score=s, status="ok" if s is not None else "failed-evaluation")
        for m, s in zip(samples.meta, scores)
    ]
    return SampleSet(samples.space, list(samples.vectors), meta)
