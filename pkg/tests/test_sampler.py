import math
from collections import Counter

import numpy as np
import pytest

from avtest.param_space import ConfigError, DomainError, ParameterSpace
from avtest.sampler import (
    SampleSet,
    Strategy,
    best_score,
    local_search,
    primes,
    radical_inverse,
    sample_mixed,
    with_scores,
)

SQUARE = ParameterSpace.from_json([
    {"name": "a", "kind": "interval", "low": 0, "high": 1},
    {"name": "b", "kind": "interval", "low": 0, "high": 1},
])


def test_radical_inverse_first_terms():
    assert [radical_inverse(2, i) for i in range(1, 5)] == [0.5, 0.25, 0.75, 0.125]
    assert [radical_inverse(3, i) for i in (1, 2)] == [1 / 3, 2 / 3]
    for b in (2, 3, 5, 7):
        assert [radical_inverse(b, i) for i in range(1, b)] == pytest.approx([i / b for i in range(1, b)])
    with pytest.raises(DomainError):
        radical_inverse(2, 0)


def test_primes():
    assert primes(6) == [2, 3, 5, 7, 11, 13]


def test_halton_ignores_seed_for_continuous():
    a = sample_mixed(SQUARE, Strategy("halton", 20), seed=1)
    b = sample_mixed(SQUARE, Strategy("halton", 20), seed=99)
    assert a.to_csv() == b.to_csv()
    assert a.vectors[0].continuous == {"a": 0.5, "b": 1 / 3}


def test_random_is_seeded():
    a = sample_mixed(SQUARE, Strategy("random", 20), seed=1).to_csv()
    assert a == sample_mixed(SQUARE, Strategy("random", 20), seed=1).to_csv()
    assert a != sample_mixed(SQUARE, Strategy("random", 20), seed=2).to_csv()


def test_csv_layout():
    space = ParameterSpace.from_json([
        {"name": "h", "kind": "interval", "low": 1.9, "high": 2.2},
        {"name": "lanes", "kind": "enum", "values": [2, 4]},
    ])
    lines = sample_mixed(space, Strategy("halton", 2), seed=0).to_csv().splitlines()
    assert lines[0] == "index,lanes,h"
    idx, lanes, h = lines[1].split(",")
    assert idx == "1" and lanes in ("2", "4") and h == "2.050000"


def test_discrete_only_frequencies_uniform():
    space = ParameterSpace.from_json([{"name": "c", "kind": "enum", "values": list("abcde")}])
    ss = sample_mixed(space, Strategy("halton", 1000), seed=7)
    counts = Counter(v.discrete["c"] for v in ss.vectors)
    assert set(counts) == set("abcde")
    sigma = math.sqrt(1000 * 0.2 * 0.8)
    assert all(abs(c - 200) <= 4 * sigma for c in counts.values())


def test_strategy_budget_rules():
    s = Strategy("halton+opt", 100)
    assert s.base_count == 85
    with pytest.raises(ConfigError):
        Strategy("halton+opt", 100, base_count=90)
    with pytest.raises(ConfigError):
        Strategy("sobol", 10)


def _scored(n=30):
    base = sample_mixed(SQUARE, Strategy("halton", n), seed=0)
    c = np.array([0.3, 0.7])

    def score(v):
        u = np.array([v.continuous["a"], v.continuous["b"]])
        return -float(np.sum((u - c) ** 2))

    return with_scores(base, [score(v) for v in base.vectors]), score


def test_local_search_zero_iterations_is_identity():
    base, score = _scored()
    out = local_search(base, score, Strategy("halton+opt", 30, base_count=30, top_m=5, sa_iters=0), seed=0)
    assert out.vectors == base.vectors


def test_local_search_keeps_incumbent_and_budget():
    base, score = _scored(30)
    strat = Strategy("halton+opt", 45, base_count=30, top_m=5, sa_iters=3)
    out = local_search(base, score, strat, seed=3)
    assert len(out) == 45
    assert best_score(out) >= best_score(base)
    assert sorted({m.chain for m in out.meta[30:]}) == [0, 1, 2, 3, 4]
    again = local_search(base, score, strat, seed=3)
    assert again.vectors == out.vectors


def test_local_search_survives_evaluator_failures():
    base, score = _scored(10)

    def flaky(v):
        if v.continuous["a"] > 0.5:
            raise RuntimeError("boom")
        return score(v)

    out = local_search(base, flaky, Strategy("halton+opt", 16, base_count=10, top_m=2, sa_iters=3), seed=1)
    assert len(out) == 16
    statuses = {m.status for m in out.meta[10:]}
    assert statuses <= {"ok", "failed-evaluation"}


def test_local_search_requires_scores():
    base = sample_mixed(SQUARE, Strategy("halton", 5), seed=0)
    with pytest.raises(ConfigError):
        local_search(base, lambda v: 0.0, Strategy("halton+opt", 8, base_count=5, top_m=1, sa_iters=3), seed=0)
    assert isinstance(base, SampleSet)
