"""Mixed discrete/continuous test parameter spaces.

Continuous parameters are mapped affinely onto [0, 1]; discrete parameters
are encoded as the binary index of the chosen symbol (big-endian, minimal
width), concatenated in declaration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np


class DomainError(ValueError):
    """A value lies outside the domain of a parameter or operation."""


class ConfigError(ValueError):
    """A declaration or configuration is malformed."""


@dataclass(frozen=True)
class ContinuousParam:
    name: str
    low: float
    high: float

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ConfigError(f"{self.name}: bounds must be finite")
        if not self.low < self.high:
            raise ConfigError(f"{self.name}: low ({self.low}) must be < high ({self.high})")

    @property
    def span(self) -> float:
        return self.high - self.low

    def to_unit(self, raw: float) -> float:
        if not self.low <= raw <= self.high:
            raise DomainError(f"{self.name}: {raw} outside [{self.low}, {self.high}]")
        return (raw - self.low) / self.span

    def from_unit(self, u: float) -> float:
        if not 0.0 <= u <= 1.0:
            raise DomainError(f"{self.name}: unit coordinate {u} outside [0, 1]")
        # keeps the endpoints exact
        if u == 1.0:
            return self.high
        return self.low + u * self.span


@dataclass(frozen=True)
class DiscreteParam:
    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) < 2:
            raise ConfigError(f"{self.name}: an enum needs at least two values")
        if len(set(self.values)) != len(self.values):
            raise ConfigError(f"{self.name}: duplicate enum values {list(self.values)}")

    @property
    def bit_width(self) -> int:
        return max(1, math.ceil(math.log2(len(self.values))))

    def index_of(self, symbol: Any) -> int:
        try:
            return self.values.index(symbol)
        except ValueError:
            raise DomainError(f"{self.name}: {symbol!r} not in {list(self.values)}") from None

    def parse(self, text: str) -> Any:
        """Map a textual rendering (e.g. a CSV cell) back to its symbol."""
        for v in self.values:
            if str(v) == text:
                return v
        raise DomainError(f"{self.name}: {text!r} not in {list(self.values)}")

    def encode(self, symbol: Any) -> list[int]:
        idx = self.index_of(symbol)
        w = self.bit_width
        return [(idx >> (w - 1 - j)) & 1 for j in range(w)]

    def decode(self, bits: Sequence[int]) -> Any:
        if len(bits) != self.bit_width:
            raise DomainError(f"{self.name}: expected {self.bit_width} bits, got {len(bits)}")
        idx = 0
        for b in bits:
            if b not in (0, 1):
                raise DomainError(f"{self.name}: non-binary digit {b!r}")
            idx = (idx << 1) | int(b)
        if idx >= len(self.values):
            raise DomainError(
                f"{self.name}: bit pattern {''.join(map(str, bits))} decodes to index {idx}, "
                f"but only {len(self.values)} values exist"
            )
        return self.values[idx]


@dataclass(frozen=True)
class TestVector:
    """One concrete assignment of every parameter in a space."""

    __test__ = False  # not a pytest class

    discrete: Mapping[str, Any] = field(default_factory=dict)
    continuous: Mapping[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str):
        if name in self.continuous:
            return self.continuous[name]
        return self.discrete[name]

    def as_dict(self) -> dict[str, Any]:
        return {**self.discrete, **self.continuous}


@dataclass(frozen=True)
class ParameterSpace:
    discrete: tuple[DiscreteParam, ...] = ()
    continuous: tuple[ContinuousParam, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "discrete", tuple(self.discrete))
        object.__setattr__(self, "continuous", tuple(self.continuous))
        names = [p.name for p in self.params]
        if not names:
            raise ConfigError("a parameter space needs at least one parameter")
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"duplicate parameter names: {dupes}")

    @property
    def params(self) -> list:
        return [*self.discrete, *self.continuous]

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def n_bits(self) -> int:
        return sum(p.bit_width for p in self.discrete)

    def __getitem__(self, name: str):
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def check(self, v: TestVector) -> None:
        if set(v.discrete) != {p.name for p in self.discrete}:
            raise DomainError(f"discrete assignment keys {sorted(v.discrete)} do not match space")
        if set(v.continuous) != {p.name for p in self.continuous}:
            raise DomainError(f"continuous assignment keys {sorted(v.continuous)} do not match space")
        for p in self.discrete:
            p.index_of(v.discrete[p.name])
        for p in self.continuous:
            p.to_unit(v.continuous[p.name])

    def vector(self, values: Mapping[str, Any]) -> TestVector:
        """Build a TestVector from a flat ``name -> value`` mapping."""
        missing = [n for n in self.names if n not in values]
        if missing:
            raise DomainError(f"missing values for {missing}")
        extra = sorted(set(values) - set(self.names))
        if extra:
            raise DomainError(f"unknown parameters {extra}")
        v = TestVector(
            discrete={p.name: values[p.name] for p in self.discrete},
            continuous={p.name: float(values[p.name]) for p in self.continuous},
        )
        self.check(v)
        return v

    # -- serialization -------------------------------------------------

    def to_json(self) -> list[dict]:
        out: list[dict] = []
        for p in self.discrete:
            out.append({"name": p.name, "kind": "enum", "values": list(p.values)})
        for p in self.continuous:
            out.append({"name": p.name, "kind": "interval", "low": p.low, "high": p.high})
        return out

    @classmethod
    def from_json(cls, decls: Sequence[Mapping[str, Any]]) -> "ParameterSpace":
        discrete, continuous = [], []
        for d in decls:
            kind = d.get("kind")
            if "name" not in d:
                raise ConfigError(f"parameter declaration without a name: {dict(d)}")
            if kind == "interval":
                continuous.append(ContinuousParam(d["name"], float(d["low"]), float(d["high"])))
            elif kind == "enum":
                discrete.append(DiscreteParam(d["name"], tuple(d["values"])))
            else:
                raise ConfigError(f"{d['name']}: unknown parameter kind {kind!r}")
        return cls(tuple(discrete), tuple(continuous))


def bit_width(space: ParameterSpace) -> int:
    return space.n_bits


def normalize(space: ParameterSpace, v: TestVector) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(bits, unit)`` for a test vector."""
    space.check(v)
    bits: list[int] = []
    for p in space.discrete:
        bits.extend(p.encode(v.discrete[p.name]))
    unit = [p.to_unit(v.continuous[p.name]) for p in space.continuous]
    return np.array(bits, dtype=np.uint8), np.array(unit, dtype=float)


def denormalize(space: ParameterSpace, bits: Sequence[int], unit: Sequence[float]) -> TestVector:
    if len(bits) != space.n_bits:
        raise DomainError(f"expected {space.n_bits} bits, got {len(bits)}")
    if len(unit) != len(space.continuous):
        raise DomainError(f"expected {len(space.continuous)} unit coordinates, got {len(unit)}")
    discrete = {}
    pos = 0
    for p in space.discrete:
        w = p.bit_width
        discrete[p.name] = p.decode([int(b) for b in bits[pos:pos + w]])
        pos += w
    continuous = {p.name: p.from_unit(float(u)) for p, u in zip(space.continuous, unit)}
    return TestVector(discrete=discrete, continuous=continuous)
