"""A tick-synchronous stream engine.

Every stream carries at most one event per tick.  ``StreamGraph.advance``
runs one propagation pass over all streams in a deterministic topological
order (creation order, adjusted only by explicit ``bind`` edges), so all
consequences of an input are visible within the same tick.  Streams are
finite: ``StreamGraph.complete`` ends every stream and lets completion-time
operators (``default_if_empty``, ``is_empty``, ``last``) emit.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from typing import Any, Callable, Iterable


class _NoEvent:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NOEVENT"

    def __bool__(self):
        return False


NOEVENT = _NoEvent()


class GraphError(RuntimeError):
    """Invalid graph construction (cross-graph use, cycles)."""


class UsageError(RuntimeError):
    """Invalid driving of a graph (repeated tick, input to a derived stream)."""


class Stream:
    op = "stream"

    def __init__(self, graph: "StreamGraph", parents: Iterable["Stream"] = (), name: str | None = None):
        parents = tuple(parents)
        for p in parents:
            if not isinstance(p, Stream):
                raise GraphError(f"expected a Stream, got {type(p).__name__}")
            if p.graph is not graph:
                raise GraphError("streams from different graphs cannot be combined")
        self.graph = graph
        self.parents = parents
        self.completed = False
        self.fired = 0
        self.index = graph._register(self)
        self.name = name or f"{self.op}#{self.index}"

    def named(self, name: str) -> "Stream":
        self.name = name
        self.graph._plan = None
        return self

    def __repr__(self):
        return f"<Stream {self.name}>"

    # subclasses override
    def step(self, events: list, final: bool):
        if final or all(p.completed for p in self.parents) and self.parents:
            self.completed = True
        return events[0] if events else NOEVENT

    def _parents_done(self) -> bool:
        return bool(self.parents) and all(p.completed for p in self.parents)

    # -- combinators ---------------------------------------------------------

    def map(self, f: Callable) -> "Stream":
        return _Map(self, f)

    def filter(self, pred: Callable) -> "Stream":
        return _Filter(self, pred)

    def zip(self, other: "Stream") -> "Stream":
        return _Zip(self, other)

    def combine_latest(self, other: "Stream", f: Callable = lambda a, b: (a, b)) -> "Stream":
        return _CombineLatest(self, other, f)

    def take(self, n: int) -> "Stream":
        return _Take(self, n)

    def skip(self, n: int) -> "Stream":
        return _Skip(self, n)

    def skip_until(self, trigger: "Stream") -> "Stream":
        return _SkipUntil(self, trigger)

    def take_until(self, stop: "Stream") -> "Stream":
        return _TakeUntil(self, stop)

    def concat(self, other: "Stream") -> "Stream":
        return _Concat(self, other)

    def first(self) -> "Stream":
        return _Take(self, 1)

    def last(self) -> "Stream":
        return _Last(self)

    def scan(self, f: Callable, seed: Any) -> "Stream":
        return _Scan(self, f, seed)

    def sum(self) -> "Stream":
        return _Scan(self, lambda acc, x: acc + x, 0)

    def min(self) -> "Stream":
        return _Scan(self, lambda acc, x: x if acc is None or x < acc else acc, None)

    def max(self) -> "Stream":
        return _Scan(self, lambda acc, x: x if acc is None or x > acc else acc, None)

    def with_latest_from(self, other: "Stream", f: Callable, default: Any = NOEVENT) -> "Stream":
        """Fires when this stream fires, pairing it with the latest ``other``."""
        return _WithLatest(self, other, f, default)

    def default_if_empty(self, value: Any) -> "Stream":
        return _DefaultIfEmpty(self, value)

    def is_empty(self) -> "Stream":
        return _IsEmpty(self)

    def for_each(self, action: Callable) -> "Stream":
        return _ForEach(self, action)


class Source(Stream):
    """An externally driven stream (inputs, the tick stream)."""

    op = "source"

    def step(self, events, final):
        if final:
            self.completed = True
            return NOEVENT
        return self.graph._inputs.get(self, NOEVENT)


class _Tick(Source):
    op = "tick"

    def step(self, events, final):
        if final:
            self.completed = True
            return NOEVENT
        return self.graph.tick_index


class Register(Stream):
    """Delays another stream by one tick (breaks feedback loops)."""

    op = "register"

    def __init__(self, graph, initial=NOEVENT, name=None):
        super().__init__(graph, (), name)
        self._pending = initial
        self.source: Stream | None = None

    def feed_from(self, src: Stream) -> "Register":
        if src.graph is not self.graph:
            raise GraphError("streams from different graphs cannot be combined")
        if self.source is not None:
            raise GraphError(f"{self.name} already has a source")
        self.source = src
        self.graph._plan = None
        return self

    def step(self, events, final):
        if final:
            self.completed = True
            return NOEVENT
        out, self._pending = self._pending, NOEVENT
        return out

    def _latch(self, value):
        if value is not NOEVENT:
            self._pending = value


class _Map(Stream):
    op = "map"

    def __init__(self, src, f):
        super().__init__(src.graph, (src,))
        self.f = f

    def step(self, events, final):
        (e,) = events
        if self.parents[0].completed:
            self.completed = True
        return NOEVENT if e is NOEVENT else self.f(e)


class _Filter(Stream):
    op = "filter"

    def __init__(self, src, pred):
        super().__init__(src.graph, (src,))
        self.pred = pred

    def step(self, events, final):
        (e,) = events
        if self.parents[0].completed:
            self.completed = True
        return e if e is not NOEVENT and self.pred(e) else NOEVENT


class _ForEach(Stream):
    op = "for_each"

    def __init__(self, src, action):
        super().__init__(src.graph, (src,))
        self.action = action

    def step(self, events, final):
        (e,) = events
        if self.parents[0].completed:
            self.completed = True
        if e is not NOEVENT:
            self.action(e)
        return e


class _Scan(Stream):
    op = "scan"

    def __init__(self, src, f, seed):
        super().__init__(src.graph, (src,))
        self.f = f
        self.acc = seed

    def step(self, events, final):
        (e,) = events
        if self.parents[0].completed:
            self.completed = True
        if e is NOEVENT:
            return NOEVENT
        self.acc = self.f(self.acc, e)
        return self.acc


class _Take(Stream):
    op = "take"

    def __init__(self, src, n):
        super().__init__(src.graph, (src,))
        self.n = n
        self.seen = 0
        if n <= 0:
            self.completed = True

    def step(self, events, final):
        if self.completed:
            return NOEVENT
        (e,) = events
        out = NOEVENT
        if e is not NOEVENT:
            self.seen += 1
            out = e
        if self.seen >= self.n or self.parents[0].completed:
            self.completed = True
        return out


class _Skip(Stream):
    op = "skip"

    def __init__(self, src, n):
        super().__init__(src.graph, (src,))
        self.n = n
        self.seen = 0

    def step(self, events, final):
        (e,) = events
        if self.parents[0].completed:
            self.completed = True
        if e is NOEVENT:
            return NOEVENT
        self.seen += 1
        return e if self.seen > self.n else NOEVENT


class _SkipUntil(Stream):
    """Passes events strictly after the tick on which ``trigger`` first fires."""

    op = "skip_until"

    def __init__(self, src, trigger):
        super().__init__(src.graph, (src, trigger))
        self.open = False

    def step(self, events, final):
        e, t = events
        if self.parents[0].completed:
            self.completed = True
        out = e if self.open else NOEVENT
        if t is not NOEVENT:
            self.open = True
        return out


class _TakeUntil(Stream):
    """Passes events strictly before the tick on which ``stop`` first fires."""

    op = "take_until"

    def step(self, events, final):
        if self.completed:
            return NOEVENT
        e, s = events
        if s is not NOEVENT or self.parents[0].completed:
            self.completed = True
            if s is not NOEVENT:
                return NOEVENT
        return e

    def __init__(self, src, stop):
        super().__init__(src.graph, (src, stop))


class _Zip(Stream):
    op = "zip"

    def __init__(self, a, b):
        super().__init__(a.graph, (a, b))
        self.qa: deque = deque()
        self.qb: deque = deque()

    def step(self, events, final):
        ea, eb = events
        if ea is not NOEVENT:
            self.qa.append(ea)
        if eb is not NOEVENT:
            self.qb.append(eb)
        out = NOEVENT
        if self.qa and self.qb:
            out = (self.qa.popleft(), self.qb.popleft())
        a, b = self.parents
        if (a.completed and not self.qa) or (b.completed and not self.qb):
            self.completed = True
        return out


class _CombineLatest(Stream):
    op = "combine_latest"

    def __init__(self, a, b, f):
        super().__init__(a.graph, (a, b))
        self.f = f
        self.la = NOEVENT
        self.lb = NOEVENT

    def step(self, events, final):
        ea, eb = events
        if ea is not NOEVENT:
            self.la = ea
        if eb is not NOEVENT:
            self.lb = eb
        if self._parents_done():
            self.completed = True
        if (ea is NOEVENT and eb is NOEVENT) or self.la is NOEVENT or self.lb is NOEVENT:
            return NOEVENT
        return self.f(self.la, self.lb)


class _WithLatest(Stream):
    op = "with_latest_from"

    def __init__(self, a, b, f, default):
        super().__init__(a.graph, (a, b))
        self.f = f
        self.latest = default

    def step(self, events, final):
        ea, eb = events
        if eb is not NOEVENT:
            self.latest = eb
        if self.parents[0].completed:
            self.completed = True
        if ea is NOEVENT or self.latest is NOEVENT:
            return NOEVENT
        return self.f(ea, self.latest)


class _Concat(Stream):
    """Events of ``a``; after ``a`` completes, the events of ``b`` in order from
    the start of the run, one per tick."""

    op = "concat"

    def __init__(self, a, b):
        super().__init__(a.graph, (a, b))
        self.q: deque = deque()

    def step(self, events, final):
        ea, eb = events
        a, b = self.parents
        if eb is not NOEVENT:
            self.q.append(eb)
        if final:
            self.completed = True
        if ea is not NOEVENT:
            return ea
        if a.completed and self.q and not final:
            out = self.q.popleft()
            if b.completed and not self.q:
                self.completed = True
            return out
        if a.completed and b.completed and not self.q:
            self.completed = True
        return NOEVENT


class _Last(Stream):
    op = "last"

    def __init__(self, src):
        super().__init__(src.graph, (src,))
        self.value = NOEVENT

    def step(self, events, final):
        (e,) = events
        if e is not NOEVENT:
            self.value = e
        if self.parents[0].completed and not self.completed:
            self.completed = True
            return self.value
        return NOEVENT


class _DefaultIfEmpty(Stream):
    op = "default_if_empty"

    def __init__(self, src, value):
        super().__init__(src.graph, (src,))
        self.value = value
        self.any = False

    def step(self, events, final):
        (e,) = events
        if self.completed:
            return NOEVENT
        if e is not NOEVENT:
            self.any = True
        if self.parents[0].completed:
            self.completed = True
            if not self.any:
                return self.value
        return e


class _IsEmpty(Stream):
    op = "is_empty"

    def __init__(self, src):
        super().__init__(src.graph, (src,))

    def step(self, events, final):
        if self.completed:
            return NOEVENT
        (e,) = events
        if e is not NOEVENT:
            self.completed = True
            return False
        if self.parents[0].completed:
            self.completed = True
            return True
        return NOEVENT


class StreamGraph:
    def __init__(self, record: bool = True):
        self.record = record
        self._plan: list[tuple] | None = None
        self._nodes: list[Stream] = []
        self._order: list[Stream] | None = None
        self._extra_edges: list[tuple[Stream, Stream]] = []
        self._inputs: dict[Stream, Any] = {}
        self._current: dict[int, Any] = {}
        self.tick_index: int | None = None
        self.finished = False
        self.log: list[tuple[int, str, Any]] = []
        self._tick = _Tick(self, name="tick")

    def _register(self, s: Stream) -> int:
        if self.finished:
            raise GraphError("graph already completed")
        self._nodes.append(s)
        self._order = None
        self._plan = None
        return len(self._nodes) - 1

    @property
    def tick(self) -> Stream:
        return self._tick

    def source(self, name: str | None = None) -> Source:
        return Source(self, name=name)

    def register(self, initial=NOEVENT, name: str | None = None) -> Register:
        return Register(self, initial, name)

    def bind(self, target: Source, src: Stream) -> None:
        """Drive the input stream ``target`` from ``src`` within the same tick."""
        if target.graph is not self or src.graph is not self:
            raise GraphError("streams from different graphs cannot be combined")
        if not isinstance(target, Source) or isinstance(target, _Tick):
            raise GraphError(f"{target.name} is not an input stream")
        self._extra_edges.append((src, target))
        self._order = None
        self._plan = None
        try:
            self._topo()
        except GraphError:
            self._extra_edges.pop()
            self._order = None
            raise

    def _topo(self) -> list[Stream]:
        if self._order is not None:
            return self._order
        n = len(self._nodes)
        children: list[list[int]] = [[] for _ in range(n)]
        indeg = [0] * n
        for s in self._nodes:
            for p in s.parents:
                children[p.index].append(s.index)
                indeg[s.index] += 1
        for a, b in self._extra_edges:
            children[a.index].append(b.index)
            indeg[b.index] += 1
        ready = [i for i in range(n) if indeg[i] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            i = heapq.heappop(ready)
            order.append(self._nodes[i])
            for c in children[i]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != n:
            raise GraphError("stream dependencies form a cycle")
        self._order = order
        return order

    def _compile(self) -> list[tuple]:
        if self._plan is None or self._order is None:
            bound = {b.index: a.index for a, b in self._extra_edges}
            self._plan = [
                (s, tuple(p.index for p in s.parents), bound.get(s.index, -1), isinstance(s, _Concat))
                for s in self._topo()
            ]
            self._registers = [s for s in self._nodes if isinstance(s, Register) and s.source is not None]
            self._by_name = {s.name: s for s in self._nodes}
        return self._plan

    def _propagate(self, final: bool) -> dict[str, Any]:
        plan = self._compile()
        cur = self._current = {}
        get = cur.get
        out: dict[str, Any] = {}
        tick = self.tick_index
        log = self.log if self.record else None
        inputs = self._inputs
        for s, parents, src, concat in plan:
            if src >= 0 and not final:
                ev = get(src, NOEVENT)
                if ev is not NOEVENT:
                    inputs[s] = ev
            if s.completed and not concat:
                continue
            ev = s.step([get(i, NOEVENT) for i in parents], final)
            if ev is not NOEVENT:
                cur[s.index] = ev
                s.fired += 1
                out[s.name] = ev
                if log is not None:
                    log.append((tick, s.name, ev))
        for r in self._registers:
            r._latch(get(r.source.index, NOEVENT))
        return out

    def advance(self, tick_index: int, inputs: dict | None = None) -> dict[str, Any]:
        """Run one propagation pass for ``tick_index``; returns the events
        fired this tick keyed by stream name."""
        if self.finished:
            raise UsageError("graph already completed")
        if self.tick_index is not None and tick_index <= self.tick_index:
            raise UsageError(f"tick {tick_index} already advanced (last was {self.tick_index})")
        resolved: dict[Stream, Any] = {}
        self._compile()
        by_name = self._by_name
        for key, value in (inputs or {}).items():
            s = by_name.get(key) if isinstance(key, str) else key
            if s is None or s.graph is not self:
                raise UsageError(f"unknown input stream {key!r}")
            if type(s) is not Source:
                raise UsageError(f"{s.name} is not an external input stream")
            resolved[s] = value
        self.tick_index = tick_index
        self._inputs = resolved
        return self._propagate(final=False)

    def complete(self) -> dict[str, Any]:
        """End every stream; returns events emitted at completion."""
        if self.finished:
            raise UsageError("graph already completed")
        self.tick_index = (self.tick_index + 1) if self.tick_index is not None else 0
        self._inputs = {}
        out = self._propagate(final=True)
        self.finished = True
        return out

    def event(self, stream: Stream) -> Any:
        """The event ``stream`` fired during the most recent pass, or NOEVENT."""
        return self._current.get(stream.index, NOEVENT)

    def log_jsonl(self) -> str:
        lines = [
            json.dumps({"tick": t, "stream": name, "value": _jsonable(v)}, sort_keys=True)
            for t, name, v in self.log
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "tolist"):
        return v.tolist()
    if isinstance(v, (str, int, float, bool)) or v is None:
        return v
    return repr(v)
