"""Coverage of a test set: k-wise coverage of discrete bits and dispersion of
continuous points (largest empty axis-parallel box in the unit cube)."""

from __future__ import annotations

import bisect
import heapq
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .param_space import DomainError
from .sampler import SampleSet


@dataclass
class KwiseReport:
    k: int
    n_bits: int
    total_combinations: int
    covered: int
    missing: list[tuple[tuple[int, ...], str]] = field(default_factory=list)

    @property
    def is_covering_family(self) -> bool:
        return not self.missing

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "n_bits": self.n_bits,
            "total_combinations": self.total_combinations,
            "covered": self.covered,
            "missing": [{"positions": list(p), "pattern": pat} for p, pat in self.missing],
            "is_covering_family": self.is_covering_family,
        }


@dataclass
class DispersionResult:
    value: float
    low: tuple[float, ...]
    high: tuple[float, ...]
    method: str  # exact | estimated
    sample_budget: int | None = None
    note: str = ""

    @property
    def witness_volume(self) -> float:
        return float(np.prod(np.subtract(self.high, self.low)))

    def to_json(self) -> dict:
        out = {
            "value": self.value,
            "witness_box": {"low": list(self.low), "high": list(self.high)},
            "method": self.method,
        }
        if self.method == "estimated":
            out["sample_budget"] = self.sample_budget
            out["note"] = self.note
        return out


def kwise_coverage(bits, k: int) -> KwiseReport:
    """Exhaustive k-wise coverage of a list of binary vectors."""
    arr = np.asarray(bits, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DomainError("need a non-empty list of bit vectors")
    n = arr.shape[1]
    if not 1 <= k <= n:
        raise DomainError(f"k must be in [1, {n}], got {k}")
    weights = 1 << np.arange(k - 1, -1, -1)
    covered = 0
    missing = []
    for combo in combinations(range(n), k):
        seen = np.zeros(1 << k, dtype=bool)
        seen[arr[:, combo] @ weights] = True
        covered += int(seen.sum())
        for pat in np.flatnonzero(~seen):
            missing.append((combo, format(int(pat), f"0{k}b")))
    total = math.comb(n, k) * (1 << k)
    return KwiseReport(k=k, n_bits=n, total_combinations=total, covered=covered, missing=missing)


def covering_family_size(k: int, n: int, delta: float) -> int:
    """Number of uniform random {0,1}^n vectors that form a k-wise covering
    family with probability at least ``1 - delta`` (natural logarithms)."""
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    if n < 2 or not 1 <= k <= n:
        raise DomainError(f"need n >= 2 and 1 <= k <= n, got k={k}, n={n}")
    return math.ceil((1 << k) * (k * math.log(n) - math.log(delta)))


def _as_points(points, d: int | None = None) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, d or 0)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if d == 1 else pts.reshape(1, -1)
    if d is not None and pts.shape[1] != d:
        raise DomainError(f"expected {d}-dimensional points, got {pts.shape[1]}")
    if np.any(pts < 0.0) or np.any(pts > 1.0) or not np.all(np.isfinite(pts)):
        raise DomainError("points must lie in the closed unit cube")
    return pts


def _exact_1d(xs: np.ndarray) -> DispersionResult:
    grid = np.unique(np.concatenate([[0.0, 1.0], xs]))
    gaps = np.diff(grid)
    i = int(np.argmax(gaps))
    return DispersionResult(float(gaps[i]), (float(grid[i]),), (float(grid[i + 1]),), "exact")


def _exact_2d(pts: np.ndarray) -> DispersionResult:
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    xs = pts[order, 0].tolist()
    ys = pts[order, 1].tolist()
    n = len(xs)
    best = (0.0, 0.0, 0.0, 0.0, 0.0)
    for left in [0.0, *sorted(set(xs))]:
        # sweep the right edge over point x-coordinates, keeping the sorted
        # y-values of points strictly inside (left, right) and their gaps
        ylist = [0.0, 1.0]
        heap = [(-1.0, 0.0, 1.0)]
        alive = {(0.0, 1.0)}
        j = bisect.bisect_right(xs, left)
        while True:
            right = xs[j] if j < n else 1.0
            while (heap[0][1], heap[0][2]) not in alive:
                heapq.heappop(heap)
            g, lo, hi = heap[0]
            vol = (right - left) * (-g)
            if vol > best[0]:
                best = (vol, left, lo, right, hi)
            if j >= n:
                break
            while j < n and xs[j] == right:
                y = ys[j]
                pos = bisect.bisect_left(ylist, y)
                if ylist[pos] != y:
                    a, b = ylist[pos - 1], ylist[pos]
                    alive.discard((a, b))
                    ylist.insert(pos, y)
                    alive.add((a, y))
                    alive.add((y, b))
                    heapq.heappush(heap, (a - y, a, y))
                    heapq.heappush(heap, (y - b, y, b))
                j += 1
    vol, x0, y0, x1, y1 = best
    return DispersionResult(vol, (x0, y0), (x1, y1), "exact")


def dispersion_exact(points, d: int | None = None) -> DispersionResult:
    """Largest axis-parallel box in [0,1]^d with no point in its interior, d <= 2."""
    pts = _as_points(points, d)
    if d is None:
        d = pts.shape[1]
    if d not in (1, 2):
        raise DomainError(f"exact dispersion is implemented for d in {{1, 2}}, got {d}")
    if len(pts) == 0:
        return DispersionResult(1.0, (0.0,) * d, (1.0,) * d, "exact")
    if d == 1:
        return _exact_1d(pts[:, 0])
    return _exact_2d(pts)


def _grow(lo, hi, pts):
    """Push every face of each box outward until it meets a point or the cube."""
    P, d = lo.shape
    for j in range(d):
        others = [i for i in range(d) if i != j]
        if others:
            inside = np.all(
                (pts[None, :, others] > lo[:, None, others])
                & (pts[None, :, others] < hi[:, None, others]),
                axis=2,
            )
        else:
            inside = np.ones((P, len(pts)), dtype=bool)
        pj = pts[None, :, j]
        above = inside & (pj >= hi[:, j:j + 1])
        below = inside & (pj <= lo[:, j:j + 1])
        hi[:, j] = np.min(np.where(above, pj, 1.0), axis=1)
        lo[:, j] = np.max(np.where(below, pj, 0.0), axis=1)
    return lo, hi


def dispersion_estimate(points, d: int, probe_budget: int = 20000, seed: int = 0,
                        chunk: int = 2000) -> DispersionResult:
    """Randomized lower bound on dispersion for any dimension.

    Each probe starts from the whole cube around a random centre, and cuts
    away every interior point (nearest first) along the axis that keeps the
    largest volume; the empty box is then grown to be maximal.  The best box
    over all probes is returned, so the value never exceeds the true
    dispersion.
    """
    pts = _as_points(points, d)
    if d < 1:
        raise DomainError("dimension must be >= 1")
    note = f"largest of {probe_budget} greedy maximal empty boxes (lower bound)"
    if len(pts) == 0:
        return DispersionResult(1.0, (0.0,) * d, (1.0,) * d, "estimated", probe_budget, note)
    pts = np.unique(pts, axis=0)
    rng = np.random.default_rng(seed)
    best_vol, best_lo, best_hi = -1.0, None, None
    remaining = probe_budget
    while remaining > 0:
        P = min(chunk, remaining)
        remaining -= P
        centres = rng.random((P, d))
        lo = np.zeros((P, d))
        hi = np.ones((P, d))
        dist = np.max(np.abs(pts[None, :, :] - centres[:, None, :]), axis=2)
        order = np.argsort(dist, axis=1, kind="stable")
        rows = np.arange(P)
        for r in range(len(pts)):
            p = pts[order[:, r]]
            inside = np.all((p > lo) & (p < hi), axis=1)
            if not inside.any():
                continue
            width = hi - lo
            upper = p > centres
            kept = np.where(upper, p - lo, hi - p)
            j = np.argmax(kept / width, axis=1)
            sel = rows[inside]
            js = j[inside]
            up = upper[sel, js]
            hi[sel[up], js[up]] = p[sel[up], js[up]]
            lo[sel[~up], js[~up]] = p[sel[~up], js[~up]]
        lo, hi = _grow(lo, hi, pts)
        vol = np.prod(hi - lo, axis=1)
        i = int(np.argmax(vol))
        if vol[i] > best_vol:
            best_vol, best_lo, best_hi = float(vol[i]), lo[i].copy(), hi[i].copy()
    return DispersionResult(best_vol, tuple(map(float, best_lo)), tuple(map(float, best_hi)),
                            "estimated", probe_budget, note)


def box_is_empty(points, low, high) -> bool:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return True
    inside = np.all((pts > np.asarray(low)) & (pts < np.asarray(high)), axis=1)
    return not inside.any()


def k_epsilon_report(samples: SampleSet, k: int = 3, probe_budget: int = 20000, seed: int = 0):
    """k-wise report on the discrete bits and dispersion of the pooled
    continuous projection; either part is None when the space lacks it."""
    if len(samples) == 0:
        raise DomainError("k_epsilon_report needs at least one sample")
    space = samples.space
    kw = None
    if space.n_bits:
        kw = kwise_coverage(samples.bit_vectors(), k)
    disp = None
    d = len(space.continuous)
    if d:
        pts = np.unique(samples.unit_points(), axis=0)
        if d <= 2:
            disp = dispersion_exact(pts, d)
        else:
            disp = dispersion_estimate(pts, d, probe_budget, seed)
    return kw, disp
