"""Prefix density statistics for sets of natural numbers.

Everything here is finite: a set is materialized up to a horizon and the
reported quantities are exact rationals computed over a prefix.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable

import numpy as np


class HorizonError(ValueError):
    """A query reached past the materialized horizon."""

    def __init__(self, requested: int, horizon: int, what: str = "query"):
        super().__init__(f"{what} at {requested} exceeds horizon {horizon}")
        self.requested = requested
        self.horizon = horizon


@dataclass(frozen=True)
class NatSet:
    """A strictly increasing set of naturals, exact up to ``horizon``."""

    elements: tuple[int, ...]
    horizon: int

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be non-negative")
        arr = np.asarray(self.elements, dtype=np.int64)
        if arr.size:
            if arr[0] < 1:
                raise ValueError("elements must be >= 1")
            if arr[-1] > self.horizon:
                raise ValueError(
                    f"element {int(arr[-1])} exceeds horizon {self.horizon}")
            if arr.size > 1 and not np.all(np.diff(arr) > 0):
                raise ValueError("elements must be strictly increasing")

    @classmethod
    def from_iterable(cls, values: Iterable[int], horizon: int) -> "NatSet":
        return cls(tuple(sorted({int(v) for v in values})), int(horizon))

    @classmethod
    def from_array(cls, values, horizon: int) -> "NatSet":
        arr = np.unique(np.asarray(values, dtype=np.int64))
        return cls(tuple(int(v) for v in arr), int(horizon))

    @classmethod
    def from_predicate(cls, pred: Callable[[int], bool], horizon: int) -> "NatSet":
        return cls(tuple(n for n in range(1, horizon + 1) if pred(n)), horizon)

    @classmethod
    def naturals(cls, horizon: int) -> "NatSet":
        return cls(tuple(range(1, horizon + 1)), horizon)

    @classmethod
    def interval(cls, lo: int, hi: int, horizon: int) -> "NatSet":
        return cls(tuple(range(max(lo, 1), min(hi, horizon) + 1)), horizon)

    @classmethod
    def empty(cls, horizon: int) -> "NatSet":
        return cls((), horizon)

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.elements, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, n) -> bool:
        n = int(n)
        if n > self.horizon:
            raise HorizonError(n, self.horizon, "membership")
        i = bisect.bisect_left(self.elements, n)
        return i < len(self.elements) and self.elements[i] == n

    def min(self) -> int | None:
        return self.elements[0] if self.elements else None

    def count_upto(self, n: int) -> int:
        if n > self.horizon:
            raise HorizonError(n, self.horizon, "prefix count")
        return bisect.bisect_right(self.elements, n)

    def indicator(self, n: int | None = None) -> np.ndarray:
        """Boolean array ``ind`` of length n+1 with ``ind[k]`` true iff k is in the set."""
        n = self.horizon if n is None else n
        if n > self.horizon:
            raise HorizonError(n, self.horizon, "indicator")
        ind = np.zeros(n + 1, dtype=bool)
        arr = self.array
        ind[arr[arr <= n]] = True
        return ind

    def truncate(self, n: int) -> "NatSet":
        n = min(n, self.horizon)
        return NatSet(self.elements[: bisect.bisect_right(self.elements, n)], n)

    def restrict(self, lo: int, hi: int) -> "NatSet":
        i = bisect.bisect_left(self.elements, lo)
        k = bisect.bisect_right(self.elements, hi)
        return NatSet(self.elements[i:k], self.horizon)

    def with_horizon(self, horizon: int) -> "NatSet":
        return NatSet(self.elements, horizon)

    def union(self, other: "NatSet") -> "NatSet":
        h = min(self.horizon, other.horizon)
        return NatSet.from_array(
            np.concatenate([self.truncate(h).array, other.truncate(h).array]), h)

    def intersection(self, other: "NatSet") -> "NatSet":
        h = min(self.horizon, other.horizon)
        a, b = self.truncate(h).array, other.truncate(h).array
        return NatSet.from_array(a[np.isin(a, b)], h)

    def difference(self, other: "NatSet") -> "NatSet":
        a = self.array
        keep = ~np.isin(a, other.array)
        return NatSet.from_array(a[keep], self.horizon)

    def issubset(self, other: "NatSet") -> bool:
        return bool(np.all(np.isin(self.array, other.array)))

    # serialization

    def to_text(self) -> str:
        lines = [f"# horizon {self.horizon}"]
        lines.extend(str(n) for n in self.elements)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, horizon: int | None = None) -> "NatSet":
        values = []
        declared = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "horizon":
                    declared = int(parts[1])
                continue
            values.append(int(line))
        if horizon is None:
            horizon = declared if declared is not None else max(values, default=0)
        return cls.from_iterable(values, horizon)

    def to_json(self) -> str:
        return json.dumps(list(self.elements))

    @classmethod
    def from_json(cls, text: str, horizon: int | None = None) -> "NatSet":
        data = json.loads(text)
        if isinstance(data, dict):
            horizon = data.get("horizon", horizon)
            data = data["elements"]
        if not isinstance(data, list):
            raise ValueError("expected a JSON array of naturals")
        values = [int(v) for v in data]
        if horizon is None:
            horizon = max(values, default=0)
        return cls.from_iterable(values, horizon)


def prefix_counts(A: NatSet, N: int) -> int:
    """Exact ``|A ∩ [1, N]|``."""
    return A.count_upto(N)


def _as_float(q: Fraction) -> float:
    return q.numerator / q.denominator


@dataclass(frozen=True)
class DensityReport:
    prefix_lower: Fraction
    prefix_upper: Fraction
    prefix_banach: Fraction
    horizon: int
    window_ladder: tuple[tuple[int, int], ...]
    tail_start: int

    def to_dict(self) -> dict:
        return {
            "prefix_lower": _as_float(self.prefix_lower),
            "prefix_upper": _as_float(self.prefix_upper),
            "prefix_banach": _as_float(self.prefix_banach),
            "horizon": self.horizon,
            "window_ladder": [list(p) for p in self.window_ladder],
            "tail_start": self.tail_start,
            "exact": {
                "prefix_lower": str(self.prefix_lower),
                "prefix_upper": str(self.prefix_upper),
                "prefix_banach": str(self.prefix_banach),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "DensityReport":
        exact = data.get("exact", {})

        def q(name):
            return Fraction(exact[name]) if name in exact else Fraction(data[name])

        return cls(q("prefix_lower"), q("prefix_upper"), q("prefix_banach"),
                   int(data["horizon"]),
                   tuple((int(a), int(b)) for a, b in data["window_ladder"]),
                   int(data.get("tail_start", 1)))


def window_ladder_lengths(N: int, min_length: int | None = None) -> list[int]:
    """Lengths ``ceil(N / 2^k)`` down to ``min_length`` (default ``ceil(N/64)``)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if min_length is None:
        min_length = -(-N // 64)
    min_length = max(1, min_length)
    out = []
    k = 0
    while True:
        L = -(-N // (1 << k))
        if L < min_length:
            break
        if not out or out[-1] != L:
            out.append(L)
        if L == 1:
            break
        k += 1
    return out


def _exact_extreme(counts: np.ndarray, lengths: np.ndarray, largest: bool) -> Fraction:
    # locate by floating point, then settle near-ties exactly by cross-multiplying
    ratios = counts / lengths
    i = int(np.argmax(ratios) if largest else np.argmin(ratios))
    c0, l0 = int(counts[i]), int(lengths[i])
    lhs = counts.astype(object) * l0
    rhs = lengths.astype(object) * c0
    better = (lhs > rhs) if largest else (lhs < rhs)
    best = Fraction(c0, l0)
    if better.any():
        cand = [Fraction(int(c), int(L)) for c, L in zip(counts[better], lengths[better])]
        best = max(cand) if largest else min(cand)
    return best


def sliding_window_max(A: NatSet, N: int, L: int) -> int:
    """Largest ``|A ∩ [a, a+L-1]|`` over windows inside ``[1, N]``."""
    prefix = np.concatenate([[0], np.cumsum(A.indicator(N)[1:], dtype=np.int64)])
    return int(np.max(prefix[L:] - prefix[: N - L + 1]))


def density_report(A: NatSet, N: int, tail_start: int,
                   min_window: int | None = None) -> DensityReport:
    if N > A.horizon:
        raise HorizonError(N, A.horizon, "density report")
    if tail_start < 1 or tail_start >= N:
        raise ValueError(f"empty range: need 1 <= tail_start < N, got tail_start={tail_start}, N={N}")
    ind = A.indicator(N)
    prefix = np.concatenate([[0], np.cumsum(ind[1:], dtype=np.int64)])
    Ms = np.arange(tail_start, N + 1, dtype=np.int64)
    counts = prefix[tail_start:]
    lower = _exact_extreme(counts, Ms, largest=False)
    upper = _exact_extreme(counts, Ms, largest=True)
    ladder = []
    banach = Fraction(0)
    for L in window_ladder_lengths(N, min_window):
        best = int(np.max(prefix[L:] - prefix[: N - L + 1]))
        ladder.append((L, best))
        banach = max(banach, Fraction(best, L))
    return DensityReport(lower, upper, banach, N, tuple(ladder), tail_start)


def banach_density_oracle(A: NatSet, N: int, min_length: int = 1,
                          lengths: Iterable[int] | None = None) -> Fraction:
    """Brute-force best window ratio.

    Every window ``[a, a+L-1] ⊆ [1, N]`` is counted directly against the sorted
    elements, independently of the prefix-sum scan in ``density_report``.  With
    ``min_length = 1`` any non-empty set scores 1 through a single-point window,
    which is why the ladder in ``density_report`` starts higher.
    """
    if N > A.horizon:
        raise HorizonError(N, A.horizon, "oracle")
    if N < 1:
        return Fraction(0)
    elems = A.truncate(N).array
    if lengths is None:
        lengths = range(max(1, min_length), N + 1)
    best = Fraction(0)
    for L in lengths:
        if L < 1 or L > N:
            continue
        starts = np.arange(1, N - L + 2, dtype=np.int64)
        hi = np.searchsorted(elems, starts + L - 1, side="right")
        lo = np.searchsorted(elems, starts, side="left")
        c = int(np.max(hi - lo)) if starts.size else 0
        best = max(best, Fraction(c, L))
    return best


def relative_drift(a: Fraction | float, b: Fraction | float) -> float:
    """``|a - b| / max(a, b)``; zero when both vanish."""
    a, b = float(a), float(b)
    top = max(a, b)
    return 0.0 if top == 0 else abs(a - b) / top


__all__ = [
    "HorizonError", "NatSet", "DensityReport", "prefix_counts", "density_report",
    "banach_density_oracle", "window_ladder_lengths", "sliding_window_max",
    "relative_drift",
]
