"""Pseudo-shift operators on truncated sequence spaces.

A pseudo-shift moves coordinate ``f(j)`` to position ``j`` with weight
``w_{f(j)}``.  Weight products along an orbit of the index map are kept as
(log-magnitude, sign) pairs so that products like ``2**10000`` never get
materialized.  Coordinates are 1-based; operator powers start at 0.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .densities import HorizonError

LOG_FLOAT_MAX = math.log(sys.float_info.max)


class CoefficientOverflow(ArithmeticError):
    """A coefficient left the 64-bit float range; carries its natural log."""

    def __init__(self, log_abs: float, where=None):
        msg = f"coefficient overflow: log|c| = {log_abs!r}"
        if where is not None:
            msg += f" at {where}"
        super().__init__(msg)
        self.log_abs = log_abs
        self.where = where


@dataclass(frozen=True)
class LogProduct:
    """A signed real stored as ``sign * exp(log_abs)``."""

    log_abs: float = 0.0
    sign: int = 1

    @classmethod
    def one(cls) -> "LogProduct":
        return cls(0.0, 1)

    @classmethod
    def from_value(cls, x: float) -> "LogProduct":
        if x == 0:
            raise ValueError("zero has no log representation")
        return cls(math.log(abs(x)), 1 if x > 0 else -1)

    def __mul__(self, other: "LogProduct") -> "LogProduct":
        return LogProduct(self.log_abs + other.log_abs, self.sign * other.sign)

    def __truediv__(self, other: "LogProduct") -> "LogProduct":
        return LogProduct(self.log_abs - other.log_abs, self.sign * other.sign)

    def reciprocal(self) -> "LogProduct":
        return LogProduct(-self.log_abs, self.sign)

    def value(self) -> float:
        if self.log_abs > LOG_FLOAT_MAX:
            raise CoefficientOverflow(self.log_abs)
        return self.sign * math.exp(self.log_abs)

    def __float__(self) -> float:
        return self.value()


@dataclass(frozen=True)
class Space:
    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind == "lp":
            if self.p is None or self.p < 1:
                raise ValueError("lp needs an exponent p >= 1")
        elif self.kind == "c0":
            if self.p is not None:
                raise ValueError("c0 takes no exponent")
        else:
            raise ValueError(f"unknown space {self.kind!r}")

    @classmethod
    def lp(cls, p: float = 2.0) -> "Space":
        return cls("lp", float(p))

    @classmethod
    def c0(cls) -> "Space":
        return cls("c0")

    def to_config(self):
        return {"lp": self.p} if self.kind == "lp" else "c0"

    @classmethod
    def from_config(cls, data) -> "Space":
        if data == "c0":
            return cls.c0()
        if isinstance(data, dict) and "lp" in data:
            return cls.lp(data["lp"])
        raise ValueError(f"bad space config {data!r}")

    def __str__(self):
        return f"l^{self.p:g}" if self.kind == "lp" else "c0"


# ---------------------------------------------------------------- index maps

@dataclass(frozen=True, eq=False)
class IndexMap:
    """Strictly increasing ``f: N -> N`` with ``f(1) > 1``.

    Either affine, ``f(n) = n + step``, or given by a finite table
    ``f(n) = table[n - 1]``.
    """

    step: int | None = None
    table: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.step is None) == (self.table is None):
            raise ValueError("give exactly one of step or table")
        if self.step is not None:
            if int(self.step) != self.step or self.step < 1:
                raise ValueError("affine step must be a natural >= 1")
        else:
            t = self.table
            if not t:
                raise ValueError("empty table")
            if t[0] <= 1:
                raise ValueError("f(1) must exceed 1")
            if any(b <= a for a, b in zip(t, t[1:])):
                raise ValueError("index map must be strictly increasing")

    @classmethod
    def affine(cls, r: int = 1) -> "IndexMap":
        return cls(step=int(r))

    @classmethod
    def tabulated(cls, values: Sequence[int]) -> "IndexMap":
        return cls(table=tuple(int(v) for v in values))

    @property
    def is_affine(self) -> bool:
        return self.step is not None

    @property
    def horizon(self) -> int | None:
        return None if self.table is None else len(self.table)

    @cached_property
    def _table_array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64)

    def __call__(self, j: int) -> int:
        return self.iterate(1, j)

    def iterate(self, n: int, j: int) -> int:
        if n < 0 or j < 1:
            raise ValueError("need n >= 0 and j >= 1")
        if self.step is not None:
            return j + n * self.step
        for _ in range(n):
            if j > len(self.table):
                raise HorizonError(j, len(self.table), "index map")
            j = self.table[j - 1]
        return j

    def inverse_iterate(self, n: int, k: int) -> int | None:
        if n < 0:
            raise ValueError("need n >= 0")
        if self.step is not None:
            j = k - n * self.step
            return j if j >= 1 else None
        t = self._table_array
        for _ in range(n):
            i = int(np.searchsorted(t, k))
            if i >= t.size or t[i] != k:
                return None
            k = i + 1
        return k if k >= 1 else None

    def images(self, n: int, js) -> np.ndarray:
        js = np.asarray(js, dtype=np.int64)
        if self.step is not None:
            return js + n * self.step
        t = self._table_array
        cur = js.copy()
        for _ in range(n):
            if cur.size and cur.max() > t.size:
                raise HorizonError(int(cur.max()), int(t.size), "index map")
            cur = t[cur - 1]
        return cur

    def preimages(self, n: int, ks) -> np.ndarray:
        """Vectorized inverse iterate; entries with no preimage become 0."""
        ks = np.asarray(ks, dtype=np.int64)
        if self.step is not None:
            out = ks - n * self.step
            return np.where(out >= 1, out, 0)
        t = self._table_array
        cur = ks.copy()
        for _ in range(n):
            pos = np.searchsorted(t, cur)
            ok = (cur > 0) & (pos < t.size)
            ok[ok] = t[pos[ok]] == cur[ok]
            cur = np.where(ok, pos + 1, 0)
        return cur

    def to_config(self) -> dict:
        return {"affine": self.step} if self.step is not None else {"table": list(self.table)}

    @classmethod
    def from_config(cls, data: Mapping) -> "IndexMap":
        if "affine" in data:
            return cls.affine(data["affine"])
        if "table" in data:
            return cls.tabulated(data["table"])
        raise ValueError(f"bad index map config {data!r}")


def iterate(f: IndexMap, n: int, j: int) -> int:
    return f.iterate(n, j)


def inverse_iterate(f: IndexMap, n: int, k: int) -> int | None:
    return f.inverse_iterate(n, k)


# ------------------------------------------------------------------ weights

def _neumaier_cumsum(values: np.ndarray) -> np.ndarray:
    """Running sums with Neumaier compensation."""
    out = np.empty(values.size, dtype=np.float64)
    s = 0.0
    c = 0.0
    for i, v in enumerate(values.tolist()):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


@dataclass(frozen=True, eq=False)
class WeightSeq:
    """Signed, bounded, nonzero weights ``w_n``.

    Tables are stored as ``log|w_n|`` and ``sign(w_n)`` indexed by ``n``
    (slot 0 unused), so that tiny coupling weights survive without
    underflowing to zero.
    """

    kind: str
    const_log: float | None = None
    const_sign: int = 1
    log_table: np.ndarray | None = None
    sign_table: np.ndarray | None = None
    generator: str | None = None
    params: dict | None = field(default=None)

    @classmethod
    def constant(cls, c: float) -> "WeightSeq":
        if c == 0:
            raise ValueError("weights must be nonzero")
        return cls("constant", math.log(abs(c)), 1 if c > 0 else -1)

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "WeightSeq":
        """Weights ``w_1, w_2, ...`` given as plain floats."""
        vals = np.asarray(values, dtype=np.float64)
        if np.any(vals == 0) or not np.all(np.isfinite(vals)):
            raise ValueError("weights must be finite and nonzero")
        logs = np.concatenate([[0.0], np.log(np.abs(vals))])
        signs = np.concatenate([[1], np.where(vals < 0, -1, 1)]).astype(np.int8)
        return cls("tabulated", log_table=logs, sign_table=signs)

    @classmethod
    def from_logs(cls, log_abs: Sequence[float], signs: Sequence[int] | None = None,
                  generator: str | None = None, params: dict | None = None) -> "WeightSeq":
        """Weights ``w_1, w_2, ...`` given as ``log|w_n|`` and signs."""
        logs = np.asarray(log_abs, dtype=np.float64)
        if not np.all(np.isfinite(logs)):
            raise ValueError("log weights must be finite")
        sg = np.ones(logs.size, dtype=np.int8) if signs is None else np.asarray(signs, dtype=np.int8)
        if sg.shape != logs.shape or not np.all(np.abs(sg) == 1):
            raise ValueError("signs must be +1/-1 and match the table")
        kind = "generated" if generator else "tabulated"
        return cls(kind, log_table=np.concatenate([[0.0], logs]),
                   sign_table=np.concatenate([[1], sg]).astype(np.int8),
                   generator=generator, params=params)

    @property
    def horizon(self) -> int | None:
        return None if self.log_table is None else self.log_table.size - 1

    @cached_property
    def bound(self) -> float:
        if self.log_table is None:
            return math.exp(self.const_log)
        return math.exp(float(np.max(self.log_table[1:]))) if self.horizon else 0.0

    def _check(self, n):
        h = self.horizon
        if h is None:
            return
        top = int(np.max(n)) if np.ndim(n) else int(n)
        if top > h:
            raise HorizonError(top, h, "weight")
        low = int(np.min(n)) if np.ndim(n) else int(n)
        if low < 1:
            raise ValueError("weights are indexed from 1")

    def log_abs_at(self, n):
        self._check(n)
        if self.log_table is None:
            return np.full(np.shape(n), self.const_log) if np.ndim(n) else self.const_log
        out = self.log_table[n]
        return out if np.ndim(n) else float(out)

    def sign_at(self, n):
        self._check(n)
        if self.sign_table is None:
            return np.full(np.shape(n), self.const_sign, dtype=np.int8) if np.ndim(n) else self.const_sign
        out = self.sign_table[n]
        return out if np.ndim(n) else int(out)

    def value(self, n: int) -> float:
        return self.sign_at(n) * math.exp(self.log_abs_at(n))

    def values(self) -> np.ndarray:
        """Plain float values ``w_1..w_H`` (tiny weights may underflow to 0)."""
        if self.log_table is None:
            raise ValueError("constant weights have no table")
        return self.sign_table[1:] * np.exp(self.log_table[1:])

    def to_config(self) -> dict:
        if self.kind == "constant":
            return {"constant": self.const_sign * math.exp(self.const_log)}
        if self.generator and self.params is not None:
            return {"generator": self.generator, "params": self.params}
        vals = self.values()
        if np.all(vals != 0) and np.allclose(np.log(np.abs(vals)), self.log_table[1:], rtol=0, atol=0):
            return {"table": vals.tolist()}
        return {"log_table": self.log_table[1:].tolist(),
                "signs": self.sign_table[1:].astype(int).tolist()}

    @classmethod
    def from_config(cls, data: Mapping) -> "WeightSeq":
        if "constant" in data:
            return cls.constant(float(data["constant"]))
        if "table" in data:
            return cls.from_values(data["table"])
        if "log_table" in data:
            return cls.from_logs(data["log_table"], data.get("signs"))
        if "generator" in data:
            from .counterexamples import weights_from_generator
            return weights_from_generator(data["generator"], data.get("params", {}))
        raise ValueError(f"bad weight config {data!r}")


# ------------------------------------------------------------- pseudo-shift

@dataclass(frozen=True, eq=False)
class PseudoShift:
    """The operator ``T e_{f(j)} = w_{f(j)} e_j`` (and ``T e_k = 0`` off the range of f)."""

    index_map: IndexMap
    weights: WeightSeq
    space: Space = field(default_factory=Space.lp)

    @classmethod
    def weighted_shift(cls, weights: WeightSeq, space: Space | None = None) -> "PseudoShift":
        return cls(IndexMap.affine(1), weights, space or Space.lp())

    @classmethod
    def scaled_power(cls, scale: float, power: int, space: Space | None = None) -> "PseudoShift":
        """``scale * B**power`` for the unweighted backward shift B."""
        return cls(IndexMap.affine(power), WeightSeq.constant(scale), space or Space.lp())

    @property
    def is_weighted_shift(self) -> bool:
        return self.index_map.is_affine and self.index_map.step == 1

    def with_space(self, space: Space) -> "PseudoShift":
        return PseudoShift(self.index_map, self.weights, space)

    @cached_property
    def _residue_cumulants(self):
        # C[x] = sum of log|w_y| over y <= x, y = x mod step; D likewise counts negative weights
        r = self.index_map.step
        logs = self.weights.log_table
        neg = (self.weights.sign_table < 0).astype(np.int64)
        C = np.empty_like(logs)
        D = np.empty_like(neg)
        for res in range(r):
            C[res::r] = _neumaier_cumsum(logs[res::r])
            D[res::r] = np.cumsum(neg[res::r])
        return C, D

    def log_products(self, starts, n):
        """``(log|W_{start,n}|, sign W_{start,n})`` elementwise; n may broadcast."""
        starts = np.asarray(starts, dtype=np.int64)
        n_arr = np.asarray(n, dtype=np.int64)
        w = self.weights
        f = self.index_map
        if w.log_table is None and f.is_affine:
            shape = np.broadcast(starts, n_arr).shape
            logs = np.broadcast_to(n_arr * w.const_log, shape).astype(np.float64)
            if w.const_sign < 0:
                sg = np.where(np.broadcast_to(n_arr, shape) % 2 == 1, -1, 1).astype(np.int8)
            else:
                sg = np.ones(shape, dtype=np.int8)
            return logs, sg
        if f.is_affine:
            r = f.step
            ends = starts + n_arr * r
            if ends.size:
                w._check(ends)
            if n_arr.ndim == 0 and int(n_arr) <= 32:
                # short paths: sum the factors directly
                k = int(n_arr)
                if k == 0:
                    return np.zeros(starts.shape), np.ones(starts.shape, dtype=np.int8)
                idx = starts[..., None] + r * np.arange(1, k + 1)
                logs = w.log_table[idx].sum(axis=-1)
                neg = (w.sign_table[idx] < 0).sum(axis=-1)
                return logs, np.where(neg % 2 == 1, -1, 1).astype(np.int8)
            C, D = self._residue_cumulants
            logs = C[ends] - C[starts]
            neg = D[ends] - D[starts]
            return logs, np.where(neg % 2 == 1, -1, 1).astype(np.int8)
        # tabulated index map: walk the orbit
        starts_b, n_b = np.broadcast_arrays(starts, n_arr)
        logs = np.zeros(starts_b.shape)
        neg = np.zeros(starts_b.shape, dtype=np.int64)
        cur = starts_b.copy()
        t = f._table_array
        top = int(n_b.max()) if n_b.size else 0
        for step in range(1, top + 1):
            live = n_b >= step
            if not live.any():
                break
            if cur[live].max() > t.size:
                raise HorizonError(int(cur[live].max()), int(t.size), "index map")
            cur = np.where(live, t[np.minimum(cur, t.size) - 1], cur)
            sel = cur[live]
            logs[live] += w.log_abs_at(sel)
            neg[live] += (w.sign_at(sel) < 0)
        return logs, np.where(neg % 2 == 1, -1, 1).astype(np.int8)

    def path_logs(self, j: int, N: int):
        """``log|W_{j,n}|`` and signs for n = 0..N along one orbit."""
        w = self.weights
        f = self.index_map
        ns = np.arange(N + 1, dtype=np.int64)
        if w.log_table is None and f.is_affine:
            return self.log_products(np.full(N + 1, j), ns)
        if f.is_affine:
            idx = j + f.step * ns
            w._check(idx[-1])
            C, D = self._residue_cumulants
            neg = D[idx] - D[j]
            return C[idx] - C[j], np.where(neg % 2 == 1, -1, 1).astype(np.int8)
        path = [j]
        for _ in range(N):
            path.append(f.iterate(1, path[-1]))
        idx = np.asarray(path[1:], dtype=np.int64)
        terms = w.log_abs_at(idx) if N else np.zeros(0)
        logs = np.concatenate([[0.0], _neumaier_cumsum(np.asarray(terms, dtype=np.float64))])
        neg = np.concatenate([[0], np.cumsum(np.asarray(w.sign_at(idx)) < 0)]) if N else np.zeros(1, dtype=np.int64)
        return logs, np.where(neg % 2 == 1, -1, 1).astype(np.int8)

    def to_config(self) -> dict:
        return {"f": self.index_map.to_config(), "w": self.weights.to_config(),
                "space": self.space.to_config()}

    @classmethod
    def from_config(cls, data: Mapping) -> "PseudoShift":
        return cls(IndexMap.from_config(data["f"]), WeightSeq.from_config(data["w"]),
                   Space.from_config(data.get("space", {"lp": 2.0})))


def weight_product(T: PseudoShift, l: int, n: int) -> LogProduct:
    """``W_{l,n}``: the product of ``w_{f^m(l)}`` for m = 1..n, summed exactly in log form."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return LogProduct(0.0, 1)
    w = T.weights
    f = T.index_map
    if w.log_table is None:
        if f.table is not None:
            f.iterate(n, l)
        return LogProduct(n * w.const_log, -1 if (w.const_sign < 0 and n % 2) else 1)
    if f.is_affine:
        idx = l + f.step * np.arange(1, n + 1, dtype=np.int64)
    else:
        path = []
        cur = l
        for _ in range(n):
            cur = f.iterate(1, cur)
            path.append(cur)
        idx = np.asarray(path, dtype=np.int64)
    logs = w.log_abs_at(idx)
    neg = int(np.count_nonzero(np.asarray(w.sign_at(idx)) < 0))
    return LogProduct(math.fsum(logs.tolist()), -1 if neg % 2 else 1)


# ----------------------------------------------------------- finite vectors

def _merge(index: np.ndarray, log_abs: np.ndarray, sign: np.ndarray):
    """Sum duplicate coordinates in log form; exact cancellations are dropped."""
    order = np.argsort(index, kind="stable")
    index, log_abs, sign = index[order], log_abs[order], sign[order]
    keep = np.isfinite(log_abs)
    index, log_abs, sign = index[keep], log_abs[keep], sign[keep]
    if index.size < 2 or np.all(np.diff(index) > 0):
        return index, log_abs, sign
    uniq, first, counts = np.unique(index, return_index=True, return_counts=True)
    out_log = log_abs[first].copy()
    out_sign = sign[first].copy()
    for g in np.nonzero(counts > 1)[0]:
        a, b = first[g], first[g] + counts[g]
        m = float(np.max(log_abs[a:b]))
        total = math.fsum((sign[a:b] * np.exp(log_abs[a:b] - m)).tolist())
        if total == 0:
            out_log[g] = -np.inf
        else:
            out_log[g] = m + math.log(abs(total))
            out_sign[g] = 1 if total > 0 else -1
    live = np.isfinite(out_log)
    return uniq[live], out_log[live], out_sign[live]


@dataclass(frozen=True, eq=False)
class FiniteVec:
    """Finitely supported vector, coefficients stored in log form."""

    index: np.ndarray
    log_abs: np.ndarray
    sign: np.ndarray

    def __post_init__(self):
        if self.index.size and self.index[0] < 1:
            raise ValueError("coordinates are 1-based")

    @classmethod
    def from_logs(cls, index, log_abs, sign) -> "FiniteVec":
        idx = np.asarray(index, dtype=np.int64).ravel()
        la = np.asarray(log_abs, dtype=np.float64).ravel()
        sg = np.asarray(sign, dtype=np.float64).ravel()
        return cls(*_merge(idx, la, sg))

    @classmethod
    def from_dict(cls, entries: Mapping[int, float]) -> "FiniteVec":
        items = [(int(k), float(v)) for k, v in entries.items() if v != 0]
        if not items:
            return cls.zero()
        idx = np.array([k for k, _ in items], dtype=np.int64)
        vals = np.array([v for _, v in items])
        return cls.from_logs(idx, np.log(np.abs(vals)), np.sign(vals))

    @classmethod
    def from_values(cls, values: Sequence[float], start: int = 1) -> "FiniteVec":
        return cls.from_dict({start + i: v for i, v in enumerate(values)})

    @classmethod
    def zero(cls) -> "FiniteVec":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0))

    @classmethod
    def basis(cls, j: int, coef: float = 1.0) -> "FiniteVec":
        return cls.from_dict({j: coef})

    def __len__(self) -> int:
        return int(self.index.size)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in self.index)

    def coefficient(self, j: int) -> float:
        i = int(np.searchsorted(self.index, j))
        if i < self.index.size and self.index[i] == j:
            return float(self.sign[i] * np.exp(self.log_abs[i]))
        return 0.0

    def values(self) -> np.ndarray:
        with np.errstate(over="raise"):
            try:
                return self.sign * np.exp(self.log_abs)
            except FloatingPointError:
                k = int(np.argmax(self.log_abs))
                raise CoefficientOverflow(float(self.log_abs[k]), int(self.index[k])) from None

    def to_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.index, self.values())}

    def max_log(self) -> float:
        return float(np.max(self.log_abs)) if self.index.size else -math.inf

    def log_norm(self, space: Space) -> float:
        """Natural log of the norm (``-inf`` for the zero vector)."""
        if not self.index.size:
            return -math.inf
        m = self.max_log()
        if space.kind == "c0":
            return m
        p = space.p
        s = math.fsum(np.exp(p * (self.log_abs - m)).tolist())
        return m + math.log(s) / p

    def norm(self, space: Space) -> float:
        ln = self.log_norm(space)
        if ln > LOG_FLOAT_MAX:
            raise CoefficientOverflow(ln, "norm")
        return math.exp(ln)

    def __neg__(self) -> "FiniteVec":
        return FiniteVec(self.index, self.log_abs, -self.sign)

    def __add__(self, other: "FiniteVec") -> "FiniteVec":
        if not len(other):
            return self
        if not len(self):
            return other
        return FiniteVec.from_logs(np.concatenate([self.index, other.index]),
                                   np.concatenate([self.log_abs, other.log_abs]),
                                   np.concatenate([self.sign, other.sign]))

    def __sub__(self, other: "FiniteVec") -> "FiniteVec":
        return self + (-other)

    def scaled(self, factor: LogProduct) -> "FiniteVec":
        return FiniteVec(self.index, self.log_abs + factor.log_abs, self.sign * factor.sign)

    def restrict(self, lo: int, hi: int) -> "FiniteVec":
        keep = (self.index >= lo) & (self.index <= hi)
        return FiniteVec(self.index[keep], self.log_abs[keep], self.sign[keep])

    def identical(self, other: "FiniteVec") -> bool:
        return (np.array_equal(self.index, other.index)
                and np.array_equal(self.log_abs, other.log_abs)
                and np.array_equal(self.sign, other.sign))

    def allclose(self, other: "FiniteVec", rel: float = 1e-10) -> bool:
        if not np.array_equal(self.index, other.index):
            return False
        if not np.array_equal(self.sign, other.sign):
            return False
        return bool(np.all(np.abs(self.log_abs - other.log_abs) <= rel))

    def to_config(self) -> dict:
        return {"index": self.index.tolist(), "log_abs": self.log_abs.tolist(),
                "sign": self.sign.astype(int).tolist()}

    @classmethod
    def from_config(cls, data: Mapping) -> "FiniteVec":
        if "log_abs" in data:
            return cls.from_logs(data["index"], data["log_abs"], data["sign"])
        if "entries" in data:
            return cls.from_dict({int(k): v for k, v in data["entries"].items()})
        if "values" in data:
            return cls.from_values(data["values"], int(data.get("start", 1)))
        raise ValueError("vector config needs log_abs, entries or values")


def apply_power(T: PseudoShift, x: FiniteVec, n: int, check_overflow: bool = True) -> FiniteVec:
    """``T^n x`` with ``(T^n x)_j = W_{j,n} x_{f^n(j)}``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0 or not len(x):
        return x
    pre = T.index_map.preimages(n, x.index)
    live = pre > 0
    j = pre[live]
    if not j.size:
        return FiniteVec.zero()
    logw, sg = T.log_products(j, n)
    logs = x.log_abs[live] + logw
    if check_overflow and logs.size and float(np.max(logs)) > LOG_FLOAT_MAX:
        k = int(np.argmax(logs))
        raise CoefficientOverflow(float(logs[k]), int(j[k]))
    return FiniteVec(j, logs, x.sign[live] * sg)


def extract_weighted_shift(T: PseudoShift, j: int, length: int | None = None) -> WeightSeq:
    """Weights ``v_n = w_{f^{n-1}(j)}`` of the weighted shift read off along the orbit of j."""
    w = T.weights
    f = T.index_map
    if w.log_table is None and f.is_affine:
        return WeightSeq("constant", w.const_log, w.const_sign, generator="extracted",
                         params={"j": j})
    path = [j]
    limit = w.horizon if w.horizon is not None else None
    while True:
        if length is not None and len(path) >= length:
            break
        cur = path[-1]
        if f.table is not None and cur > len(f.table):
            break
        nxt = f.iterate(1, cur)
        if limit is not None and nxt > limit:
            break
        if limit is None and length is None:
            raise ValueError("need a length for tabulated maps with unbounded weights")
        path.append(nxt)
    if limit is not None and path[-1] > limit:
        raise HorizonError(path[-1], limit, "weight")
    if length is not None and len(path) < length:
        raise HorizonError(length, len(path), "extraction")
    idx = np.asarray(path, dtype=np.int64)
    return WeightSeq.from_logs(w.log_abs_at(idx), w.sign_at(idx),
                               generator="extracted", params={"j": j})


def extraction_map(T: PseudoShift, j: int, x: FiniteVec) -> FiniteVec:
    """``phi(x)_k = x_{f^{k-1}(j)}``: read x along the orbit of j."""
    f = T.index_map
    if not len(x):
        return FiniteVec.zero()
    if f.is_affine:
        off = x.index - j
        keep = (off >= 0) & (off % f.step == 0)
        k = off[keep] // f.step + 1
        return FiniteVec(k, x.log_abs[keep], x.sign[keep])
    top = int(x.index[-1])
    pos = {}
    cur, k = j, 1
    while cur <= top:
        pos[cur] = k
        if cur > len(f.table):
            break
        cur, k = f.iterate(1, cur), k + 1
    keep = np.array([int(i) in pos for i in x.index], dtype=bool)
    ks = np.array([pos[int(i)] for i in x.index[keep]], dtype=np.int64)
    return FiniteVec(ks, x.log_abs[keep], x.sign[keep])


def summability_tail(T: PseudoShift, j: int, M: int, N: int) -> tuple[float, float]:
    """Partial sum of ``|W_{j,n}|^{-p}`` over n = M..N and its last term."""
    if T.space.kind != "lp":
        raise ValueError("summability_tail needs an lp space")
    if M > N:
        raise ValueError(f"empty range: M={M} > N={N}")
    if M < 0:
        raise ValueError("M must be >= 0")
    logs, _ = T.path_logs(j, N)
    with np.errstate(over="ignore"):
        terms = np.exp(-T.space.p * logs[M:])
    return math.fsum(terms.tolist()), float(terms[-1])


__all__ = [
    "LOG_FLOAT_MAX", "CoefficientOverflow", "LogProduct", "Space", "IndexMap",
    "WeightSeq", "PseudoShift", "FiniteVec", "iterate", "inverse_iterate",
    "weight_product", "apply_power", "extract_weighted_shift", "extraction_map",
    "summability_tail",
]
