"""Finite-range checks of the disjoint hypercyclicity conditions for tuples of pseudo-shifts.

Every sum is evaluated term by term in log form and reduced with a
log-sum-exp; worst cases carry witnesses ``(j, k, n, s, t)`` (1-based
operator indices) that :func:`recompute_term` re-evaluates independently.
Ties between witnesses resolve to the lexicographically smallest one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .densities import NatSet
from .pseudoshift import (
    LOG_FLOAT_MAX, CoefficientOverflow, FiniteVec, IndexMap, PseudoShift, Space,
    apply_power, summability_tail,
)
from .setconstruct import SeparatedFamily

_MAG_CYCLE = (2.0, 0.5, 3.0, 1 / 3, 1.5, 2 / 3, 1.0)


# ------------------------------------------------------------------ inputs

@dataclass(frozen=True)
class TupleSystem:
    operators: tuple[PseudoShift, ...]

    def __post_init__(self):
        object.__setattr__(self, "operators", tuple(self.operators))
        if not self.operators:
            raise ValueError("need at least one operator")
        spaces = {op.space for op in self.operators}
        if len(spaces) != 1:
            raise ValueError(f"operators live on different spaces: {sorted(map(str, spaces))}")

    @property
    def N(self) -> int:
        return len(self.operators)

    @property
    def space(self) -> Space:
        return self.operators[0].space

    def __getitem__(self, s: int) -> PseudoShift:
        return self.operators[s]

    def to_config(self) -> dict:
        return {"operators": [op.to_config() for op in self.operators]}

    @classmethod
    def from_config(cls, data) -> "TupleSystem":
        ops = data["operators"] if isinstance(data, Mapping) else data
        return cls(tuple(PseudoShift.from_config(o) for o in ops))


@dataclass(frozen=True)
class TargetGrid:
    """Targets ``y_l = (y_l^1, ..., y_l^N)`` for levels l = 1..L.

    Each ``y_l^s`` has support exactly ``[1, l]`` with magnitudes in ``[1/l, l]``.
    """

    levels: tuple[tuple[FiniteVec, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(tuple(row) for row in self.levels))
        if not self.levels:
            raise ValueError("grid needs at least one level")
        N = len(self.levels[0])
        for l, row in enumerate(self.levels, start=1):
            if len(row) != N:
                raise ValueError(f"level {l} has {len(row)} targets, expected {N}")
            for s, y in enumerate(row, start=1):
                _check_target(y, l, f"y_{l}^{s}")

    @property
    def N(self) -> int:
        return len(self.levels[0])

    @property
    def L(self) -> int:
        return len(self.levels)

    def level(self, l: int) -> tuple[FiniteVec, ...]:
        if not 1 <= l <= self.L:
            raise KeyError(f"grid has no level {l} (levels 1..{self.L})")
        return self.levels[l - 1]

    def coefficients(self, l: int) -> np.ndarray:
        """Array of shape (N, l) with ``y_{l,j}^s`` at ``[s-1, j-1]``."""
        return np.array([[y.coefficient(j) for j in range(1, l + 1)] for y in self.level(l)])

    def row(self, s: int) -> list[list[float]]:
        """Single-operator values ``[y_1^s, y_2^s, ...]`` as plain lists (s is 1-based)."""
        return [self.coefficients(l)[s - 1].tolist() for l in range(1, self.L + 1)]

    @classmethod
    def from_values(cls, levels: Sequence[Sequence[Sequence[float]]]) -> "TargetGrid":
        return cls(tuple(tuple(FiniteVec.from_values(v) for v in row) for row in levels))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "TargetGrid":
        """Single-operator grid from ``rows[l-1] = (y_{l,1}, ..., y_{l,l})``."""
        return cls.from_values([[r] for r in rows])

    def to_config(self) -> dict:
        return {"levels": [[self.coefficients(l)[s].tolist() for s in range(self.N)]
                           for l in range(1, self.L + 1)]}

    @classmethod
    def from_config(cls, data) -> "TargetGrid":
        return cls.from_values(data["levels"] if isinstance(data, Mapping) else data)


def _check_target(y: FiniteVec, l: int, name: str):
    if len(y) and (y.index[0] < 1 or y.index[-1] > l):
        raise ValueError(f"{name} has support outside [1, {l}]")
    if len(y) != l:
        missing = sorted(set(range(1, l + 1)) - set(y.support))
        raise ValueError(f"{name} needs nonzero coefficients at every j <= {l}; zero at {missing}")
    lo, hi = -math.log(l), math.log(l)
    tol = 1e-12
    bad = np.nonzero((y.log_abs < lo - tol) | (y.log_abs > hi + tol))[0]
    if bad.size:
        j = int(y.index[bad[0]])
        raise ValueError(f"{name} coefficient at {j} is outside the band [1/{l}, {l}]")


def default_grid(L: int, N: int) -> TargetGrid:
    """Deterministic sign-and-magnitude pattern clipped to the band ``[1/l, l]``.

    Rows of one level differ for ``N >= 2`` (in sign at level 1).
    """
    levels = []
    for l in range(1, L + 1):
        row = []
        for s in range(N):
            vals = []
            for j in range(1, l + 1):
                mag = _MAG_CYCLE[(3 * l + j + 2 * s) % len(_MAG_CYCLE)]
                mag = min(max(mag, 1 / l), float(l))
                sign = -1.0 if (j + s + l) % 3 == 0 else 1.0
                vals.append(sign * mag)
            row.append(vals)
        levels.append(row)
    return TargetGrid.from_values(levels)


def _sets_of(A) -> list[NatSet]:
    if isinstance(A, SeparatedFamily):
        return list(A.sets)
    if isinstance(A, NatSet):
        return [A]
    return list(A)


def _times(A: NatSet, horizon: int) -> np.ndarray:
    arr = A.array
    return arr[arr <= horizon]


# ----------------------------------------------------------------- reports

@dataclass
class ConditionReport:
    """Worst-case values per condition with witnesses and pass flags.

    ``conditions`` maps a name (``cond1_tail``, ``cond2_max``, ``cond3_max``,
    ``cond4_eps``, ...) to a list of entries; each entry has ``value``,
    ``log_value``, ``eps``, ``pass`` and a ``witness`` dict when one exists.
    """

    kind: str
    conditions: dict[str, list[dict]]
    eps: list[float]
    tail_tol: float
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e["pass"] for entries in self.conditions.values() for e in entries)

    def failures(self) -> list[tuple[str, dict]]:
        return [(name, e) for name, entries in self.conditions.items() for e in entries
                if not e["pass"]]

    def condition_passed(self, name: str) -> bool:
        return all(e["pass"] for e in self.conditions.get(name, []))

    def max_value(self, name: str, level: int | None = None) -> float:
        vals = [e["value"] for e in self.conditions.get(name, [])
                if level is None or e.get("l") == level]
        return max(vals, default=0.0)

    def rescore(self, eps: Sequence[float]) -> "ConditionReport":
        """Re-evaluate pass flags (and the search in condition 4) against a new schedule."""
        eps = [float(e) for e in eps]
        out = {}
        for name, entries in self.conditions.items():
            new = []
            for e in entries:
                e = dict(e)
                if "l" in e and name != "cond1_tail":
                    l = e["l"]
                    e["eps"] = eps[l - 1]
                    if name == "cond4_eps":
                        e.update(_pick_cond4(e["candidates"], eps[l - 1]))
                    else:
                        e["pass"] = bool(e["value"] <= eps[l - 1])
                new.append(e)
            out[name] = new
        return ConditionReport(self.kind, out, eps, self.tail_tol, list(self.notes))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "eps": _jsonable(self.eps),
                "tail_tol": self.tail_tol, "conditions": _jsonable(self.conditions),
                "notes": self.notes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return _jsonable(float(obj))
    return obj


def _exp(log_value: float) -> float:
    if log_value == -math.inf:
        return 0.0
    return math.inf if log_value > LOG_FLOAT_MAX else math.exp(log_value)


def _entry(l, log_value, eps_l, witness=None, **extra) -> dict:
    value = _exp(log_value)
    e = {"l": l, "value": value, "log_value": log_value, "eps": eps_l,
         "pass": bool(value <= eps_l), "margin": eps_l - value}
    if witness is not None:
        e["witness"] = witness
    e.update(extra)
    return e


# ----------------------------------------------------------- index helpers

def orbit_points(f: IndexMap, j: int, times: np.ndarray) -> np.ndarray:
    """``f^m(j)`` for every m in ``times``."""
    times = np.asarray(times, dtype=np.int64)
    if f.is_affine:
        return j + times * f.step
    top = int(times.max()) if times.size else 0
    path = np.empty(top + 1, dtype=np.int64)
    path[0] = j
    cur = j
    for m in range(1, top + 1):
        cur = f.iterate(1, cur)
        path[m] = cur
    return path[times]


def preimages_at(f: IndexMap, ks: np.ndarray, ns: np.ndarray) -> np.ndarray:
    """``f^{-n}(k)`` elementwise over broadcast ``ks``, ``ns``; 0 where undefined."""
    ks, ns = np.broadcast_arrays(np.asarray(ks, dtype=np.int64), np.asarray(ns, dtype=np.int64))
    if f.is_affine:
        out = ks - ns * f.step
        return np.where(out >= 1, out, 0)
    t = f._table_array
    cur = ks.copy()
    top = int(ns.max()) if ns.size else 0
    for step in range(1, top + 1):
        live = (ns >= step) & (cur > 0)
        if not live.any():
            break
        pos = np.searchsorted(t, cur[live])
        ok = pos < t.size
        ok[ok] = t[pos[ok]] == cur[live][ok]
        nxt = np.where(ok, pos + 1, 0)
        cur[live] = nxt
    return cur


def _weight_logs(T: PseudoShift, starts: np.ndarray, ns: np.ndarray):
    """``log|W_{start,n}|`` and sign with invalid starts (0) masked to -inf."""
    starts, ns = np.broadcast_arrays(np.asarray(starts, dtype=np.int64),
                                     np.asarray(ns, dtype=np.int64))
    valid = starts >= 1
    safe = np.where(valid, starts, 1)
    logs, sg = T.log_products(safe, ns)
    logs = np.where(valid, logs, -np.inf)
    return logs, sg


def _lse_rows(M: np.ndarray):
    """Row-wise log-sum-exp with -inf rows staying -inf."""
    top = np.max(M, axis=1)
    finite = np.isfinite(top)
    out = np.full(M.shape[0], -np.inf)
    if finite.any():
        sub = M[finite] - top[finite, None]
        out[finite] = top[finite] + np.log(np.sum(np.exp(sub), axis=1))
    return out


def _cross_terms(system: TupleSystem, s: int, t: int, j: int, ns: np.ndarray, ms: np.ndarray,
                 floor_k: int, exclude_equal: bool, power: float):
    """Matrix of log terms ``power * (log|W^s_{pre,n}| - log|W^t_{j,m}|)``.

    Rows run over n, columns over m; a term is present when
    ``f_t^m(j) = f_s^n(pre)`` for some ``pre > floor_k`` (and m != n if asked).
    """
    Ts, Tt = system[s], system[t]
    targets = orbit_points(Tt.index_map, j, ms)
    logWt, _ = Tt.path_logs(j, int(ms.max())) if ms.size else (np.zeros(1), None)
    logWt = logWt[ms]
    pre = preimages_at(Ts.index_map, targets[None, :], ns[:, None])
    mask = pre > floor_k
    if exclude_equal:
        mask &= ns[:, None] != ms[None, :]
    pre = np.where(mask, pre, 0)
    logWs, _ = _weight_logs(Ts, pre, np.broadcast_to(ns[:, None], pre.shape))
    terms = power * (logWs - logWt[None, :])
    return np.where(mask, terms, -np.inf)


def _cross_reduce(system, s, t, j, ns, ms, floor_k, exclude_equal, power, mode, chunk=1 << 21):
    """Per-n reduced value (log-sum-exp or max) plus the last included term per row."""
    out = np.full(ns.size, -np.inf)
    last = np.full(ns.size, -np.inf)
    if not ns.size or not ms.size:
        return out, last
    rows = max(1, chunk // ms.size)
    for a in range(0, ns.size, rows):
        block = _cross_terms(system, s, t, j, ns[a:a + rows], ms, floor_k, exclude_equal, power)
        out[a:a + rows] = _lse_rows(block) if mode == "sum" else np.max(block, axis=1)
        present = np.isfinite(block)
        has = present.any(axis=1)
        idx = block.shape[1] - 1 - np.argmax(present[:, ::-1], axis=1)
        last[a:a + rows] = np.where(has, block[np.arange(block.shape[0]), idx], -np.inf)
    return out, last


def _worst(candidates: list[tuple[float, tuple, float]]):
    """Largest log value; ties go to the lexicographically smallest witness key."""
    best = None
    for val, key, last in candidates:
        if best is None or val > best[0] or (val == best[0] and key < best[1]):
            best = (val, key, last)
    return best


# -------------------------------------------------------------- conditions

def _cond1_entries(system: TupleSystem, L: int, horizon: int, tail_tol: float) -> list[dict]:
    out = []
    for s in range(system.N):
        T = system[s]
        for j in range(1, L + 1):
            n_max = _max_time(T, j, horizon)
            if n_max < 1:
                raise ValueError(f"weights of operator {s + 1} do not reach past coordinate {j}")
            total, last = summability_tail(T, j, 1, n_max)
            out.append({"j": j, "s": s + 1, "partial_sum": total, "value": last,
                        "terms": n_max, "eps": tail_tol, "pass": bool(last <= tail_tol),
                        "margin": tail_tol - last})
    return out


def _max_time(T: PseudoShift, j: int, limit: int) -> int:
    """Largest n <= limit with every weight along ``f^1(j)..f^n(j)`` tabulated."""
    wh = T.weights.horizon
    f = T.index_map
    if f.is_affine:
        return limit if wh is None else max(0, min(limit, (wh - j) // f.step))
    n, cur = 0, j
    while n < limit:
        if cur > len(f.table):
            break
        nxt = f.iterate(1, cur)
        if wh is not None and nxt > wh:
            break
        cur, n = nxt, n + 1
    return n


def _pair_conditions(system, sets, L, horizon, eps, power, mode):
    N = system.N
    times = [_times(A, horizon) for A in sets[:L]]
    cond2, cond3 = [], []
    for l in range(1, L + 1):
        cands2, cands3 = [], []
        for s in range(N):
            for t in range(N):
                if s == t:
                    continue
                for j in range(1, l + 1):
                    for k in range(1, L + 1):
                        vals, last = _cross_reduce(system, s, t, j, times[k - 1], times[l - 1],
                                                   k, True, power, mode)
                        if vals.size:
                            i = int(np.argmax(vals))
                            cands2.append((float(vals[i]),
                                           (j, k, int(times[k - 1][i]), s + 1, t + 1),
                                           float(last[i])))
                for k in range(1, l):
                    for j in range(1, k + 1):
                        vals, last = _cross_reduce(system, s, t, j, times[l - 1], times[k - 1],
                                                   l, False, power, mode)
                        if vals.size:
                            i = int(np.argmax(vals))
                            cands3.append((float(vals[i]),
                                           (j, k, int(times[l - 1][i]), s + 1, t + 1),
                                           float(last[i])))
        for name, cands, out in (("cond2", cands2, cond2), ("cond3", cands3, cond3)):
            best = _worst(cands)
            if best is None or best[0] == -math.inf:
                e = _entry(l, -math.inf, eps[l - 1], vacuous=True)
            else:
                j, k, n, s1, t1 = best[1]
                e = _entry(l, best[0], eps[l - 1],
                           {"j": j, "k": k, "n": n, "s": s1, "t": t1},
                           last_term=_exp(best[2]))
            out.append(e)
    return cond2, cond3


def _cond4_values(system, sets, grid, L, horizon):
    """For each level l and each L' in [l, L]: worst deviation over s != t, n in A_L'."""
    N = system.N
    out = {}
    for l in range(1, L + 1):
        a = grid.coefficients(l)
        cands_by_L = []
        for Lp in range(l, L + 1):
            ns = _times(sets[Lp - 1], horizon)
            best = None
            for s in range(N):
                for t in range(N):
                    if s == t or not ns.size:
                        continue
                    val, key = _cond4_pair(system, s, t, l, a, ns)
                    if val is not None and (best is None or val > best[0]
                                            or (val == best[0] and key < best[1])):
                        best = (val, key)
            if best is None:
                cands_by_L.append({"L": Lp, "value": 0.0, "vacuous": True})
            else:
                part, n, j, i_s, i_t, s1, t1 = best[1]
                cands_by_L.append({"L": Lp, "value": best[0],
                                   "witness": {"part": part, "n": n, "j": j, "i_s": i_s,
                                               "i_t": i_t, "s": s1, "t": t1}})
        out[l] = cands_by_L
    return out


def _cond4_pair(system, s, t, l, a, ns):
    """Worst (4a)/(4b) term for one ordered pair over times ns."""
    Ts, Tt = system[s], system[t]
    idx = np.arange(1, l + 1, dtype=np.int64)
    # coordinates j = f_t^n(i) for i in [l]; pre_s = f_s^{-n}(j)
    js = np.stack([orbit_points(Tt.index_map, int(i), ns) for i in idx], axis=1)
    pre = preimages_at(Ts.index_map, js, ns[:, None])
    logWt, sgt = _weight_logs(Tt, np.broadcast_to(idx[None, :], js.shape),
                              np.broadcast_to(ns[:, None], js.shape))
    logWs, sgs = _weight_logs(Ts, pre, np.broadcast_to(ns[:, None], js.shape))
    diff = logWs - logWt
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = sgs * sgt * np.exp(np.minimum(diff, 800.0))
    in_a = (pre >= 1) & (pre <= l)
    in_b = pre > l
    best = None
    if in_a.any():
        target = np.zeros_like(ratio)
        pre_c = np.clip(pre, 1, l)
        target[in_a] = a[s, pre_c[in_a] - 1] / a[t, (np.broadcast_to(idx[None, :], js.shape))[in_a] - 1]
        dev = np.where(in_a, np.abs(ratio - target), -np.inf)
        r, c = np.unravel_index(int(np.argmax(dev)), dev.shape)
        best = (float(dev[r, c]), ("a", int(ns[r]), int(js[r, c]), int(pre[r, c]), int(c + 1),
                                   s + 1, t + 1))
    if in_b.any():
        mag = np.where(in_b, np.abs(ratio), -np.inf)
        r, c = np.unravel_index(int(np.argmax(mag)), mag.shape)
        cand = (float(mag[r, c]), ("b", int(ns[r]), int(js[r, c]), int(pre[r, c]), int(c + 1),
                                   s + 1, t + 1))
        if best is None or cand[0] > best[0]:
            best = cand
    if best is None:
        return None, None
    return best


def _pick_cond4(candidates: list[dict], eps_l: float) -> dict:
    for c in candidates:
        if c["value"] <= eps_l:
            out = {"L": c["L"], "value": c["value"], "pass": True, "margin": eps_l - c["value"]}
            if "witness" in c:
                out["witness"] = c["witness"]
            return out
    best = min(candidates, key=lambda c: (c["value"], c["L"]))
    out = {"L": None, "value": best["value"], "pass": False, "margin": eps_l - best["value"],
           "closest_L": best["L"]}
    if "witness" in best:
        out["witness"] = best["witness"]
    return out


def _cond4_entries(cond4, eps):
    out = []
    for l, cands in cond4.items():
        e = {"l": l, "eps": eps[l - 1], "candidates": cands}
        e.update(_pick_cond4(cands, eps[l - 1]))
        e["log_value"] = math.log(e["value"]) if e["value"] > 0 else -math.inf
        out.append(e)
    return out


def _prepare(system, A, grid, eps, horizon, L_max):
    sets = _sets_of(A)
    if grid.N != system.N:
        raise ValueError(f"grid has {grid.N} targets per level but the system has {system.N} operators")
    L = min(len(sets), grid.L) if L_max is None else L_max
    if L > len(sets) or L > grid.L:
        raise ValueError(f"L_max={L} exceeds available levels (sets: {len(sets)}, grid: {grid.L})")
    if eps is None:
        eps = [math.inf] * L
    eps = [float(e) for e in eps]
    if len(eps) < L:
        raise ValueError(f"eps schedule has {len(eps)} entries, need {L}")
    for A_k in sets[:L]:
        if A_k.horizon < horizon and A_k.array.size and A_k.array[-1] > A_k.horizon:
            raise ValueError("set exceeds its own horizon")
    return sets, L, eps


def check_lp(system: TupleSystem, A, grid: TargetGrid, eps: Sequence[float] | None,
             horizon: int, L_max: int | None = None, tail_tol: float = 1e-9) -> ConditionReport:
    """Conditions (1)-(4) of the l^p characterization over levels 1..L_max and times <= horizon."""
    if system.space.kind != "lp":
        raise ValueError(f"check_lp needs an lp system, got {system.space}")
    sets, L, eps = _prepare(system, A, grid, eps, horizon, L_max)
    p = system.space.p
    conds = {"cond1_tail": _cond1_entries(system, L, horizon, tail_tol)}
    notes = []
    if system.N < 2:
        notes.append("single operator: conditions (2)-(4) are vacuous")
        conds.update({"cond2_max": [], "cond3_max": [], "cond4_eps": []})
    else:
        c2, c3 = _pair_conditions(system, sets, L, horizon, eps, p, "sum")
        conds["cond2_max"] = c2
        conds["cond3_max"] = c3
        conds["cond4_eps"] = _cond4_entries(_cond4_values(system, sets, grid, L, horizon), eps)
    return ConditionReport("lp", conds, eps, tail_tol, notes)


def check_c0(system: TupleSystem, A, grid: TargetGrid, eps: Sequence[float] | None,
             horizon: int, L_max: int | None = None) -> ConditionReport:
    """c0 variant: growth diagnostic for (1) and pointwise maxima for the ratio conditions."""
    if system.space.kind != "c0":
        raise ValueError(f"check_c0 needs a c0 system, got {system.space}")
    sets, L, eps = _prepare(system, A, grid, eps, horizon, L_max)
    growth = []
    for s in range(system.N):
        T = system[s]
        for j in range(1, L + 1):
            for k in range(1, L + 1):
                ns = _times(sets[k - 1], horizon)
                ns = ns[ns <= _max_time(T, j, horizon)]
                first = ns[ns < horizon // 2]
                second = ns[ns >= horizon // 2]
                if not first.size or not second.size:
                    growth.append({"j": j, "k": k, "s": s + 1, "pass": True, "vacuous": True,
                                   "value": 0.0})
                    continue
                lf, _ = T.log_products(np.full(first.size, j), first)
                ls, _ = T.log_products(np.full(second.size, j), second)
                lo1, lo2 = float(lf.min()), float(ls.min())
                growth.append({"j": j, "k": k, "s": s + 1, "first_half_min_log": lo1,
                               "second_half_min_log": lo2, "value": lo2 - lo1,
                               "pass": bool(lo2 > lo1)})
    conds = {"cond1_growth": growth}
    notes = []
    if system.N < 2:
        notes.append("single operator: conditions (2)-(4) are vacuous")
        conds.update({"cond2_max": [], "cond3_max": [], "cond4_eps": []})
    else:
        c2, c3 = _pair_conditions(system, sets, L, horizon, eps, 1.0, "max")
        conds["cond2_max"] = c2
        conds["cond3_max"] = c3
        conds["cond4_eps"] = _cond4_entries(_cond4_values(system, sets, grid, L, horizon), eps)
    return ConditionReport("c0", conds, eps, 0.0, notes)


def recompute_term(system: TupleSystem, A, name: str, witness: Mapping, l: int,
                   horizon: int, grid: TargetGrid | None = None) -> float:
    """Re-evaluate a witnessed worst case directly from weight products.

    ``cond2_max``/``cond3_max`` are recomputed as plain loops over m with
    products formed one factor at a time via :func:`pseudoshift.weight_product`.
    """
    from .pseudoshift import weight_product
    sets = _sets_of(A)
    s, t = witness["s"] - 1, witness["t"] - 1
    Ts, Tt = system[s], system[t]
    if name in ("cond2_max", "cond3_max"):
        j, k, n = witness["j"], witness["k"], witness["n"]
        if name == "cond2_max":
            ms, floor_k, skip = _times(sets[l - 1], horizon), k, True
        else:
            ms, floor_k, skip = _times(sets[k - 1], horizon), l, False
        p = system.space.p if system.space.kind == "lp" else 1.0
        logs = []
        for m in ms.tolist():
            if skip and m == n:
                continue
            target = Tt.index_map.iterate(m, j)
            pre = Ts.index_map.inverse_iterate(n, target)
            if pre is None or pre <= floor_k:
                continue
            logs.append(p * (weight_product(Ts, pre, n).log_abs - weight_product(Tt, j, m).log_abs))
        if not logs:
            return 0.0
        if system.space.kind == "c0":
            return _exp(max(logs))
        top = max(logs)
        return _exp(top + math.log(math.fsum(math.exp(v - top) for v in logs)))
    if name == "cond4_eps":
        n, i_s, i_t = witness["n"], witness["i_s"], witness["i_t"]
        ws = weight_product(Ts, i_s, n)
        wt = weight_product(Tt, i_t, n)
        ratio = (ws / wt)
        r = ratio.sign * _exp(ratio.log_abs)
        if witness["part"] == "a":
            a = grid.coefficients(l)
            return abs(r - a[s, i_s - 1] / a[t, i_t - 1])
        return abs(r)
    raise ValueError(f"no recomputation for {name!r}")


# ------------------------------------------------------ weighted shift case

def check_shift_upper(system: TupleSystem, l: int, a, eps: float, A: NatSet, horizon: int,
                      tail_tol: float = 1e-9) -> ConditionReport:
    """Conditions (1), (2a), (2b) of the weighted-shift characterization for one set A."""
    for s, op in enumerate(system.operators, start=1):
        if not op.is_weighted_shift:
            raise ValueError(f"operator {s} is not a weighted shift (index map must be n+1)")
    if system.space.kind != "lp":
        raise ValueError(f"check_shift_upper needs an lp system, got {system.space}")
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (system.N, l):
        raise ValueError(f"coefficients must have shape ({system.N}, {l}), got {a.shape}")
    if np.any(a == 0):
        raise ValueError("coefficients a_{s,j} must be nonzero")
    p = system.space.p
    conds = {"cond1_tail": _cond1_entries(system, l, horizon, tail_tol)}
    ns = _times(A, horizon)
    notes = []
    if not ns.size or system.N < 2:
        notes.append("empty set or single operator: (2a) and (2b) hold vacuously")
        vac = {"l": l, "value": 0.0, "log_value": -math.inf, "eps": eps, "pass": True,
               "margin": math.inf, "vacuous": True}
        conds["cond2a_sum"] = [dict(vac)]
        conds["cond2b_ratio"] = [dict(vac)]
        return ConditionReport("shift_upper", conds, [eps] * l, tail_tol, notes)
    cands_a, cands_b = [], []
    for s in range(system.N):
        for t in range(system.N):
            if s == t:
                continue
            Ts, Tt = system[s], system[t]
            for j in range(1, l + 1):
                logWt, _ = Tt.path_logs(j, int(ns.max()))
                for idx, n in enumerate(ns.tolist()):
                    later = ns[idx + 1:]
                    if later.size:
                        lws, _ = Ts.log_products(j + later - n, n)
                        terms = p * (lws - logWt[later])
                        top = float(terms.max())
                        val = top + math.log(math.fsum(np.exp(terms - top).tolist()))
                        cands_a.append((val, (j, n, s + 1, t + 1), float(terms[-1])))
                lwt, sgt = Tt.log_products(np.full(ns.size, j), ns)
                lws, sgs = Ts.log_products(np.full(ns.size, j), ns)
                with np.errstate(over="ignore"):
                    ratio = sgs * sgt * np.exp(np.minimum(lws - lwt, 800.0))
                dev = np.abs(ratio - a[s, j - 1] / a[t, j - 1])
                i = int(np.argmax(dev))
                cands_b.append((float(dev[i]), (j, int(ns[i]), s + 1, t + 1), 0.0))
    best = _worst(cands_a)
    if best is None:
        conds["cond2a_sum"] = [_entry(l, -math.inf, eps, vacuous=True)]
    else:
        j, n, s1, t1 = best[1]
        conds["cond2a_sum"] = [_entry(l, best[0], eps, {"j": j, "n": n, "s": s1, "t": t1},
                                      last_term=_exp(best[2]))]
    best = _worst(cands_b)
    j, n, s1, t1 = best[1]
    e = {"l": l, "value": best[0], "eps": eps, "pass": bool(best[0] <= eps),
         "margin": eps - best[0], "witness": {"j": j, "n": n, "s": s1, "t": t1}}
    conds["cond2b_ratio"] = [e]
    return ConditionReport("shift_upper", conds, [eps] * l, tail_tol, notes)


# ------------------------------------------------------------ constructions

def build_index_blocks(system: TupleSystem, n: int, l: int) -> list[tuple[int, ...]]:
    """``J_{n,1,l} = [l]`` and ``J_{n,t+1,l} = [l] minus f_{t+1}^{-n}(union_{s<=t} f_s^n([l]))``."""
    if n < 0 or l < 1:
        raise ValueError("need n >= 0 and l >= 1")
    base = np.arange(1, l + 1, dtype=np.int64)
    seen = np.zeros(0, dtype=np.int64)
    blocks = []
    for t, op in enumerate(system.operators):
        img = op.index_map.images(n, base)
        if t == 0:
            blocks.append(tuple(range(1, l + 1)))
        else:
            keep = ~np.isin(img, seen)
            blocks.append(tuple(int(v) for v in base[keep]))
        seen = np.union1d(seen, img)
    return blocks


def _check_support(y: FiniteVec, l: int, name: str):
    if len(y) and (y.index[0] < 1 or y.index[-1] > l):
        raise ValueError(f"{name} has support beyond [1, {l}]")


def apply_S(system: TupleSystem, y: Sequence[FiniteVec], n: int, l: int) -> FiniteVec:
    """``S_n y = sum_t sum_{j in J_{n,t,l}} y^t_j / W^t_{j,n} e_{f_t^n(j)}``."""
    if len(y) != system.N:
        raise ValueError(f"need {system.N} target vectors, got {len(y)}")
    for s, ys in enumerate(y, start=1):
        _check_support(ys, l, f"target {s}")
    blocks = build_index_blocks(system, n, l)
    idx, logs, signs = [], [], []
    for t, (op, J, ys) in enumerate(zip(system.operators, blocks, y)):
        if not J or not len(ys):
            continue
        J = np.asarray(J, dtype=np.int64)
        pos = np.searchsorted(ys.index, J)
        pos_c = np.clip(pos, 0, len(ys) - 1)
        present = (pos < len(ys)) & (ys.index[pos_c] == J)
        J, pos = J[present], pos_c[present]
        if not J.size:
            continue
        lw, sg = op.log_products(J, n)
        idx.append(op.index_map.images(n, J))
        logs.append(ys.log_abs[pos] - lw)
        signs.append(ys.sign[pos] * sg)
    if not idx:
        return FiniteVec.zero()
    return FiniteVec.from_logs(np.concatenate(idx), np.concatenate(logs), np.concatenate(signs))


def _sum_vectors(vecs: Sequence[FiniteVec]) -> FiniteVec:
    vecs = [v for v in vecs if len(v)]
    if not vecs:
        return FiniteVec.zero()
    return FiniteVec.from_logs(np.concatenate([v.index for v in vecs]),
                               np.concatenate([v.log_abs for v in vecs]),
                               np.concatenate([v.sign for v in vecs]))


@dataclass
class VectorBuild:
    """The assembled vector with per-level bookkeeping."""

    x: FiniteVec
    level_vectors: list[FiniteVec]
    block_norms: list[float]
    suffix_norms: list[list[tuple[int, float]]]

    @property
    def suffix_sup(self) -> float:
        return max((v for rows in self.suffix_norms for _, v in rows), default=0.0)

    def to_dict(self) -> dict:
        return {"x": self.x.to_config(), "block_norms": self.block_norms,
                "suffix_norms": [[list(r) for r in rows] for rows in self.suffix_norms],
                "suffix_sup": self.suffix_sup}


def _safe_norm(v: FiniteVec, space: Space) -> float:
    return _exp(v.log_norm(space))


def build_vector(system: TupleSystem, grid: TargetGrid, A, horizon: int,
                 levels: int | None = None) -> VectorBuild:
    """``x = sum_l sum_{n in A_l} S_n y_l`` truncated to times <= horizon.

    Alongside x, reports ``||sum_{n in A_l} S_n y_l||`` per level and suffix
    norms ``||sum_{n in A_l, n >= c} S_n y_l||`` for geometrically spaced
    cut-offs c in A_l (suffix blocks only).
    """
    sets = _sets_of(A)
    L = len(sets) if levels is None else levels
    if L > grid.L:
        raise ValueError(f"grid covers {grid.L} levels but {L} are requested")
    level_vecs, norms, suffixes = [], [], []
    for l in range(1, L + 1):
        ns = _times(sets[l - 1], horizon)
        y = grid.level(l)
        parts = [apply_S(system, y, int(n), l) for n in ns]
        X = _sum_vectors(parts)
        level_vecs.append(X)
        norms.append(_safe_norm(X, system.space))
        rows = []
        cut = 0
        while cut < len(parts):
            rows.append((int(ns[cut]), _safe_norm(_sum_vectors(parts[cut:]), system.space)))
            cut = 1 if cut == 0 else 2 * cut
        suffixes.append(rows)
    return VectorBuild(_sum_vectors(level_vecs), level_vecs, norms, suffixes)


def build_single_block_vector(system: TupleSystem, a, A: NatSet, l: int, horizon: int) -> FiniteVec:
    """``x = sum_{n in A} sum_t sum_{j in J_{n,t}} a_{t,j} / W^t_{j,n} e_{f_t^n(j)}``."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (system.N, l):
        raise ValueError(f"coefficients must have shape ({system.N}, {l}), got {a.shape}")
    if np.any(a == 0):
        raise ValueError("coefficients a_{t,j} must be nonzero")
    y = [FiniteVec.from_values(row) for row in a]
    return _sum_vectors([apply_S(system, y, int(n), l) for n in _times(A, horizon)])


def orbit_error(system: TupleSystem, x: FiniteVec, n: int,
                target: Sequence[FiniteVec]) -> list[float]:
    """``||T_s^n x - target_s||`` for each operator; overflow raises CoefficientOverflow."""
    if len(target) != system.N:
        raise ValueError(f"need {system.N} targets, got {len(target)}")
    out = []
    for op, y in zip(system.operators, target):
        d = apply_power(op, x, n) - y
        ln = d.log_norm(system.space)
        if ln > LOG_FLOAT_MAX:
            raise CoefficientOverflow(ln, "orbit error norm")
        out.append(_exp(ln))
    return out


def _orbit_log_errors(system, x, n, target) -> float:
    """Largest log error over s; overflow counts as +inf instead of raising."""
    worst = -math.inf
    for op, y in zip(system.operators, target):
        d = apply_power(op, x, n, check_overflow=False) - y
        worst = max(worst, d.log_norm(system.space))
    return worst


def _candidate_times(system, x: FiniteVec, target, eps: float, horizon: int):
    """Times n that can possibly hit: some coordinate with |y_j| >= eps must be fed by supp(x)."""
    cand = None
    for op, y in zip(system.operators, target):
        big = y.index[y.log_abs >= math.log(eps)] if eps > 0 else y.index
        if not big.size:
            continue
        j = int(big[0])
        f = op.index_map
        supp = x.index
        if f.is_affine:
            off = supp - j
            ok = (off >= f.step) & (off % f.step == 0)
            ns = off[ok] // f.step
        else:
            ns_list, cur, m = [], j, 0
            top = int(supp[-1]) if supp.size else 0
            sset = set(supp.tolist())
            while m < horizon and cur <= top and cur <= len(f.table):
                cur, m = f.iterate(1, cur), m + 1
                if cur in sset:
                    ns_list.append(m)
            ns = np.asarray(ns_list, dtype=np.int64)
        ns = ns[(ns >= 1) & (ns <= horizon)]
        cand = ns if cand is None else np.intersect1d(cand, ns)
    if cand is None:
        return np.arange(1, horizon + 1, dtype=np.int64)
    return np.unique(cand)


def hitting_times(system: TupleSystem, x: FiniteVec, targets: Sequence[FiniteVec], eps: float,
                  horizon: int) -> NatSet:
    """``{1 <= n <= horizon : ||T_s^n x - target_s|| < eps for every s}``."""
    if len(targets) != system.N:
        raise ValueError(f"need {system.N} targets, got {len(targets)}")
    if eps <= 0:
        return NatSet.empty(horizon)
    log_eps = math.log(eps)
    hits = [int(n) for n in _candidate_times(system, x, targets, eps, horizon)
            if _orbit_log_errors(system, x, int(n), targets) < log_eps]
    return NatSet(tuple(hits), horizon)


# ---------------------------------------------------- criterion hypotheses

def criterion_norms(system: TupleSystem, grid: TargetGrid, A, build: VectorBuild,
                    horizon: int) -> dict[str, list[float]]:
    """Direct norms behind the criterion's hypotheses, per level l.

    ``e2``: max over n in any A_k of ``||T^n sum_{i in A_l, i != n} S_i y_l||``;
    ``e3``: max over n in A_l and k < l of ``||T^n sum_{i in A_k} S_i y_k||``;
    ``e4``: max over n in A_l of ``||T^n S_n y_l - y_l||``.  Maxima also run over s.
    """
    sets = _sets_of(A)
    L = len(build.level_vectors)
    times = [_times(sets[k], horizon) for k in range(L)]
    all_times = np.unique(np.concatenate(times)) if times else np.zeros(0, dtype=np.int64)
    space = system.space
    e2, e3, e4 = [], [], []
    for l in range(1, L + 1):
        X = build.level_vectors[l - 1]
        y = grid.level(l)
        members = set(times[l - 1].tolist())
        worst2 = -math.inf
        worst4 = -math.inf
        for n in all_times.tolist():
            V = X
            if n in members:
                Sn = apply_S(system, y, n, l)
                V = X - Sn
                for op, ys in zip(system.operators, y):
                    d = apply_power(op, Sn, n, check_overflow=False) - ys
                    worst4 = max(worst4, d.log_norm(space))
            for op in system.operators:
                worst2 = max(worst2, apply_power(op, V, n, check_overflow=False).log_norm(space))
        worst3 = -math.inf
        for k in range(1, l):
            Xk = build.level_vectors[k - 1]
            for n in times[l - 1].tolist():
                for op in system.operators:
                    worst3 = max(worst3, apply_power(op, Xk, n, check_overflow=False).log_norm(space))
        e2.append(_exp(worst2))
        e3.append(_exp(worst3))
        e4.append(_exp(worst4))
    return {"e2": e2, "e3": e3, "e4": e4}


def geometric_schedule(C: float, L: int, ratio: float = 0.5) -> list[float]:
    return [C * ratio ** l for l in range(1, L + 1)]


def calibrate_schedule(report: ConditionReport, norms: Mapping[str, Sequence[float]] | None,
                       L: int, safety: float = 4.0, ratio: float = 0.5) -> float:
    """Smallest-safe constant C with ``eps_l = C ratio^l`` dominating every measured quantity.

    C is ``safety`` times the largest ``value_l / ratio^l`` over the ratio
    conditions (the least passing value for condition 4) and the direct
    criterion norms.
    """
    worst = 0.0
    for l in range(1, L + 1):
        vals = [report.max_value("cond2_max", l), report.max_value("cond3_max", l)]
        for e in report.conditions.get("cond4_eps", []):
            if e["l"] == l:
                vals.append(min(c["value"] for c in e["candidates"]))
        if norms is not None:
            vals.extend(norms[key][l - 1] for key in ("e2", "e3", "e4") if key in norms)
        worst = max(worst, max(vals) / ratio ** l)
    if not math.isfinite(worst):
        raise ValueError("cannot calibrate: a measured quantity is infinite")
    return safety * worst if worst > 0 else 1.0


def orbit_bound(eps: Sequence[float], l: int, L: int) -> float:
    """``(l-1) eps_l + sum_{k=l}^{L} k eps_k + eps_l``."""
    return (l - 1) * eps[l - 1] + sum(k * eps[k - 1] for k in range(l, L + 1)) + eps[l - 1]


__all__ = [
    "TupleSystem", "TargetGrid", "ConditionReport", "VectorBuild", "default_grid",
    "check_lp", "check_c0", "check_shift_upper", "recompute_term", "build_index_blocks",
    "apply_S", "build_vector", "build_single_block_vector", "orbit_error", "hitting_times",
    "criterion_norms", "geometric_schedule", "calibrate_schedule", "orbit_bound",
    "orbit_points", "preimages_at",
]
