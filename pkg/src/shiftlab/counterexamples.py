"""Explicit weight sequences separating disjoint hypercyclicity notions, and the power-shift scaffold.

Two pairs of weighted shifts ``(B_v, B_w)`` are built from block patterns
placed at rapidly increasing offsets ``n_l``: inside a block the ratio
``W^2_{1,n} / W^1_{1,n}`` walks through a prescribed pattern, outside it
grows like ``(3/2)^n``.  All weights are produced in log form so the tiny
coupling weights survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .criterion import TargetGrid, TupleSystem, default_grid
from .densities import NatSet
from .pseudoshift import PseudoShift, Space, WeightSeq
from .setconstruct import SeparatedFamily, SeparationSpec, construct_density

V_DEFAULT = 2.0
W_DEFAULT = 3.0


# ----------------------------------------------------------- shared blocks

def _coupled_weights(starts: Sequence[int], patterns: Sequence[np.ndarray], horizon: int,
                     v0: float = V_DEFAULT, w0: float = W_DEFAULT):
    """Log tables for ``v, w`` (index 1..horizon) realizing ``W^2_{1,s+i-1}/W^1_{1,s+i-1} = z_i``.

    For a block starting at ``s`` with pattern z of length d: ``v_{s+1} = 1``,
    ``w_{s+1} = z_1 W^1_{1,s-1} / W^2_{1,s-1}``; for ``i = 2..d`` the weight
    with the larger neighbour ratio absorbs ``z_{i-1}/z_i`` or ``z_i/z_{i-1}``.
    Off-block weights are ``v0`` and ``w0``.
    """
    lv = np.full(horizon + 1, math.log(v0))
    lw = np.full(horizon + 1, math.log(w0))
    sv = np.ones(horizon + 1, dtype=np.int8)
    sw = np.ones(horizon + 1, dtype=np.int8)
    prev_end = 0
    for s, z in zip(starts, patterns):
        z = np.asarray(z, dtype=np.float64)
        d = z.size
        if d < 1:
            raise ValueError(f"empty pattern for the block at {s}")
        if np.any(z == 0):
            raise ValueError(f"pattern for the block at {s} contains a zero")
        if s + 1 <= prev_end:
            raise ValueError(f"block at {s} overlaps the previous block ending at {prev_end}")
        if s + d > horizon:
            raise ValueError(f"block [{s + 1}, {s + d}] exceeds horizon {horizon}")
        # W^s_{1,s-1} = product of weights 2..s
        log_w1 = math.fsum(lv[2:s + 1].tolist())
        log_w2 = math.fsum(lw[2:s + 1].tolist())
        neg1 = int(np.count_nonzero(sv[2:s + 1] < 0))
        neg2 = int(np.count_nonzero(sw[2:s + 1] < 0))
        lv[s + 1], sv[s + 1] = 0.0, 1
        lw[s + 1] = math.log(abs(z[0])) + log_w1 - log_w2
        sw[s + 1] = (-1 if z[0] < 0 else 1) * (-1 if (neg1 + neg2) % 2 else 1)
        if d > 1:
            prev, cur = z[:-1], z[1:]
            grow = np.abs(cur) >= np.abs(prev)
            q = np.log(np.abs(cur)) - np.log(np.abs(prev))
            qs = np.where((cur < 0) != (prev < 0), -1, 1).astype(np.int8)
            idx = np.arange(s + 2, s + d + 1)
            lv[idx] = np.where(grow, -q, 0.0)
            sv[idx] = np.where(grow, qs, 1)
            lw[idx] = np.where(grow, 0.0, q)
            sw[idx] = np.where(grow, 1, qs)
        prev_end = s + d
    return lv, sv, lw, sw


def ratio_logs(v: WeightSeq, w: WeightSeq, horizon: int):
    """``log|W^2_{1,n}/W^1_{1,n}|`` and its sign for n = 0..horizon."""
    T1 = PseudoShift.weighted_shift(v)
    T2 = PseudoShift.weighted_shift(w)
    l1, s1 = T1.path_logs(1, horizon)
    l2, s2 = T2.path_logs(1, horizon)
    return l2 - l1, (s1 * s2).astype(np.int8)


def ratio_identity_error(v: WeightSeq, w: WeightSeq, starts: Sequence[int],
                         patterns: Sequence[np.ndarray]) -> dict:
    """Largest relative log error of ``W^2_{1,s+i-1}/W^1_{1,s+i-1} = z_i`` over all blocks."""
    top = max(s + len(z) - 1 for s, z in zip(starts, patterns))
    logs, signs = ratio_logs(v, w, top)
    worst = {"error": 0.0, "block": None, "i": None, "sign_ok": True}
    for b, (s, z) in enumerate(zip(starts, patterns), start=1):
        z = np.asarray(z, dtype=np.float64)
        n = s + np.arange(z.size)
        got, want = logs[n], np.log(np.abs(z))
        err = np.abs(got - want) / np.maximum(1.0, np.abs(want))
        if not np.array_equal(signs[n], np.where(z < 0, -1, 1)):
            worst["sign_ok"] = False
        k = int(np.argmax(err))
        if err[k] > worst["error"] or worst["block"] is None:
            worst.update(error=float(err[k]), block=b, i=k + 1)
    worst["pass"] = bool(worst["sign_ok"] and worst["error"] <= 1e-9)
    return worst


def verify_ratio_band(v: WeightSeq, w: WeightSeq, n_of: Sequence[int], band_halfwidth: float,
                      horizon: int, window: str | Callable[[int, int], int] = "short"):
    """``{n <= horizon : |W^2_{1,n}/W^1_{1,n} - 1| < halfwidth}`` and its containment in windows.

    Windows are ``[n_l, n_l + 2l]`` (``"short"``), ``[n_l, 2 n_l + l]``
    (``"long"``) or ``[n_l, window(l, n_l)]`` for a callable.
    """
    if isinstance(window, str):
        if window == "short":
            end = lambda l, n: n + 2 * l  # noqa: E731
        elif window == "long":
            end = lambda l, n: 2 * n + l  # noqa: E731
        else:
            raise ValueError(f"unknown window {window!r}")
    else:
        end = window
    logs, signs = ratio_logs(v, w, horizon)
    logs, signs = logs[1:], signs[1:]
    with np.errstate(over="ignore"):
        ratio = signs * np.exp(np.minimum(logs, 50.0))
    inside = np.nonzero(np.abs(ratio - 1.0) < band_halfwidth)[0] + 1
    windows = [(int(n), int(end(l, n))) for l, n in enumerate(n_of, start=1) if n <= horizon]
    allowed = np.zeros(horizon + 1, dtype=bool)
    for a, b in windows:
        allowed[a:min(b, horizon) + 1] = True
    bad = inside[~allowed[inside]]
    report = {"ok": bool(bad.size == 0), "violations": int(bad.size),
              "witnesses": [{"n": int(n), "ratio": float(ratio[n - 1])} for n in bad[:10]],
              "windows": [list(x) for x in windows], "band_halfwidth": band_halfwidth,
              "inside_count": int(inside.size)}
    return NatSet.from_array(inside, horizon), report


def block_hitting_set(starts: Sequence[int], counts: Sequence[int], step: int,
                      horizon: int) -> NatSet:
    """``{s_k + r step : 0 <= r < count_k}`` truncated to the horizon."""
    vals = [s + r * step for s, c in zip(starts, counts) for r in range(c)]
    return NatSet.from_iterable([n for n in vals if n <= horizon], horizon)


def _growth_violations(log_w1: np.ndarray, n_of: Sequence[int], horizon: int, bound) -> list:
    out = []
    for l, n in enumerate(n_of, start=1):
        if n > horizon:
            break
        hi = min(n_of[l] if l < len(n_of) else horizon + 1, horizon + 1)
        ns = np.arange(n, hi)
        lower = bound(l, ns)
        bad = ns[log_w1[ns] < lower - 1e-9]
        if bad.size:
            out.append({"l": l, "n": int(bad[0])})
    return out


# ------------------------------------------------------ first generator

@dataclass(frozen=True)
class Thm41Config:
    """Blocks ``y_l`` (single-operator grid rows) placed at ``n_l = base^l`` for l <= L_max."""

    L_max: int = 4
    grid: TargetGrid | None = None
    base: int = 10

    def __post_init__(self):
        if self.L_max < 1:
            raise ValueError("L_max must be >= 1")
        if self.base < 2:
            raise ValueError("base must be >= 2")
        grid = self.grid if self.grid is not None else default_grid(self.L_max, 1)
        if grid.N != 1:
            raise ValueError("the grid must hold single-operator rows")
        if grid.L < self.L_max:
            raise ValueError(f"grid covers {grid.L} levels, need {self.L_max}")
        object.__setattr__(self, "grid", grid)

    def n_of(self, l: int) -> int:
        return self.base ** l

    @property
    def offsets(self) -> list[int]:
        return [self.n_of(l) for l in range(1, self.L_max + 1)]

    @property
    def patterns(self) -> list[np.ndarray]:
        return [self.grid.coefficients(l)[0] for l in range(1, self.L_max + 1)]

    @property
    def min_horizon(self) -> int:
        return self.n_of(self.L_max) + self.L_max

    def to_params(self) -> dict:
        return {"L_max": self.L_max, "base": self.base, "rows": self.grid.row(1)}

    @classmethod
    def from_params(cls, params: Mapping) -> "Thm41Config":
        grid = TargetGrid.from_rows(params["rows"]) if "rows" in params else None
        return cls(int(params.get("L_max", 4)), grid, int(params.get("base", 10)))


def gen_thm41(config: Thm41Config, horizon: int) -> tuple[WeightSeq, WeightSeq]:
    """Weights ``(v, w)`` with ``W^2_{1,n_l+i-1} / W^1_{1,n_l+i-1} = y_{l,i}``.

    Weights are tabulated through ``horizon + 1`` so ``W_{1,n}`` exists for n <= horizon.
    """
    if horizon < config.min_horizon:
        raise ValueError(f"horizon {horizon} < n_of(L_max) + L_max = {config.min_horizon}")
    lv, sv, lw, sw = _coupled_weights(config.offsets, config.patterns, horizon + 1)
    params = dict(config.to_params(), horizon=horizon)
    v = WeightSeq.from_logs(lv[1:], sv[1:], "thm41", dict(params, which="v"))
    w = WeightSeq.from_logs(lw[1:], sw[1:], "thm41", dict(params, which="w"))
    return v, w


def thm41_growth_violations(config: Thm41Config, v: WeightSeq, horizon: int) -> list:
    """n where ``log|W^1_{1,n}| < l^2 log(1/l^2) + (n - l^2) log 2`` for n in [n_l, n_{l+1})."""
    logs, _ = PseudoShift.weighted_shift(v).path_logs(1, horizon)
    return _growth_violations(
        logs, config.offsets, horizon,
        lambda l, ns: l * l * math.log(1 / (l * l)) + (ns - l * l) * math.log(2))


def reiterative_grid(L_max: int, l: int, M: int, targets: Sequence[float],
                     base: TargetGrid | None = None) -> tuple[TargetGrid, list[int]]:
    """Grid whose levels ``L_k`` repeat ``targets`` at positions ``rM + i`` for r <= k.

    ``L_k`` is the least level above ``L_{k-1}`` with ``(L_k - l)/M >= k``.
    Returns the grid and the selected levels.
    """
    if len(targets) != l:
        raise ValueError(f"need {l} targets, got {len(targets)}")
    base = base if base is not None else default_grid(L_max, 1)
    rows = base.row(1)[:L_max]
    if len(rows) < L_max:
        raise ValueError(f"base grid covers {len(rows)} levels, need {L_max}")
    chosen = []
    k, L = 1, 1
    while L <= L_max:
        if (L - l) >= k * M:
            row = list(rows[L - 1])
            for r in range(k + 1):
                for i in range(1, l + 1):
                    row[r * M + i - 1] = float(targets[i - 1])
            rows[L - 1] = row
            chosen.append(L)
            k += 1
        L += 1
    return TargetGrid.from_rows(rows), chosen


def thm41_schedule_eps(v: WeightSeq, w: WeightSeq, a, M: int, horizon: int, p: float = 2.0) -> float:
    """Least ε meeting both tail inequalities that fix M in the reiterative argument.

    Tail sums run to the horizon.
    """
    a = np.asarray(a, dtype=np.float64)
    l = a.shape[1]
    q = a[1] / a[0]
    gamma, Gamma = float(q.min()), float(q.max()) + 1
    if gamma <= 0:
        raise ValueError("the schedule needs a_{2,i}/a_{1,i} > 0")
    T1, T2 = PseudoShift.weighted_shift(v), PseudoShift.weighted_shift(w)
    l1, _ = T1.path_logs(1, horizon)
    l2, _ = T2.path_logs(1, horizon)
    rel = l2[:l] - l1[:l]  # log|W^2_{1,i-1}/W^1_{1,i-1}|, i = 1..l
    w_sup = float(np.max(w.log_table[1:horizon + 1]))
    tail1 = math.fsum(np.exp(-p * l1[M:]).tolist())
    tail2 = math.fsum(np.exp(-p * l2[M:]).tolist())
    e1 = math.exp(l * p * w_sup - p * math.log(gamma / 2) - p * float(rel.min())) * tail1
    e2 = math.exp(l * p * math.log(2) + p * math.log(2) + p * math.log(Gamma)
                  + p * float(rel.max())) * tail2
    return max(e1, e2)


# ----------------------------------------------------- second generator

def default_alpha(J: int) -> float:
    return 1.0 if J == 1 else min(1.0, math.log(4 / 3) / (2 * math.log(J)))


def diagonal_pairs(levels: int) -> list[tuple[int, int]]:
    """``(J, M)`` pairs by rounds d = 1, 2, ...: round d lists J + M <= d + 1, J ascending.

    Pairs with ``J > l`` are skipped at position l, so each pair recurs
    once per round it belongs to.
    """
    out = []
    d = 1
    while len(out) < levels:
        for J in range(1, d + 1):
            for M in range(1, d + 2 - J):
                if len(out) >= levels:
                    break
                if J <= len(out) + 1:
                    out.append((J, M))
        d += 1
    return out


@dataclass(frozen=True)
class Thm42Config:
    n_seq: tuple[int, ...]
    phi1: tuple[int, ...]
    phi2: tuple[int, ...]
    alpha: Mapping[int, float]
    grid: TargetGrid
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "n_seq", tuple(int(n) for n in self.n_seq))
        object.__setattr__(self, "phi1", tuple(int(j) for j in self.phi1))
        object.__setattr__(self, "phi2", tuple(int(m) for m in self.phi2))
        object.__setattr__(self, "alpha", {int(k): float(v) for k, v in dict(self.alpha).items()})
        L = len(self.n_seq)
        if not (len(self.phi1) == len(self.phi2) == L) or L < 1:
            raise ValueError("n_seq, phi1 and phi2 need the same positive length")
        n = self.n_seq
        if any(b <= a for a, b in zip(n, n[1:])) or n[0] < 1:
            raise ValueError("predicate failed: n_seq strictly increasing")
        ratios = [Fraction(a, b) for a, b in zip(n, n[1:])]
        if any(b >= a for a, b in zip(ratios, ratios[1:])):
            raise ValueError("predicate failed: n_l / n_{l+1} decreasing")
        for l, (J, M) in enumerate(zip(self.phi1, self.phi2), start=1):
            if J < 1 or M < 1:
                raise ValueError("predicate failed: phi values are naturals")
            if J > l:
                raise ValueError(f"predicate failed: phi1(l) <= l (l={l}, J={J})")
            if J not in self.alpha:
                raise ValueError(f"predicate failed: alpha given for J={J}")
        for J, a in self.alpha.items():
            if not 0 < a <= 1:
                raise ValueError(f"predicate failed: 0 < alpha_J <= 1 (J={J}, alpha={a})")
            if J ** (2 * a) > 4 / 3 + 1e-12:
                raise ValueError(f"predicate failed: J^(2 alpha_J) <= 4/3 (J={J})")
        if self.grid.N != 1 or self.grid.L < max(self.phi1):
            raise ValueError("grid must hold single-operator rows for every J = phi1(l)")
        for l in range(len(n) - 1):
            if n[l] + self.degree(l + 1) >= n[l + 1]:
                raise ValueError(f"predicate failed: block {l + 1} ends before n_{l + 2}")

    @classmethod
    def default(cls, levels: int = 3, grid: TargetGrid | None = None) -> "Thm42Config":
        pairs = diagonal_pairs(levels)
        Js = sorted({J for J, _ in pairs})
        grid = grid if grid is not None else default_grid(max(Js), 1)
        return cls(tuple(4 ** (l * l) for l in range(1, levels + 1)),
                   tuple(J for J, _ in pairs), tuple(M for _, M in pairs),
                   {J: default_alpha(J) for J in Js}, grid)

    @property
    def L_max(self) -> int:
        return len(self.n_seq)

    def degree(self, l: int) -> int:
        return math.floor(self.alpha[self.phi1[l - 1]] * self.n_seq[l - 1])

    def tiles(self, l: int) -> int:
        """Number of complete y-blocks placed in z_l."""
        J, M = self.phi1[l - 1], self.phi2[l - 1]
        return (self.degree(l) - J) // (J + M) + 1 if self.degree(l) >= J else 0

    def z(self, l: int) -> np.ndarray:
        J, M = self.phi1[l - 1], self.phi2[l - 1]
        z = np.ones(self.degree(l))
        y = self.grid.coefficients(J)[0]
        for r in range(self.tiles(l)):
            z[r * (J + M): r * (J + M) + J] = y
        return z

    def predicates(self) -> dict:
        """Growth predicates evaluated over the table (bounded coupling, summable tails)."""
        n = self.n_seq
        coupling = [l * (l - 1) * (2 / 3) ** (n[l - 1] - 2 * n[l - 2]) for l in range(2, len(n) + 1)]
        partial, acc, logs = [], 0.0, []
        for l in range(1, len(n) + 1):
            log_gamma = (sum(n[:l]) * math.log(3 / 4) + (n[l - 1] - sum(n[:l - 1])) * math.log(2))
            logs.append(log_gamma)
            acc += math.exp(math.log(n[l - 1]) - self.p * log_gamma)
            partial.append(acc)
        return {"coupling_sup": max(coupling, default=0.0), "coupling": coupling,
                "log_growth": logs, "summable_partial_sums": partial,
                "ratio_decreasing": True, "phi1_le_l": True}

    def to_params(self) -> dict:
        return {"n_seq": list(self.n_seq), "phi1": list(self.phi1), "phi2": list(self.phi2),
                "alpha": {str(k): v for k, v in self.alpha.items()}, "rows": self.grid.row(1),
                "p": self.p}

    @classmethod
    def from_params(cls, params: Mapping) -> "Thm42Config":
        return cls(params["n_seq"], params["phi1"], params["phi2"],
                   {int(k): v for k, v in params["alpha"].items()},
                   TargetGrid.from_rows(params["rows"]), float(params.get("p", 2.0)))


def gen_thm42(config: Thm42Config, horizon: int) -> tuple[WeightSeq, WeightSeq]:
    """Weights ``(v, w)`` with ``W^2_{1,n_l+i-1} / W^1_{1,n_l+i-1} = z_{l,i}``."""
    need = 2 * config.n_seq[-1]
    if horizon < need:
        raise ValueError(f"horizon {horizon} < 2 n_L = {need}")
    patterns = [config.z(l) for l in range(1, config.L_max + 1)]
    lv, sv, lw, sw = _coupled_weights(config.n_seq, patterns, horizon + 1)
    params = dict(config.to_params(), horizon=horizon)
    v = WeightSeq.from_logs(lv[1:], sv[1:], "thm42", dict(params, which="v"))
    w = WeightSeq.from_logs(lw[1:], sw[1:], "thm42", dict(params, which="w"))
    return v, w


def thm42_hitting_set(config: Thm42Config, J: int, M: int, horizon: int) -> tuple[NatSet, list[dict]]:
    """``A = {n_{L_k} + r(J+M)}`` over levels with ``phi(L_k) = (J, M)`` and its per-block counts."""
    starts, counts, blocks = [], [], []
    for l in range(1, config.L_max + 1):
        if (config.phi1[l - 1], config.phi2[l - 1]) != (J, M):
            continue
        n = config.n_seq[l - 1]
        a = config.alpha[J]
        bound = math.floor(Fraction(a).limit_denominator(10 ** 12) * n - J) // (J + M) + 1 \
            if a * n >= J else 0
        starts.append(n)
        counts.append(config.tiles(l))
        blocks.append({"L": l, "start": n, "tiles": config.tiles(l), "bound": bound})
    A = block_hitting_set(starts, counts, J + M, horizon)
    for b in blocks:
        lo, hi = b["start"], b["start"] + config.degree(b["L"])
        b["count"] = len(A.restrict(lo, hi))
        b["match"] = b["count"] == b["bound"]
    return A, blocks


def block_read_violations(config: Thm42Config) -> list[dict]:
    """Positions where ``z_{l, r(J+M)+i} != y_{J,i}`` inside a tiled block."""
    out = []
    for l in range(1, config.L_max + 1):
        J, M = config.phi1[l - 1], config.phi2[l - 1]
        z = config.z(l)
        y = config.grid.coefficients(J)[0]
        for r in range(config.tiles(l)):
            got = z[r * (J + M): r * (J + M) + J]
            if not np.array_equal(got, y):
                out.append({"l": l, "r": r})
    return out


def z_band_violations(config: Thm42Config) -> list[dict]:
    out = []
    for l in range(1, config.L_max + 1):
        J = config.phi1[l - 1]
        mag = np.abs(config.z(l))
        bad = np.nonzero((mag * J < 1) | (mag > J))[0]
        if bad.size:
            out.append({"l": l, "j": int(bad[0]) + 1, "value": float(mag[bad[0]])})
    return out


# -------------------------------------------------------- power scaffold

@dataclass(frozen=True)
class PowersConfig:
    """Tuple ``lambda_s B^{i_s}`` with strictly increasing moduli and exponents."""

    lambdas: tuple[float, ...] = (2.0, 3.0)
    exponents: tuple[int, ...] = (1, 2)
    p: float = 2.0
    guard: float = 1e-6
    r: Fraction | None = None
    M: int | None = None

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        exps = tuple(int(i) for i in self.exponents)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "exponents", exps)
        if len(lam) != len(exps) or len(lam) < 2:
            raise ValueError("need at least two operators with matching exponents")
        mods = [abs(x) for x in lam]
        if mods[0] <= 1 or any(b <= a for a, b in zip(mods, mods[1:])):
            raise ValueError("need 1 < |lambda_1| < ... < |lambda_N|")
        if exps[0] < 1 or any(b <= a for a, b in zip(exps, exps[1:])):
            raise ValueError("need 1 <= i_1 < ... < i_N")
        if self.r is not None:
            r = Fraction(self.r)
            if r <= 1:
                raise ValueError("r must exceed 1")
            if r >= self.r_sup:
                raise ValueError(f"r must be below {self.r_sup}")
            object.__setattr__(self, "r", r)
        if self.M is not None and self.M <= self.M_inf:
            raise ValueError(f"M must exceed {self.M_inf}")

    @property
    def delta(self) -> Fraction:
        return Fraction(self.exponents[0], self.exponents[-1])

    @property
    def gamma(self) -> float:
        m = [math.log(abs(x)) for x in self.lambdas]
        return max(a / b for a, b in zip(m, m[1:]))

    @property
    def Gamma(self) -> float:
        return math.log(abs(self.lambdas[-1])) / math.log(abs(self.lambdas[0]))

    @property
    def r_sup(self) -> float:
        e = self.exponents
        return min(1 / self.gamma, min(b / a for a, b in zip(e, e[1:])))

    @property
    def M_inf(self) -> float:
        return max(2 / self.delta, self.Gamma)

    @property
    def ratio(self) -> Fraction:
        if self.r is not None:
            return self.r
        return Fraction(self.r_sup * (1 - self.guard))

    @property
    def multiplier(self) -> int:
        return self.M if self.M is not None else math.ceil(self.M_inf) + 1

    def constants(self) -> dict:
        return {"delta": float(self.delta), "gamma": self.gamma, "Gamma": self.Gamma,
                "r": float(self.ratio), "r_exact": str(self.ratio), "M": self.multiplier}

    def system(self) -> TupleSystem:
        space = Space.lp(self.p)
        return TupleSystem(tuple(PseudoShift.scaled_power(lam, i, space)
                                 for lam, i in zip(self.lambdas, self.exponents)))

    def to_params(self) -> dict:
        out = {"lambdas": list(self.lambdas), "exponents": list(self.exponents), "p": self.p,
               "guard": self.guard}
        if self.r is not None:
            out["r"] = str(self.r)
        if self.M is not None:
            out["M"] = self.M
        return out

    @classmethod
    def from_params(cls, params: Mapping) -> "PowersConfig":
        r = params.get("r")
        return cls(tuple(params.get("lambdas", (2.0, 3.0))), tuple(params.get("exponents", (1, 2))),
                   float(params.get("p", 2.0)), float(params.get("guard", 1e-6)),
                   Fraction(r) if r is not None else None, params.get("M"))


def scaffold_intervals(config: PowersConfig, horizon: int) -> list[tuple[int, int]]:
    """Integer ranges of ``(M^j r^j, M^j r^{j+1} - j)`` for j >= 1, clipped to the horizon."""
    r, M = config.ratio, config.multiplier
    out = []
    j = 1
    while True:
        start = Fraction(M) ** j * r ** j
        if start >= horizon:
            break
        lo = math.floor(start) + 1
        hi = math.ceil(start * r - j) - 1
        if hi >= lo:
            out.append((lo, min(hi, horizon)))
        j += 1
    return out


def gen_powers_scaffold(config: PowersConfig, horizon: int) -> tuple[NatSet, dict]:
    ivs = scaffold_intervals(config, horizon)
    if not ivs:
        raise ValueError(f"horizon {horizon} is below the first scaffold interval")
    B = NatSet.from_array(np.concatenate([np.arange(a, b + 1) for a, b in ivs]), horizon)
    consts = dict(config.constants(), intervals=[list(x) for x in ivs])
    return B, consts


def powers_min_elements(config: PowersConfig, levels: int) -> list[int]:
    """``ceil(M^k r^k + M k)`` for k = 1..levels."""
    r, M = config.ratio, config.multiplier
    return [math.ceil(Fraction(M) ** k * r ** k + M * k) for k in range(1, levels + 1)]


def gen_powers_ld_set(config: PowersConfig, horizon: int, levels: int = 3
                      ) -> tuple[TupleSystem, SeparatedFamily, NatSet, dict]:
    """Scaffold B fed to the density construction with margins ``N_k = k + 1`` and Q = 1."""
    B, consts = gen_powers_scaffold(config, horizon)
    spec = SeparationSpec(tuple(k + 1 for k in range(1, levels + 1)), 1, "lower_density")
    fam = construct_density([B] * levels, spec, horizon,
                            min_elements=powers_min_elements(config, levels))
    return config.system(), fam, B, consts


# --------------------------------------------------- config indirection

def weights_from_generator(name: str, params: Mapping) -> WeightSeq:
    """Rebuild generated weights from their embedded config."""
    which = params.get("which", "v")
    if which not in ("v", "w"):
        raise ValueError(f"unknown weight selector {which!r}")
    if name == "thm41":
        cfg = Thm41Config.from_params(params)
        v, w = gen_thm41(cfg, int(params.get("horizon", cfg.min_horizon)))
    elif name == "thm42":
        cfg = Thm42Config.from_params(params)
        v, w = gen_thm42(cfg, int(params.get("horizon", 2 * cfg.n_seq[-1])))
    elif name == "powers":
        return WeightSeq.constant(float(params["lambda"]))
    else:
        raise ValueError(f"unknown generator {name!r}")
    return v if which == "v" else w


__all__ = [
    "Thm41Config", "Thm42Config", "PowersConfig", "gen_thm41", "gen_thm42",
    "gen_powers_scaffold", "gen_powers_ld_set", "verify_ratio_band", "ratio_logs",
    "ratio_identity_error", "block_hitting_set", "reiterative_grid", "thm41_schedule_eps",
    "thm41_growth_violations", "thm42_hitting_set", "block_read_violations",
    "z_band_violations", "diagonal_pairs", "default_alpha", "scaffold_intervals",
    "powers_min_elements", "weights_from_generator",
]
