"""Disjoint, multiplicatively separated subfamilies of given sets of naturals.

Given sets ``B_1, ..., B_J``, margins ``N_j`` and a multiplier bound ``Q``,
the constructions below produce disjoint ``A_j ⊆ B_j`` with
``min(A_j) >= N_j`` and ``|q n - q' m| >= N_j + N_j'`` for all distinct
``n ∈ A_j``, ``m ∈ A_j'`` and ``1 <= q, q' <= Q``.  Every existential choice
is made greedily (smallest admissible element), so outputs are deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .densities import NatSet

FAMILIES = ("infinite", "upper_banach", "lower_density", "upper_density")
FAMILY_ALIASES = {
    "inf": "infinite", "infinite": "infinite",
    "ubd": "upper_banach", "upper_banach": "upper_banach",
    "ld": "lower_density", "lower_density": "lower_density",
    "ud": "upper_density", "upper_density": "upper_density",
}


def normalize_family(tag: str) -> str:
    try:
        return FAMILY_ALIASES[tag]
    except KeyError:
        raise ValueError(f"unknown family {tag!r}; expected one of {sorted(FAMILY_ALIASES)}") from None


@dataclass(frozen=True)
class SeparationSpec:
    margins: tuple[int, ...]
    max_multiplier: int = 1
    family: str = "infinite"

    def __post_init__(self):
        object.__setattr__(self, "margins", tuple(int(n) for n in self.margins))
        object.__setattr__(self, "family", normalize_family(self.family))
        if self.max_multiplier < 1:
            raise ValueError("Q must be >= 1")
        if not self.margins:
            raise ValueError("need at least one margin")
        if any(n < 1 for n in self.margins):
            raise ValueError("all margins N_j must be >= 1")

    @property
    def effective_margins(self) -> tuple[int, ...]:
        """Running maximum of the margins; enlarging a margin only strengthens separation."""
        out, top = [], 0
        for n in self.margins:
            top = max(top, n)
            out.append(top)
        return tuple(out)

    def ratios(self) -> list[Fraction]:
        Q = self.max_multiplier
        return sorted({Fraction(a, b) for a in range(1, Q + 1) for b in range(1, Q + 1)})

    def to_dict(self) -> dict:
        return {"N": list(self.margins), "Q": self.max_multiplier, "family": self.family}

    @classmethod
    def from_dict(cls, data: dict) -> "SeparationSpec":
        return cls(tuple(data["N"]), int(data.get("Q", 1)), data.get("family", "infinite"))


@dataclass(frozen=True)
class SeparatedFamily:
    sets: tuple[NatSet, ...]
    spec: SeparationSpec
    source: tuple[NatSet, ...]
    horizon: int
    blocks: tuple[tuple[dict, ...], ...] = field(default=(), compare=False)

    def to_dict(self, include_source: bool = False) -> dict:
        out = {"spec": self.spec.to_dict(), "sets": [list(a.elements) for a in self.sets],
               "horizon": self.horizon}
        if include_source:
            out["source"] = [list(b.elements) for b in self.source]
        if self.blocks:
            out["blocks"] = [list(b) for b in self.blocks]
        return out

    def to_json(self, include_source: bool = False) -> str:
        return json.dumps(self.to_dict(include_source), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "SeparatedFamily":
        H = int(data["horizon"])
        spec = SeparationSpec.from_dict(data["spec"])
        sets = tuple(NatSet.from_iterable(s, H) for s in data["sets"])
        if "source" in data:
            source = tuple(NatSet.from_iterable(s, H) for s in data["source"])
        else:
            source = tuple(NatSet.naturals(H) for _ in sets)
        blocks = tuple(tuple(b) for b in data.get("blocks", ()))
        return cls(sets, spec, source, H, blocks)

    @classmethod
    def from_json(cls, text: str) -> "SeparatedFamily":
        return cls.from_dict(json.loads(text))


class PartialFamilyError(RuntimeError):
    """Some requested sets came out empty; ``family`` holds what was built."""

    def __init__(self, message: str, family: SeparatedFamily | None = None,
                 empty: Sequence[int] = ()):
        super().__init__(message)
        self.family = family
        self.empty = list(empty)


def _check_inputs(B: Sequence[NatSet], spec: SeparationSpec, horizon: int, allowed: Iterable[str]):
    if spec.family not in allowed:
        raise ValueError(f"family {spec.family!r} not handled here (expected {sorted(allowed)})")
    if len(B) != len(spec.margins):
        raise ValueError(f"{len(B)} source sets but {len(spec.margins)} margins")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")


def _finish(sets, spec, B, horizon, blocks=()):
    fam = SeparatedFamily(tuple(NatSet.from_array(s, horizon) for s in sets), spec,
                          tuple(b.truncate(horizon).with_horizon(horizon) for b in B),
                          horizon, tuple(tuple(b) for b in blocks))
    empty = [j + 1 for j, a in enumerate(fam.sets) if not len(a)]
    if empty:
        counts = ", ".join(f"A_{j + 1}: {len(a)}" for j, a in enumerate(fam.sets))
        raise PartialFamilyError(f"sets {empty} are empty within horizon {horizon} ({counts})",
                                 fam, empty)
    return fam


# ------------------------------------------------------------------ infinite

def _diagonal_order(J: int):
    k = 1
    while True:
        for i in range(min(k, J)):
            yield i
        k += 1


def construct_infinite(B: Sequence[NatSet], spec: SeparationSpec, horizon: int,
                       order: str = "round_robin") -> SeparatedFamily:
    """Greedy enumeration: each new element clears ``Q m + N_i(m) + N_i`` for every earlier m.

    ``order="round_robin"`` cycles 1..J; ``order="diagonal"`` follows the
    triangular sweep (1), (1, 2), (1, 2, 3), ... which starves late sets at
    small horizons.
    """
    _check_inputs(B, spec, horizon, ("infinite",))
    if order not in ("round_robin", "diagonal"):
        raise ValueError(f"unknown order {order!r}")
    J = len(B)
    Q = spec.max_multiplier
    Nm = spec.effective_margins
    arrays = [b.truncate(horizon).array for b in B]
    chosen: list[list[int]] = [[] for _ in range(J)]
    dead = [False] * J
    base = None  # max over chosen m of Q*m + N_{i(m)}

    def pick(i: int) -> bool:
        nonlocal base
        bound = Nm[i] if base is None else max(Nm[i], base + Nm[i])
        arr = arrays[i]
        pos = int(np.searchsorted(arr, bound))
        if pos >= arr.size:
            dead[i] = True
            return False
        b = int(arr[pos])
        chosen[i].append(b)
        val = Q * b + Nm[i]
        base = val if base is None else max(base, val)
        return True

    if order == "round_robin":
        while not all(dead):
            for i in range(J):
                if not dead[i]:
                    pick(i)
    else:
        sweep = _diagonal_order(J)
        misses = 0
        while not all(dead) and misses < J:
            i = next(sweep)
            if dead[i]:
                misses += 1
                continue
            misses = 0 if pick(i) else misses + 1
    return _finish(chosen, spec, B, horizon)


# ------------------------------------------------------------- upper Banach

def _prefix(arr: np.ndarray, horizon: int) -> np.ndarray:
    ind = np.zeros(horizon + 1, dtype=np.int64)
    ind[arr[arr <= horizon]] = 1
    return np.cumsum(ind)


def construct_banach(B: Sequence[NatSet], D: Sequence[Fraction | float | str],
                     spec: SeparationSpec, horizon: int) -> SeparatedFamily:
    """Greedy blocks inside dense windows.

    Block k of set i looks for the first window ``[M, M+W-1]`` with
    ``W = 2 N_i k`` and ``M >= max(Q W + 2 N_i, bound)`` holding at least
    ``D_i W`` elements of ``B_i``, then keeps elements spaced ``>= 2 N_i``.
    Each block is recorded with its achieved rate ``selected / W``.
    """
    _check_inputs(B, spec, horizon, ("upper_banach",))
    if len(D) != len(B):
        raise ValueError("need one target density per source set")
    D = [Fraction(d) if not isinstance(d, float) else Fraction(d).limit_denominator(10**6) for d in D]
    if any(d <= 0 or d > 1 for d in D):
        raise ValueError("target densities must lie in (0, 1]")
    J = len(B)
    Q = spec.max_multiplier
    Nm = spec.effective_margins
    arrays = [b.truncate(horizon).array for b in B]
    prefixes = [_prefix(a, horizon) for a in arrays]
    chosen: list[list[int]] = [[] for _ in range(J)]
    blocks: list[list[dict]] = [[] for _ in range(J)]
    dead = [False] * J
    base = None
    k = 0
    while not all(dead):
        k += 1
        for i in range(J):
            if dead[i]:
                continue
            W = 2 * Nm[i] * k
            bound = Nm[i] if base is None else base + Nm[i]
            M0 = max(Q * W + 2 * Nm[i], bound, 1)
            last = horizon - W + 1
            P = prefixes[i]
            if M0 > last:
                hit = None
            else:
                starts = np.arange(M0, last + 1, dtype=np.int64)
                counts = P[starts + W - 1] - P[starts - 1]
                good = np.nonzero(counts * D[i].denominator >= D[i].numerator * W)[0]
                hit = int(good[0]) if good.size else None
            if hit is None:
                if k == 1:
                    best = _best_window_density(P, W, horizon)
                    raise ValueError(
                        f"no window of B_{i + 1} with length {W} reaches density {D[i]} "
                        f"within horizon {horizon}; best achieved {best} ({float(best):.4g})")
                dead[i] = True
                continue
            M = M0 + hit
            window = arrays[i][(arrays[i] >= M) & (arrays[i] <= M + W - 1)]
            sel = []
            for b in window.tolist():
                if not sel or b >= sel[-1] + 2 * Nm[i]:
                    sel.append(b)
            chosen[i].extend(sel)
            rate = Fraction(len(sel), W)
            blocks[i].append({"k": k, "length": W, "start": M, "count": int(window.size),
                              "selected": len(sel), "rate": float(rate),
                              "rate_exact": str(rate),
                              "rate_floor": str(D[i] / (2 * Nm[i]))})
            val = Q * sel[-1] + Nm[i]
            base = val if base is None else max(base, val)
    return _finish(chosen, spec, B, horizon, blocks)


def _best_window_density(P: np.ndarray, W: int, horizon: int) -> Fraction:
    if W > horizon:
        return Fraction(0)
    counts = P[W:] - P[:-W]
    return Fraction(int(counts.max()), W) if counts.size else Fraction(0)


# --------------------------------------------------- lower / upper density

def _exclusion_mask(centers: np.ndarray, r: Fraction, half: int, horizon: int) -> np.ndarray:
    """Boolean mask of integers x in (r b - half, r b + half) for b in centers."""
    p, q = r.numerator, r.denominator
    pb = centers.astype(np.int64) * p
    lo = np.clip((pb - half * q) // q + 1, 1, horizon + 1)
    hi = np.clip(-((-(pb + half * q)) // q) - 1, 0, horizon)
    keep = lo <= hi
    diff = np.zeros(horizon + 2, dtype=np.int64)
    np.add.at(diff, lo[keep], 1)
    np.add.at(diff, hi[keep] + 1, -1)
    return np.cumsum(diff)[: horizon + 1] > 0


def source_thinning(spec: SeparationSpec, densities: Sequence[float]) -> list[int]:
    """Extra strides ``t_k`` for the sources so that set k's exclusion zone covers at most ``2^-k``.

    Set k's neighbourhoods ``(r b - 2N_k, r b + 2N_k)`` around every
    ``(2^k N_k^2 t_k)``-th element of a source of density ``D_k`` cover
    about ``(4 N_k - 1) D_k sum(1/r) / (N_k^2 t_k)`` times ``2^-k`` of the
    naturals.  The first set excludes nothing and is never thinned.
    """
    Nm = spec.effective_margins
    inv = sum(1 / r for r in spec.ratios())
    out = []
    for k, (n, dens) in enumerate(zip(Nm, densities)):
        if k == 0:
            out.append(1)
            continue
        out.append(max(1, math.ceil((4 * n - 1) * dens * inv / (n * n) - 1e-12)))
    return out


def construct_density(B: Sequence[NatSet], spec: SeparationSpec, horizon: int,
                      min_elements: Sequence[int] | None = None,
                      thinning: str | Sequence[int] = "auto") -> SeparatedFamily:
    """Subsample, exclude neighbourhoods of later subsamples, then refine ratios.

    ``A_j`` starts as every ``(2^j N_j^2 t_j)``-th element of ``B_j``, where
    ``t_j`` is the source thinning (``"auto"``: :func:`source_thinning`,
    ``"none"``: all ones, or explicit integers).  Integers within distance
    ``2 N_k`` (open interval, exact rationals) of ``r b`` for any subsample
    point ``b`` of a later index ``k > j`` and ratio ``r = q/q'`` are
    removed.  For ``Q > 1`` all ratios ``r > 1`` are then separated within
    each ``A_j`` by one call to :func:`refine_ratio_separation` with margin
    ``2 N_j``.
    """
    _check_inputs(B, spec, horizon, ("lower_density", "upper_density"))
    J = len(B)
    Nm = spec.effective_margins
    if min_elements is not None and len(min_elements) != J:
        raise ValueError("min_elements needs one entry per set")
    trunc = [b.truncate(horizon).array for b in B]
    if isinstance(thinning, str):
        if thinning == "auto":
            thin = source_thinning(spec, [a.size / horizon for a in trunc])
        elif thinning == "none":
            thin = [1] * J
        else:
            raise ValueError(f"unknown thinning {thinning!r}")
    else:
        thin = [int(t) for t in thinning]
        if len(thin) != J or any(t < 1 for t in thin):
            raise ValueError("thinning needs one integer >= 1 per set")
    subs = []
    for j, a in enumerate(trunc):
        stride = 2 ** (j + 1) * Nm[j] ** 2 * thin[j]
        subs.append(a[stride - 1::stride])
    empty = [j + 1 for j, s in enumerate(subs) if not s.size]
    if empty:
        fam = SeparatedFamily(tuple(NatSet.from_array(s, horizon) for s in subs), spec,
                              tuple(b.truncate(horizon) for b in B), horizon)
        raise PartialFamilyError(
            f"subsampling exhausts the horizon {horizon} before any element for sets {empty}",
            fam, empty)
    ratios = spec.ratios()
    above = [x for x in ratios if x > 1]
    out = []
    for j in range(J):
        excluded = np.zeros(horizon + 1, dtype=bool)
        for k in range(j + 1, J):
            for r in ratios:
                excluded |= _exclusion_mask(subs[k], r, 2 * Nm[k], horizon)
        a = subs[j][~excluded[subs[j]]]
        if min_elements is not None:
            a = a[a >= min_elements[j]]
        A = NatSet.from_array(a, horizon)
        if above and len(A) > 1:
            A = refine_ratio_separation(A, above, 2 * Nm[j], spec.family, horizon)
        out.append(A.array)
    return _finish(out, spec, B, horizon)


# ------------------------------------------------------- ratio refinement

def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


def ratio_pair_violation(values: np.ndarray, r: Fraction, N: int):
    """First ``(n, m)`` with ``n != m`` and ``|n - r m| < N``, or None (exact)."""
    r = Fraction(r)
    p, q = r.numerator, r.denominator
    arr = np.asarray(values, dtype=np.int64)
    if arr.size < 2:
        return None
    qa = arr * q
    targets = arr * p
    pos = np.searchsorted(qa, targets)
    best_gap = None
    for off in (-2, -1, 0, 1):
        idx = pos + off
        ok = (idx >= 0) & (idx < arr.size)
        idx_c = np.clip(idx, 0, arr.size - 1)
        ok &= arr[idx_c] != arr
        gap = np.where(ok, np.abs(qa[idx_c] - targets), np.iinfo(np.int64).max)
        best_gap = gap if best_gap is None else np.minimum(best_gap, gap)
    bad = np.nonzero(best_gap < N * q)[0]
    if not bad.size:
        return None
    m = int(arr[bad[0]])
    diffs = np.abs(qa - m * p)
    cand = np.nonzero((diffs < N * q) & (arr != m))[0]
    return int(arr[cand[0]]), m


def _prefix_extreme(arr: np.ndarray, H: int, tail: int, largest: bool) -> Fraction:
    P = _prefix(arr, H)
    Ms = np.arange(tail, H + 1, dtype=np.int64)
    c = P[tail:]
    ratios = c / Ms
    i = int(np.argmax(ratios) if largest else np.argmin(ratios))
    # refine exactly among near-ties
    target = ratios[i]
    near = np.nonzero(np.abs(ratios - target) <= 1e-12 * max(target, 1e-300))[0]
    vals = [Fraction(int(c[k]), int(Ms[k])) for k in near]
    return max(vals) if largest else min(vals)


def _as_ratios(r) -> list[Fraction]:
    if isinstance(r, (list, tuple, set, frozenset)):
        out = sorted({Fraction(x) for x in r})
    else:
        out = [Fraction(r)]
    if not out:
        raise ValueError("need at least one ratio")
    if out[0] <= 1:
        raise ValueError(f"ratio must exceed 1, got {out[0]}")
    return out


def block_gap(ratios) -> int:
    """Least g >= 2 with ``rho^(g-1) >= max ratio``, rho the smallest ratio."""
    rs = _as_ratios(ratios)
    rho, top = rs[0], rs[-1]
    g = 2
    while rho ** (g - 1) < top:
        g += 1
    return g


def residue_period(r, N: int) -> int:
    """Least M with ``rho^M - rho^2 >= N`` and ``M >= block_gap``."""
    rs = _as_ratios(r)
    rho = rs[0]
    M = block_gap(rs)
    while rho ** M - rho * rho < N:
        M += 1
    return M


def refine_ratio_separation(A: NatSet, r, N: int, family: str, horizon: int,
                            tail_start: int | None = None) -> NatSet:
    """A subset ``A' ⊆ A`` with ``|n - r m| >= N`` for all distinct n, m in A'.

    ``r`` is one ratio or a collection of ratios (all > 1) handled at once.
    Blocks are ``[rho^e, rho^(e+1) - N]`` with ``rho`` the smallest ratio;
    kept exponents are at least ``g`` apart where ``rho^(g-1)`` reaches the
    largest ratio (``g = 2`` for a single ratio).

    The lower-density branch keeps every exponent whose window
    ``[rho^e, rho^(e+1)]`` holds at least a quarter of the prefix lower
    density, greedily spaced, trying each starting phase.  The upper-density
    branch keeps the best residue class of exponents modulo ``M``, ``M``
    minimal with ``rho^M - rho^2 >= N`` (and ``M >= g``).
    """
    ratios = _as_ratios(r)
    if N < 1:
        raise ValueError("N must be >= 1")
    family = normalize_family(family)
    rho = ratios[0]
    g = block_gap(ratios)
    H = min(horizon, A.horizon)
    arr = A.truncate(H).array
    if arr.size == 0:
        raise ValueError("cannot refine an empty set")
    if arr.size == 1:
        return NatSet(tuple(int(v) for v in arr), A.horizon)
    tail = tail_start if tail_start is not None else max(1, H // 100)
    tail = min(max(1, tail), H)
    powers = [Fraction(1)]
    while powers[-1] <= H:
        powers.append(powers[-1] * rho)
    # block e is [ceil(rho^e), floor(rho^(e+1) - N)]
    nblocks = len(powers) - 1
    lo = np.array([_ceil(powers[e]) for e in range(nblocks)], dtype=np.int64)
    hi = np.array([_floor(powers[e + 1] - N) for e in range(nblocks)], dtype=np.int64)
    win_hi = np.array([_floor(powers[e + 1]) for e in range(nblocks)], dtype=np.int64)

    def keep_blocks(exps) -> np.ndarray:
        mask = np.zeros(arr.size, dtype=bool)
        for e in exps:
            if lo[e] <= hi[e]:
                mask |= (arr >= lo[e]) & (arr <= hi[e])
        return arr[mask]

    if family == "lower_density":
        d = _prefix_extreme(arr, H, tail, largest=False)
        counts = (np.searchsorted(arr, win_hi, side="right")
                  - np.searchsorted(arr, lo, side="left"))
        cands = [e for e in range(nblocks)
                 if counts[e] > 0 and lo[e] <= hi[e]
                 and counts[e] >= d / 4 * (powers[e + 1] - powers[e])]
        if not cands:
            raise ValueError(f"no exponent window [rho^e, rho^(e+1)] for rho={rho} holds a d/4 "
                             f"share (d={d}) within horizon {H}")

        def greedy(start: int):
            out = []
            for e in cands[start:]:
                if not out or e >= out[-1] + g:
                    out.append(e)
            return out

        options = [greedy(s) for s in range(min(g, len(cands)))]
        largest = False
    elif family == "upper_density":
        M = residue_period(ratios, N)
        options = [range(m, nblocks, M) for m in range(M)]
        largest = True
    else:
        raise ValueError(f"ratio refinement needs a density family, got {family!r}")
    best, best_val = None, None
    for exps in options:
        kept = keep_blocks(exps)
        if not kept.size:
            continue
        val = _prefix_extreme(kept, H, tail, largest=largest)
        if best_val is None or val > best_val:
            best, best_val = kept, val
    if best is None:
        raise ValueError(f"every admissible block for ratios {[str(x) for x in ratios]}, N={N} "
                         f"is empty within horizon {H}")
    for x in ratios:
        bad = ratio_pair_violation(best, x, N)
        if bad is not None:
            raise RuntimeError(f"internal: refined set violates |n - {x} m| >= {N} at {bad}")
    return NatSet(tuple(int(v) for v in best), A.horizon)


# ------------------------------------------------------------ verification

@dataclass
class SeparationReport:
    ok: bool
    violations: list[dict]
    violation_count: int
    min_margin: int | None
    sizes: list[int]

    @property
    def first(self) -> dict | None:
        return self.violations[0] if self.violations else None

    def to_dict(self) -> dict:
        return {"ok": self.ok, "violations": self.violations,
                "violation_count": self.violation_count, "min_margin": self.min_margin,
                "sizes": self.sizes}


def _nearest_gaps(vals: np.ndarray, cand: np.ndarray, n_ids: np.ndarray, m_ids: np.ndarray):
    """For each entry of vals, the least |vals - cand| over cand entries with m_ids != n_ids."""
    pos = np.searchsorted(cand, vals)
    best = np.full(vals.size, np.iinfo(np.int64).max, dtype=np.int64)
    for off in (-2, -1, 0, 1):
        idx = pos + off
        ok = (idx >= 0) & (idx < cand.size)
        idx_c = np.clip(idx, 0, max(cand.size - 1, 0))
        if cand.size:
            ok &= m_ids[idx_c] != n_ids
            gap = np.where(ok, np.abs(cand[idx_c] - vals), np.iinfo(np.int64).max)
            best = np.minimum(best, gap)
    return best


def verify_separation(fam: SeparatedFamily) -> SeparationReport:
    """Exhaustive check of subset, minimum, disjointness and separation."""
    spec = fam.spec
    Q = spec.max_multiplier
    Nm = spec.margins
    H = fam.horizon
    arrays = [a.truncate(H).array for a in fam.sets]
    J = len(arrays)
    violations: list[dict] = []
    count = 0
    if len(Nm) < J:
        raise ValueError("separation spec has fewer margins than sets")
    for j in range(J):
        if j < len(fam.source):
            src = fam.source[j].truncate(H).array
            outside = arrays[j][~np.isin(arrays[j], src)]
            if outside.size:
                count += int(outside.size)
                violations.append({"kind": "subset", "j": j + 1, "n": int(outside[0])})
        if arrays[j].size and arrays[j][0] < Nm[j]:
            count += 1
            violations.append({"kind": "min", "j": j + 1, "n": int(arrays[j][0]),
                               "required": Nm[j]})
    for j in range(J):
        for jp in range(j + 1, J):
            common = np.intersect1d(arrays[j], arrays[jp])
            if common.size:
                count += int(common.size)
                violations.append({"kind": "disjoint", "j": j + 1, "j'": jp + 1,
                                   "n": int(common[0])})
    min_margin = None
    for j in range(J):
        for jp in range(j, J):
            a, b = arrays[j], arrays[jp]
            if not a.size or not b.size:
                continue
            req = Nm[j] + Nm[jp]
            bad_n = []
            for q in range(1, Q + 1):
                for qp in range(1, Q + 1):
                    gaps = _nearest_gaps(q * a, qp * b, a, b)
                    live = gaps < np.iinfo(np.int64).max
                    if live.any():
                        mg = int(gaps[live].min()) - req
                        min_margin = mg if min_margin is None else min(min_margin, mg)
                    bad = np.nonzero(live & (gaps < req))[0]
                    if bad.size:
                        count += int(bad.size)
                        bad_n.append(int(a[bad[0]]))
            if bad_n:
                n = min(bad_n)
                w = _exact_witness(n, b, Q, req)
                violations.append({"kind": "separation", "j": j + 1, "j'": jp + 1, "n": n,
                                   "q": w[0], "q'": w[1], "m": w[2],
                                   "gap": abs(w[0] * n - w[1] * w[2]), "required": req})
    order = {"subset": 0, "min": 1, "disjoint": 2, "separation": 3}
    violations.sort(key=lambda v: (order[v["kind"]], v["j"], v.get("j'", 0), v["n"],
                                   v.get("q", 0), v.get("q'", 0), v.get("m", 0)))
    return SeparationReport(not violations, violations, count, min_margin,
                            [int(a.size) for a in arrays])


def _exact_witness(n: int, b: np.ndarray, Q: int, req: int):
    for q in range(1, Q + 1):
        for qp in range(1, Q + 1):
            hit = np.nonzero((np.abs(q * n - qp * b) < req) & (b != n))[0]
            if hit.size:
                return q, qp, int(b[hit[0]])
    raise RuntimeError("internal: violation vanished on recheck")


__all__ = [
    "FAMILIES", "SeparationSpec", "SeparatedFamily", "PartialFamilyError",
    "SeparationReport", "construct_infinite", "construct_banach", "construct_density",
    "refine_ratio_separation", "ratio_pair_violation", "residue_period", "block_gap",
    "source_thinning",
    "verify_separation", "normalize_family",
]
