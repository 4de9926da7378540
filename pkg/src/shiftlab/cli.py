"""Command-line front end: ``shiftlab <command> ...``.

Every report is JSON with three top-level fields: ``manifest`` (command,
input digests, parameters, version), ``body`` (deterministic results) and
``timing`` (wall-clock only).  Exit codes: 0 all checks pass, 1 checks ran
and failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .counterexamples import (
    PowersConfig, Thm41Config, Thm42Config, block_hitting_set, block_read_violations,
    gen_powers_ld_set, gen_thm41, gen_thm42, ratio_identity_error, ratio_logs,
    reiterative_grid, thm41_growth_violations, thm41_schedule_eps, thm42_hitting_set,
    verify_ratio_band, z_band_violations,
)
from .criterion import (
    TargetGrid, TupleSystem, build_vector, calibrate_schedule, check_c0, check_lp,
    check_shift_upper, criterion_norms, default_grid, geometric_schedule, hitting_times,
    orbit_bound, orbit_error, _jsonable,
)
from .densities import HorizonError, NatSet, density_report
from .pseudoshift import FiniteVec, PseudoShift, summability_tail
from .setconstruct import (
    PartialFamilyError, SeparatedFamily, SeparationSpec, construct_banach, construct_density,
    construct_infinite, normalize_family, verify_separation,
)

PRESETS = ("powers-2B-3B2", "thm41", "thm42")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unreadable input; maps to exit code 2."""


# ----------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str
    params: dict
    inputs: dict = field(default_factory=dict)
    version: str = __version__

    def add_input(self, path: str | Path):
        p = Path(path)
        self.inputs[str(p)] = hashlib.sha256(p.read_bytes()).hexdigest()

    def to_dict(self) -> dict:
        return {"command": self.command, "params": self.params, "inputs": self.inputs,
                "version": self.version}


def _dump(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


def write_report(path: str | Path | None, manifest: RunManifest, body: dict, started: float):
    doc = {"manifest": manifest.to_dict(), "body": body,
           "timing": {"duration_s": round(time.perf_counter() - started, 6)}}
    text = _dump(doc)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# ------------------------------------------------------------------ readers

def _read_text(path: str, manifest: RunManifest | None = None) -> str:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    if manifest is not None:
        manifest.add_input(p)
    return p.read_text()


def _read_json(path: str, manifest: RunManifest | None = None):
    text = _read_text(path, manifest)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON ({exc})") from None


def _unwrap(data):
    """Accept either a bare payload or a report whose body holds it."""
    if isinstance(data, dict) and "body" in data and "manifest" in data:
        return data["body"]
    return data


def read_natset(path: str, manifest: RunManifest | None = None,
                horizon: int | None = None) -> NatSet:
    text = _read_text(path, manifest)
    try:
        if text.lstrip().startswith(("[", "{")):
            return NatSet.from_json(text, horizon)
        return NatSet.from_text(text, horizon)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: not a set of naturals ({exc})") from None


def read_system(path: str, manifest: RunManifest) -> TupleSystem:
    data = _unwrap(_read_json(path, manifest))
    if isinstance(data, dict) and "system" in data:
        data = data["system"]
    try:
        if isinstance(data, dict) and "f" in data:
            return TupleSystem((PseudoShift.from_config(data),))
        return TupleSystem.from_config(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: bad system config ({exc})") from None


def read_family(path: str, manifest: RunManifest) -> list[NatSet] | SeparatedFamily:
    data = _unwrap(_read_json(path, manifest))
    if isinstance(data, dict) and "family" in data:
        data = data["family"]
    try:
        if isinstance(data, dict):
            return SeparatedFamily.from_dict(data)
        sets = [list(map(int, s)) for s in data]
        H = max((max(s) for s in sets if s), default=1)
        return [NatSet.from_iterable(s, H) for s in sets]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: bad family ({exc})") from None


def read_grid(source: str, manifest: RunManifest, levels: int, N: int) -> TargetGrid:
    if source == "default":
        return default_grid(levels, N)
    data = _unwrap(_read_json(source, manifest))
    if isinstance(data, dict) and "grid" in data:
        data = data["grid"]
    try:
        return TargetGrid.from_config(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{source}: bad grid ({exc})") from None


def read_vector(path: str, manifest: RunManifest) -> FiniteVec:
    data = _unwrap(_read_json(path, manifest))
    if isinstance(data, dict) and "x" in data:
        data = data["x"]
    try:
        return FiniteVec.from_config(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{path}: bad vector ({exc})") from None


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def parse_eps(text: str, L: int):
    """``geometric:RATIO[:C]``, ``calibrate[:SAFETY]`` or a comma-separated list."""
    if text.startswith("geometric:"):
        parts = text.split(":")[1:]
        try:
            ratio = float(parts[0])
            C = float(parts[1]) if len(parts) > 1 else 1.0
        except (ValueError, IndexError):
            raise UsageError(f"bad eps schedule {text!r}") from None
        return geometric_schedule(C, L, ratio)
    if text.startswith("calibrate"):
        parts = text.split(":")
        try:
            return ("calibrate", float(parts[1]) if len(parts) > 1 else 4.0)
        except ValueError:
            raise UsageError(f"bad eps schedule {text!r}") from None
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"bad eps schedule {text!r}") from None
    if len(vals) < L:
        raise UsageError(f"eps list has {len(vals)} entries, need {L}")
    return vals


# ----------------------------------------------------------------- commands

def cmd_density(args) -> int:
    t0 = time.perf_counter()
    if args.N < 1:
        raise UsageError("--N must be >= 1")
    m = RunManifest("density", {"N": args.N, "tail": args.tail, "min_window": args.min_window})
    A = read_natset(args.set, m, horizon=args.horizon)
    if args.horizon is None and "horizon" not in Path(args.set).read_text()[:200]:
        # an undeclared listing is taken as exact up to N
        A = A.with_horizon(max(A.horizon, args.N))
    try:
        rep = density_report(A, args.N, args.tail, args.min_window)
    except (ValueError, HorizonError) as exc:
        raise UsageError(str(exc)) from None
    write_report(args.out, m, {"density": rep.to_dict(), "size": len(A.truncate(args.N))}, t0)
    return EXIT_OK


def _sources(args, m: RunManifest, J: int) -> list[NatSet]:
    if not args.sources:
        return [NatSet.naturals(args.horizon) for _ in range(J)]
    paths = args.sources
    if len(paths) == 1:
        paths = paths * J
    if len(paths) != J:
        raise UsageError(f"{len(paths)} source files for {J} margins")
    return [read_natset(p, m, horizon=args.horizon) for p in paths]


def cmd_construct(args) -> int:
    t0 = time.perf_counter()
    margins = parse_int_list(args.N)
    family = normalize_family(args.family)
    m = RunManifest("construct", {"family": family, "N": margins, "Q": args.Q,
                                  "horizon": args.horizon, "D": args.D, "order": args.order,
                                  "thinning": args.thinning})
    spec = SeparationSpec(tuple(margins), args.Q, family)
    B = _sources(args, m, len(margins))
    try:
        if family == "infinite":
            fam = construct_infinite(B, spec, args.horizon, order=args.order)
        elif family == "upper_banach":
            if args.D is None:
                raise UsageError("--D is required for the upper Banach family")
            D = [Fraction(d) for d in args.D.split(",")]
            if len(D) == 1:
                D = D * len(margins)
            fam = construct_banach(B, D, spec, args.horizon)
        else:
            thin = args.thinning if args.thinning in ("auto", "none") else parse_int_list(args.thinning)
            fam = construct_density(B, spec, args.horizon, thinning=thin)
    except PartialFamilyError as exc:
        body = {"error": str(exc), "empty": exc.empty}
        if exc.family is not None:
            body["family"] = exc.family.to_dict()
        write_report(args.out, m, body, t0)
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sep = verify_separation(fam)
    write_report(args.out, m, {"family": fam.to_dict(), "separation": sep.to_dict()}, t0)
    return EXIT_OK if sep.ok else EXIT_FAIL


def _run_check(system, fam, grid, eps_arg, horizon, L, tail_tol, with_norms=True):
    sets = fam.sets if isinstance(fam, SeparatedFamily) else fam
    L = L or min(len(sets), grid.L)
    checker = check_lp if system.space.kind == "lp" else check_c0
    kwargs = {"tail_tol": tail_tol} if checker is check_lp else {}
    eps = parse_eps(eps_arg, L) if isinstance(eps_arg, str) else eps_arg
    calib = None
    if isinstance(eps, tuple):
        raw = checker(system, fam, grid, None, horizon, L, **kwargs)
        norms = None
        if with_norms:
            bv = build_vector(system, grid, fam, horizon, L)
            norms = criterion_norms(system, grid, fam, bv, horizon)
        C = calibrate_schedule(raw, norms, L, safety=eps[1])
        eps = geometric_schedule(C, L)
        calib = {"C": C, "norms": norms}
        rep = raw.rescore(eps)
    else:
        rep = checker(system, fam, grid, eps, horizon, L, **kwargs)
    return rep, calib


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    m = RunManifest("check", {"eps": args.eps, "horizon": args.horizon, "L_max": args.L_max,
                              "tail_tol": args.tail_tol, "grid": args.grid})
    system = read_system(args.system, m)
    fam = read_family(args.sets, m)
    sets = fam.sets if isinstance(fam, SeparatedFamily) else fam
    grid = read_grid(args.grid, m, args.L_max or len(sets), system.N)
    try:
        rep, calib = _run_check(system, fam, grid, args.eps, args.horizon, args.L_max, args.tail_tol)
    except (ValueError, HorizonError) as exc:
        raise UsageError(str(exc)) from None
    body = {"report": rep.to_dict()}
    if calib:
        body["calibration"] = calib
    write_report(args.out, m, body, t0)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_build_vector(args) -> int:
    t0 = time.perf_counter()
    m = RunManifest("build-vector", {"horizon": args.horizon, "grid": args.grid,
                                     "levels": args.levels})
    system = read_system(args.system, m)
    fam = read_family(args.sets, m)
    sets = fam.sets if isinstance(fam, SeparatedFamily) else fam
    L = args.levels or len(sets)
    grid = read_grid(args.grid, m, L, system.N)
    try:
        bv = build_vector(system, grid, fam, args.horizon, L)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_report(args.out, m, dict(bv.to_dict(), grid=grid.to_config()), t0)
    return EXIT_OK


def cmd_orbit(args) -> int:
    t0 = time.perf_counter()
    m = RunManifest("orbit", {"eps": args.eps, "horizon": args.horizon, "level": args.level,
                              "tail": args.tail})
    system = read_system(args.system, m)
    x = read_vector(args.x, m)
    grid = read_grid(args.targets, m, args.level, system.N)
    targets = grid.level(args.level)
    hits = hitting_times(system, x, targets, args.eps, args.horizon)
    body = {"hitting_times": list(hits.elements), "count": len(hits)}
    if args.tail is not None:
        try:
            body["density"] = density_report(hits, args.horizon, args.tail).to_dict()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.times:
        body["errors"] = {str(n): orbit_error(system, x, n, targets) for n in parse_int_list(args.times)}
    write_report(args.out, m, body, t0)
    return EXIT_OK


def cmd_gen(args) -> int:
    t0 = time.perf_counter()
    m = RunManifest("gen", {"kind": args.kind, "L_max": args.Lmax, "horizon": args.horizon})
    if args.kind == "thm41":
        cfg = Thm41Config(args.Lmax or 4)
        H = args.horizon or 2 * cfg.n_of(cfg.L_max)
        v, w = gen_thm41(cfg, H)
    elif args.kind == "thm42":
        cfg = Thm42Config.default(args.Lmax or 3)
        H = args.horizon or 2 * cfg.n_seq[-1]
        v, w = gen_thm42(cfg, H)
    elif args.kind == "powers":
        pc = PowersConfig()
        H = args.horizon or 100000
        system, fam, B, consts = gen_powers_ld_set(pc, H, args.Lmax or 3)
        write_report(args.out, m, {"system": system.to_config(), "family": fam.to_dict(),
                                   "constants": consts}, t0)
        return EXIT_OK
    else:
        raise UsageError(f"unknown kind {args.kind!r}")
    system = TupleSystem((PseudoShift.weighted_shift(v), PseudoShift.weighted_shift(w)))
    write_report(args.out, m, {"system": system.to_config(), "horizon": H}, t0)
    return EXIT_OK


# ----------------------------------------------------------------- pipeline

def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise UsageError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    return json.loads(resources.files("shiftlab").joinpath("presets", f"{name}.json").read_text())


class _Bundle:
    def __init__(self, out: Path, manifest: RunManifest):
        self.out = out
        self.manifest = manifest
        self.stages: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def stage(self, name: str, body: dict):
        m = RunManifest(f"pipeline:{name}", self.manifest.params)
        write_report(self.out / f"{name}.json", m, body, time.perf_counter())
        self.stages.append(name)


def _pipeline_powers(cfg: dict, b: _Bundle) -> dict:
    pc = PowersConfig.from_params(cfg["params"])
    H, L = int(cfg["horizon"]), int(cfg["levels"])
    system, fam, B, consts = gen_powers_ld_set(pc, H, L)
    b.stage("gen", {"system": system.to_config(), "constants": consts, "scaffold_size": len(B)})
    sep = verify_separation(fam)
    b.stage("construct", {"family": fam.to_dict(), "separation": sep.to_dict()})
    grid = default_grid(L, system.N)
    raw = check_lp(system, fam, grid, None, H, L)
    bv = build_vector(system, grid, fam, H, L)
    norms = criterion_norms(system, grid, fam, bv, H)
    C = calibrate_schedule(raw, norms, L, safety=float(cfg.get("safety", 4.0)))
    eps = geometric_schedule(C, L)
    rep = raw.rescore(eps)
    b.stage("check", {"report": rep.to_dict(), "calibration": {"C": C, "norms": norms},
                      "grid": grid.to_config()})
    b.stage("build-vector", bv.to_dict())
    orbit, hits_body = [], []
    tail = int(cfg.get("tail_start", 1000))
    orbit_ok = contain_ok = dens_ok = True
    for l in range(1, L + 1):
        A = fam.sets[l - 1]
        y = grid.level(l)
        bound = orbit_bound(eps, l, L)
        errs = [max(orbit_error(system, bv.x, n, y)) for n in A]
        worst = int(np.argmax(errs))
        ok = errs[worst] <= bound
        orbit.append({"l": l, "bound": bound, "worst": errs[worst], "worst_n": A.elements[worst],
                      "pass": ok})
        hits = hitting_times(system, bv.x, y, 2 * eps[l - 1], H)
        dens = density_report(hits, H, tail)
        contains = A.issubset(hits)
        hits_body.append({"l": l, "eps": 2 * eps[l - 1], "count": len(hits), "contains_A": contains,
                          "density": dens.to_dict()})
        orbit_ok &= ok
        contain_ok &= contains
        dens_ok &= dens.prefix_lower > 0
    b.stage("orbit", {"levels": orbit})
    b.stage("density", {"levels": hits_body, "tail_start": tail})
    return {"separation": sep.ok, "conditions": rep.passed, "orbit_bound": orbit_ok,
            "hitting_contains_A": contain_ok, "hitting_prefix_lower_positive": dens_ok}


def _thm41_checks(cfg41: Thm41Config, v, w, H, cfg: dict) -> dict:
    ident = ratio_identity_error(v, w, cfg41.offsets, cfg41.patterns)
    vmax = float(np.max(v.log_table[1:]))
    growth = thm41_growth_violations(cfg41, v, H)
    inside, band = verify_ratio_band(v, w, cfg41.offsets, float(cfg["band_halfwidth"]),
                                     int(cfg["band_horizon"]))
    dens = density_report(inside, int(cfg["band_horizon"]), int(cfg["tail_start"]))
    summ = cfg["summability"]
    sums = {}
    for s, weights in (("1", v), ("2", w)):
        T = PseudoShift.weighted_shift(weights)
        a, _ = summability_tail(T, 1, 1, int(summ["N1"]))
        b_, _ = summability_tail(T, 1, 1, int(summ["N2"]))
        sums[s] = {"N1": a, "N2": b_, "increase": b_ - a, "pass": b_ - a < float(summ["tol"])}
    return {"ratio_identity": ident, "v_max": math.exp(vmax), "v_bound_ok": vmax <= math.log(2),
            "growth_violations": growth, "band": band, "inside_band": list(inside.elements),
            "band_density": dens.to_dict(),
            "band_upper_ok": float(dens.prefix_upper) <= float(cfg["upper_max"]),
            "summability": sums}


def _pipeline_thm41(cfg: dict, b: _Bundle) -> dict:
    H, L = int(cfg["horizon"]), int(cfg["L_max"])
    cfg41 = Thm41Config(L)
    v, w = gen_thm41(cfg41, H)
    system = TupleSystem((PseudoShift.weighted_shift(v), PseudoShift.weighted_shift(w)))
    b.stage("gen", {"system": system.to_config(), "horizon": H, "offsets": cfg41.offsets})
    checks = _thm41_checks(cfg41, v, w, H, cfg)
    b.stage("structure", checks)
    ev = cfg["evidence"]
    l, M = int(ev["l"]), int(ev["M"])
    a = np.asarray(ev["a"], dtype=np.float64)
    base = ratio_logs(v, w, l)[0]  # log|W^2_{1,i-1}/W^1_{1,i-1}| is level-free for i <= l < n_1
    targets = [float(a[1, i] / a[0, i] * math.exp(base[i])) for i in range(l)]
    grid, Ls = reiterative_grid(L, l, M, targets)
    cfg_r = Thm41Config(L, grid)
    vr, wr = gen_thm41(cfg_r, H)
    sys_r = TupleSystem((PseudoShift.weighted_shift(vr), PseudoShift.weighted_shift(wr)))
    eps = thm41_schedule_eps(vr, wr, a, M, H)
    A = block_hitting_set([cfg_r.n_of(Lk) for Lk in Ls], [k + 1 for k in range(1, len(Ls) + 1)],
                          M, H)
    rep = check_shift_upper(sys_r, l, a, eps, A, H)
    _, band_r = verify_ratio_band(vr, wr, cfg_r.offsets, float(cfg["band_halfwidth"]),
                                  int(cfg["band_horizon"]))
    b.stage("reiterative", {"levels": Ls, "A": list(A.elements), "eps": eps, "M": M, "l": l,
                            "grid": grid.to_config(), "report": rep.to_dict(),
                            "band_containment": band_r})
    upper_ok = bool(checks["band"]["ok"] and checks["band_upper_ok"] and band_r["ok"])
    return {"v_bound": checks["v_bound_ok"], "ratio_identity": checks["ratio_identity"]["pass"],
            "growth": not checks["growth_violations"],
            "summability": all(s["pass"] for s in checks["summability"].values()),
            "upper_frequent_containment_evidence": upper_ok,
            "disjoint_reiterative_evidence": rep.passed}


def _pipeline_thm42(cfg: dict, b: _Bundle) -> dict:
    c42 = Thm42Config.default(int(cfg["levels"]))
    H = 2 * c42.n_seq[-1]
    v, w = gen_thm42(c42, H)
    system = TupleSystem((PseudoShift.weighted_shift(v), PseudoShift.weighted_shift(w)))
    b.stage("gen", {"system": system.to_config(), "horizon": H, "predicates": c42.predicates()})
    patterns = [c42.z(l) for l in range(1, c42.L_max + 1)]
    ident = ratio_identity_error(v, w, c42.n_seq, patterns)
    zband = z_band_violations(c42)
    reads = block_read_violations(c42)
    _, band = verify_ratio_band(v, w, c42.n_seq, float(cfg["band_halfwidth"]), H, "long")
    blocks = {}
    for J, M in sorted(set(zip(c42.phi1, c42.phi2))):
        _, bl = thm42_hitting_set(c42, J, M, H)
        blocks[f"{J},{M}"] = bl
    counts_ok = all(x["match"] for bl in blocks.values() for x in bl)
    b.stage("structure", {"ratio_identity": ident, "z_band_violations": zband,
                          "block_read_violations": reads, "band": band, "hitting_blocks": blocks})
    return {"z_band": not zband, "ratio_identity": ident["pass"], "block_read": not reads,
            "band_containment": band["ok"], "hitting_counts": counts_ok}


def cmd_pipeline(args) -> int:
    t0 = time.perf_counter()
    cfg = load_preset(args.preset)
    out = Path(args.out or f"bundle-{args.preset}")
    m = RunManifest("pipeline", {"preset": args.preset, "config": cfg})
    bundle = _Bundle(out, m)
    runner: Callable = {"powers": _pipeline_powers, "thm41": _pipeline_thm41,
                        "thm42": _pipeline_thm42}[cfg["kind"]]
    body = {"preset": args.preset}
    try:
        checks = runner(cfg, bundle)
        body["checks"] = checks
        body["all_pass"] = all(checks.values())
    except Exception as exc:  # noqa: BLE001  stage failure halts the run, bundle kept
        body["error"] = f"{type(exc).__name__}: {exc}"
        body["all_pass"] = False
    body["stages"] = bundle.stages
    write_report(out / "summary.json", m, body, t0)
    if not args.quiet:
        status = "PASS" if body["all_pass"] else "FAIL"
        print(f"{args.preset}: {status} ({out / 'summary.json'})")
        for k, v in body.get("checks", {}).items():
            print(f"  {k}: {'pass' if v else 'FAIL'}")
        if "error" in body:
            print(f"  error: {body['error']}")
    return EXIT_OK if body["all_pass"] else EXIT_FAIL


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="shiftlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"shiftlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, horizon_default=None):
        sp.add_argument("--out", default=None, help="report path (default: stdout)")
        sp.add_argument("--horizon", type=int, default=horizon_default)
        sp.add_argument("--seed", type=int, default=None, help="unused by deterministic commands")

    sp = sub.add_parser("density", help="prefix density report for a set")
    sp.add_argument("--set", required=True, help="text (one natural per line) or JSON array")
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--tail", type=int, default=1)
    sp.add_argument("--min-window", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("construct", help="build a separated family")
    sp.add_argument("--family", required=True, help="inf | ubd | ld | ud")
    sp.add_argument("--N", required=True, help="margins, comma-separated")
    sp.add_argument("--Q", type=int, default=1)
    sp.add_argument("--sources", nargs="*", default=None, help="source sets (default: naturals)")
    sp.add_argument("--D", default=None, help="target Banach densities (ubd)")
    sp.add_argument("--order", default="round_robin", choices=["round_robin", "diagonal"])
    sp.add_argument("--thinning", default="auto")
    common(sp, 100000)
    sp.set_defaults(func=cmd_construct)

    sp = sub.add_parser("check", help="check the disjoint hypercyclicity conditions")
    sp.add_argument("--system", required=True)
    sp.add_argument("--sets", required=True)
    sp.add_argument("--grid", default="default")
    sp.add_argument("--eps", default="calibrate")
    sp.add_argument("--L-max", dest="L_max", type=int, default=None)
    sp.add_argument("--tail-tol", type=float, default=1e-9)
    common(sp, 100000)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("build-vector", help="assemble the criterion vector")
    sp.add_argument("--system", required=True)
    sp.add_argument("--sets", required=True)
    sp.add_argument("--grid", default="default")
    sp.add_argument("--levels", type=int, default=None)
    common(sp, 100000)
    sp.set_defaults(func=cmd_build_vector)

    sp = sub.add_parser("orbit", help="hitting times of a vector near grid targets")
    sp.add_argument("--system", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--targets", default="default")
    sp.add_argument("--level", type=int, default=1)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--tail", type=int, default=None)
    sp.add_argument("--times", default=None, help="comma-separated n for explicit errors")
    common(sp, 100000)
    sp.set_defaults(func=cmd_orbit)

    sp = sub.add_parser("gen", help="generate a weight pair or the power-shift preset")
    sp.add_argument("--kind", required=True, choices=["thm41", "thm42", "powers"])
    sp.add_argument("--Lmax", type=int, default=None)
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("pipeline", help="run a preset end to end into a bundle directory")
    sp.add_argument("--preset", required=True)
    sp.add_argument("--out", default=None, help="bundle directory")
    sp.add_argument("--quiet", action="store_true")
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"shiftlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, HorizonError, KeyError) as exc:
        print(f"shiftlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
