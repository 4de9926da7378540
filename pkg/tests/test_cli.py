import json
import subprocess
import sys

import pytest

from shiftlab.cli import main


def body(path):
    return json.loads(path.read_text())["body"]


def test_density_evens(tmp_path):
    src = tmp_path / "evens.txt"
    src.write_text("\n".join(str(n) for n in range(2, 10_001, 2)))
    out = tmp_path / "d.json"
    assert main(["density", "--set", str(src), "--N", "10000", "--tail", "100", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert set(rep) == {"manifest", "body", "timing"}
    (digest,) = rep["manifest"]["inputs"].values()
    assert len(digest) == 64
    d = rep["body"]["density"]
    assert d["exact"]["prefix_upper"] == "1/2"
    assert abs(d["prefix_lower"] - 0.5) < 0.01 and abs(d["prefix_banach"] - 0.5) < 0.01


def test_density_json_input(tmp_path):
    src = tmp_path / "s.json"
    src.write_text(json.dumps([1, 2, 3, 10]))
    out = tmp_path / "d.json"
    assert main(["density", "--set", str(src), "--N", "10", "--out", str(out)]) == 0
    assert body(out)["size"] == 4


@pytest.mark.parametrize("argv", [
    ["density", "--set", "/nonexistent/file.txt", "--N", "10"],
    ["density", "--set", "{src}", "--N", "0"],
    ["density", "--set", "{bad}", "--N", "10"],
    ["pipeline", "--preset", "nope"],
    ["frobnicate"],
    ["check", "--system", "{src}"],
])
def test_usage_errors_exit_2(tmp_path, argv):
    src = tmp_path / "s.txt"
    src.write_text("1\n2\n")
    bad = tmp_path / "bad.txt"
    bad.write_text("1\nbanana\n")
    argv = [a.format(src=src, bad=bad) for a in argv]
    assert main(argv) == 2


def test_construct_and_check_flow(tmp_path):
    fam = tmp_path / "fam.json"
    assert main(["construct", "--family", "inf", "--N", "1,2", "--Q", "2", "--horizon", "300",
                 "--out", str(fam)]) == 0
    assert body(fam)["separation"]["ok"]
    system = tmp_path / "sys.json"
    system.write_text(json.dumps({"operators": [
        {"f": {"affine": 1}, "w": {"constant": 2.0}, "space": {"lp": 2.0}},
        {"f": {"affine": 2}, "w": {"constant": 3.0}, "space": {"lp": 2.0}}]}))
    rep = tmp_path / "check.json"
    code = main(["check", "--system", str(system), "--sets", str(fam), "--horizon", "300",
                 "--eps", "calibrate", "--out", str(rep)])
    b = body(rep)
    assert code == (0 if b["report"]["passed"] else 1)
    assert b["calibration"]["C"] > 0
    # an impossible schedule fails with exit 1 and witnesses
    code = main(["check", "--system", str(system), "--sets", str(fam), "--horizon", "300",
                 "--eps", "1e-300,1e-300", "--out", str(rep)])
    assert code == 1
    failing = [e for entries in body(rep)["report"]["conditions"].values() for e in entries
               if not e["pass"]]
    assert failing and any("witness" in e for e in failing)

    vec = tmp_path / "x.json"
    assert main(["build-vector", "--system", str(system), "--sets", str(fam), "--horizon", "300",
                 "--out", str(vec)]) == 0
    times = json.loads(fam.read_text())["body"]["family"]["sets"][0][:4]
    orb = tmp_path / "orbit.json"
    assert main(["orbit", "--system", str(system), "--x", str(vec), "--level", "1",
                 "--eps", "0.5", "--horizon", "300", "--times", ",".join(map(str, times)),
                 "--out", str(orb)]) == 0
    b = body(orb)
    assert b["hitting_times"]
    for n in times:
        assert (n in b["hitting_times"]) == (max(b["errors"][str(n)]) < 0.5)


def test_construct_infeasible_exit_1(tmp_path):
    out = tmp_path / "f.json"
    assert main(["construct", "--family", "ld", "--N", "5,5,5", "--horizon", "50",
                 "--out", str(out)]) == 1
    assert body(out)["empty"]


def test_gen_thm41(tmp_path):
    out = tmp_path / "pair.json"
    assert main(["gen", "--kind", "thm41", "--Lmax", "4", "--out", str(out)]) == 0
    ops = body(out)["system"]["operators"]
    assert len(ops) == 2 and ops[0]["w"]["generator"] == "thm41"


def _bundle(tmp_path, preset):
    out = tmp_path / preset
    code = main(["pipeline", "--preset", preset, "--out", str(out), "--quiet"])
    return code, out


def test_pipeline_thm41_and_determinism(tmp_path):
    code, out = _bundle(tmp_path, "thm41")
    assert code == 0
    summary = body(out / "summary.json")
    assert summary["all_pass"]
    assert summary["checks"]["disjoint_reiterative_evidence"]
    assert summary["checks"]["upper_frequent_containment_evidence"]
    again = tmp_path / "again"
    assert main(["pipeline", "--preset", "thm41", "--out", str(again), "--quiet"]) == 0
    for stage in summary["stages"] + ["summary"]:
        a = json.loads((out / f"{stage}.json").read_text())
        b = json.loads((again / f"{stage}.json").read_text())
        assert a["manifest"] == b["manifest"]
        assert json.dumps(a["body"], sort_keys=True) == json.dumps(b["body"], sort_keys=True)


def test_pipeline_thm42(tmp_path):
    code, out = _bundle(tmp_path, "thm42")
    assert code == 0
    assert all(body(out / "summary.json")["checks"].values())


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "shiftlab", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "shiftlab" in res.stdout
