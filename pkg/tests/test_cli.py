import csv
import json
import math
import xml.etree.ElementTree as ET

import pytest

from horolab import cli


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def ball_cache(tmp_path_factory):
    path = tmp_path_factory.mktemp("cache") / "ball.txt"
    assert run("cache-ball", "--max-displacement", 8, "--out", path) == 0
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.DictReader(ln for ln in lines if not ln.startswith("#")))
    return header, rows


def test_constants(tmp_path):
    out = tmp_path / "c.json"
    assert run("constants", "--word-length", 1, "--out", out) == 0
    rec = json.loads(out.read_text())
    assert rec["schema_version"] == 1
    assert rec["eps_star_lb"] == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    assert rec["ball"]["element_count"] == 9
    assert rec["evidence_grade"] == "evidence"  # word length 1 does not certify


def test_constants_empty_ball(capsys):
    assert run("constants", "--word-length", 0) == 1
    assert "no non-identity" in capsys.readouterr().err


def test_constants_cap():
    assert run("constants", "--word-length", 4, "--cap", 100) == 3


def test_constants_from_cache(tmp_path, ball_cache):
    out = tmp_path / "c.json"
    assert run("constants", "--ball-cache", ball_cache, "--out", out) == 0
    rec = json.loads(out.read_text())
    assert rec["eps_star_certified"] and rec["evidence_grade"] == "proof"


def test_constants_repeatable(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("constants", "--word-length", 2, "--out", a)
    run("constants", "--word-length", 2, "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_counterexample(tmp_path, ball_cache):
    out = tmp_path / "ce.json"
    assert run("counterexample", "--a", 1.05, "--T", 1e4, "--n", 300,
               "--ball-cache", ball_cache, "--out", out) == 0
    rec = json.loads(out.read_text())
    assert rec["exit_code"] == 0 and rec["evidence_grade"] == "proof"
    assert rec["verification"]["passed"]
    assert set(rec["evidence_summary"]) == {"proof", "evidence"}
    assert all("evidence_grade" in c for c in rec["verification"]["checks"])


def test_counterexample_inconclusive(tmp_path, ball_cache):
    out = tmp_path / "ce.json"
    assert run("counterexample", "--a", 10, "--ball-cache", ball_cache, "--out", out) == 2
    rec = json.loads(out.read_text())
    assert rec["report"]["verdict"] == "inconclusive" and rec["verification"] is None


def test_counterexample_domain(ball_cache):
    assert run("counterexample", "--a", 1, "--ball-cache", ball_cache) == 1
    assert run("counterexample", "--a", -3, "--ball-cache", ball_cache) == 1


def test_scan_diag(tmp_path, ball_cache):
    out, fig = tmp_path / "s.csv", tmp_path / "s.svg"
    assert run("scan", "--n", 21, "--ball-cache", ball_cache, "--out", out, "--figure", fig) == 0
    header, rows = read_csv(out)
    assert header[0] == "# horolab-scan schema_version=1"
    assert list(rows[0]) == ["t", "lo", "hi", "certified", "first_exceed"]
    filled = [r for r in rows if r["first_exceed"]]
    assert len(filled) == 1 and float(filled[0]["first_exceed"]) == pytest.approx(1.05, abs=0.01)
    assert ET.parse(fig).getroot().tag.endswith("svg")


def test_scan_cohorbital(tmp_path, ball_cache):
    out = tmp_path / "s.csv"
    assert run("scan", "--pair", "cohorbital", "--tau", 0.05, "--T", 1e6, "--n", 51,
               "--ball-cache", ball_cache, "--out", out) == 0
    _, rows = read_csv(out)
    assert all(float(r["hi"]) <= 0.05 + 1e-9 for r in rows)
    assert not any(r["first_exceed"] for r in rows)


def test_scan_empty(tmp_path, ball_cache):
    out = tmp_path / "s.csv"
    assert run("scan", "--n", 0, "--ball-cache", ball_cache, "--out", out) == 0
    header, rows = read_csv(out)
    assert rows == [] and out.read_text().splitlines()[-1] == "t,lo,hi,certified,first_exceed"


def test_scan_float_format(tmp_path, ball_cache):
    out = tmp_path / "s.csv"
    run("scan", "--n", 3, "--ball-cache", ball_cache, "--out", out)
    _, rows = read_csv(out)
    lo = rows[1]["lo"]
    assert float(lo) == float(f"{float(lo):.17g}") and len(lo.replace(".", "").lstrip("0")) >= 15


def test_scan_unwritable(ball_cache, tmp_path):
    assert run("scan", "--n", 3, "--ball-cache", ball_cache, "--out", tmp_path / "no" / "x.csv") == 1


def test_scan_workers_and_time_change(tmp_path, ball_cache):
    outs = []
    for w in (1, 3):
        out = tmp_path / f"s{w}.csv"
        run("scan", "--n", 9, "--T", 4, "--speed", "bump:amplitude=0.4", "--seed", 5,
            "--workers", w, "--ball-cache", ball_cache, "--out", out)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_sweep(tmp_path, ball_cache):
    out, fig = tmp_path / "w.csv", tmp_path / "w.svg"
    assert run("sweep", "--trials", 3, "--T", 30, "--n", 30, "--deltas", "0.1,0.5",
               "--ball-cache", ball_cache, "--out", out, "--figure", fig) == 0
    header, rows = read_csv(out)
    assert header[0] == "# horolab-sweep schema_version=1"
    assert [float(r["delta"]) for r in rows] == [0.1, 0.5]
    assert fig.exists()


def test_bad_arguments(capsys):
    assert run("scan", "--delta", -1) == 1
    assert run("scan", "--pair", "sideways", "--max-displacement", 5.5) == 1
    assert run("scan", "--speed", "wobbly:x=1", "--max-displacement", 5.5) == 1
    assert run("frobnicate") == 1
    assert run("scan", "--n", "many") == 1


def test_config_file(tmp_path, ball_cache):
    ini = tmp_path / "run.ini"
    ini.write_text(f"[horolab]\nball-cache = {ball_cache}\n[scan]\nn = 4\ndelta = 0.2\n")
    out = tmp_path / "s.csv"
    assert run("--config", ini, "scan", "--out", out) == 0
    _, rows = read_csv(out)
    assert len(rows) == 4
    assert run("--config", ini, "scan", "--n", 2, "--out", out) == 0
    _, rows = read_csv(out)
    assert len(rows) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[scan]\nn = lots\n")
    assert run("--config", bad, "scan") == 1
    assert run("--config", tmp_path / "missing.ini", "scan") == 1


def test_plot(tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert run("plot", "--out", a) == 0
    assert run("plot", "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    empty = tmp_path / "e.svg"
    assert run("plot", "--orbits", "", "--octagon", "no", "--out", empty) == 0
    assert ET.parse(empty).getroot().tag.endswith("svg")


def test_cache_ball(tmp_path):
    out = tmp_path / "b.txt"
    assert run("cache-ball", "--max-displacement", 5.5, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "# horolab-ball schema_version=1"
    assert len([ln for ln in lines if not ln.startswith("#")]) == 65
