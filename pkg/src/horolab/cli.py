"""Command-line front end.

Every option can also come from an INI file given with ``--config``: keys
live in a section named after the subcommand (or in ``[horolab]`` for keys
shared by all commands) and use the long option name with dashes or
underscores. Flags win over the file, the file wins over built-in defaults.

Exit codes: 0 success / proved, 1 usage or domain error, 2 inconclusive or
failed verification, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, expansiveness as xp, flows, fuchsian, plotting, psl2
from .errors import BallSizeError, ConfigError, DomainError, HorolabError

log = logging.getLogger("horolab")

EXIT_OK, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_CAP = 0, 1, 2, 3
SCHEMA_VERSION = 1

# name -> (converter, default); shared by the flag parser and the config reader
_BALL = {
    "word_length": (int, 64),
    "max_displacement": (float, 8.0),
    "cap": (int, fuchsian.DEFAULT_CAP),
    "ball_cache": (str, None),
}
OPTIONS = {
    "constants": {**_BALL, "word_length": (int, 4), "max_displacement": (float, math.inf), "out": (str, None)},
    "counterexample": {**_BALL, "a": (float, 1.05), "T": (float, 1e6), "n": (int, 10_000), "out": (str, None)},
    "scan": {
        **_BALL,
        "max_displacement": (float, 6.0),
        "pair": (str, "diag"),
        "a": (float, 1.05),
        "tau": (float, 0.05),
        "delta": (float, 0.1),
        "T": (float, 10.0),
        "n": (int, 1001),
        "speed": (str, "constant:c=1"),
        "step": (float, 1e-3),
        "seed": (int, None),
        "workers": (int, 1),
        "out": (str, None),
        "figure": (str, None),
    },
    "sweep": {
        **_BALL,
        "max_displacement": (float, 6.0),
        "pairs": (str, "diag"),
        "a": (float, 1.05),
        "r": (float, 0.05),
        "perturbation": (float, 0.0),
        "deltas": (str, "0.05,0.1,0.2"),
        "trials": (int, 20),
        "T": (float, 100.0),
        "n": (int, 200),
        "speed": (str, "constant:c=1"),
        "step": (float, 1e-3),
        "seed": (int, 0),
        "out": (str, None),
        "figure": (str, None),
    },
    "plot": {
        "T": (float, 20.0),
        "samples": (int, 400),
        "orbits": (str, "e,diag:1.05"),
        "octagon": (str, "yes"),
        "out": (str, "horocycles.svg"),
    },
    "cache-ball": {**_BALL, "word_length": (int, 64), "out": (str, "ball.txt")},
}
_POSITIVE = {"T", "step", "delta", "tau", "a", "trials", "workers", "cap"}
_NONNEG = {"word_length", "n", "samples", "r", "perturbation"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="horolab", description="Horocycle flow laboratory on the Bolza surface.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="INI file with per-command defaults")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "constants": "trace gap and separation constant from a ball",
        "counterexample": "certify the non-expansive pair diag(a, 1/a)",
        "scan": "sample the quotient distance along two orbits (CSV)",
        "sweep": "separation fractions over a delta grid (CSV)",
        "plot": "horocycle orbits in the Poincare disk (SVG)",
        "cache-ball": "write a ball of group elements to a text cache",
    }
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd, help=helps[cmd])
        for name, (conv, default) in opts.items():
            sp.add_argument(_flag(name), dest=name, type=conv, default=None,
                            help=f"default: {default}")
    return p


def _read_config(path: str | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if path:
        if not cp.read(path):
            raise ConfigError(f"cannot read config file {path}")
    return cp


def resolve(command: str, args: argparse.Namespace, cp: configparser.ConfigParser) -> dict:
    """Merge flags, config file and defaults into a validated parameter dict."""
    out = {}
    for name, (conv, default) in OPTIONS[command].items():
        val = getattr(args, name, None)
        if val is None:
            for section in (command, "horolab"):
                if cp.has_section(section):
                    for key in (name, name.replace("_", "-")):
                        if cp.has_option(section, key):
                            raw = cp.get(section, key)
                            try:
                                val = conv(raw)
                            except ValueError:
                                raise ConfigError(f"bad value for {key}: {raw!r}") from None
                            break
                if val is not None:
                    break
        out[name] = default if val is None else val
    for name, val in out.items():
        if val is None or isinstance(val, str):
            continue
        if name in _POSITIVE and not val > 0:
            raise ConfigError(f"{name} must be positive, got {val}")
        if name in _NONNEG and val < 0:
            raise ConfigError(f"{name} must be non-negative, got {val}")
    return out


def parse_speed(text: str, group) -> flows.SpeedField:
    """``kind:key=value,key=value`` -> speed field."""
    kind, _, rest = text.partition(":")
    spec = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        k, _, v = item.partition("=")
        spec[k.strip()] = v.strip()
    return flows.speed_from_spec(spec, group)


def _build_ball(cfg: dict, group):
    if cfg.get("ball_cache"):
        return fuchsian.load_ball(cfg["ball_cache"], group)
    return fuchsian.enumerate_ball(group, cfg["word_length"], cfg["max_displacement"], cap=cfg["cap"])


def _finite(v):
    return v if not (isinstance(v, float) and math.isinf(v)) else None


def _dump_json(obj, path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_text(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _ball_record(ball) -> dict:
    return {
        "group": ball.group.name,
        "word_length_limit": ball.word_length_limit,
        "displacement_limit": _finite(ball.displacement_limit),
        "complete_radius": ball.complete_radius,
        "element_count": len(ball),
    }


# ---------------------------------------------------------------------------
# commands


def cmd_constants(cfg: dict) -> int:
    group = fuchsian.bolza_group()
    t0 = time.perf_counter()
    ball = _build_ball(cfg, group)
    est = fuchsian.estimate_eps_star(ball)
    print(f"horolab: {len(ball)} elements, wall time {time.perf_counter() - t0:.3f} s", file=sys.stderr)
    _dump_json({
        "schema_version": SCHEMA_VERSION,
        "kind": "constants",
        "metric": "left-invariant, Frobenius pairing at e",
        "ball": _ball_record(ball),
        "eps_star_lb": est.eps_star_lb,
        "sigma0_lb": est.sigma0_lb,
        "word_length_used": est.word_length_used,
        "min_trace_word": list(est.min_trace_word),
        "eps_star_certified": est.certified,
        "evidence_grade": xp.PROOF if est.certified else xp.EVIDENCE,
    }, cfg["out"])
    return EXIT_OK


def cmd_counterexample(cfg: dict) -> int:
    group = fuchsian.bolza_group()
    t0 = time.perf_counter()
    ball = _build_ball(cfg, group)
    est = fuchsian.estimate_eps_star(ball)
    report = xp.build_counterexample(cfg["a"], est)
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": "counterexample",
        "config": {k: _finite(v) for k, v in cfg.items() if k not in ("out", "ball_cache")},
        "ball": _ball_record(ball),
        "constants": {"eps_star_lb": est.eps_star_lb, "sigma0_lb": est.sigma0_lb,
                      "eps_star_certified": est.certified},
        "report": report.as_record(),
        "verification": None,
    }
    code = EXIT_INCONCLUSIVE
    if report.verdict == "obstruction_proved":
        rec = xp.verify_counterexample(report, cfg["T"], cfg["n"], ball, strict=False)
        out["verification"] = rec.as_record()
        out["evidence_summary"] = {
            grade: sorted(c["name"] for c in rec.checks if c["evidence_grade"] == grade)
            for grade in (xp.PROOF, xp.EVIDENCE)
        }
        if rec.passed:
            code = EXIT_OK
    # grade of the headline claim "diag(a) gives a non-expansive pair"
    out["evidence_grade"] = xp.PROOF if code == EXIT_OK and est.certified else xp.EVIDENCE
    out["exit_code"] = code
    _dump_json(out, cfg["out"])
    log.info("counterexample: verdict %s in %.2f s", report.verdict, time.perf_counter() - t0)
    return code


def _scan_pair(cfg: dict, group, tc):
    base = psl2.IDENTITY
    if cfg["seed"] is not None:
        base = xp.random_element(np.random.default_rng(cfg["seed"]))
    x = fuchsian.QuotientPoint(base, group)
    if cfg["pair"] == "diag":
        y = fuchsian.QuotientPoint(psl2.compose(psl2.diag_element(cfg["a"]), base), group)
        desc = f"x = Gamma g, y = Gamma diag({cfg['a']!r}) g"
    elif cfg["pair"] == "cohorbital":
        y = flows.psi(tc, cfg["tau"], x) if tc else flows.horocycle_flow(x, cfg["tau"])
        desc = f"x = Gamma g, y = phi_tau(x), tau = {cfg['tau']!r}"
    else:
        raise ConfigError(f"unknown pair {cfg['pair']!r}")
    return x, y, desc


def cmd_scan(cfg: dict) -> int:
    group = fuchsian.bolza_group()
    ball = _build_ball(cfg, group)
    speed = parse_speed(cfg["speed"], group)
    tc = None if speed.constant == 1.0 else flows.TimeChange(speed, cfg["step"])
    x, y, desc = _scan_pair(cfg, group, tc)
    scan = xp.divergence_scan(x, y, cfg["delta"], cfg["T"], cfg["n"], ball, time_change=tc,
                              workers=cfg["workers"], description=desc)
    buf = io.StringIO()
    buf.write(f"# horolab-scan schema_version={SCHEMA_VERSION}\n")
    buf.write(f"# pair={desc}; speed={cfg['speed']}; delta={_fmt(scan.delta)}; T={_fmt(scan.horizon)}; "
              f"seed={cfg['seed']}\n")
    buf.write(f"# sup_lo={_fmt(scan.sup_lo)} sup_hi={_fmt(scan.sup_hi)} "
              f"first_exceed={_fmt(scan.first_exceed)} evidence_grade={scan.evidence_grade}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "lo", "hi", "certified", "first_exceed"])
    for k, (t, lo, hi, cert) in enumerate(scan.rows):
        fe = scan.first_exceed if k == scan.first_exceed_index else None
        w.writerow([_fmt(t), _fmt(lo), _fmt(hi), _fmt(cert), _fmt(fe)])
    _write_text(buf.getvalue(), cfg["out"])
    if cfg["figure"]:
        plotting.render_scan(cfg["figure"], scan.rows, scan.delta, title=desc)
    return EXIT_OK


def cmd_sweep(cfg: dict) -> int:
    group = fuchsian.bolza_group()
    ball = _build_ball(cfg, group)
    tc = flows.TimeChange(parse_speed(cfg["speed"], group), cfg["step"])
    try:
        deltas = [float(d) for d in cfg["deltas"].split(",") if d.strip()]
    except ValueError:
        raise ConfigError(f"bad delta grid {cfg['deltas']!r}") from None
    res = xp.separation_estimate(tc, cfg["trials"], deltas, cfg["T"], ball, n=cfg["n"],
                                 pairs=cfg["pairs"], a=cfg["a"], r=cfg["r"],
                                 perturbation=cfg["perturbation"], seed=cfg["seed"])
    buf = io.StringIO()
    buf.write(f"# horolab-sweep schema_version={SCHEMA_VERSION}\n")
    buf.write(f"# pairs={cfg['pairs']}; speed={cfg['speed']}; T={_fmt(cfg['T'])}; n={cfg['n']}; "
              f"seed={cfg['seed']}; evidence_grade={res['evidence_grade']} (not a proof)\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "exceeded", "trials", "fraction"])
    for row in res["rows"]:
        w.writerow([_fmt(row["delta"]), row["exceeded"], row["trials"], _fmt(row["fraction"])])
    _write_text(buf.getvalue(), cfg["out"])
    if cfg["figure"]:
        plotting.render_sweep(cfg["figure"], res["rows"])
    return EXIT_OK


def _parse_orbits(text: str) -> dict[str, psl2.GroupElement]:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if item == "e":
            out["Gamma e"] = psl2.IDENTITY
        elif item.startswith("diag:"):
            a = float(item.split(":", 1)[1])
            out[f"Gamma diag({a:g})"] = psl2.diag_element(a)
        elif item.startswith("rot:"):
            th = float(item.split(":", 1)[1])
            out[f"Gamma rot({th:g})"] = psl2.rotation_element(th)
        else:
            raise ConfigError(f"unknown orbit spec {item!r}")
    return out


def cmd_plot(cfg: dict) -> int:
    group = fuchsian.bolza_group()
    traces = {name: plotting.orbit_trace(g, cfg["T"], cfg["samples"])
              for name, g in _parse_orbits(cfg["orbits"]).items()}
    verts = plotting.octagon_vertices(group) if cfg["octagon"].lower() in ("yes", "true", "1") else None
    plotting.render_disk(cfg["out"], traces, verts)
    return EXIT_OK


def cmd_cache_ball(cfg: dict) -> int:
    group = fuchsian.bolza_group()
    ball = fuchsian.enumerate_ball(group, cfg["word_length"], cfg["max_displacement"], cap=cfg["cap"])
    _write_text(fuchsian.dumps_ball(ball), cfg["out"])
    return EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "counterexample": cmd_counterexample,
    "scan": cmd_scan,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
    "cache-ball": cmd_cache_ball,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve(args.command, args, _read_config(args.config))
        return COMMANDS[args.command](cfg)
    except BallSizeError as exc:
        print(f"horolab: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DomainError, ConfigError, HorolabError) as exc:
        print(f"horolab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"horolab: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
