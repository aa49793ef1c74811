"""Command-line entry point: ``csijam simulate | calibrate | detect | report``.

Exit codes: 0 success (for ``detect``: no jamming found), 2 jamming found,
1 any error. Every command that writes files also writes one
``*.manifest.json`` next to them; ``csijam rerun MANIFEST`` repeats the run.

Relative output names land in ``$CSIJAM_OUT_DIR`` when it is set, otherwise
in the working directory.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detector import (
    BaselineProfile,
    DetectionPolicy,
    calibrate_baseline,
    detect_trace,
    dump_verdicts,
    summarize,
)
from .errors import CsiJamError
from .scenario import PRESET_NAMES, ScenarioConfig, preset, run_scenario
from .trace import CsiTrace, jitter_series, parse_trace, pdr_windows, write_trace

OUT_DIR_ENV = "CSIJAM_OUT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_JAMMED = 0, 1, 2


class CliError(Exception):
    pass


def _out_path(name: str | None, default: str) -> Path:
    p = Path(name or default)
    if not p.is_absolute() and os.environ.get(OUT_DIR_ENV):
        p = Path(os.environ[OUT_DIR_ENV]) / p
    return p


def _guard(paths, force: bool):
    for p in paths:
        if Path(p).exists() and not force:
            raise CliError(f"{p} exists; pass --force to overwrite")


def _manifest_path(primary: Path) -> Path:
    return primary.with_name(primary.name + ".manifest.json")


def _write_manifest(primary: Path, command: str, args: dict, inputs, outputs, seed=None, config=None) -> Path:
    manifest = {
        "command": command,
        "args": args,
        "config": config,
        "seed": seed,
        "inputs": [str(Path(p).resolve()) for p in inputs],
        "outputs": [str(Path(p).resolve()) for p in outputs],
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = _manifest_path(primary)
    path.write_text(json.dumps(manifest, indent=1) + "\n")
    return path


def _load_trace(path) -> CsiTrace:
    if not Path(path).exists():
        raise CliError(f"no such trace file: {path}")
    return parse_trace(Path(path))


def _parse_range(text: str, trace: CsiTrace) -> CsiTrace:
    """``START:END`` in seconds of trace time, or record indices with an ``r`` suffix."""
    unit = "s"
    body = text.strip()
    if body and body[-1] in "sr":
        unit, body = body[-1], body[:-1]
    try:
        lo_txt, hi_txt = body.split(":")
        lo = float(lo_txt) if lo_txt else None
        hi = float(hi_txt) if hi_txt else None
    except ValueError:
        raise CliError(f"bad --range {text!r}; expected START:END, e.g. 0:30 or 0:3000r") from None
    if unit == "r":
        return trace.select(slice(None if lo is None else int(lo), None if hi is None else int(hi)))
    t = trace.timestamps_us / 1e6
    mask = np.ones(len(trace), dtype=bool)
    if lo is not None:
        mask &= t >= lo
    if hi is not None:
        mask &= t < hi
    return trace.select(mask)


def _parse_policy(items) -> dict:
    out = {}
    for item in items or []:
        for part in item.split(","):
            if not part.strip():
                continue
            if "=" not in part:
                raise CliError(f"bad --policy entry {part!r}; expected name=value")
            key, value = part.split("=", 1)
            out[key.strip()] = value.strip()
    return out


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_presets(ns) -> int:
    if ns.dump:
        print(preset(ns.dump).to_yaml(), end="")
    else:
        for name in PRESET_NAMES:
            print(name)
    return EXIT_OK


def cmd_simulate(ns) -> int:
    if bool(ns.preset) == bool(ns.config):
        raise CliError("give exactly one of --preset or --config")
    if ns.preset:
        if ns.preset not in PRESET_NAMES:
            raise CliError(f"unknown preset {ns.preset!r}; available presets:\n  " + "\n  ".join(PRESET_NAMES))
        cfg = preset(ns.preset)
        source = f"preset:{ns.preset}"
    else:
        cfg = ScenarioConfig.from_yaml(Path(ns.config).read_text())
        source = str(ns.config)
    if ns.seed is not None:
        cfg = cfg.with_seed(ns.seed)
    cfg.validate()
    out = _out_path(ns.out, f"{cfg.name}-seed{cfg.seed}.csv")
    _guard([out], ns.force)
    out.parent.mkdir(parents=True, exist_ok=True)
    trace = run_scenario(cfg)
    write_trace(trace, out)
    config_path = str(Path(ns.config).resolve()) if ns.config else None
    _write_manifest(out, "simulate", {"preset": ns.preset, "config": config_path, "seed": cfg.seed,
                                      "out": str(out.resolve())},
                    [ns.config] if ns.config else [], [out], seed=cfg.seed, config=source)
    print(f"wrote {len(trace)} records ({len(trace) / trace.meta['attempts']:.2%} delivered) to {out}")
    return EXIT_OK


def cmd_calibrate(ns) -> int:
    trace = _load_trace(ns.trace)
    segment = _parse_range(ns.range, trace) if ns.range else trace
    trace_mode = trace.meta.get("mode")
    mode = ns.mode or trace_mode or "static"
    if trace_mode and mode != trace_mode:
        print(f"warning: trace was recorded in {trace_mode} mode but is calibrated as {mode}", file=sys.stderr)
    baseline = calibrate_baseline(segment, mode, min_records=ns.min_records)
    out = _out_path(ns.out, Path(ns.trace).stem + ".baseline.json")
    _guard([out], ns.force)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(baseline.to_json() + "\n")
    _write_manifest(out, "calibrate", {"trace": str(Path(ns.trace).resolve()), "range": ns.range, "mode": mode,
                                       "min_records": ns.min_records, "out": str(out.resolve())},
                    [ns.trace], [out], seed=trace.meta.get("seed"))
    print(f"baseline from {baseline.calibration_packet_count} records: pdr_ref={baseline.pdr_ref:.4f} "
          f"jitter_p95={baseline.jitter_p95_us / 1e3:.1f} ms -> {out}")
    return EXIT_OK


def cmd_detect(ns) -> int:
    trace = _load_trace(ns.trace)
    if not Path(ns.baseline).exists():
        raise CliError(f"no such baseline file: {ns.baseline}")
    baseline = BaselineProfile.from_json(Path(ns.baseline).read_text())
    overrides = _parse_policy(ns.policy)
    mode = ns.mode or baseline.mode
    policy = DetectionPolicy(mode=mode).with_overrides(overrides)
    out = _out_path(ns.out, Path(ns.trace).stem + ".verdicts.jsonl")
    summary_path = out.with_name(out.name + ".summary.json")
    _guard([out, summary_path], ns.force)
    verdicts = detect_trace(trace, baseline, policy)
    report = summarize(verdicts)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(dump_verdicts(verdicts))
    summary = report.to_dict()
    summary_path.write_text(json.dumps(summary, indent=1) + "\n")
    _write_manifest(out, "detect", {"trace": str(Path(ns.trace).resolve()),
                                    "baseline": str(Path(ns.baseline).resolve()), "mode": mode,
                                    "policy": ns.policy or [], "out": str(out.resolve())},
                    [ns.trace, ns.baseline], [out, summary_path], seed=trace.meta.get("seed"))
    first = report.first_jammed
    print(f"{report.window_count} windows, {report.jammed_count} jammed ({report.jammed_fraction:.1%})")
    if first is not None:
        print(f"first jammed window {first.window_id} at t={first.time_us / 1e6:.3f} s "
              f"seq {first.start_seq}-{first.end_seq}, triggered: {', '.join(first.triggered)}")
        print("affected subcarriers: " + (" ".join(map(str, report.affected_union)) or "none"))
    return EXIT_JAMMED if report.jammed_count else EXIT_OK


def cmd_report(ns) -> int:
    trace = _load_trace(ns.trace)
    if len(trace) == 0:
        raise CliError("trace has no records")
    n_sub = trace.csi.shape[1]
    subs = ns.subcarrier if ns.subcarrier else [49]
    for k in subs:
        if not 0 <= k < n_sub:
            raise CliError(f"subcarrier index {k} outside 0..{n_sub - 1}")
    outdir = _out_path(ns.out, Path(ns.trace).stem + "-report")
    files = [outdir / f"amplitude_sc{k:02d}.csv" for k in subs] + [outdir / "jitter.csv", outdir / "pdr.csv"]
    _guard(files, ns.force)
    outdir.mkdir(parents=True, exist_ok=True)
    amp = np.abs(trace.csi)
    for k, path in zip(subs, files):
        cols = zip(trace.timestamps_us.tolist(), trace.seq.tolist(), amp[:, k].tolist())
        rows = [f"{t},{s},{a!r}" for t, s, a in cols]
        path.write_text("timestamp_us,seq,amplitude\n" + "".join(r + "\n" for r in rows))
    if len(trace) >= 2:
        seqs, delays = jitter_series(trace)
        times = trace.timestamps_us[1:]
        jrows = [f"{t},{s},{d}" for t, s, d in zip(times.tolist(), seqs.tolist(), delays.tolist())]
    else:
        jrows = []
    files[-2].write_text("timestamp_us,seq,delay_us\n" + "".join(r + "\n" for r in jrows))
    prow = [f"{w.start_seq},{w.end_seq},{w.expected},{w.received},{w.pdr!r}" for w in pdr_windows(trace, ns.window)]
    files[-1].write_text("start_seq,end_seq,expected,received,pdr\n" + "".join(r + "\n" for r in prow))
    _write_manifest(outdir / "report", "report", {"trace": str(Path(ns.trace).resolve()), "subcarrier": subs,
                                                  "window": ns.window, "out": str(outdir.resolve())},
                    [ns.trace], files, seed=trace.meta.get("seed"))
    print(f"wrote {len(files)} tables to {outdir}")
    return EXIT_OK


def cmd_rerun(ns) -> int:
    manifest = json.loads(Path(ns.manifest).read_text())
    argv = manifest_argv(manifest) + ["--force"]
    return main(argv)


def manifest_argv(manifest: dict) -> list[str]:
    """Command line that reproduces the run recorded in ``manifest``."""
    cmd, a = manifest["command"], manifest["args"]
    if cmd == "simulate":
        argv = ["simulate", "--seed", str(a["seed"]), "--out", a["out"]]
        argv += ["--preset", a["preset"]] if a.get("preset") else ["--config", a["config"]]
    elif cmd == "calibrate":
        argv = ["calibrate", a["trace"], "--mode", a["mode"], "--out", a["out"],
                "--min-records", str(a["min_records"])]
        if a.get("range"):
            argv += ["--range", a["range"]]
    elif cmd == "detect":
        argv = ["detect", a["trace"], "--baseline", a["baseline"], "--mode", a["mode"], "--out", a["out"]]
        for p in a.get("policy", []):
            argv += ["--policy", p]
    elif cmd == "report":
        argv = ["report", a["trace"], "--out", a["out"], "--window", str(a["window"])]
        for k in a["subcarrier"]:
            argv += ["--subcarrier", str(k)]
    else:
        raise CliError(f"manifest has unknown command {cmd!r}")
    return argv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csijam", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"csijam {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("presets", help="list scenario presets")
    sp.add_argument("--dump", metavar="NAME", help="print the preset as a YAML config")
    sp.set_defaults(func=cmd_presets)

    sp = sub.add_parser("simulate", help="synthesise a CSI trace")
    sp.add_argument("--preset", help="named preset (see `csijam presets`)")
    sp.add_argument("--config", help="YAML scenario config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("-o", "--out", help="trace file to write")
    sp.add_argument("--force", action="store_true", help="overwrite existing outputs")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("calibrate", help="learn a jammer-free baseline")
    sp.add_argument("trace")
    sp.add_argument("--range", help="segment: START:END seconds, or START:ENDr record indices")
    sp.add_argument("--mode", choices=("static", "dynamic"))
    sp.add_argument("--min-records", type=int, default=500)
    sp.add_argument("-o", "--out")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("detect", help="windowed jamming verdicts")
    sp.add_argument("trace")
    sp.add_argument("--baseline", required=True)
    sp.add_argument("--policy", action="append", metavar="NAME=VALUE", help="override a policy field (repeatable)")
    sp.add_argument("--mode", choices=("static", "dynamic"))
    sp.add_argument("-o", "--out", help="verdict file (JSON lines)")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("report", help="export amplitude, jitter and PDR tables")
    sp.add_argument("trace")
    sp.add_argument("--subcarrier", type=int, action="append", help="subcarrier index 0-51 (repeatable, default 49)")
    sp.add_argument("--window", type=int, default=100, help="PDR window in packets")
    sp.add_argument("-o", "--out", help="output directory")
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("rerun", help="repeat the run recorded in a manifest")
    sp.add_argument("manifest")
    sp.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return ns.func(ns)
    except (CliError, CsiJamError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
