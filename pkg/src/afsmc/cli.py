"""Command-line front end.

    afsmc simulate <config>... [--set key=value]... [--out dir] [--jobs N]
    afsmc extract-upo <config> [--set key=value]... [--out dir]
    afsmc compare <dirA> <dirB> [--out file]

Exit codes: 0 ok, 2 configuration error, 3 simulation blow-up,
4 period-1 orbit extraction failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .analysis import RunMetrics
from .errors import AssumptionViolation, ConfigError, SimulationBlowUp, UPONotFound
from .scenarios import (
    SUMMARY_FILE,
    execute,
    load_scenario,
    parse_overrides,
    read_summary,
    with_output_dir,
    write_outputs,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_UPO = 4


def _fail(code: int, message: str) -> int:
    print(f"afsmc: error: {message}", file=sys.stderr)
    return code


def run(
    config_path: str | Path,
    overrides: Optional[dict[str, str]] = None,
    out: Optional[str | Path] = None,
    mode: Optional[str] = None,
) -> int:
    """Run one scenario file and write its outputs; returns the exit code."""
    try:
        cfg = load_scenario(config_path, overrides)
        if mode is not None:
            cfg = replace(cfg, mode=mode)
        cfg = with_output_dir(cfg, out)
        result = execute(cfg)
        write_outputs(result, cfg.output_dir)
    except (ConfigError, AssumptionViolation) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except SimulationBlowUp as exc:
        return _fail(EXIT_BLOWUP, str(exc))
    except UPONotFound as exc:
        return _fail(EXIT_UPO, str(exc))
    except OSError as exc:
        return _fail(EXIT_CONFIG, f"cannot write outputs: {exc}")
    m = result.metrics
    print(
        f"{cfg.mode}: wrote {cfg.output_dir} "
        f"(effort_l1={m.effort_l1:.6g}, max_error_steady={m.max_error_steady:.6g}, "
        f"s_settling_time={m.s_settling_time:.6g})"
    )
    return EXIT_OK


def compare(run_dir_a: str | Path, run_dir_b: str | Path, out: Optional[str | Path] = None) -> int:
    """Side-by-side metric table plus a verdict on effort_l1."""
    try:
        sa = read_summary(Path(run_dir_a) / SUMMARY_FILE)
        sb = read_summary(Path(run_dir_b) / SUMMARY_FILE)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    ma = RunMetrics.from_mapping(sa["metrics"])
    mb = RunMetrics.from_mapping(sb["metrics"])

    dt_a = sa.get("run", {}).get("dt")
    dt_b = sb.get("run", {}).get("dt")
    if dt_a is not None and dt_b is not None and float(dt_a) != float(dt_b):
        print(f"afsmc: warning: runs use different dt ({dt_a} vs {dt_b}); metrics are integrals, comparing anyway",
              file=sys.stderr)

    lines = ["metric,run_a,run_b,delta"]
    for key, va in ma.to_mapping().items():
        vb = getattr(mb, key)
        delta = vb - va if vb != va else 0.0
        lines.append(f"{key},{va!r},{vb!r},{delta!r}")
    if mb.effort_l1 < ma.effort_l1:
        verdict = "B lower effort"
    elif ma.effort_l1 < mb.effort_l1:
        verdict = "A lower effort"
    else:
        verdict = "equal effort"
    lines.append(f"# verdict = {verdict}")
    text = "\n".join(lines) + "\n"
    if out is not None:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            return _fail(EXIT_CONFIG, f"cannot write {out}: {exc}")
    sys.stdout.write(text)
    return EXIT_OK


def _run_job(args: tuple) -> int:
    return run(*args)


def _simulate(ns: argparse.Namespace) -> int:
    try:
        overrides = parse_overrides(ns.set)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    configs = ns.config
    if len(configs) == 1:
        return run(configs[0], overrides, ns.out)
    # several configs: each gets its own directory under --out, or its own output_dir
    jobs = []
    for path in configs:
        out = None if ns.out is None else Path(ns.out) / Path(path).stem
        jobs.append((path, overrides, out))
    if ns.jobs > 1:
        with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
            codes = list(pool.map(_run_job, jobs))
    else:
        codes = [_run_job(job) for job in jobs]
    return max(codes)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="afsmc", description="Fuzzy sliding-mode control of a driven pendulum")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one or more scenario files")
    sim.add_argument("config", nargs="+", help="scenario file(s)")
    sim.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    sim.add_argument("--out", help="output directory (a parent directory when several configs are given)")
    sim.add_argument("--jobs", type=int, default=1, help="run independent configs in parallel")

    ext = sub.add_parser("extract-upo", help="extract a period-1 orbit from an unforced run")
    ext.add_argument("config")
    ext.add_argument("--set", action="append", metavar="KEY=VALUE")
    ext.add_argument("--out")

    cmp_ = sub.add_parser("compare", help="compare the summaries of two runs")
    cmp_.add_argument("run_a")
    cmp_.add_argument("run_b")
    cmp_.add_argument("--out", help="also write the table to this file")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    if ns.command == "simulate":
        if ns.jobs < 1:
            return _fail(EXIT_CONFIG, "--jobs must be >= 1")
        return _simulate(ns)
    if ns.command == "extract-upo":
        try:
            overrides = parse_overrides(ns.set)
        except ConfigError as exc:
            return _fail(EXIT_CONFIG, str(exc))
        return run(ns.config, overrides, ns.out, mode="upo_extract")
    return compare(ns.run_a, ns.run_b, ns.out)


if __name__ == "__main__":
    sys.exit(main())
