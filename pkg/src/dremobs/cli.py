"""Command line: ``dremobs run | check | plot-data``.

Exit codes: 0 success, 1 acceptance failure, 2 integration fault,
3 configuration or usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .acceptance import check_acceptance, report_lines, run_suite
from .config import ConfigError, load_config, preset
from .harness import TelemetryError, emit_plot_data, read_telemetry, run_scenario

EXIT_OK, EXIT_ACCEPTANCE, EXIT_FAULT, EXIT_CONFIG = 0, 1, 2, 3


def _scenario_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--config", "-c", help="YAML scenario file")
    ap.add_argument("--preset", default="canonical", help="canonical (default), excited or unexcited")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a field, e.g. observer.gamma_r=1e-3 (repeatable)")
    ap.add_argument("--duration", type=float, help="shortcut for simulation.duration")
    ap.add_argument("--mode", choices=("ground-truth", "certainty-equivalence"),
                    help="shortcut for observer.mode")


def _load(args):
    overrides = list(args.overrides)
    if args.duration is not None:
        overrides.append(f"simulation.duration={args.duration!r}")
    if args.mode is not None:
        overrides.append(f"observer.mode={args.mode}")
    return load_config(args.config, overrides, base=preset(args.preset))


def _emit(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n")
    else:
        print(text)


def cmd_run(args) -> int:
    cfg = _load(args)
    for note in cfg.warnings():
        print(f"warning: {note}", file=sys.stderr)
    result = run_scenario(cfg, args.output)
    _emit(result.summary, args.summary)
    if not result.ok:
        print(f"integration fault at t = {result.summary['fault_time']:.6g} s; "
              f"partial log in {result.path}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def cmd_check(args) -> int:
    if args.suite:
        cfg = _load(args)
        base = cfg.to_dict()
        report = run_suite(args.workdir, base, log=lambda s: print(s, file=sys.stderr))
    else:
        if not args.telemetry:
            raise ConfigError(["check needs a telemetry file or --suite"])
        canonical = read_telemetry(args.telemetry)
        opt = {k: read_telemetry(getattr(args, k)) if getattr(args, k) else None
               for k in ("unexcited", "ce", "fine")}
        coarse = read_telemetry(args.coarse) if args.coarse else (canonical if opt["fine"] else None)
        identical = None
        if args.rerun:
            base_path = args.coarse or args.telemetry
            identical = Path(base_path).read_bytes() == Path(args.rerun).read_bytes()
        report = check_acceptance(canonical, runtime_s=args.runtime, unexcited=opt["unexcited"],
                                  coarse=coarse, fine=opt["fine"], identical_rerun=identical,
                                  ce=opt["ce"], criteria=args.criteria)
    for line in report_lines(report):
        print(line, file=sys.stderr)
    _emit(report, args.report)
    return EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


def cmd_plot(args) -> int:
    tel = read_telemetry(args.telemetry)
    tables = emit_plot_data(tel, args.select, args.outdir, log10=args.log10)
    for sel, table in tables.items():
        print(f"{sel}: {table.shape[0]} rows x {table.shape[1]} columns", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dremobs", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario and write telemetry CSV")
    _scenario_args(run)
    run.add_argument("--output", "-o", help="telemetry CSV (default: simulation.output)")
    run.add_argument("--summary", help="write the JSON summary here instead of stdout")
    run.set_defaults(func=cmd_run)

    chk = sub.add_parser("check", help="evaluate the acceptance criteria")
    chk.add_argument("telemetry", nargs="?", help="canonical-scenario telemetry CSV")
    chk.add_argument("--suite", action="store_true",
                     help="run every scenario the criteria need, then evaluate")
    chk.add_argument("--workdir", default="acceptance_runs", help="where --suite writes telemetry")
    _scenario_args(chk)
    chk.add_argument("--unexcited", help="telemetry of the unexcited scenario")
    chk.add_argument("--ce", help="telemetry of the certainty-equivalence run")
    chk.add_argument("--fine", help="telemetry of the dt/2 run")
    chk.add_argument("--coarse", help="telemetry at dt matching --fine (default: the canonical file)")
    chk.add_argument("--rerun", help="second run of the --coarse (or canonical) config, compared bytewise")
    chk.add_argument("--runtime", type=float, help="measured wall time of the canonical run (s)")
    chk.add_argument("--criteria", type=int, nargs="+", help="restrict to these criterion numbers")
    chk.add_argument("--report", help="write the JSON report here instead of stdout")
    chk.set_defaults(func=cmd_check)

    plot = sub.add_parser("plot-data", help="extract columns for external plotting")
    plot.add_argument("telemetry")
    plot.add_argument("--select", "-s", nargs="*", default=[],
                      help="selectors: flux_error_norm, excitation, flux, rotor_resistance, "
                           "load_torque, speed, determinants, residuals, or column names")
    plot.add_argument("--outdir", default="plot_data")
    plot.add_argument("--log10", action="store_true", help="store log10|x| of each series")
    plot.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TelemetryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
