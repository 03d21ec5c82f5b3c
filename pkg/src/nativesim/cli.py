"""Command-line entry point: ``nativesim run|report|inspect|annotate|characterize``."""
from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .frontend.cfg import annotate
from .frontend.characterize import (DEFAULT_COST_TABLE, BlockDatabaseError, CostTable,
                                    CostTableError, format_block_db)
from .frontend.parser import ParseError
from .kernel.engine import SimulationResult, WorkloadError
from .pipeline import BUNDLED, Workload, bundled_source, prepare
from .target import ConfigError, TargetConfig, cycles_to_ms, load_config
from .trace import TraceFormatError, TraceSink, format_report, profile, read_trace, validate_trace

SUMMARY_KEYS = (
    "workload", "cores", "target_cycles", "target_ms", "outputs", "return_value",
    "block_executions", "instructions", "parallel_cycles", "critical_wait_cycles",
    "busy_cycles", "wait_cycles", "idle_cycles", "overhead_cycles", "utilization",
    "icache_accesses", "icache_misses", "dcache_accesses", "dcache_misses",
    "shared_accesses", "warnings", "trace",
)

ERRORS = (OSError, ParseError, ConfigError, CostTableError, BlockDatabaseError, WorkloadError,
          TraceFormatError, ValueError, KeyError)


class CliError(Exception):
    pass


def parse_cores(text: str) -> list[int]:
    try:
        cores = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad core list {text!r}")
    if not cores or any(c < 1 for c in cores):
        raise argparse.ArgumentTypeError(f"core list must hold positive integers: {text!r}")
    return cores


def parse_names(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def workload_source(spec: str) -> tuple[str, str]:
    """Return (name, source) for a file path or a bundled workload name."""
    path = Path(spec)
    if path.is_file():
        return path.stem, path.read_text(encoding="utf-8")
    if spec in BUNDLED:
        return spec, bundled_source(spec)
    raise CliError(f"workload not found: {spec} (bundled: {', '.join(BUNDLED)})")


def load_workload(spec: str, cost_table=None, block_db=None) -> Workload:
    name, source = workload_source(spec)
    costs = CostTable.load(cost_table) if cost_table else DEFAULT_COST_TABLE
    return prepare(source, name, costs, block_db)


def _ints(values) -> str:
    return " ".join(str(v) for v in values)


def format_summary(name: str, result: SimulationResult, config: TargetConfig, trace: str | None) -> str:
    util = []
    for busy, clock in zip(result.busy_cycles, result.core_clocks):
        util.append(f"{busy / clock:.4f}" if clock else "0.0000")
    fields = {
        "workload": name,
        "cores": result.core_count,
        "target_cycles": result.target_cycles,
        "target_ms": f"{cycles_to_ms(result.target_cycles, config):.6f}",
        "outputs": _ints(result.outputs),
        "return_value": result.return_value,
        "block_executions": result.block_executions,
        "instructions": result.instructions,
        "parallel_cycles": result.parallel_cycles,
        "critical_wait_cycles": result.critical_wait_cycles,
        "busy_cycles": _ints(result.busy_cycles),
        "wait_cycles": _ints(result.wait_cycles),
        "idle_cycles": _ints(result.idle_cycles),
        "overhead_cycles": _ints(result.overhead_cycles),
        "utilization": " ".join(util),
        "icache_accesses": _ints(c.accesses for c in result.icache),
        "icache_misses": _ints(c.misses for c in result.icache),
        "dcache_accesses": _ints(c.accesses for c in result.dcache),
        "dcache_misses": _ints(c.misses for c in result.dcache),
        "shared_accesses": _ints(result.shared_accesses),
        "warnings": len(result.warnings),
        "trace": trace or "none",
    }
    return "".join(f"{key} = {fields[key]}\n" for key in SUMMARY_KEYS)


def parse_summary(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition(" = ")
            out[key] = value
    return out


def _simulate(args_tuple):
    """Run one core count; top-level so a process pool can call it."""
    spec, cost_table, block_db, config, cores, trace_path, filters, flush_bytes = args_tuple
    workload = load_workload(spec, cost_table, block_db)
    sink = TraceSink(trace_path, filters, flush_bytes) if trace_path else None
    start = time.perf_counter()
    result = workload.run(config.with_cores(cores), sink)
    return workload.name, result, time.perf_counter() - start


def cmd_run(args) -> int:
    config = load_config(args.config) if args.config else TargetConfig()
    for path in (args.block_db, args.cost_table):
        if path and not Path(path).is_file():
            raise CliError(f"file not found: {path}")
    name, _ = workload_source(args.workload)
    prefix = args.trace_prefix or name
    sweep = args.cores or [config.core_count]
    jobs = []
    for cores in sweep:
        trace = None if args.no_trace else f"{prefix}-p{cores}.trace"
        jobs.append((args.workload, args.cost_table, args.block_db, config, cores, trace,
                     args.filter_functions, args.flush_bytes))
    if args.parallel_sweep and len(jobs) > 1:
        with ProcessPoolExecutor() as pool:
            outcomes = list(pool.map(_simulate, jobs))
    else:
        outcomes = [_simulate(job) for job in jobs]
    base = None
    for job, (wname, result, host) in zip(jobs, outcomes):
        cores, trace = job[4], job[5]
        summary = format_summary(wname, result, config, trace)
        summary_path = Path(f"{prefix}-p{cores}.summary")
        summary_path.parent.mkdir(parents=True, exist_ok=True)
        summary_path.write_text(summary, encoding="ascii")
        base = base or result.target_cycles
        print(f"{wname} on {cores} core(s): {result.target_cycles} cycles "
              f"({cycles_to_ms(result.target_cycles, config):.3f} ms target), "
              f"speedup {base / result.target_cycles:.2f}, host {host:.3f} s")
        print(f"  outputs: {_ints(result.outputs) or '-'}")
        for k in range(result.core_count):
            clock = result.core_clocks[k] or 1
            print(f"  core {k:>2}: busy {100 * result.busy_cycles[k] / clock:6.2f}%  "
                  f"wait {100 * result.wait_cycles[k] / clock:6.2f}%  "
                  f"idle {100 * result.idle_cycles[k] / clock:6.2f}%  "
                  f"icache {result.icache[k].misses}/{result.icache[k].accesses}  "
                  f"dcache {result.dcache[k].misses}/{result.dcache[k].accesses}")
        for warning in result.warnings:
            print(f"  warning: {warning}")
        print(f"  summary: {summary_path}" + (f"  trace: {trace}" if trace else ""))
    return 0


def cmd_report(args) -> int:
    events, defs = read_trace(args.trace)
    clock_hz = load_config(args.config).clock_hz if args.config else TargetConfig().clock_hz
    sys.stdout.write(format_report(profile(events, defs), clock_hz))
    return 0


def cmd_inspect(args) -> int:
    try:
        events, defs = read_trace(args.trace)
    except TraceFormatError as exc:
        print(f"FAIL {args.trace}: {exc}")
        return 1
    config = load_config(args.config) if args.config else None
    violations = validate_trace(events, defs, config)
    if violations:
        print(f"FAIL {args.trace}: {violations[0]} ({len(violations)} violation(s))")
        return 1
    print(f"PASS {args.trace}: {len(events)} events on {len(defs.processes)} core(s)")
    return 0


def cmd_annotate(args) -> int:
    sys.stdout.write(annotate(load_workload(args.workload, args.cost_table).lowered))
    return 0


def cmd_characterize(args) -> int:
    sys.stdout.write(format_block_db(load_workload(args.workload, args.cost_table).records))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nativesim", description="Native simulation of parallel workloads "
                                     "on a virtual many-core target, with trace generation.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a workload over one or more core counts")
    run.add_argument("--workload", required=True, help=f"workload file or bundled name ({', '.join(BUNDLED)})")
    run.add_argument("--config", help="target configuration file (key = value)")
    run.add_argument("--block-db", help="basic-block instruction-count overrides")
    run.add_argument("--cost-table", help="statement cost table")
    run.add_argument("--cores", type=parse_cores, help="comma-separated core counts to sweep")
    run.add_argument("--trace-prefix", help="output prefix; files are <prefix>-p<cores>.{trace,summary}")
    run.add_argument("--no-trace", action="store_true", help="do not write trace files")
    run.add_argument("--filter-functions", type=parse_names, help="comma-separated functions to trace")
    run.add_argument("--flush-bytes", type=int, help="flush trace buffers past this many bytes")
    run.add_argument("--parallel-sweep", action="store_true", help="run sweep points in parallel processes")
    run.set_defaults(func=cmd_run)

    report = sub.add_parser("report", help="print the function-time profile of a trace")
    report.add_argument("trace")
    report.add_argument("--config", help="target configuration, for the clock frequency")
    report.set_defaults(func=cmd_report)

    inspect = sub.add_parser("inspect", help="validate a trace")
    inspect.add_argument("trace")
    inspect.add_argument("--config", help="also check block records against the block-time equation")
    inspect.set_defaults(func=cmd_inspect)

    for name, func, text in (("annotate", cmd_annotate, "print the source with block markers"),
                             ("characterize", cmd_characterize, "print the basic-block database")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--workload", required=True)
        p.add_argument("--cost-table")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, *ERRORS) as exc:
        print(f"nativesim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
