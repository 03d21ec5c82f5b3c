"""OTF-style multi-stream ASCII trace files.

A trace named ``run`` consists of a master file ``run.trace``::

    NSTRACE 1
    RES <ticks per second>
    PROC <id> <name>
    FUNC <id> <name>
    CNTR <id> <name>

and one stream per core, ``run.<core>.events``, with one record per line::

    E <timestamp> <func_id>
    L <timestamp> <func_id>
    C <timestamp> <cntr_id> <value>
    B <timestamp> <block_id> <C> <icm> <dcm> <cycles>

Timestamps are target cycles. Every file ends with a newline. Events are
kept in per-core order; a list of events is canonical when it is grouped by
core in ascending core id, which is what the reader returns.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

VERSION_LINE = "NSTRACE 1"
KINDS = {"E": 1, "L": 1, "C": 2, "B": 5}  # fields after the timestamp


class TraceFormatError(ValueError):
    pass


class TraceEvent(NamedTuple):
    timestamp: int
    core_id: int
    kind: str  # 'E', 'L', 'C' or 'B'
    ref: int  # function, counter or block id
    values: tuple = ()  # counter value, or (C, icm, dcm, cycles) for blocks


@dataclass(frozen=True)
class TraceDefinitions:
    resolution: int
    processes: tuple
    functions: tuple
    counters: tuple

    def function_id(self, name: str) -> int:
        return self.functions.index(name)


def trace_base(path) -> Path:
    """``run.trace`` or ``run`` -> ``run``."""
    path = Path(path)
    return path.with_suffix("") if path.suffix == ".trace" else path


def master_path(path) -> Path:
    base = trace_base(path)
    return base.with_name(base.name + ".trace")


def stream_path(path, core_id: int) -> Path:
    base = trace_base(path)
    return base.with_name(f"{base.name}.{core_id}.events")


def format_definitions(defs: TraceDefinitions) -> str:
    lines = [VERSION_LINE, f"RES {defs.resolution}"]
    lines += [f"PROC {i} {name}" for i, name in enumerate(defs.processes)]
    lines += [f"FUNC {i} {name}" for i, name in enumerate(defs.functions)]
    lines += [f"CNTR {i} {name}" for i, name in enumerate(defs.counters)]
    return "\n".join(lines) + "\n"


def format_event(kind: str, timestamp: int, ref: int, values=()) -> str:
    if values:
        return f"{kind} {timestamp} {ref} {' '.join(map(str, values))}\n"
    return f"{kind} {timestamp} {ref}\n"


def canonical(events) -> list[TraceEvent]:
    """Group events by core, preserving their relative order within a core."""
    return sorted(events, key=lambda e: e.core_id)


def _write(path: Path, text: str, mode: str = "w"):
    try:
        with open(path, mode, encoding="ascii", newline="\n") as f:
            f.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write trace file: {exc.strerror}", str(path)) from None


def write_trace(events, defs: TraceDefinitions, path) -> list[Path]:
    """Write the master file and one stream per core; return the paths written."""
    streams: list[list[str]] = [[] for _ in defs.processes]
    for e in events:
        if not 0 <= e.core_id < len(streams):
            raise TraceFormatError(f"event for undefined process {e.core_id}")
        streams[e.core_id].append(format_event(e.kind, e.timestamp, e.ref, e.values))
    master = master_path(path)
    _write(master, format_definitions(defs))
    written = [master]
    for core_id, lines in enumerate(streams):
        target = stream_path(path, core_id)
        _write(target, "".join(lines))
        written.append(target)
    return written


def _read_text(path: Path) -> str:
    try:
        with open(path, encoding="ascii", newline="") as f:
            return f.read()
    except FileNotFoundError:
        raise TraceFormatError(f"{path}: no such trace file") from None
    except UnicodeDecodeError:
        raise TraceFormatError(f"{path}: not an ASCII trace file") from None
    except OSError as exc:
        raise OSError(exc.errno, exc.strerror, str(path)) from None


def _ints(fields, where: str) -> list[int]:
    try:
        return [int(f, 10) for f in fields]
    except ValueError:
        raise TraceFormatError(f"{where}: non-numeric field") from None


def parse_definitions(text: str, source: str = "<trace>") -> TraceDefinitions:
    if text and not text.endswith("\n"):
        raise TraceFormatError(f"{source}: truncated file (missing final newline)")
    lines = text.split("\n")[:-1] if text else []
    if not lines or lines[0] != VERSION_LINE:
        raise TraceFormatError(f"{source}:1: expected '{VERSION_LINE}'")
    resolution = None
    tables: dict[str, list[str]] = {"PROC": [], "FUNC": [], "CNTR": []}
    for lineno, line in enumerate(lines[1:], 2):
        where = f"{source}:{lineno}"
        tag, _, rest = line.partition(" ")
        if tag == "RES":
            if resolution is not None:
                raise TraceFormatError(f"{where}: duplicate RES record")
            fields = rest.split(" ")
            if len(fields) != 1:
                _bad(where, line)
            (resolution,) = _ints(fields, where)
        elif tag in tables:
            ident, _, name = rest.partition(" ")
            (num,) = _ints([ident], where)
            if not name:
                raise TraceFormatError(f"{where}: missing name")
            if num != len(tables[tag]):
                raise TraceFormatError(f"{where}: {tag} ids must be dense and defined once (got {num})")
            tables[tag].append(name)
        else:
            raise TraceFormatError(f"{where}: unknown record tag {tag!r}")
    if resolution is None:
        raise TraceFormatError(f"{source}: missing RES record")
    return TraceDefinitions(resolution, tuple(tables["PROC"]), tuple(tables["FUNC"]), tuple(tables["CNTR"]))


def _bad(where: str, line: str):
    raise TraceFormatError(f"{where}: malformed line {line!r}")


def parse_stream(text: str, core_id: int, defs: TraceDefinitions, source: str) -> list[TraceEvent]:
    if text and not text.endswith("\n"):
        raise TraceFormatError(f"{source}: truncated file (missing final newline)")
    events = []
    limits = {"E": len(defs.functions), "L": len(defs.functions), "C": len(defs.counters)}
    for lineno, line in enumerate(text.split("\n")[:-1], 1):
        where = f"{source}:{lineno}"
        fields = line.split(" ")
        kind = fields[0]
        if kind not in KINDS:
            raise TraceFormatError(f"{where}: unknown record tag {kind!r}")
        if len(fields) != 2 + KINDS[kind]:
            _bad(where, line)
        nums = _ints(fields[1:], where)
        if min(nums) < 0:
            raise TraceFormatError(f"{where}: negative field")
        ts, ref, *values = nums
        if kind in limits and ref >= limits[kind]:
            raise TraceFormatError(f"{where}: undefined id {ref}")
        events.append(TraceEvent(ts, core_id, kind, ref, tuple(values)))
    return events


def read_trace(path) -> tuple[list[TraceEvent], TraceDefinitions]:
    master = master_path(path)
    defs = parse_definitions(_read_text(master), str(master))
    events: list[TraceEvent] = []
    for core_id in range(len(defs.processes)):
        sp = stream_path(path, core_id)
        events += parse_stream(_read_text(sp), core_id, defs, str(sp))
    return events, defs
