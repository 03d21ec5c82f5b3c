"""Consistency checks for kernel-produced traces."""
from __future__ import annotations

from dataclasses import dataclass

from .format import TraceDefinitions
from .profile import NestingError, profile


@dataclass(frozen=True)
class Violation:
    core_id: int
    line: int  # 1-based line in the core's stream file, 0 if not line-specific
    message: str

    def __str__(self):
        where = f"core {self.core_id}" + (f", line {self.line}" if self.line else "")
        return f"{where}: {self.message}"


def validate_trace(events, defs: TraceDefinitions, config=None) -> list[Violation]:
    """Return every violation found; an empty list means the trace is valid.

    Checks id definitions, per-core timestamp order, enter/leave nesting,
    time conservation against the end-of-run counters and, when a target
    configuration is given, the block-time equation of every block record.
    """
    ncores = len(defs.processes)
    limits = {"E": len(defs.functions), "L": len(defs.functions), "C": len(defs.counters)}
    violations: list[Violation] = []
    last = [0] * ncores
    lineno = [0] * ncores
    stacks: list[list[int]] = [[] for _ in range(ncores)]
    if config is not None:
        from ..kernel.engine import block_time
    for e in events:
        if not 0 <= e.core_id < ncores:
            violations.append(Violation(e.core_id, 0, "event for undefined process"))
            continue
        lineno[e.core_id] += 1
        line = lineno[e.core_id]
        if e.kind in limits and not 0 <= e.ref < limits[e.kind]:
            violations.append(Violation(e.core_id, line, f"undefined id {e.ref} in {e.kind} record"))
            continue
        if e.timestamp < last[e.core_id]:
            violations.append(Violation(e.core_id, line,
                                        f"timestamp {e.timestamp} before previous {last[e.core_id]}"))
        last[e.core_id] = max(last[e.core_id], e.timestamp)
        if e.kind == "E":
            stacks[e.core_id].append(e.ref)
        elif e.kind == "L":
            stack = stacks[e.core_id]
            if not stack or stack[-1] != e.ref:
                violations.append(Violation(e.core_id, line, f"leave of {defs.functions[e.ref]} without matching enter"))
            else:
                stack.pop()
        elif e.kind == "B" and config is not None:
            c, icm, dcm, cycles = e.values
            expected = block_time(config, c, icm, dcm)
            if cycles != expected:
                violations.append(Violation(e.core_id, line,
                                            f"block {e.ref}: logged {cycles} cycles, equation gives {expected}"))
    for core_id, stack in enumerate(stacks):
        if stack:
            violations.append(Violation(core_id, 0, f"{defs.functions[stack[-1]]} entered but never left"))
    if violations:
        return violations
    try:
        report = profile(events, defs)
    except NestingError as exc:  # pragma: no cover - nesting checked above
        return [Violation(0, 0, str(exc))]
    for core in report.cores:
        counters = dict(core.counters)
        if not counters:
            continue
        untraced = counters.get("untraced_cycles", 0)
        total = core.exclusive + untraced + core.wait + core.idle + core.overhead
        if total != core.final_clock:
            violations.append(Violation(core.core_id, 0,
                                        f"conservation: exclusive {core.exclusive} + untraced {untraced} + wait "
                                        f"{core.wait} + idle {core.idle} + overhead {core.overhead} = {total}, "
                                        f"final clock {core.final_clock}"))
        for name, measured in (("wait_cycles", core.wait), ("idle_cycles", core.idle),
                               ("overhead_cycles", core.overhead)):
            if name in counters and counters[name] != measured:
                violations.append(Violation(core.core_id, 0,
                                            f"{name} counter {counters[name]} != traced total {measured}"))
        if "busy_cycles" in counters and counters["busy_cycles"] != core.exclusive + untraced:
            violations.append(Violation(core.core_id, 0,
                                        f"busy_cycles counter {counters['busy_cycles']} != exclusive "
                                        f"{core.exclusive} + untraced {untraced}"))
    return violations
