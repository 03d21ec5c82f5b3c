"""Function-time profile of a trace (inclusive/exclusive time per function)."""
from __future__ import annotations

from dataclasses import dataclass

from .format import TraceDefinitions, TraceFormatError


class NestingError(TraceFormatError):
    pass


@dataclass(frozen=True)
class FunctionProfile:
    name: str
    calls: int
    inclusive: int
    exclusive: int
    per_core: tuple  # exclusive cycles per core

    @property
    def pseudo(self) -> bool:
        return self.name.startswith("[")


@dataclass(frozen=True)
class CoreProfile:
    core_id: int
    final_clock: int
    exclusive: int  # time inside real functions
    wait: int
    idle: int
    overhead: int
    counters: tuple  # (name, value) pairs from the end-of-run counter records

    def counter(self, name: str, default=None):
        return dict(self.counters).get(name, default)

    def fractions(self) -> tuple[float, float, float]:
        """(busy, wait, idle) fractions of the final clock."""
        if not self.final_clock:
            return (0.0, 0.0, 0.0)
        busy = self.final_clock - self.wait - self.idle - self.overhead
        return (busy / self.final_clock, self.wait / self.final_clock, self.idle / self.final_clock)


@dataclass(frozen=True)
class ProfileReport:
    functions: tuple  # FunctionProfile, by exclusive time descending
    cores: tuple  # CoreProfile per process

    def function(self, name: str) -> FunctionProfile:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def dominant(self) -> FunctionProfile | None:
        real = [f for f in self.functions if not f.pseudo]
        return real[0] if real else None


def walk_calls(events, ncores: int):
    """Yield (core, fid, enter, leave, children_inclusive) per completed call."""
    stacks: list[list[list[int]]] = [[] for _ in range(ncores)]
    for e in events:
        if e.kind == "E":
            stacks[e.core_id].append([e.ref, e.timestamp, 0])
        elif e.kind == "L":
            stack = stacks[e.core_id]
            if not stack or stack[-1][0] != e.ref:
                raise NestingError(f"core {e.core_id}: leave of function {e.ref} at {e.timestamp} without matching enter")
            fid, start, children = stack.pop()
            if e.timestamp < start:
                raise NestingError(f"core {e.core_id}: function {fid} leaves before it enters")
            inclusive = e.timestamp - start
            if stack:
                stack[-1][2] += inclusive
            yield e.core_id, fid, start, e.timestamp, children
    for core_id, stack in enumerate(stacks):
        if stack:
            raise NestingError(f"core {core_id}: function {stack[-1][0]} entered but never left")


def profile(events, defs: TraceDefinitions) -> ProfileReport:
    ncores = len(defs.processes)
    nfuncs = len(defs.functions)
    calls = [0] * nfuncs
    inclusive = [0] * nfuncs
    exclusive = [[0] * ncores for _ in range(nfuncs)]
    for core_id, fid, start, end, children in walk_calls(events, ncores):
        calls[fid] += 1
        inclusive[fid] += end - start
        exclusive[fid][core_id] += end - start - children
    functions = [
        FunctionProfile(name, calls[i], inclusive[i], sum(exclusive[i]), tuple(exclusive[i]))
        for i, name in enumerate(defs.functions) if calls[i]
    ]
    functions.sort(key=lambda f: (-f.exclusive, f.name))

    final = [0] * ncores
    counters: list[list] = [[] for _ in range(ncores)]
    for e in events:
        final[e.core_id] = max(final[e.core_id], e.timestamp)
        if e.kind == "C":
            counters[e.core_id].append((defs.counters[e.ref], e.values[0]))
    pseudo = {name: i for i, name in enumerate(defs.functions) if name.startswith("[")}

    def pseudo_total(name, core_id):
        i = pseudo.get(name)
        return exclusive[i][core_id] if i is not None else 0

    cores = []
    for core_id in range(ncores):
        real = sum(exclusive[i][core_id] for i, name in enumerate(defs.functions) if not name.startswith("["))
        cores.append(CoreProfile(core_id, final[core_id], real, pseudo_total("[wait]", core_id),
                                 pseudo_total("[idle]", core_id), pseudo_total("[overhead]", core_id),
                                 tuple(counters[core_id])))
    return ProfileReport(tuple(functions), tuple(cores))


def format_report(report: ProfileReport, clock_hz: int | None = None) -> str:
    lines = []
    if not report.functions:
        lines.append("no function events")
    else:
        header = f"{'function':<28} {'calls':>8} {'inclusive':>14} {'exclusive':>14} {'excl %':>7}"
        lines.append(header)
        lines.append("-" * len(header))
        total = sum(f.exclusive for f in report.functions) or 1
        for f in report.functions:
            lines.append(f"{f.name:<28} {f.calls:>8} {f.inclusive:>14} {f.exclusive:>14} "
                         f"{100.0 * f.exclusive / total:>6.2f}%")
    if report.cores:
        lines.append("")
        lines.append(f"{'core':<6} {'final clock':>14} {'busy %':>7} {'wait %':>7} {'idle %':>7}")
        for c in report.cores:
            busy, wait, idle = c.fractions()
            lines.append(f"{c.core_id:<6} {c.final_clock:>14} {100 * busy:>6.2f}% "
                         f"{100 * wait:>6.2f}% {100 * idle:>6.2f}%")
        if clock_hz:
            end = max(c.final_clock for c in report.cores)
            lines.append(f"target time: {end} cycles ({end * 1000.0 / clock_hz:.3f} ms)")
    return "\n".join(lines) + "\n"
