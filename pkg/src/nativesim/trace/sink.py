"""In-memory trace sink driven by the simulation kernel.

Recording never touches a core's clock: the kernel hands the sink values it
has already computed. Events are buffered per core and written out only at
explicit flush points (the end of the run, or whenever the buffered size
estimate passes ``flush_bytes``).
"""
from __future__ import annotations

from operator import le
from pathlib import Path

from .format import (TraceDefinitions, TraceEvent, TraceFormatError, format_definitions,
                     master_path, stream_path)

_BYTES_PER_EVENT = 20  # rough size of one encoded record
_B_LINE = "B %d %d %d %d %d %d\n"

# Buffered items, timestamp first: (ts, "E"|"L", fid), (ts, "C", cid, value)
# or, for block records, the flat tuple (ts, block_id, C, icm, dcm, cycles).


def _event(core_id: int, item) -> TraceEvent:
    if len(item) == 6:
        return TraceEvent(item[0], core_id, "B", item[1], item[2:])
    return TraceEvent(item[0], core_id, item[1], item[2], item[3:])


def _line(item) -> str:
    return f"{item[1]} {item[0]} {' '.join(map(str, item[2:]))}\n"


class TraceOrderError(TraceFormatError):
    """The kernel tried to record an out-of-order or ill-nested event."""


class TraceSink:
    def __init__(self, path=None, filter_functions=None, flush_bytes: int | None = None):
        self.path = Path(path) if path is not None else None
        self.filter = frozenset(filter_functions) if filter_functions is not None else None
        if flush_bytes is not None and flush_bytes <= 0:
            raise ValueError("flush_bytes must be positive")
        self.flush_bytes = flush_bytes
        self.defs: TraceDefinitions | None = None
        self._buf: list[list[tuple]] = []
        self._last: list[int] = []
        self._stack: list[list[int]] = []
        self._checked = []
        self.flushes = 0
        self.closed = False

    def begin(self, defs: TraceDefinitions):
        self.defs = defs
        n = len(defs.processes)
        self._buf = [[] for _ in range(n)]
        self._last = [0] * n
        self._stack = [[] for _ in range(n)]
        self._checked = [0] * n
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            for core_id in range(n):
                open(stream_path(self.path, core_id), "w").close()

    # recording --------------------------------------------------------------------
    def _stamp(self, core_id: int, ts: int):
        if ts < self._last[core_id]:
            raise TraceOrderError(
                f"core {core_id}: timestamp {ts} before previous {self._last[core_id]}")
        self._last[core_id] = ts

    def _push(self, core_id: int, item: tuple):
        self._buf[core_id].append(item)
        if self.flush_bytes is not None and self.buffered_bytes() >= self.flush_bytes:
            self.flush()

    def buffered_bytes(self) -> int:
        """Rough size of the buffered events once encoded."""
        return _BYTES_PER_EVENT * sum(len(b) for b in self._buf)

    def buffer(self, core_id: int) -> list:
        """Raw per-core buffer for the kernel's block records.

        The kernel appends flat ``(ts, block_id, C, icm, dcm, cycles)``
        tuples directly; its clocks are monotone by construction, and
        :meth:`flush` and :meth:`end` recheck ordering before writing.
        """
        return self._buf[core_id]

    def enter(self, core_id: int, ts: int, fid: int):
        self._stamp(core_id, ts)
        self._stack[core_id].append(fid)
        self._push(core_id, (ts, "E", fid))

    def leave(self, core_id: int, ts: int, fid: int):
        self._stamp(core_id, ts)
        stack = self._stack[core_id]
        if not stack or stack[-1] != fid:
            raise TraceOrderError(f"core {core_id}: leave of function {fid} without matching enter")
        stack.pop()
        self._push(core_id, (ts, "L", fid))

    def counter(self, core_id: int, ts: int, cid: int, value: int):
        self._stamp(core_id, ts)
        self._push(core_id, (ts, "C", cid, value))

    def block(self, core_id, ts, bid, c, icm, dcm, cycles):
        self._stamp(core_id, ts)
        self._push(core_id, (ts, bid, c, icm, dcm, cycles))

    def record(self, event: TraceEvent):
        """Generic entry point; honours the function filter for enter/leave."""
        kind = event.kind
        if kind in ("E", "L"):
            if self.filter is not None and self.defs is not None:
                name = self.defs.functions[event.ref]
                if name not in self.filter and not name.startswith("["):
                    return
            (self.enter if kind == "E" else self.leave)(event.core_id, event.timestamp, event.ref)
        elif kind == "C":
            self.counter(event.core_id, event.timestamp, event.ref, event.values[0])
        elif kind == "B":
            self.block(event.core_id, event.timestamp, event.ref, *event.values)
        else:
            raise TraceFormatError(f"unknown event kind {kind!r}")

    # output -------------------------------------------------------------------------
    def events(self) -> list[TraceEvent]:
        """Buffered events in canonical (per-core) order."""
        return [_event(core_id, item) for core_id, buf in enumerate(self._buf) for item in buf]

    def check_order(self):
        """Recheck per-core timestamp order of everything buffered since the last check."""
        for core_id, buf in enumerate(self._buf):
            start = self._checked[core_id]
            stamps = [item[0] for item in buf[max(0, start - 1):]]
            if not all(map(le, stamps, stamps[1:])):
                for prev, ts in zip(stamps, stamps[1:]):
                    if ts < prev:
                        raise TraceOrderError(f"core {core_id}: timestamp {ts} before previous {prev}")
            self._checked[core_id] = len(buf)

    def flush(self):
        self.check_order()
        if self.path is None:
            return
        self.flushes += 1
        for core_id, buf in enumerate(self._buf):
            if buf:
                with open(stream_path(self.path, core_id), "a", encoding="ascii", newline="\n") as f:
                    f.write("".join([_B_LINE % item if len(item) == 6 else _line(item) for item in buf]))
                buf.clear()
                self._checked[core_id] = 0

    def end(self):
        for core_id, stack in enumerate(self._stack):
            if stack:
                raise TraceOrderError(f"core {core_id}: {len(stack)} function(s) never left")
        self.flush()
        if self.path is not None:
            with open(master_path(self.path), "w", encoding="ascii", newline="\n") as f:
                f.write(format_definitions(self.defs))
        self.closed = True
