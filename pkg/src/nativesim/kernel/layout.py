"""Virtual data-memory layout: where every workload variable lives.

Globals and locals that a parallel region shares sit in one shared
region. Everything else lives in a per-core private region; each function
owns a statically placed frame (recursion is excluded by the language), so
private addresses are ``core_base + frame_offset`` and differ only by the
per-core stride.
"""
from __future__ import annotations

from dataclasses import dataclass

WORD = 4
SHARED_BASE = 0x1000_0000
PRIVATE_BASE = 0x2000_0000
PRIVATE_STRIDE = 0x0100_0000

SHARED = "shared"
PRIVATE = "private"


def private_base(core_id: int) -> int:
    return PRIVATE_BASE + core_id * PRIVATE_STRIDE


def is_shared_address(address: int) -> bool:
    return SHARED_BASE <= address < PRIVATE_BASE


@dataclass(frozen=True)
class Placement:
    name: str  # "<scope>:<variable>", scope is "global" or a function name
    offset: int  # absolute address for shared, frame-relative for private
    size_bytes: int
    region: str

    def address(self, core_id: int = 0) -> int:
        if self.region == SHARED:
            return self.offset
        return private_base(core_id) + self.offset


class MemoryLayout:
    def __init__(self):
        self.placements: list[Placement] = []
        self._shared_top = SHARED_BASE
        self._private_top = 0

    def place(self, name: str, words: int, region: str) -> Placement:
        size = words * WORD
        if region == SHARED:
            offset = self._shared_top
            self._shared_top += size
            if self._shared_top > PRIVATE_BASE:
                raise MemoryError("shared data region exhausted")
        else:
            offset = self._private_top
            self._private_top += size
            if self._private_top > PRIVATE_STRIDE:
                raise MemoryError("private data region exhausted")
        placement = Placement(name, offset, size, region)
        self.placements.append(placement)
        return placement

    def lookup(self, address: int, core_id: int = 0) -> Placement | None:
        for p in self.placements:
            base = p.address(core_id)
            if base <= address < base + p.size_bytes:
                return p
        return None

    def describe(self, address: int) -> str:
        p = self.lookup(address)
        if p is None:
            return hex(address)
        index = (address - p.offset) // WORD
        return p.name if p.size_bytes == WORD else f"{p.name}[{index}]"

    def check_disjoint(self, core_count: int) -> None:
        spans = []
        for p in self.placements:
            cores = [0] if p.region == SHARED else range(core_count)
            spans += [(p.address(c), p.address(c) + p.size_bytes, p.name) for c in cores]
        spans.sort()
        for (s1, e1, n1), (s2, _, n2) in zip(spans, spans[1:]):
            if s2 < e1:
                raise AssertionError(f"overlapping placements {n1} and {n2}")
