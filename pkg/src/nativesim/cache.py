"""Set-associative LRU cache model producing per-block miss counts.

Each set is a Python list of line indices ordered from least to most
recently used. Storing the full line index instead of the tag is equivalent
for lookup (lines in one set differ exactly in their tag) and saves a
division on the hot path; :attr:`AccessResult.evicted_tag` reports the
real tag.

Addresses passed to :meth:`CacheState.access_many` may be bit-inverted
(``~addr``) to mark a write. Writes are write-allocate and cost the same
as reads, so the marker is simply stripped here.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .target import CacheGeometry


class AccessResult(NamedTuple):
    hit: bool
    evicted_tag: int | None = None


@dataclass
class CacheStats:
    accesses: int = 0
    hits: int = 0
    misses: int = 0


class CacheState:
    def __init__(self, geometry: CacheGeometry):
        self.geometry = geometry
        self.set_count = geometry.set_count
        self.assoc = geometry.associativity
        self.line_shift = geometry.line_bytes.bit_length() - 1
        self.sets: list[list[int]] = [[] for _ in range(self.set_count)]
        self.accesses = 0
        self.misses = 0

    @property
    def hits(self) -> int:
        return self.accesses - self.misses

    @property
    def stats(self) -> CacheStats:
        return CacheStats(self.accesses, self.hits, self.misses)

    def tags(self, set_index: int) -> list[int]:
        """Tags resident in one set, least recently used first."""
        return [line // self.set_count for line in self.sets[set_index]]

    def access(self, address: int) -> AccessResult:
        if address < 0:
            raise ValueError(f"negative address {address}")
        line = address >> self.line_shift
        ways = self.sets[line % self.set_count]
        self.accesses += 1
        if line in ways:
            ways.remove(line)
            ways.append(line)
            return AccessResult(True)
        self.misses += 1
        evicted = None
        if len(ways) >= self.assoc:
            evicted = ways.pop(0) // self.set_count
        ways.append(line)
        return AccessResult(False, evicted)

    def access_lines(self, lines: Iterable[int]) -> int:
        """Touch already-computed line indices; return the number of misses."""
        sets = self.sets
        nsets = self.set_count
        assoc = self.assoc
        misses = 0
        count = 0
        for line in lines:
            count += 1
            ways = sets[line % nsets]
            if ways and ways[-1] == line:
                continue
            if line in ways:
                ways.remove(line)
                ways.append(line)
                continue
            misses += 1
            if len(ways) >= assoc:
                del ways[0]
            ways.append(line)
        self.accesses += count
        self.misses += misses
        return misses

    def access_many(self, addresses: Iterable[int]) -> int:
        """Access byte addresses in order (``~addr`` marks a write); return misses."""
        shift = self.line_shift
        return self.access_lines([(~a if a < 0 else a) >> shift for a in addresses])

    def reset(self) -> "CacheState":
        for ways in self.sets:
            ways.clear()
        self.accesses = 0
        self.misses = 0
        return self


def line_span(code_addr: int, code_len_bytes: int, line_bytes: int) -> range:
    """Line indices covered by ``[code_addr, code_addr + code_len_bytes)``."""
    if code_len_bytes <= 0:
        return range(0)
    first = code_addr // line_bytes
    last = (code_addr + code_len_bytes - 1) // line_bytes
    return range(first, last + 1)


def block_fetch(state: CacheState, record) -> int:
    """Fetch one basic block through the instruction cache; return ICmisses."""
    lines = line_span(record.code_addr, record.code_len_bytes, state.geometry.line_bytes)
    return state.access_lines(lines)


def reset(state: CacheState) -> CacheState:
    return state.reset()
