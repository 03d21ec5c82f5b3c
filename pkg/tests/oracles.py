"""Independent reference models used as test oracles."""
from __future__ import annotations

from fractions import Fraction
from itertools import product


class BruteForceLRU:
    """Keeps the full access history per set; a line hits iff it is among the
    `ways` most recently used distinct lines of its set."""

    def __init__(self, line_bytes: int, sets: int, ways: int):
        self.line_bytes = line_bytes
        self.sets = sets
        self.ways = ways
        self.history = [[] for _ in range(sets)]

    def access(self, address: int) -> bool:
        line = address // self.line_bytes
        hist = self.history[line % self.sets]
        recent = []
        for past in reversed(hist):
            if past not in recent:
                recent.append(past)
            if len(recent) == self.ways:
                break
        hist.append(line)
        return line in recent


def nqueens_solutions(n: int) -> int:
    """Count placements with one queen per column by trying every row code."""
    count = 0
    for rows in product(range(n), repeat=n):
        ok = all(rows[i] != rows[j] and abs(rows[i] - rows[j]) != j - i
                 for i in range(n) for j in range(i + 1, n))
        count += ok
    return count


def block_cycles(tm, timiss, tdmiss, c, icm, dcm) -> int:
    """Block time rounded half-up, recomputed from exact rationals."""
    exact = Fraction(tm) * c + Fraction(timiss) * icm + Fraction(tdmiss) * dcm
    return int(exact + Fraction(1, 2))  # floor(x + 1/2) for x >= 0


def amdahl(s: float, p: int) -> float:
    return 1.0 / (s + (1.0 - s) / p)


def exclusive_times(events, nfuncs: int, ncores: int):
    """Per-(function, core) exclusive time computed straight from Enter/Leave."""
    excl = [[0] * ncores for _ in range(nfuncs)]
    stacks = [[] for _ in range(ncores)]
    for e in events:
        if e.kind == "E":
            stacks[e.core_id].append([e.ref, e.timestamp, 0])
        elif e.kind == "L":
            fid, start, child = stacks[e.core_id].pop()
            span = e.timestamp - start
            excl[fid][e.core_id] += span - child
            if stacks[e.core_id]:
                stacks[e.core_id][-1][2] += span
    return excl
