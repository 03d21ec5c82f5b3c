"""Deterministic multi-core native-simulation kernel.

The workload runs as generated host code (see :mod:`.codegen`). Every
executed basic block calls back into :func:`Simulation.advance_block`
through the ``ADV`` hook, which fetches the block through the core's
instruction cache, replays its data addresses through the data cache and
adds

    T = C*Tm + Timiss*ICmisses + Tdmiss*DCmisses

(rounded half-up) to the core's virtual clock. Accesses to shared data add
``shared_mem_extra_cycles`` each on top.

Parallel loops are split statically over all cores. Bodies without
critical sections never interact in virtual time and run core after core.
Bodies that may lock run as generators under an event loop that always
advances the core with the smallest (clock, core_id), so lock arrivals are
served in virtual-time order.
"""
from __future__ import annotations

import gc
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from ..cache import CacheState, line_span
from ..frontend.cfg import LoweredProgram
from ..target import TargetConfig, round_half_up, validate
from .codegen import CompiledProgram, compile_program
from .layout import PRIVATE_BASE, private_base
from .values import c_div, c_mod

RUNNING, WAITING, IDLE = "running", "waiting", "idle"

COUNTER_NAMES = (
    "busy_cycles", "wait_cycles", "idle_cycles", "overhead_cycles", "untraced_cycles",
    "icache_accesses", "icache_misses", "dcache_accesses", "dcache_misses", "shared_accesses",
)


class WorkloadError(RuntimeError):
    """A runtime fault of the simulated program (bad index, division by zero...)."""

    def __init__(self, message: str, line: int = 0, cycles: int = 0, core_id: int = 0):
        where = f"line {line}: " if line else ""
        super().__init__(f"{where}{message} (core {core_id}, virtual time {cycles} cycles)")
        self.line = line
        self.cycles = cycles
        self.core_id = core_id


class DeadlockError(WorkloadError):
    pass


class CoreState:
    __slots__ = (
        "core_id", "clock", "pbase", "icache", "dcache", "call_stack", "status",
        "busy", "wait", "idle", "overhead", "untraced", "ntraced", "shared_accesses",
        "held", "track", "shared_log", "pending", "gen", "hist", "tbuf",
        "blocks", "instructions", "imisses", "dmisses", "daccesses",
        "imisses_synced", "dmisses_synced", "daccesses_synced",
    )

    def __init__(self, core_id: int, config: TargetConfig):
        self.core_id = core_id
        self.clock = 0
        self.pbase = private_base(core_id)
        self.icache = CacheState(config.icache)
        self.dcache = CacheState(config.dcache)
        self.call_stack: list[tuple[int, int]] = []  # (function id, entry clock)
        self.status = IDLE
        self.busy = self.wait = self.idle = self.overhead = self.untraced = 0
        self.ntraced = 0  # traced functions currently on the stack
        self.shared_accesses = 0
        self.held: list = []  # locks held, innermost last
        self.track = False  # record shared accesses for race detection
        self.shared_log: list[int] = []
        self.pending = None  # lock requested, not yet processed
        self.gen = None
        self.hist: list[int] = []  # executions per block id since the last sync
        self.imisses = self.dmisses = self.daccesses = 0
        self.imisses_synced = self.dmisses_synced = self.daccesses_synced = 0
        self.tbuf = None
        self.blocks = 0
        self.instructions = 0


class VirtualLock:
    __slots__ = ("lock_id", "name", "holder", "acquired_at", "released_at", "wait_queue")

    def __init__(self, lock_id: int, name: str):
        self.lock_id = lock_id
        self.name = name or "<unnamed>"
        self.holder: CoreState | None = None
        self.acquired_at = 0
        self.released_at = 0
        self.wait_queue: list[tuple[int, CoreState]] = []  # FIFO of (arrival, core)

    def __repr__(self):
        return f"VirtualLock({self.name!r})"


@dataclass(frozen=True)
class BlockExecutionCounters:
    instr_count: int
    ic_misses: int
    dc_misses: int
    block_time_cycles: int


def block_time(config: TargetConfig, instr_count: int, ic_misses: int, dc_misses: int) -> int:
    """Reference form of the block-time equation, rounded half-up to cycles."""
    exact = (Fraction(config.mean_instr_cycles) * instr_count
             + Fraction(config.imiss_cycles) * ic_misses
             + Fraction(config.dmiss_cycles) * dc_misses)
    return round_half_up(exact)


@dataclass(frozen=True)
class CacheSummary:
    accesses: int
    misses: int


@dataclass(frozen=True)
class SimulationResult:
    core_count: int
    core_clocks: tuple
    target_cycles: int
    outputs: tuple
    return_value: int
    busy_cycles: tuple
    wait_cycles: tuple
    idle_cycles: tuple
    overhead_cycles: tuple
    icache: tuple  # CacheSummary per core
    dcache: tuple
    shared_accesses: tuple
    block_executions: int
    instructions: int
    parallel_cycles: int  # core-0 time spent between fork and join
    critical_wait_cycles: int
    lock_intervals: tuple  # (lock name, core, acquire, release)
    warnings: tuple


class Simulation:
    def __init__(self, lowered: LoweredProgram, records, config: TargetConfig, sink=None,
                 compiled: CompiledProgram | None = None):
        self.config = validate(config)
        self.compiled = compiled or compile_program(lowered)
        self.lowered = lowered
        self.sink = sink
        self.cores = [CoreState(k, config) for k in range(config.core_count)]
        by_id = {r.block_id: r for r in records}
        missing = [b for b in self.compiled.block_ids if b not in by_id]
        if missing:
            raise ValueError(f"no characterization record for block {missing[0]}")
        self.records = by_id
        # scale rational costs to integers over a common denominator
        costs = [Fraction(config.mean_instr_cycles), Fraction(config.imiss_cycles),
                 Fraction(config.dmiss_cycles), Fraction(config.shared_mem_extra_cycles)]
        self.den = lcm(*(c.denominator for c in costs))
        self.tm, self.im, self.dm, self.sx = (int(c * self.den) for c in costs)
        nblocks = max(by_id, default=-1) + 1
        self.rec_tuples = [self._record_tuple(by_id[b]) if b in by_id else None for b in range(nblocks)]
        for core in self.cores:
            core.hist = [0] * nblocks
        names = self.compiled.function_names
        self.fid = {name: i for i, name in enumerate(names)}
        self.fid_idle = self.fid["[idle]"]
        self.fid_wait = self.fid["[wait]"]
        self.fid_overhead = self.fid["[overhead]"]
        self.outputs: list[int] = []
        self.parallel_cycles = 0
        self.lock_intervals: list = []
        self.warnings: list[str] = []
        self.locks = [VirtualLock(i, n) for i, n in enumerate(self.compiled.lock_names)]
        self.traced = [True] * len(names)
        if sink is not None and sink.filter is not None:
            self.traced = [n in sink.filter or n.startswith("[") for n in names]
        self.region = None
        self._adv = self._make_adv()

    # virtual-time accounting -------------------------------------------------
    def _pseudo(self, core: CoreState, fid: int, start: int, end: int):
        if end > start and self.sink is not None:
            self.sink.enter(core.core_id, start, fid)
            self.sink.leave(core.core_id, end, fid)

    def idle_until(self, core: CoreState, t: int):
        if t > core.clock:
            self._pseudo(core, self.fid_idle, core.clock, t)
            core.idle += t - core.clock
            core.clock = t

    def overhead(self, core: CoreState, cycles: int):
        if cycles:
            self._pseudo(core, self.fid_overhead, core.clock, core.clock + cycles)
            core.overhead += cycles
            core.clock += cycles

    def wait_until(self, core: CoreState, t: int):
        if t > core.clock:
            self._pseudo(core, self.fid_wait, core.clock, t)
            core.wait += t - core.clock
            core.clock = t

    def advance_block(self, core: CoreState, record, data_accesses) -> BlockExecutionCounters:
        """Charge one execution of *record* on *core*; public form of the ADV hook.

        *data_accesses* are byte addresses in program order; ``~addr`` marks
        a write.
        """
        shift = self.config.dcache.line_bytes.bit_length() - 1
        tokens = []
        for a in data_accesses:
            write = a < 0
            a = ~a if write else a
            tokens.append(a >> shift if a >= PRIVATE_BASE else ~(a | write))
        rec = self._record_tuple(record)
        bid = record.block_id
        if bid >= len(self.rec_tuples):
            grow = bid + 1 - len(self.rec_tuples)
            self.rec_tuples += [None] * grow
            for c in self.cores:
                c.hist += [0] * grow
        self.rec_tuples[bid] = rec
        imisses, dmisses = core.imisses, core.dmisses
        self._adv(core, rec, tokens)
        self.sync_counts(core)
        icm = core.imisses - imisses
        dcm = core.dmisses - dmisses
        cyc = (2 * (rec[2] + self.im * icm + self.dm * dcm) + self.den) // (2 * self.den)
        return BlockExecutionCounters(record.instr_count, icm, dcm, cyc)

    def sync_counts(self, core: CoreState):
        """Fold the hot-path tallies into the per-core statistics."""
        hist = core.hist
        for bid, n in enumerate(hist):
            if n:
                rec = self.rec_tuples[bid]
                core.blocks += n
                core.instructions += n * rec[1]
                core.icache.accesses += n * len(rec[3])
                hist[bid] = 0
        core.icache.misses += core.imisses - core.imisses_synced
        core.imisses_synced = core.imisses
        core.dcache.misses += core.dmisses - core.dmisses_synced
        core.dmisses_synced = core.dmisses
        core.dcache.accesses += core.daccesses - core.daccesses_synced
        core.daccesses_synced = core.daccesses
        core.busy = core.clock - core.wait - core.idle - core.overhead

    def _record_tuple(self, r):
        lines = tuple(line_span(r.code_addr, r.code_len_bytes, self.config.icache.line_bytes))
        cnum = r.instr_count * self.tm
        return (r.block_id, r.instr_count, cnum, lines, (2 * cnum + self.den) // (2 * self.den))

    def _make_adv(self):
        den2 = 2 * self.den
        den = self.den
        im, dm, sx = self.im, self.dm, self.sx
        shift = self.config.dcache.line_bytes.bit_length() - 1
        ins = self.config.icache.set_count
        iassoc = self.config.icache.associativity
        dns = self.config.dcache.set_count
        dassoc = self.config.dcache.associativity
        trace = self.sink is not None

        def ADV(core, rec, acc):
            bid, c, cnum, lines, base = rec
            core.hist[bid] += 1
            # instruction fetch
            sets = core.icache.sets
            icm = 0
            for ln in lines:
                ways = sets[ln % ins]
                if ln in ways:
                    if ways[-1] != ln:
                        ways.remove(ln)
                        ways.append(ln)
                else:
                    icm += 1
                    if len(ways) >= iassoc:
                        del ways[0]
                    ways.append(ln)
            # data accesses: line indices, or ~address for shared data
            dcm = 0
            if acc:
                sets = core.dcache.sets
                nsh = 0
                prev = -1
                for ln in acc:
                    if ln < 0:
                        nsh += 1
                        ln = (~ln & -4) >> shift
                    if ln == prev:
                        continue  # same line as the previous access: MRU hit
                    prev = ln
                    ways = sets[ln % dns]
                    if ln in ways:
                        if ways[-1] != ln:
                            ways.remove(ln)
                            ways.append(ln)
                    else:
                        dcm += 1
                        if len(ways) >= dassoc:
                            del ways[0]
                        ways.append(ln)
                core.daccesses += len(acc)
            else:
                nsh = 0
            if icm or dcm:
                cyc = (2 * (cnum + im * icm + dm * dcm) + den) // den2
                core.imisses += icm
                core.dmisses += dcm
            else:
                cyc = base
            if nsh:
                core.shared_accesses += nsh
                if core.track and not core.held:
                    core.shared_log += [a for a in acc if a < 0]
                total = cyc + (2 * nsh * sx + den) // den2
            else:
                total = cyc
            if trace:
                core.tbuf.append((core.clock, bid, c, icm, dcm, cyc))
                if not core.ntraced:
                    core.untraced += total
            core.clock += total

        return ADV

    # workload hooks ------------------------------------------------------------
    def _namespace(self) -> dict:
        sink = self.sink
        traced = self.traced

        if sink is None:
            def ENTER(core, fid):
                core.call_stack.append((fid, core.clock))

            def LEAVE(core, fid):
                core.call_stack.pop()
        else:
            def ENTER(core, fid):
                core.call_stack.append((fid, core.clock))
                if traced[fid]:
                    core.ntraced += 1
                    sink.enter(core.core_id, core.clock, fid)

            def LEAVE(core, fid):
                core.call_stack.pop()
                if traced[fid]:
                    core.ntraced -= 1
                    sink.leave(core.core_id, core.clock, fid)

        def PRINT(core, value):
            self.outputs.append(int(value))

        def OOB(core, line, name, index):
            raise WorkloadError(f"array index {index} out of bounds for {name!r}", line, core.clock, core.core_id)

        def DIV(core, a, b, line):
            if b == 0:
                raise WorkloadError("division by zero", line, core.clock, core.core_id)
            return c_div(a, b)

        def MOD(core, a, b, line):
            if b == 0:
                raise WorkloadError("modulo by zero", line, core.clock, core.core_id)
            return c_mod(a, b)

        ns = {
            "ADV": self._adv, "ENTER": ENTER, "LEAVE": LEAVE, "PRINT": PRINT, "OOB": OOB,
            "DIV": DIV, "MOD": MOD, "PAR": self.parallel_for, "RELEASE": self.critical_exit,
            "DS": self.config.dcache.line_bytes.bit_length() - 1, "PRIV": PRIVATE_BASE,
        }
        for bid in self.compiled.block_ids:
            ns[f"R{bid}"] = self.rec_tuples[bid]
        for i, lock in enumerate(self.locks):
            ns[f"L{i}"] = lock
        for name, value, is_array in self.compiled.global_init:
            ns[name] = [0] * value if is_array else value
        return ns

    # OpenMP model ---------------------------------------------------------------
    def parallel_for(self, core0, lo, hi, inclusive, step, body, is_gen):
        if self.region is not None:
            raise WorkloadError("nested parallel region", 0, core0.clock, core0.core_id)
        if core0.held:
            raise WorkloadError("parallel region inside a critical section", 0, core0.clock, core0.core_id)
        end = hi + 1 if inclusive else hi
        n = max(0, -(-(end - lo) // step))
        cores = self.cores
        p = len(cores)
        chunk = -(-n // p) if n else 0
        fork = core0.clock
        start = fork + self.config.fork_overhead_cycles
        self.region = body
        work = []
        for core in cores:
            self.idle_until(core, fork)
            self.overhead(core, start - fork)
            first = core.core_id * chunk
            last = min(n, first + chunk)
            core.track = True
            if first < last:
                work.append((core, lo + first * step, lo + last * step))
        if is_gen:
            self.drive([(core, body(core, a, b)) for core, a, b in work])
        else:
            for core, a, b in work:
                core.status = RUNNING
                body(core, a, b)
                core.status = IDLE
        barrier = max(core.clock for core in cores)
        for core in cores:
            core.track = False
            self.idle_until(core, barrier)
            self.overhead(core, self.config.join_overhead_cycles)
        join = core0.clock
        self.core_race_check(body)
        self.parallel_cycles += join - fork
        self.region = None
        core0.status = RUNNING

    def core_race_check(self, body):
        writes: dict[int, set] = {}
        touched: dict[int, set] = {}
        for core in self.cores:
            for token in set(core.shared_log):
                addr = ~token & -4
                touched.setdefault(addr, set()).add(core.core_id)
                if ~token & 1:
                    writes.setdefault(addr, set()).add(core.core_id)
            core.shared_log = []
        reported = set()
        name = self.compiled.function_names[self.fid_of_body(body)]
        for addr in sorted(writes):
            if len(touched[addr]) > 1:
                var = self.compiled.layout.describe(addr).split("[")[0]
                var = var.removeprefix("global:")
                if var in reported:
                    continue
                reported.add(var)
                ids = sorted(touched[addr])
                self.warnings.append(
                    f"data race on shared {var} in {name} (cores {', '.join(map(str, ids))})")

    def fid_of_body(self, body) -> int:
        return int(body.__name__[4:])

    def critical_exit(self, core: CoreState, lock: VirtualLock):
        lock.holder = None
        lock.released_at = core.clock
        core.held.remove(lock)
        self.lock_intervals.append((lock.name, core.core_id, lock.acquired_at, core.clock))
        if lock.wait_queue:
            arrival, nxt = lock.wait_queue.pop(0)
            self.grant(nxt, lock, arrival)

    def grant(self, core: CoreState, lock: VirtualLock, arrival: int):
        self.wait_until(core, max(arrival, lock.released_at))
        lock.holder = core
        lock.acquired_at = core.clock
        core.held.append(lock)
        core.pending = None
        core.status = RUNNING

    def critical_enter(self, core: CoreState, lock: VirtualLock):
        """Process a lock arrival at the core's current clock."""
        if lock in core.held:
            raise WorkloadError(f"recursive critical section {lock.name!r}", 0, core.clock, core.core_id)
        if lock.holder is None:
            self.grant(core, lock, core.clock)
        else:
            core.status = WAITING
            core.pending = lock
            lock.wait_queue.append((core.clock, core))

    def step_scheduler(self, cores):
        """Runnable core with the smallest (clock, core_id), or None."""
        best = None
        for core in cores:
            if core.status == RUNNING and (best is None or core.clock < best.clock):
                best = core
        if best is None:
            waiting = [c for c in cores if c.status == WAITING]
            if waiting:
                raise DeadlockError(self.wait_graph(waiting), 0, min(c.clock for c in waiting), waiting[0].core_id)
        return best

    def wait_graph(self, waiting) -> str:
        edges = []
        for c in waiting:
            holder = c.pending.holder
            held_by = f"core {holder.core_id}" if holder is not None else "nobody"
            edges.append(f"core {c.core_id} waits for {c.pending.name!r} held by {held_by}")
        return "deadlock: " + "; ".join(edges)

    def drive(self, work):
        """Run generator bodies, ordering lock requests by virtual time."""
        cores = []
        for core, gen in work:
            core.gen = gen
            core.pending = None
            core.status = RUNNING
            cores.append(core)
        while True:
            core = self.step_scheduler(cores)
            if core is None:
                break
            if core.pending is not None:
                lock, core.pending = core.pending, None
                self.critical_enter(core, lock)
                continue
            try:
                core.pending = core.gen.send(None)
            except StopIteration:
                core.status = IDLE
                core.gen = None

    # top level -------------------------------------------------------------------
    def run(self) -> SimulationResult:
        # The run allocates only acyclic data (ints, tuples, lists); pausing
        # the cyclic collector avoids rescanning large trace buffers.
        enabled = gc.isenabled()
        gc.disable()
        try:
            return self._run()
        finally:
            if enabled:
                gc.enable()

    def _run(self) -> SimulationResult:
        ns = self._namespace()
        exec(self.compiled.code, ns)
        entry = ns[f"F_{self.compiled.entry}"]
        core0 = self.cores[0]
        core0.status = RUNNING
        if self.sink is not None:
            self.sink.begin(self.definitions())
            for core in self.cores:
                core.tbuf = self.sink.buffer(core.core_id)
        if self.compiled.entry in self.compiled.yielding:
            box = {}

            def main_gen():
                box["value"] = yield from entry(core0)

            self.drive([(core0, main_gen())])
            value = box["value"]
        else:
            value = entry(core0)
        core0.status = IDLE
        for core in self.cores:
            self.sync_counts(core)
        if self.sink is not None:
            for core in self.cores:
                for cid, v in enumerate(self.counter_values(core)):
                    self.sink.counter(core.core_id, core.clock, cid, v)
            self.sink.end()
        return self.result(int(value))

    def definitions(self):
        from ..trace.format import TraceDefinitions

        return TraceDefinitions(
            resolution=self.config.clock_hz,
            processes=tuple(f"Core {k}" for k in range(len(self.cores))),
            functions=tuple(self.compiled.function_names),
            counters=COUNTER_NAMES,
        )

    @staticmethod
    def counter_values(core: CoreState):
        return (core.busy, core.wait, core.idle, core.overhead, core.untraced,
                core.icache.accesses, core.icache.misses, core.dcache.accesses,
                core.dcache.misses, core.shared_accesses)

    def result(self, value: int) -> SimulationResult:
        cores = self.cores
        return SimulationResult(
            core_count=len(cores),
            core_clocks=tuple(c.clock for c in cores),
            target_cycles=max(c.clock for c in cores),
            outputs=tuple(self.outputs),
            return_value=value,
            busy_cycles=tuple(c.busy for c in cores),
            wait_cycles=tuple(c.wait for c in cores),
            idle_cycles=tuple(c.idle for c in cores),
            overhead_cycles=tuple(c.overhead for c in cores),
            icache=tuple(CacheSummary(c.icache.accesses, c.icache.misses) for c in cores),
            dcache=tuple(CacheSummary(c.dcache.accesses, c.dcache.misses) for c in cores),
            shared_accesses=tuple(c.shared_accesses for c in cores),
            block_executions=sum(c.blocks for c in cores),
            instructions=sum(c.instructions for c in cores),
            parallel_cycles=self.parallel_cycles,
            critical_wait_cycles=sum(c.wait for c in cores),
            lock_intervals=tuple(self.lock_intervals),
            warnings=tuple(self.warnings),
        )


def run(lowered: LoweredProgram, records, config: TargetConfig, sink=None,
        compiled: CompiledProgram | None = None) -> SimulationResult:
    return Simulation(lowered, records, config, sink, compiled).run()
