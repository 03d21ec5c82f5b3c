from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from nativesim import TargetConfig, prepare
from nativesim.frontend.characterize import BasicBlockRecord
from nativesim.kernel import DeadlockError, Simulation, WorkloadError, block_time
from nativesim.kernel.engine import RUNNING, VirtualLock
from nativesim.kernel.layout import PRIVATE_BASE
from nativesim.trace import TraceSink, validate_trace

from conftest import simulate
from oracles import BruteForceLRU, block_cycles, nqueens_solutions

FLAT = dict(imiss_cycles=Fraction(0), dmiss_cycles=Fraction(0), shared_mem_extra_cycles=Fraction(0))


def simulation(cores=2, source="int main() { return 0; }", **overrides):
    w = prepare(source)
    return Simulation(w.lowered, w.records, TargetConfig(core_count=cores, **overrides), compiled=w.compiled)


# block-time equation ---------------------------------------------------------

def test_equation_examples():
    config = TargetConfig(mean_instr_cycles=Fraction(2), imiss_cycles=Fraction(10), dmiss_cycles=Fraction(20))
    assert block_time(config, 100, 3, 1) == 250
    assert block_time(TargetConfig(mean_instr_cycles=Fraction(1)), 50, 0, 0) == 50


@given(st.fractions(0, 8, max_denominator=7), st.fractions(0, 50, max_denominator=5),
       st.fractions(0, 50, max_denominator=3), st.integers(1, 500), st.integers(0, 9), st.integers(0, 9))
def test_equation_rounding(tm, ti, td, c, icm, dcm):
    config = TargetConfig(mean_instr_cycles=tm, imiss_cycles=ti, dmiss_cycles=td)
    assert block_time(config, c, icm, dcm) == block_cycles(tm, ti, td, c, icm, dcm)


def test_advance_block_substitution():
    sim = simulation(1, mean_instr_cycles=Fraction(2), imiss_cycles=Fraction(10), dmiss_cycles=Fraction(20))
    core = sim.cores[0]
    line = sim.config.icache.line_bytes
    record = BasicBlockRecord(90, 100, 0x40000, 3 * line)  # spans exactly three lines
    before = core.clock
    counters = sim.advance_block(core, record, [PRIVATE_BASE + 4])
    assert (counters.ic_misses, counters.dc_misses, counters.block_time_cycles) == (3, 1, 250)
    assert core.clock - before == 250


def test_advance_block_warm_second_execution():
    sim = simulation(1)
    core = sim.cores[0]
    record = BasicBlockRecord(90, 6, 0x40000, 24)
    first = sim.advance_block(core, record, [])
    second = sim.advance_block(core, record, [])
    assert first.ic_misses >= 1 and second.ic_misses == 0
    assert second.block_time_cycles < first.block_time_cycles


def test_shared_access_adds_extra():
    sim = simulation(1, shared_mem_extra_cycles=Fraction(3), dmiss_cycles=Fraction(0))
    core = sim.cores[0]
    record = BasicBlockRecord(90, 10, 0x40000, 40)
    t0 = core.clock
    counters = sim.advance_block(core, record, [0x100, ~0x104])
    assert core.clock - t0 == counters.block_time_cycles + 6
    assert core.shared_accesses == 2


@given(st.lists(st.integers(0, 1 << 14).map(lambda a: PRIVATE_BASE + 4 * a), max_size=200),
       st.sampled_from([(16, 1), (8, 2), (4, 4), (64, 1)]))
def test_advance_block_dcache_matches_oracle(addresses, geo):
    from nativesim.target import CacheGeometry
    sets, ways = geo
    sim = simulation(1, dcache=CacheGeometry(32 * sets * ways, 32, ways))
    core = sim.cores[0]
    ref = BruteForceLRU(32, sets, ways)
    record = BasicBlockRecord(90, 1, 0x40000, 4)
    for chunk in range(0, len(addresses), 7):
        part = addresses[chunk:chunk + 7]
        expected = sum(not ref.access(a) for a in part)
        assert sim.advance_block(core, record, part).dc_misses == expected


# whole runs ------------------------------------------------------------------

def test_minimal_program():
    w = prepare("int main() { return 0; }")
    result = w.run(TargetConfig(core_count=4))
    (record,) = w.records
    assert result.core_clocks[1:] == (0, 0, 0)
    assert result.core_clocks[0] == block_time(TargetConfig(), record.instr_count, 1, 0)
    assert result.block_executions == 1


@pytest.mark.parametrize("cores", [1, 2, 3, 4, 8, 16])
def test_nqueens_solutions(nqueens, cores):
    assert nqueens.run(TargetConfig(core_count=cores)).outputs == (nqueens_solutions(5),)


def test_nqueens_oracle():
    assert [nqueens_solutions(n) for n in range(1, 7)] == [1, 0, 0, 2, 10, 4]


# parallel for --------------------------------------------------------------

LOOP = """int x[64];
int main() {
    int i;
    #pragma omp parallel for
    for (i = 0; i < %d; i++) {
        x[i] = i;
    }
    return 0;
}
"""


def region(n, cores, **overrides):
    return simulate(LOOP % n, cores, **FLAT, **overrides)


@pytest.mark.parametrize("n,cores,chunk", [(16, 4, 4), (5, 4, 2), (1, 16, 1), (7, 3, 3)])
def test_static_chunking(n, cores, chunk):
    # with uniform iteration cost the region lasts as long as one core running one chunk
    assert region(n, cores).parallel_cycles == region(chunk, 1).parallel_cycles


def test_chunks_two_two_one_zero():
    result = region(5, 4)
    busy = result.busy_cycles
    assert busy[3] == 0
    assert busy[1] > busy[2] > 0
    t1 = region(1, 1).parallel_cycles
    t2 = region(2, 1).parallel_cycles
    assert busy[1] == t2 and busy[2] == t1


def test_single_iteration_leaves_cores_idle():
    result = region(1, 16)
    assert sum(1 for b in result.busy_cycles[1:] if b) == 0
    # every other core idles up to the join; core 0 goes on with the sequential tail
    assert len(set(result.core_clocks[1:])) == 1
    assert result.core_clocks[0] > result.core_clocks[1]


def test_fork_join_overheads():
    plain = region(8, 4)
    costly = region(8, 4, fork_overhead_cycles=30, join_overhead_cycles=12)
    assert costly.parallel_cycles == plain.parallel_cycles + 42
    assert costly.overhead_cycles == (42,) * 4


@given(st.integers(0, 60), st.integers(1, 16))
@settings(max_examples=25)
def test_join_non_increasing_in_cores(n, cores):
    assert region(n, cores + 1).parallel_cycles <= region(n, cores).parallel_cycles


def test_nested_parallel_rejected():
    source = """int x[4];
void inner() {
    int j;
    #pragma omp parallel for
    for (j = 0; j < 4; j++) { x[j] = j; }
}
int main() {
    int i;
    #pragma omp parallel for
    for (i = 0; i < 2; i++) { inner(); }
    return 0;
}
"""
    with pytest.raises(WorkloadError, match="nested parallel"):
        simulate(source, 2)


# critical sections ---------------------------------------------------------

def run_bodies(sim, plan):
    """plan: per core (arrival clock, hold cycles, lock); returns lock intervals."""
    def body(core, arrive, hold, lock):
        core.clock = arrive
        yield lock
        core.clock += hold
        sim.critical_exit(core, lock)

    sim.drive([(sim.cores[k], body(sim.cores[k], *p)) for k, p in enumerate(plan)])
    return sim.lock_intervals


def test_uncontended_acquires_at_arrival():
    sim = simulation(1)
    lock = VirtualLock(0, "")
    assert run_bodies(sim, [(40, 5, lock)]) == [("<unnamed>", 0, 40, 45)]
    assert sim.cores[0].wait == 0


def test_simultaneous_arrivals_ordered_by_core_id():
    sim = simulation(6)
    lock = VirtualLock(0, "")
    intervals = run_bodies(sim, [(100, 7, lock)] * 6)
    assert [(core, start) for _, core, start, _ in intervals] == [(k, 100 + 7 * k) for k in range(6)]
    assert [c.wait for c in sim.cores] == [7 * k for k in range(6)]


def test_earlier_arrival_served_first():
    sim = simulation(2)
    lock = VirtualLock(0, "")
    intervals = run_bodies(sim, [(10, 20, lock), (5, 20, lock)])
    assert [(core, start) for _, core, start, _ in intervals] == [(1, 5), (0, 25)]


def test_critical_in_workload_fifo():
    source = """int count = 0;
int main() {
    int i;
    #pragma omp parallel for
    for (i = 0; i < 8; i++) {
        #pragma omp critical
        count = count + 1;
    }
    print(count);
    return 0;
}
"""
    result = simulate(source, 8, **FLAT)
    assert result.outputs == (8,)
    starts = [start for _, _, start, _ in result.lock_intervals]
    holds = {end - start for _, _, start, end in result.lock_intervals}
    (hold,) = holds
    assert [core for _, core, _, _ in result.lock_intervals] == list(range(8))
    assert starts == [starts[0] + k * hold for k in range(8)]


def test_recursive_critical_rejected():
    source = """int c;
int main() {
    int i;
    #pragma omp parallel for
    for (i = 0; i < 2; i++) {
        #pragma omp critical
        {
            #pragma omp critical
            c++;
        }
    }
    return 0;
}
"""
    with pytest.raises(WorkloadError, match="recursive critical"):
        simulate(source, 2)


def test_named_locks_deadlock_in_workload():
    source = """int a;
int main() {
    int i;
    #pragma omp parallel for
    for (i = 0; i < 2; i++) {
        if (i == 0) {
            #pragma omp critical(left)
            {
                a = a + 1;
                #pragma omp critical(right)
                a = a + 1;
            }
        } else {
            #pragma omp critical(right)
            {
                a = a + 1;
                #pragma omp critical(left)
                a = a + 1;
            }
        }
    }
    return 0;
}
"""
    with pytest.raises(DeadlockError, match="deadlock") as err:
        simulate(source, 2, **FLAT)
    assert "'left'" in str(err.value) and "'right'" in str(err.value)


def test_deadlock_wait_graph():
    sim = simulation(2)
    a, b = VirtualLock(0, "a"), VirtualLock(1, "b")

    def body(core, first, second):
        yield first
        core.clock += 1
        yield second

    with pytest.raises(DeadlockError) as err:
        sim.drive([(sim.cores[0], body(sim.cores[0], a, b)), (sim.cores[1], body(sim.cores[1], b, a))])
    text = str(err.value)
    assert "core 0 waits for 'b' held by core 1" in text
    assert "core 1 waits for 'a' held by core 0" in text


# scheduler -----------------------------------------------------------------

def test_scheduler_min_clock_then_core_id():
    sim = simulation(3)
    c0, c1, c2 = sim.cores
    for core, clock in ((c0, 100), (c1, 90), (c2, 90)):
        core.status = RUNNING
        core.clock = clock
    assert sim.step_scheduler(sim.cores) is c1
    c1.clock = 100
    c2.clock = 100
    assert sim.step_scheduler(sim.cores) is c0


def test_scheduler_none_when_all_idle():
    sim = simulation(2)
    assert sim.step_scheduler(sim.cores) is None


# workload errors -------------------------------------------------------------

@pytest.mark.parametrize("body,message", [
    ("int a[2]; int i = 2; a[i] = 1;", "out of bounds"),
    ("int z = 0; int q = 7 / z;", "division by zero"),
    ("int z = 0; int q = 7 % z;", "modulo by zero"),
])
def test_runtime_errors_name_line(body, message):
    source = "int main() {\n    " + body.replace("; ", ";\n    ") + "\n    return 0;\n}\n"
    with pytest.raises(WorkloadError, match=message) as err:
        simulate(source, 1)
    assert err.value.line >= 2
    assert "virtual time" in str(err.value)


def test_race_warning():
    source = """int total = 0;
int main() {
    int i;
    #pragma omp parallel for
    for (i = 0; i < 8; i++) {
        total = total + i;
    }
    return total;
}
"""
    result = simulate(source, 4)
    assert len(result.warnings) == 1 and "total" in result.warnings[0]
    assert simulate(source, 1).warnings == ()


def test_critical_guard_silences_race(nqueens):
    assert nqueens.run(TargetConfig(core_count=16)).warnings == ()


# properties over a family of workloads -----------------------------------------

TEMPLATE = """int data[64];
int hits = 0;
int main() {{
    int i;
    for (i = 0; i < 64; i++) {{
        data[i] = (i * {a}) % 17;
    }}
    #pragma omp parallel for
    for (i = 0; i < {n}; i++) {{
        int s = 0;
        int j;
        for (j = 0; j < data[i] % {m}; j++) {{
            s = s + data[(i + j) % 64];
        }}
        if (s % {k} == 0) {{
            #pragma omp critical
            hits = hits + s + 1;
        }}
    }}
    print(hits);
    return hits % 100;
}}
"""

workloads = st.builds(lambda a, n, m, k: TEMPLATE.format(a=a, n=n, m=m, k=k),
                      st.integers(1, 16), st.integers(0, 64), st.integers(1, 9), st.integers(1, 4))
timing = st.fixed_dictionaries({
    "mean_instr_cycles": st.fractions(1, 3, max_denominator=4),
    "imiss_cycles": st.fractions(0, 30, max_denominator=3),
    "dmiss_cycles": st.fractions(0, 30, max_denominator=2),
    "shared_mem_extra_cycles": st.fractions(0, 4, max_denominator=2),
    "fork_overhead_cycles": st.integers(0, 50),
    "join_overhead_cycles": st.integers(0, 50),
})


@given(workloads, st.integers(1, 9), timing)
@settings(max_examples=30)
def test_properties(source, cores, params):
    w = prepare(source)
    config = TargetConfig(core_count=cores, **params)
    sink = TraceSink()
    traced = w.run(config, sink)
    # tracing is free and runs are deterministic
    assert w.run(config) == traced
    # outputs do not depend on core count or timing
    reference = w.run(TargetConfig(core_count=1))
    assert (traced.outputs, traced.return_value) == (reference.outputs, reference.return_value)
    # time conservation per core, against the trace's own block records
    for k in range(cores):
        assert traced.core_clocks[k] == (traced.busy_cycles[k] + traced.wait_cycles[k]
                                         + traced.idle_cycles[k] + traced.overhead_cycles[k])
    assert validate_trace(sink.events(), sink.defs, config) == []
    # mutual exclusion
    spans = sorted((start, end) for _, _, start, end in traced.lock_intervals)
    assert all(a_end <= b_start for (_, a_end), (b_start, _) in zip(spans, spans[1:]))
