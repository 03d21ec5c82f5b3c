"""End-to-end acceptance checks; each test is one numbered criterion.

A one-line PASS/FAIL verdict per criterion is printed in the terminal
summary (see conftest.py).
"""
import filecmp
import random
import time
from fractions import Fraction

import pytest

from nativesim import TargetConfig, bundled
from nativesim.cache import CacheState
from nativesim.cli import main as cli_main
from nativesim.frontend.characterize import characterize
from nativesim.frontend.cfg import build_cfg
from nativesim.frontend.parser import parse
from nativesim.target import CacheGeometry
from nativesim.trace import TraceSink, read_trace, validate_trace, write_trace

from oracles import BruteForceLRU, amdahl, block_cycles, nqueens_solutions

WORKLOADS = ("nqueens", "jpeg_pipeline")
ZERO_OVERHEAD = dict(fork_overhead_cycles=0, join_overhead_cycles=0, shared_mem_extra_cycles=Fraction(0))


@pytest.fixture(scope="module")
def workloads():
    return {name: bundled(name) for name in WORKLOADS}


def criterion(number, title):
    return pytest.mark.criterion(number, title)


@criterion(1, "tracing leaves SimulationResult bit-identical")
@pytest.mark.parametrize("name", WORKLOADS)
@pytest.mark.parametrize("cores", [1, 4, 16])
def test_c1_non_invasive(workloads, name, cores):
    config = TargetConfig(core_count=cores)
    plain = workloads[name].run(config)
    traced = workloads[name].run(config, TraceSink())
    assert traced == plain


@criterion(2, "every block record satisfies the block-time equation")
@pytest.mark.parametrize("name", WORKLOADS)
@pytest.mark.parametrize("costs", [(1, 20, 20), (Fraction(3, 2), Fraction(25, 3), Fraction(7, 4))])
def test_c2_equation(workloads, name, costs):
    tm, ti, td = costs
    config = TargetConfig(core_count=4, mean_instr_cycles=tm, imiss_cycles=ti, dmiss_cycles=td)
    sink = TraceSink()
    workloads[name].run(config, sink)
    blocks = [e for e in sink.events() if e.kind == "B"]
    assert blocks
    bad = [e for e in blocks if e.values[3] != block_cycles(tm, ti, td, *e.values[:3])]
    assert bad == []


@criterion(3, "cache model matches brute-force LRU on 1000 random sequences")
def test_c3_cache_oracle():
    start = time.perf_counter()
    rng = random.Random(2024)
    for _ in range(1000):
        ways, sets = rng.randint(1, 4), rng.randint(1, 64)
        line = rng.choice([4, 8, 16, 32, 64])
        cache = CacheState(CacheGeometry(line * sets * ways, line, ways))
        ref = BruteForceLRU(line, sets, ways)
        span = line * sets * ways * rng.choice([1, 2, 3, 8])
        for _ in range(rng.randint(1, 10**4)):
            a = rng.randrange(span)
            assert cache.access(a).hit == ref.access(a)
    assert time.perf_counter() - start < 60


@criterion(4, "identical runs give byte-identical traces and summaries")
def test_c4_determinism(tmp_path, capsys):
    snapshots = []
    for _ in range(2):
        for name, cores in (("nqueens", "1,4,16"), ("jpeg_pipeline", "4")):
            assert cli_main(["run", "--workload", name, "--cores", cores,
                             "--trace-prefix", str(tmp_path / "out" / name)]) == 0
        snapshots.append({p.name: p.read_bytes() for p in (tmp_path / "out").iterdir()})
    first, second = snapshots
    assert len(first) == 3 * 2 + (1 + 4 + 16) + 2 + 4  # master + summary per run, one stream per core
    assert first == second


@criterion(5, "n-queens n=5 finds 10 solutions on 1..16 cores")
@pytest.mark.parametrize("cores", [1, 2, 4, 8, 16])
def test_c5_nqueens_correct(workloads, cores):
    expected = nqueens_solutions(5)
    assert expected == 10
    assert workloads["nqueens"].run(TargetConfig(core_count=cores)).outputs == (expected,)


@criterion(6, "n-queens scales: monotone, speedup(16) >= 8, critical wait < 1% of busy")
def test_c6_nqueens_scaling(workloads):
    start = time.perf_counter()
    runs = {p: workloads["nqueens"].run(TargetConfig(core_count=p, fork_overhead_cycles=0,
                                                     join_overhead_cycles=0))
            for p in (1, 2, 4, 8, 16)}
    times = [runs[p].target_cycles for p in (1, 2, 4, 8, 16)]
    assert all(b <= a for a, b in zip(times, times[1:]))
    assert times[0] / times[-1] >= 8
    for r in runs.values():
        assert r.critical_wait_cycles < 0.01 * sum(r.busy_cycles)
    assert time.perf_counter() - start < 10


@criterion(7, "JPEG pipeline follows Amdahl within 10% and saturates")
def test_c7_jpeg_amdahl(workloads):
    start = time.perf_counter()
    runs = {p: workloads["jpeg_pipeline"].run(TargetConfig(core_count=p, **ZERO_OVERHEAD))
            for p in (1, 2, 4, 5, 8, 16)}
    t1 = runs[1].target_cycles
    s = 1 - runs[1].parallel_cycles / t1
    for p in (2, 4, 8, 16):
        speedup = t1 / runs[p].target_cycles
        assert abs(speedup - amdahl(s, p)) <= 0.10 * amdahl(s, p)
    assert (t1 / runs[16].target_cycles) / (t1 / runs[5].target_cycles) < 1.5
    assert time.perf_counter() - start < 10


@criterion(8, "trace round-trip is exact and every trace passes inspection")
@pytest.mark.parametrize("name", WORKLOADS)
@pytest.mark.parametrize("cores", [1, 4, 16])
def test_c8_round_trip(workloads, tmp_path, name, cores):
    config = TargetConfig(core_count=cores)
    sink = TraceSink()
    workloads[name].run(config, sink)
    events, defs = sink.events(), sink.defs
    write_trace(events, defs, tmp_path / "t.trace")
    assert read_trace(tmp_path / "t.trace") == (events, defs)
    assert validate_trace(events, defs, config) == []
    disk = TraceSink(tmp_path / "k.trace")
    workloads[name].run(config, disk)
    assert filecmp.cmp(tmp_path / "t.trace", tmp_path / "k.trace", shallow=False)
    assert cli_main(["inspect", str(tmp_path / "k.trace")]) == 0


@criterion(9, "16-core n-queens with tracing runs in under 1 s of host time")
def test_c9_host_speed(tmp_path):
    bundled("nqueens").run(TargetConfig(core_count=1))  # import and warm the interpreter
    start = time.perf_counter()
    workload = bundled("nqueens")
    result = workload.run(TargetConfig(core_count=16), TraceSink(tmp_path / "nq.trace"))
    elapsed = time.perf_counter() - start
    print(f"16-core n-queens with tracing: {elapsed:.3f} s host")
    assert result.outputs == (10,)
    assert elapsed < 1.0


@criterion(10, "if-then golden: 4 markers, 3 blocks")
def test_c10_figure4_markers():
    lowered = build_cfg(parse("int a[1];\nint main() {\n    if (a[0] == 0) {\n        a[0] = 1;\n    }\n"
                              "    return 0;\n}\n"))
    assert len(lowered.markers) == 4
    assert len(lowered.blocks) == 3
    assert len(characterize(lowered)) == 3
    kinds = [(m.kind, m.where) for m in lowered.markers]
    assert kinds == [("block", "open"), ("block", "open"), ("exit", "close"), ("block", "after")]
    assert [m.label for m in lowered.markers] == [f"b_uc_mark_{k}__" for k in range(4)]
