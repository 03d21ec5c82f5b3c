import pytest
from hypothesis import given, strategies as st

from nativesim import TargetConfig
from nativesim.trace import (TraceDefinitions, TraceEvent, TraceFormatError, TraceOrderError, TraceSink,
                             canonical, format_report, profile, read_trace, validate_trace, write_trace)
from nativesim.trace.profile import NestingError

from oracles import exclusive_times


def defs(cores=1, functions=("main", "f"), counters=("busy_cycles",)):
    return TraceDefinitions(470_000_000, tuple(f"Core {k}" for k in range(cores)), functions, counters)


def E(ts, fid, core=0):
    return TraceEvent(ts, core, "E", fid)


def L(ts, fid, core=0):
    return TraceEvent(ts, core, "L", fid)


# sink ------------------------------------------------------------------------

def test_sink_single_call():
    sink = TraceSink()
    sink.begin(defs())
    sink.record(E(0, 0))
    sink.record(L(250, 0))
    assert sink.events() == [E(0, 0), L(250, 0)]
    sink.end()
    assert sink.closed


def test_sink_leave_without_enter():
    sink = TraceSink()
    sink.begin(defs())
    with pytest.raises(TraceOrderError, match="without matching enter"):
        sink.record(L(5, 0))


def test_sink_out_of_order():
    sink = TraceSink()
    sink.begin(defs())
    sink.record(E(10, 0))
    with pytest.raises(TraceOrderError, match="before previous"):
        sink.record(E(9, 1))


def test_sink_unclosed_at_end():
    sink = TraceSink()
    sink.begin(defs())
    sink.record(E(0, 0))
    with pytest.raises(TraceOrderError, match="never left"):
        sink.end()


def test_sink_filter_keeps_pseudo_functions():
    sink = TraceSink(filter_functions=["f"])
    sink.begin(defs(functions=("main", "f", "[idle]")))
    for e in (E(0, 0), E(1, 1), L(2, 1), E(3, 2), L(4, 2), L(5, 0)):
        sink.record(e)
    assert [e.ref for e in sink.events()] == [1, 1, 2, 2]


def test_sink_size_triggered_flush(tmp_path):
    path = tmp_path / "run.trace"
    sink = TraceSink(path, flush_bytes=64)
    sink.begin(defs())
    for k in range(50):
        sink.record(E(2 * k, 0))
        sink.record(L(2 * k + 1, 0))
    sink.end()
    assert sink.flushes > 1
    events, _ = read_trace(path)
    assert len(events) == 100


def test_sink_file_matches_write_trace(tmp_path):
    d = defs(2)
    evs = [E(0, 0), TraceEvent(1, 0, "B", 3, (10, 1, 0, 30)), L(31, 0),
           TraceEvent(0, 1, "C", 0, (77,)), E(5, 1, core=1), L(6, 1, core=1)]
    sink = TraceSink(tmp_path / "a.trace")
    sink.begin(d)
    for e in evs:
        sink.record(e)
    sink.end()
    write_trace(evs, d, tmp_path / "b.trace")
    for name in ("trace", "0.events", "1.events"):
        assert (tmp_path / f"a.{name}").read_bytes() == (tmp_path / f"b.{name}").read_bytes()


# file format ---------------------------------------------------------------

def test_format_lines(tmp_path):
    d = defs(2, counters=("busy_cycles", "wait_cycles"))
    evs = [E(0, 0), TraceEvent(0, 0, "B", 4, (10, 1, 2, 70)), TraceEvent(70, 0, "C", 1, (3,)), L(70, 0)]
    write_trace(evs, d, tmp_path / "x.trace")
    master = (tmp_path / "x.trace").read_text()
    assert master.splitlines() == ["NSTRACE 1", "RES 470000000", "PROC 0 Core 0", "PROC 1 Core 1",
                                   "FUNC 0 main", "FUNC 1 f", "CNTR 0 busy_cycles", "CNTR 1 wait_cycles"]
    assert (tmp_path / "x.0.events").read_text() == "E 0 0\nB 0 4 10 1 2 70\nC 70 1 3\nL 70 0\n"
    assert (tmp_path / "x.1.events").read_text() == ""


def test_sixteen_processes(tmp_path):
    paths = write_trace([], defs(16), tmp_path / "run.trace")
    master = (tmp_path / "run.trace").read_text()
    assert master.count("\nPROC ") == 16
    assert len([p for p in paths if p.suffix == ".events"]) == 16
    assert read_trace(tmp_path / "run.trace") == ([], defs(16))


def test_prefix_and_master_paths_equivalent(tmp_path):
    write_trace([E(0, 0), L(1, 0)], defs(), tmp_path / "p")
    assert read_trace(tmp_path / "p") == read_trace(tmp_path / "p.trace")


@st.composite
def traces(draw):
    ncores = draw(st.integers(1, 4))
    nfuncs = draw(st.integers(1, 4))
    d = defs(ncores, tuple(f"fn{k}" for k in range(nfuncs)), ("c0", "c1"))
    events = []
    for core in range(ncores):
        ts, stack = 0, []
        for _ in range(draw(st.integers(0, 25))):
            ts += draw(st.integers(0, 1000))
            choice = draw(st.integers(0, 3))
            if choice == 0 or (choice == 1 and not stack):
                fid = draw(st.integers(0, nfuncs - 1))
                stack.append(fid)
                events.append(TraceEvent(ts, core, "E", fid))
            elif choice == 1:
                events.append(TraceEvent(ts, core, "L", stack.pop()))
            elif choice == 2:
                events.append(TraceEvent(ts, core, "C", draw(st.integers(0, 1)), (draw(st.integers(0, 10**12)),)))
            else:
                events.append(TraceEvent(ts, core, "B", draw(st.integers(0, 500)),
                                         tuple(draw(st.integers(0, 10**6)) for _ in range(4))))
        while stack:
            events.append(TraceEvent(ts, core, "L", stack.pop()))
    return events, d


@given(traces())
def test_round_trip(tmp_path_factory, trace):
    events, d = trace
    path = tmp_path_factory.mktemp("rt") / "t.trace"
    write_trace(events, d, path)
    assert read_trace(path) == (canonical(events), d)
    assert canonical(events) == events  # generated core by core already


def _written(tmp_path):
    write_trace([E(0, 0), E(3, 1), L(9, 1), L(12, 0)], defs(), tmp_path / "t.trace")
    return tmp_path / "t.trace", tmp_path / "t.0.events"


def test_truncated_stream(tmp_path):
    master, stream = _written(tmp_path)
    stream.write_text(stream.read_text()[:-3])
    with pytest.raises(TraceFormatError, match="truncated"):
        read_trace(master)


@pytest.mark.parametrize("line,message", [("X 1 2\n", "unknown record tag"), ("E 1 7\n", "undefined id 7"),
                                          ("E 1\n", "malformed"), ("E -1 0\n", "negative")])
def test_bad_stream_lines(tmp_path, line, message):
    master, stream = _written(tmp_path)
    stream.write_text(stream.read_text() + line)
    with pytest.raises(TraceFormatError, match=message) as err:
        read_trace(master)
    assert "t.0.events:5" in str(err.value)


def test_bad_master(tmp_path):
    master, _ = _written(tmp_path)
    master.write_text(master.read_text().replace("FUNC 1 f", "FUNK 1 f"))
    with pytest.raises(TraceFormatError, match="unknown record tag"):
        read_trace(master)
    master.write_text("NSTRACE 2\n")
    with pytest.raises(TraceFormatError):
        read_trace(master)


def test_missing_trace(tmp_path):
    with pytest.raises(TraceFormatError, match="no such trace"):
        read_trace(tmp_path / "nope.trace")


def test_unwritable_path_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_trace([], defs(), blocker / "sub" / "t.trace")


# profile ---------------------------------------------------------------------

def test_profile_nesting_arithmetic():
    report = profile([E(0, 0), E(10, 1), L(30, 1), L(100, 0)], defs())
    main, f = report.function("main"), report.function("f")
    assert (main.exclusive, main.inclusive) == (80, 100)
    assert (f.exclusive, f.inclusive) == (20, 20)
    assert report.dominant() == main


def test_profile_empty():
    report = profile([], defs())
    assert report.functions == ()
    assert "no function events" in format_report(report)


def test_profile_two_cores_additive():
    report = profile([E(0, 1, 0), L(50, 1, 0), E(0, 1, 1), L(50, 1, 1)], defs(2))
    f = report.function("f")
    assert f.exclusive == 100 and f.per_core == (50, 50) and f.calls == 2


def test_profile_rejects_bad_nesting():
    with pytest.raises(NestingError):
        profile([E(0, 0), E(1, 1), L(2, 0), L(3, 1)], defs())


@given(traces())
def test_profile_matches_oracle(trace):
    events, d = trace
    report = profile(events, d)
    oracle = exclusive_times(events, len(d.functions), len(d.processes))
    for f in report.functions:
        assert f.per_core == tuple(oracle[d.functions.index(f.name)])
    assert [f.exclusive for f in report.functions] == sorted((f.exclusive for f in report.functions), reverse=True)


# validation against real runs --------------------------------------------------

def test_kernel_trace_valid(tmp_path, nqueens):
    config = TargetConfig(core_count=4)
    sink = TraceSink(tmp_path / "nq.trace")
    nqueens.run(config, sink)
    events, d = read_trace(tmp_path / "nq.trace")
    assert sink.events() == []  # everything was flushed to disk
    assert {e.kind for e in events} == {"E", "L", "B", "C"}
    assert validate_trace(events, d, config) == []
    report = profile(events, d)
    for core in report.cores:
        busy, wait, idle = core.fractions()
        assert abs(busy + wait + idle + core.overhead / core.final_clock - 1) < 1e-9
        assert core.exclusive + core.counter("untraced_cycles") == core.counter("busy_cycles")


def test_validator_catches_corruption(tmp_path, nqueens):
    config = TargetConfig(core_count=2)
    nqueens.run(config, TraceSink(tmp_path / "nq.trace"))
    events, d = read_trace(tmp_path / "nq.trace")
    k = next(i for i, e in enumerate(events) if e.kind == "B" and i > 10)
    bad = list(events)
    e = bad[k]
    bad[k] = e._replace(values=e.values[:3] + (e.values[3] + 1,))
    (v,) = [v for v in validate_trace(bad, d, config) if "equation" in v.message]
    assert v.core_id == e.core_id and v.line == k + 1
    bad = list(events)
    bad[k] = e._replace(timestamp=e.timestamp + 10**9)
    assert any("before previous" in v.message for v in validate_trace(bad, d))
    bad = [x for x in events if not (x.kind == "L" and x.core_id == 1)]
    assert validate_trace(bad, d)
