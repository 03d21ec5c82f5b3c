"""Basic-block construction and marker placement.

A single lowering pass over each function produces three views that must
agree exactly:

* the control-flow graph (:class:`BasicBlock` list with successors),
* the marker sites of the annotated source (``b_uc_mark_<id>__``),
* a structured block-level IR that :mod:`nativesim.kernel.codegen` turns
  into host code.

Rules: straight-line statements accumulate in the current block; an
``if`` condition terminates the current block; then/else arms and joins
start new blocks; loop headers are their own blocks (an empty current block
is reused); parallel forks and critical entry/exit end blocks because they
call into the runtime. Every arm of an ``if`` that falls through gets an
extra exit marker, as in the classic annotated form::

    asm("b_uc_mark_2__");
    if (a[0] == 0) {
        asm("b_uc_mark_3__");
        a[0] = 1;
        asm("b_uc_mark_4__");
    }
    asm("b_uc_mark_5__");
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import ast as A
from .check import canonical_loop
from .parser import ParseError

# terminator kinds
FALL, JUMP, COND, RETURN, FORK, LOCK, UNLOCK = "fall", "jump", "cond", "return", "fork", "lock", "unlock"


@dataclass
class BasicBlock:
    block_id: int
    function: str
    marker_label: str
    statements: list = field(default_factory=list)
    terminator: Optional[str] = None
    cond: Optional[A.Expr] = None  # branch condition for COND terminators
    successors: list = field(default_factory=list)
    line: int = 0


@dataclass(frozen=True)
class Marker:
    marker_id: int
    label: str
    kind: str  # 'block' (block start) or 'exit' (end of an if arm)
    block_id: int
    where: str
    node: object = field(compare=False, repr=False)


@dataclass
class ParallelInfo:
    node: A.ParallelFor
    outlined_name: str
    var: str
    bound: A.Expr
    inclusive: bool
    step: int
    fork_block: int
    header_block: int


@dataclass
class FunctionCFG:
    name: str
    blocks: list
    markers: list
    items: list  # structured IR, see module docstring of codegen
    parallels: list

    @property
    def entry_block(self) -> int:
        return self.blocks[0].block_id


@dataclass
class LoweredProgram:
    program: A.WorkloadProgram
    functions: dict  # name -> FunctionCFG, in source order

    @property
    def blocks(self) -> list:
        return [b for f in self.functions.values() for b in f.blocks]

    @property
    def markers(self) -> list:
        return [m for f in self.functions.values() for m in f.markers]

    def block(self, block_id: int) -> BasicBlock:
        for b in self.blocks:
            if b.block_id == block_id:
                return b
        raise KeyError(block_id)


def marker_label(marker_id: int) -> str:
    return f"b_uc_mark_{marker_id}__"


class _Counters:
    def __init__(self):
        self.block = 0
        self.marker = 0
        self.outlined: dict[str, int] = {}


class _FunctionLowering:
    def __init__(self, fn: A.FunctionDef, counters: _Counters):
        self.fn = fn
        self.counters = counters
        self.blocks: list[BasicBlock] = []
        self.markers: list[Marker] = []
        self.parallels: list[ParallelInfo] = []
        self.cur: Optional[BasicBlock] = None
        self.items: list = []

    # helpers
    def add_marker(self, kind: str, block_id: int, where: str, node) -> str:
        mid = self.counters.marker
        self.counters.marker += 1
        label = marker_label(mid)
        self.markers.append(Marker(mid, label, kind, block_id, where, node))
        return label

    def new_block(self, where: str, node, line: int) -> BasicBlock:
        bid = self.counters.block
        self.counters.block += 1
        label = self.add_marker("block", bid, where, node)
        block = BasicBlock(bid, self.fn.name, label, line=line)
        self.blocks.append(block)
        self.cur = block
        self.items.append(("open", bid))
        return block

    def close(self, term: str, cond=None, payload=None) -> BasicBlock:
        block = self.cur
        block.terminator = term
        block.cond = cond
        self.items.append(("close", block.block_id, term, payload if payload is not None else cond))
        self.cur = None
        return block

    def require_reachable(self, stmt):
        if self.cur is None:
            raise ParseError(f"unreachable statement in {self.fn.name!r}", getattr(stmt, "line", 0), 1)

    def nested(self, fn):
        """Run *fn* collecting IR items into a fresh list; return that list."""
        saved = self.items
        self.items = []
        try:
            fn()
            return self.items
        finally:
            self.items = saved

    def loop_header(self, node) -> BasicBlock:
        """Start (or reuse) the header block of a loop; its IR goes in the loop item."""
        cur = self.cur
        if self.items and self.items[-1] == ("open", cur.block_id):
            # reuse the empty current block; move its 'open' into the loop
            self.items.pop()
            return cur
        prev = self.close(FALL)
        header = self.new_block("before", node, node.line)
        self.items.pop()
        prev.successors.append(header.block_id)
        return header

    # lowering
    def run(self) -> FunctionCFG:
        self.new_block("open", self.fn.body, self.fn.line)
        self.stmts(self.fn.body.stmts)
        if self.cur is not None:
            self.close(RETURN, payload=A.Return(None, line=self.fn.line))
        return FunctionCFG(self.fn.name, self.blocks, self.markers, self.items, self.parallels)

    def stmts(self, stmts):
        for s in stmts:
            self.require_reachable(s)
            self.stmt(s)

    def stmt(self, s):
        if isinstance(s, A.Return):
            self.cur.statements.append(s)
            self.close(RETURN, payload=s)
        elif isinstance(s, A.SIMPLE_STMTS):
            self.cur.statements.append(s)
            self.items.append(("stmt", s))
        elif isinstance(s, A.Block):
            self.items.append(("scope", self.nested(lambda: self.stmts(s.stmts))))
        elif isinstance(s, A.If):
            self.lower_if(s)
        elif isinstance(s, A.While):
            self.lower_loop(s, s.cond, s.body, None)
        elif isinstance(s, A.For):
            self.lower_for(s)
        elif isinstance(s, A.ParallelFor):
            self.lower_parallel(s)
        elif isinstance(s, A.Critical):
            self.lower_critical(s)
        else:  # pragma: no cover
            raise TypeError(type(s).__name__)

    def lower_if(self, s: A.If):
        test = self.close(COND, s.cond)
        arm_ends: list[BasicBlock] = []

        def arm(block: A.Block, term_if_falls: str):
            first = self.new_block("open", block, block.line)
            test.successors.append(first.block_id)
            self.stmts(block.stmts)
            if self.cur is not None:
                end = self.close(term_if_falls)
                self.add_marker("exit", end.block_id, "close", block)
                arm_ends.append(end)

        then_items = self.nested(lambda: arm(s.then, JUMP if s.orelse is not None else FALL))
        else_items = None
        if s.orelse is not None:
            else_items = self.nested(lambda: arm(s.orelse, FALL))
        self.items.append(("if", then_items, else_items))
        if arm_ends or s.orelse is None:
            join = self.new_block("after", s, s.line)
            for end in arm_ends:
                end.successors.append(join.block_id)
            if s.orelse is None:
                test.successors.append(join.block_id)

    def lower_loop(self, node, cond, body: A.Block, step):
        # loop_header may pop an 'open' from the enclosing list, so call it
        # before switching item lists and re-emit the open inside.
        header = self.loop_header(node)
        saved = self.items
        self.items = [("open", header.block_id)]
        self.close(COND, cond)
        header_items = self.items
        self.items = saved

        def body_part():
            first = self.new_block("open", body, body.line)
            header.successors.append(first.block_id)
            self.stmts(body.stmts)
            if step is not None:
                if self.cur is None:
                    raise ParseError("unreachable for-loop step", node.line, 1)
                self.cur.statements.append(step)
                self.items.append(("stmt", step))
            if self.cur is not None:
                end = self.close(JUMP)
                end.successors.append(header.block_id)

        body_items = self.nested(body_part)
        self.items.append(("loop", header_items, body_items))
        exit_block = self.new_block("after", node, node.line)
        header.successors.append(exit_block.block_id)

    def lower_for(self, s: A.For):
        if s.init is not None:
            self.cur.statements.append(s.init)
            self.items.append(("stmt", s.init))
        self.lower_loop(s, s.cond, s.body, s.step)

    def lower_parallel(self, s: A.ParallelFor):
        loop = s.loop
        var, bound, inclusive, step = canonical_loop(loop)
        k = self.counters.outlined.get(self.fn.name, 0)
        self.counters.outlined[self.fn.name] = k + 1
        outlined = f"{self.fn.name}._omp_fn.{k}"
        if loop.init is not None:
            self.cur.statements.append(loop.init)
        fork = self.close(FORK, payload=s)
        info = ParallelInfo(s, outlined, var, bound, inclusive, step, fork.block_id, -1)

        saved = self.items
        self.items = []
        header = self.new_block("before", s, loop.line)
        fork.successors.append(header.block_id)
        info.header_block = header.block_id
        self.close(COND, loop.cond)
        header_items = self.items

        def body_part():
            first = self.new_block("open", loop.body, loop.body.line)
            header.successors.append(first.block_id)
            self.stmts(loop.body.stmts)
            self.cur.statements.append(loop.step)
            self.items.append(("stmt", loop.step))
            end = self.close(JUMP)
            end.successors.append(header.block_id)

        self.items = []
        body_part()
        body_items = self.items
        self.items = saved
        self.parallels.append(info)
        self.items.append(("parallel", info, header_items, body_items))
        after = self.new_block("after", s, s.line)
        header.successors.append(after.block_id)

    def lower_critical(self, s: A.Critical):
        before = self.close(LOCK, payload=s)

        def body_part():
            first = self.new_block("open", s.body, s.body.line)
            before.successors.append(first.block_id)
            self.stmts(s.body.stmts)
            return first

        box = {}

        def run_body():
            box["first"] = body_part()
            box["end"] = self.close(UNLOCK, payload=s)

        body_items = self.nested(run_body)
        self.items.append(("critical", s, body_items))
        after = self.new_block("after", s, s.line)
        box["end"].successors.append(after.block_id)


def build_cfg(program: A.WorkloadProgram) -> LoweredProgram:
    counters = _Counters()
    functions = {}
    for fn in program.functions:
        functions[fn.name] = _FunctionLowering(fn, counters).run()
    return LoweredProgram(program, functions)


def marker_map(lowered: LoweredProgram) -> dict:
    markers: dict = {}
    for m in lowered.markers:
        markers.setdefault((m.where, id(m.node)), []).append(m.label)
    return markers


def annotate(lowered: LoweredProgram) -> str:
    """Source text with an ``asm`` marker at every block boundary."""
    from .unparse import unparse

    return unparse(lowered.program, marker_map(lowered))
