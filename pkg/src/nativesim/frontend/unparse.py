"""Render an AST back to canonical ``.nsc`` source.

The output always reparses to an AST equal to the input. An optional
``markers`` mapping inserts ``asm("...")`` lines to produce the annotated
form consumed by a target-compiler characterization pass.
"""
from __future__ import annotations

from . import ast as A
from .parser import PRECEDENCE

_INDENT = "    "


def expr_str(e, parent_prec: int = -1, right: bool = False) -> str:
    if isinstance(e, A.Num):
        return str(e.value)
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.Index):
        return e.name + "".join(f"[{expr_str(i)}]" for i in e.indices)
    if isinstance(e, A.Call):
        return f"{e.name}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, A.Unary):
        inner = expr_str(e.operand, 100)
        text = e.op + inner
        # keep '- -x' from lexing as '--x'
        return f"{e.op}({inner})" if inner.startswith(("-", "!")) else text
    if isinstance(e, A.Binary):
        prec = PRECEDENCE[e.op]
        text = f"{expr_str(e.left, prec)} {e.op} {expr_str(e.right, prec, right=True)}"
        if prec < parent_prec or (right and prec == parent_prec):
            return f"({text})"
        return text
    raise TypeError(type(e).__name__)


def _decl_str(d: A.Decl) -> str:
    dims = "".join(f"[{n}]" for n in d.dims)
    init = f" = {expr_str(d.init)}" if d.init is not None else ""
    return f"int {d.name}{dims}{init}"


def simple_str(s) -> str:
    if isinstance(s, A.Decl):
        return _decl_str(s)
    if isinstance(s, A.Assign):
        return f"{expr_str(s.target)} {s.op} {expr_str(s.value)}"
    if isinstance(s, A.IncDec):
        return f"{expr_str(s.target)}{s.op}"
    if isinstance(s, A.ExprStmt):
        return expr_str(s.expr)
    if isinstance(s, A.Return):
        return "return" if s.value is None else f"return {expr_str(s.value)}"
    raise TypeError(type(s).__name__)


class Unparser:
    """``markers`` maps ``(where, id(node))`` to marker labels.

    ``where`` is ``"before"``/``"after"`` (around a statement), ``"open"``
    (first line inside a block) or ``"close"`` (last line inside a block).
    """

    def __init__(self, markers: dict | None = None):
        self.markers = markers or {}
        self.lines: list[str] = []

    def emit(self, depth: int, text: str):
        self.lines.append(_INDENT * depth + text)

    def mark(self, where: str, node, depth: int):
        for label in self.markers.get((where, id(node)), ()):
            self.emit(depth, f'asm("{label}");')

    def program(self, p: A.WorkloadProgram) -> str:
        for d in p.globals:
            self.emit(0, _decl_str(d) + ";")
        for i, fn in enumerate(p.functions):
            if p.globals or i:
                self.lines.append("")
            params = []
            for prm in fn.params:
                dims = "".join("[]" if n is None else f"[{n}]" for n in prm.dims)
                params.append(f"int {prm.name}{dims}")
            rtype = "int" if fn.returns_value else "void"
            self.emit(0, f"{rtype} {fn.name}({', '.join(params)}) {{")
            self.body(fn.body, 1)
            self.emit(0, "}")
        return "\n".join(self.lines) + "\n"

    def body(self, block: A.Block, depth: int):
        self.mark("open", block, depth)
        for s in block.stmts:
            self.stmt(s, depth)
        self.mark("close", block, depth)

    def stmt(self, s, depth: int):
        self.mark("before", s, depth)
        if isinstance(s, A.SIMPLE_STMTS):
            self.emit(depth, simple_str(s) + ";")
        elif isinstance(s, A.Block):
            self.emit(depth, "{")
            self.body(s, depth + 1)
            self.emit(depth, "}")
        elif isinstance(s, A.If):
            self.emit(depth, f"if ({expr_str(s.cond)}) {{")
            self.body(s.then, depth + 1)
            if s.orelse is not None:
                self.emit(depth, "} else {")
                self.body(s.orelse, depth + 1)
            self.emit(depth, "}")
        elif isinstance(s, A.While):
            self.emit(depth, f"while ({expr_str(s.cond)}) {{")
            self.body(s.body, depth + 1)
            self.emit(depth, "}")
        elif isinstance(s, A.For):
            init = simple_str(s.init) if s.init is not None else ""
            step = simple_str(s.step) if s.step is not None else ""
            self.emit(depth, f"for ({init}; {expr_str(s.cond)}; {step}) {{")
            self.body(s.body, depth + 1)
            self.emit(depth, "}")
        elif isinstance(s, A.ParallelFor):
            clauses = ""
            if s.shared:
                clauses += f" shared({', '.join(s.shared)})"
            if s.private:
                clauses += f" private({', '.join(s.private)})"
            self.emit(depth, f"#pragma omp parallel for{clauses}")
            self.stmt(s.loop, depth)
        elif isinstance(s, A.Critical):
            name = f"({s.name})" if s.name else ""
            self.emit(depth, f"#pragma omp critical{name}")
            self.emit(depth, "{")
            self.body(s.body, depth + 1)
            self.emit(depth, "}")
        else:
            raise TypeError(type(s).__name__)
        self.mark("after", s, depth)


def unparse(program: A.WorkloadProgram, markers: dict | None = None) -> str:
    return Unparser(markers).program(program)
