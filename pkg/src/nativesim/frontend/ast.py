"""AST for the workload language (a small integer subset of C with OpenMP pragmas).

Source positions are carried for diagnostics but excluded from equality, so
two parses of semantically identical text compare equal.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


def _pos():
    return field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Num:
    value: int
    line: int = _pos()


@dataclass(frozen=True)
class Var:
    name: str
    line: int = _pos()


@dataclass(frozen=True)
class Index:
    """``name[i][j]...``; fewer subscripts than dimensions denotes a sub-array."""

    name: str
    indices: tuple
    line: int = _pos()


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    line: int = _pos()


@dataclass(frozen=True)
class Unary:
    op: str  # '-' or '!'
    operand: "Expr"
    line: int = _pos()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = _pos()


Expr = Union[Num, Var, Index, Call, Unary, Binary]


@dataclass(frozen=True)
class Decl:
    name: str
    dims: tuple = ()
    init: Optional[Expr] = None
    line: int = _pos()


@dataclass(frozen=True)
class Assign:
    target: Union[Var, Index]
    op: str  # '=', '+=', '-=', '*=', '/=', '%='
    value: Expr
    line: int = _pos()


@dataclass(frozen=True)
class IncDec:
    target: Union[Var, Index]
    op: str  # '++' or '--'
    line: int = _pos()


@dataclass(frozen=True)
class ExprStmt:
    expr: Call
    line: int = _pos()


@dataclass(frozen=True)
class Block:
    stmts: tuple
    line: int = _pos()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: Block
    orelse: Optional[Block] = None
    line: int = _pos()


@dataclass(frozen=True)
class While:
    cond: Expr
    body: Block
    line: int = _pos()


@dataclass(frozen=True)
class For:
    init: Optional[Union[Decl, Assign]]
    cond: Expr
    step: Optional[Union[Assign, IncDec]]
    body: Block
    line: int = _pos()


@dataclass(frozen=True)
class Return:
    value: Optional[Expr] = None
    line: int = _pos()


@dataclass(frozen=True)
class ParallelFor:
    loop: For
    shared: tuple = ()
    private: tuple = ()
    line: int = _pos()


@dataclass(frozen=True)
class Critical:
    body: Block
    name: Optional[str] = None
    line: int = _pos()


Stmt = Union[Decl, Assign, IncDec, ExprStmt, Block, If, While, For, Return, ParallelFor, Critical]
SIMPLE_STMTS = (Decl, Assign, IncDec, ExprStmt, Return)


@dataclass(frozen=True)
class Param:
    name: str
    dims: tuple = ()  # () for scalars; first entry may be None for ``a[]``

    @property
    def is_array(self) -> bool:
        return bool(self.dims)


@dataclass(frozen=True)
class FunctionDef:
    name: str
    returns_value: bool
    params: tuple
    body: Block
    line: int = _pos()


@dataclass(frozen=True)
class WorkloadProgram:
    globals: tuple  # of Decl
    functions: tuple  # of FunctionDef
    entry: str = "main"

    def function(self, name: str) -> FunctionDef:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(name)


BUILTINS = {"print": 1, "abs": 1}
