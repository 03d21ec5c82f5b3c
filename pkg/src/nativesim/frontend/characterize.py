"""Basic-block characterization: instruction counts and code layout.

A target compiler would count the instructions emitted between two block
markers. Here each statement and operator kind carries a fixed
instruction count from a :class:`CostTable`; an optional block-database
file can override the result per block, which is how counts measured on a
real toolchain are fed in.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType

from . import ast as A
from .cfg import COND, FORK, JUMP, LOCK, RETURN, UNLOCK, LoweredProgram

INSTR_BYTES = 4
CODE_BASE = 0x8000

DEFAULT_COSTS = MappingProxyType({
    "assign": 1,   # store to a scalar or array element
    "load": 1,     # read of a scalar or array element
    "const": 1,    # materialize a literal
    "alu": 1,      # + - << >> & | ^
    "mul": 2,
    "div": 12,     # no hardware divider: runtime helper
    "compare": 1,
    "logic": 1,    # && || !
    "neg": 1,
    "index": 1,    # address arithmetic per subscript
    "call": 4,     # branch-and-link, prologue, epilogue
    "arg": 1,      # per argument passed
    "builtin": 2,  # abs/print helper call
    "return": 2,
    "branch": 1,   # conditional or unconditional branch ending a block
    "runtime": 4,  # call into the OpenMP runtime (fork, lock, unlock)
    "decl": 0,     # uninitialized declaration: no code
})

_BINARY_KIND = {
    "+": "alu", "-": "alu", "<<": "alu", ">>": "alu", "&": "alu", "|": "alu", "^": "alu",
    "*": "mul", "/": "div", "%": "div",
    "<": "compare", "<=": "compare", ">": "compare", ">=": "compare", "==": "compare", "!=": "compare",
    "&&": "logic", "||": "logic",
}
_COMPOUND_KIND = {"+=": "alu", "-=": "alu", "*=": "mul", "/=": "div", "%=": "div"}


class CostTableError(ValueError):
    pass


class CostTable:
    def __init__(self, costs=None):
        merged = dict(DEFAULT_COSTS)
        for key, value in (costs or {}).items():
            if key not in DEFAULT_COSTS:
                raise CostTableError(f"unknown statement kind {key!r}")
            if not isinstance(value, int) or value < 0:
                raise CostTableError(f"cost for {key!r} must be a non-negative integer")
            merged[key] = value
        for key, value in merged.items():
            if value == 0 and key != "decl":
                raise CostTableError(f"cost for {key!r} must be >= 1")
        self.costs = MappingProxyType(merged)

    def __getitem__(self, kind: str) -> int:
        return self.costs[kind]

    @classmethod
    def load(cls, path) -> "CostTable":
        path = Path(path)
        try:
            text = path.read_text(encoding="ascii")
        except OSError as exc:
            raise CostTableError(f"{path}: {exc.strerror}") from None
        costs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (p.strip() for p in line.partition("="))
            if not sep or not value.isdigit():
                raise CostTableError(f"{path}:{lineno}: expected 'statement_kind = count'")
            costs[key] = int(value)
        return cls(costs)


DEFAULT_COST_TABLE = CostTable()


@dataclass(frozen=True)
class BasicBlockRecord:
    block_id: int
    instr_count: int
    code_addr: int
    code_len_bytes: int


def expr_cost(table: CostTable, program: A.WorkloadProgram, e) -> int:
    """Instructions to evaluate *e*; array arguments cost only their address."""
    c = table.costs
    if isinstance(e, A.Num):
        return c["const"]
    if isinstance(e, A.Var):
        return c["load"]
    if isinstance(e, A.Index):
        return address_cost(table, program, e) + c["load"]
    if isinstance(e, A.Call):
        if e.name in A.BUILTINS:
            return sum(expr_cost(table, program, a) for a in e.args) + c["builtin"]
        params = program.function(e.name).params
        total = c["call"] + c["arg"] * len(e.args)
        for a, p in zip(e.args, params):
            if not p.is_array:
                total += expr_cost(table, program, a)
            elif isinstance(a, A.Index):
                total += address_cost(table, program, a)
            else:
                total += c["const"]
        return total
    if isinstance(e, A.Unary):
        return expr_cost(table, program, e.operand) + c["neg" if e.op == "-" else "logic"]
    if isinstance(e, A.Binary):
        return (expr_cost(table, program, e.left) + expr_cost(table, program, e.right)
                + c[_BINARY_KIND[e.op]])
    raise TypeError(type(e).__name__)


def address_cost(table: CostTable, program: A.WorkloadProgram, target) -> int:
    if isinstance(target, A.Index):
        return sum(expr_cost(table, program, i) + table.costs["index"] for i in target.indices)
    return 0


def stmt_cost(table: CostTable, program: A.WorkloadProgram, s) -> int:
    c = table.costs
    if isinstance(s, A.Decl):
        return c["decl"] if s.init is None else expr_cost(table, program, s.init) + c["assign"]
    if isinstance(s, A.Assign):
        cost = expr_cost(table, program, s.value) + address_cost(table, program, s.target) + c["assign"]
        if s.op != "=":
            cost += c["load"] + c[_COMPOUND_KIND[s.op]]
        return cost
    if isinstance(s, A.IncDec):
        return address_cost(table, program, s.target) + c["load"] + c["alu"] + c["assign"]
    if isinstance(s, A.ExprStmt):
        return expr_cost(table, program, s.expr)
    if isinstance(s, A.Return):
        return c["return"] + (expr_cost(table, program, s.value) if s.value is not None else 0)
    raise TypeError(type(s).__name__)


def block_instr_count(table: CostTable, lowered: LoweredProgram, block) -> int:
    c = table.costs
    program = lowered.program
    total = sum(stmt_cost(table, program, s) for s in block.statements)
    term = block.terminator
    if term == COND:
        total += expr_cost(table, program, block.cond) + c["branch"]
    elif term == JUMP:
        total += c["branch"]
    elif term in (FORK, LOCK, UNLOCK):
        total += c["runtime"]
    elif term == RETURN and not any(isinstance(s, A.Return) for s in block.statements):
        total += c["return"]  # implicit return at the end of a function
    return max(1, total)


def layout(counts: list[tuple[int, int]]) -> list[BasicBlockRecord]:
    """Assign contiguous code addresses in block-id order."""
    records = []
    addr = CODE_BASE
    for block_id, count in sorted(counts):
        length = count * INSTR_BYTES
        records.append(BasicBlockRecord(block_id, count, addr, length))
        addr += length
    return records


def characterize(lowered: LoweredProgram, costs: CostTable = DEFAULT_COST_TABLE) -> list[BasicBlockRecord]:
    return layout([(b.block_id, block_instr_count(costs, lowered, b)) for b in lowered.blocks])


class BlockDatabaseError(ValueError):
    pass


def parse_block_db(text: str, source: str = "<block-db>") -> dict[int, int]:
    counts: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2 or not all(f.isdigit() for f in fields):
            raise BlockDatabaseError(f"{source}:{lineno}: malformed line {raw!r}")
        block_id, count = int(fields[0]), int(fields[1])
        if count < 1:
            raise BlockDatabaseError(f"{source}:{lineno}: instruction count must be >= 1")
        if block_id in counts:
            raise BlockDatabaseError(f"{source}:{lineno}: duplicate block_id {block_id}")
        counts[block_id] = count
    return counts


def load_block_db(path, base: list[BasicBlockRecord] | None = None) -> list[BasicBlockRecord]:
    """Read a block database; with *base*, merge it over a characterization."""
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except OSError as exc:
        raise BlockDatabaseError(f"{path}: {exc.strerror}") from None
    overrides = parse_block_db(text, str(path))
    if base is None:
        return layout(list(overrides.items()))
    return apply_overrides(base, overrides, str(path))


def apply_overrides(base: list[BasicBlockRecord], overrides: dict[int, int],
                    source: str = "<block-db>") -> list[BasicBlockRecord]:
    known = {r.block_id for r in base}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise BlockDatabaseError(f"{source}: unknown block_id {unknown[0]}")
    return layout([(r.block_id, overrides.get(r.block_id, r.instr_count)) for r in base])


def format_block_db(records: list[BasicBlockRecord]) -> str:
    lines = ["# block_id instr_count"]
    lines += [f"{r.block_id} {r.instr_count}" for r in records]
    return "\n".join(lines) + "\n"
