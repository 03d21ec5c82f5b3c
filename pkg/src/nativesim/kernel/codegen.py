"""Translate the block-level IR of a workload into annotated host code.

Each workload function becomes a Python function ``F_<name>(core, ...)``.
Every basic block ends with ``ADV(core, R<id>, (tokens...))``, the timing
annotation that charges the block to the core's virtual clock. The tuple
lists the block's data accesses in program order: a cache line index for
private data, ``~address`` for shared data (bit 0 set for writes). Parallel loop bodies become nested functions run
once per core; bodies or functions that can enter a critical section are
generators that ``yield`` the lock they want, so the kernel can order lock
arrivals in virtual time.

Array values are passed as four values: storage list, first element index
within the storage, address of storage element 0, and end index of the
view (exclusive).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..frontend import ast as A
from ..frontend.cfg import COND, FORK, RETURN, UNLOCK, LoweredProgram
from ..frontend.check import const_value
from .layout import PRIVATE, SHARED, MemoryLayout

PSEUDO_FUNCTIONS = ("[idle]", "[wait]", "[overhead]")


class Sym:
    __slots__ = ("name", "dims", "py", "kind", "shared", "placement", "owner", "uid")

    def __init__(self, name, dims, py, kind, owner, uid):
        self.name = name
        self.dims = tuple(dims)
        self.py = py
        self.kind = kind  # 'global', 'local', 'param'
        self.shared = kind == "global"
        self.placement = None
        self.owner = owner  # scope name used in the layout, e.g. 'main' or 'main._omp_fn.0'
        self.uid = uid

    @property
    def is_array(self) -> bool:
        return bool(self.dims)

    @property
    def is_view(self) -> bool:
        return self.kind == "param" and self.is_array

    @property
    def size(self) -> int:
        n = 1
        for d in self.dims:
            n *= d
        return n

    def strides(self) -> list[int]:
        strides = []
        acc = 1
        for d in reversed(self.dims[1:]):
            strides.append(acc)
            acc *= d
        strides.append(acc)
        return list(reversed(strides))


@dataclass
class Region:
    info: object
    owner: str
    private: dict = field(default_factory=dict)  # name -> Sym
    declared: set = field(default_factory=set)  # uids declared inside the region
    writes: set = field(default_factory=set)  # outer Syms assigned inside


class Resolver:
    """Bind every variable reference and declaration to a :class:`Sym`."""

    def __init__(self, lowered: LoweredProgram):
        self.lowered = lowered
        self.program = lowered.program
        self.refs: dict[int, Sym] = {}
        self.decls: dict[int, Sym] = {}
        self.regions: dict[int, Region] = {}  # id(ParallelFor) -> Region
        self.params: dict[str, list[Sym]] = {}
        self.syms: list[Sym] = []
        self.globals: dict[str, Sym] = {}
        self._uid = 0

    def new_sym(self, name, dims, kind, owner) -> Sym:
        self._uid += 1
        py = f"g_{name}" if kind == "global" else f"v{self._uid}_{name}"
        sym = Sym(name, dims, py, kind, owner, self._uid)
        self.syms.append(sym)
        return sym

    def run(self):
        for d in self.program.globals:
            sym = self.new_sym(d.name, d.dims, "global", "global")
            self.globals[d.name] = sym
            self.decls[id(d)] = sym
        for fn in self.program.functions:
            self.fn = fn
            self.region = None
            scopes = [dict(self.globals), {}]
            self.params[fn.name] = []
            for p in fn.params:
                dims = tuple(d if d is not None else 0 for d in p.dims)
                sym = self.new_sym(p.name, dims, "param", fn.name)
                scopes[-1][p.name] = sym
                self.params[fn.name].append(sym)
            self.block(fn.body.stmts, scopes)
        return self

    # scopes are lists of dicts, innermost last
    def lookup(self, name, scopes) -> Sym:
        for scope in reversed(scopes):
            if name in scope:
                sym = scope[name]
                break
        else:  # pragma: no cover - the checker rejects undeclared names
            raise KeyError(name)
        region = self.region
        if region is not None and sym.kind != "global" and sym.uid not in region.declared:
            sym.shared = True
        return sym

    def owner(self) -> str:
        return self.region.owner if self.region else self.fn.name

    def declare(self, d: A.Decl, scopes):
        sym = self.new_sym(d.name, d.dims, "local", self.owner())
        scopes[-1][d.name] = sym
        self.decls[id(d)] = sym
        if self.region is not None:
            self.region.declared.add(sym.uid)
        return sym

    def block(self, stmts, scopes):
        scopes = scopes + [{}]
        for s in stmts:
            self.stmt(s, scopes)

    def ref(self, node, scopes, write=False):
        sym = self.lookup(node.name, scopes)
        self.refs[id(node)] = sym
        if write and self.region is not None and sym.kind != "global" and sym.uid not in self.region.declared:
            self.region.writes.add(sym)
        if isinstance(node, A.Index):
            for i in node.indices:
                self.expr(i, scopes)

    def expr(self, e, scopes):
        if isinstance(e, (A.Var, A.Index)):
            self.ref(e, scopes)
        elif isinstance(e, A.Call):
            for a in e.args:
                self.expr(a, scopes)
        elif isinstance(e, A.Unary):
            self.expr(e.operand, scopes)
        elif isinstance(e, A.Binary):
            self.expr(e.left, scopes)
            self.expr(e.right, scopes)

    def stmt(self, s, scopes):
        if isinstance(s, A.Decl):
            if s.init is not None:
                self.expr(s.init, scopes)
            self.declare(s, scopes)
        elif isinstance(s, A.Assign):
            self.expr(s.value, scopes)
            self.ref(s.target, scopes, write=True)
        elif isinstance(s, A.IncDec):
            self.ref(s.target, scopes, write=True)
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr, scopes)
        elif isinstance(s, A.Return):
            if s.value is not None:
                self.expr(s.value, scopes)
        elif isinstance(s, A.Block):
            self.block(s.stmts, scopes)
        elif isinstance(s, A.If):
            self.expr(s.cond, scopes)
            self.block(s.then.stmts, scopes)
            if s.orelse is not None:
                self.block(s.orelse.stmts, scopes)
        elif isinstance(s, A.While):
            self.expr(s.cond, scopes)
            self.block(s.body.stmts, scopes)
        elif isinstance(s, A.For):
            inner = scopes + [{}]
            if s.init is not None:
                self.stmt(s.init, inner)
            self.expr(s.cond, inner)
            if s.step is not None:
                self.stmt(s.step, inner)
            self.block(s.body.stmts, inner)
        elif isinstance(s, A.Critical):
            self.block(s.body.stmts, scopes)
        elif isinstance(s, A.ParallelFor):
            self.parallel(s, scopes)

    def parallel(self, s: A.ParallelFor, scopes):
        info = next(p for p in self.lowered.functions[self.fn.name].parallels if p.node is s)
        loop = s.loop
        # start value and bound are evaluated by the forking core
        start = loop.init.init if isinstance(loop.init, A.Decl) else loop.init.value
        self.expr(start, scopes)
        self.expr(info.bound, scopes)
        region = Region(info, info.outlined_name)
        self.regions[id(s)] = region
        self.region = region
        inner = scopes + [{}]
        loop_dims = ()
        for name in (info.var,) + tuple(s.private):
            outer = None
            for scope in reversed(scopes):
                if name in scope:
                    outer = scope[name]
                    break
            dims = outer.dims if outer is not None and name != info.var else loop_dims
            sym = self.new_sym(name, dims, "local", region.owner)
            region.declared.add(sym.uid)
            region.private[name] = sym
            inner[-1][name] = sym
        if isinstance(loop.init, A.Decl):
            self.decls[id(loop.init)] = region.private[info.var]
        else:
            self.refs[id(loop.init.target)] = region.private[info.var]
        self.stmt(loop.step, inner)
        # the condition's bound was resolved outside; bind the loop variable only
        self.refs[id(loop.cond.left)] = region.private[info.var]
        self.block(loop.body.stmts, inner)
        self.region = None


@dataclass
class CompiledProgram:
    source: str
    code: object
    layout: MemoryLayout
    function_names: list  # trace function table (program, outlined, pseudo)
    yielding: set
    lock_names: list
    global_init: list  # (py name, initial value or array size, is_array)
    entry: str
    block_ids: list


class _Emitter:
    def __init__(self):
        self.lines: list[str] = []
        self.depth = 0

    def __call__(self, text: str):
        self.lines.append("    " * self.depth + text)


def _calls_in(e):
    if isinstance(e, A.Call):
        yield e
        for a in e.args:
            yield from _calls_in(a)
    elif isinstance(e, A.Index):
        for i in e.indices:
            yield from _calls_in(i)
    elif isinstance(e, A.Unary):
        yield from _calls_in(e.operand)
    elif isinstance(e, A.Binary):
        yield from _calls_in(e.left)
        yield from _calls_in(e.right)


def _stmt_exprs(s):
    if isinstance(s, A.Decl):
        return [s.init] if s.init is not None else []
    if isinstance(s, A.Assign):
        return [s.value, s.target]
    if isinstance(s, A.IncDec):
        return [s.target]
    if isinstance(s, A.ExprStmt):
        return [s.expr]
    if isinstance(s, A.Return):
        return [s.value] if s.value is not None else []
    return []


def _item_calls(items, into_parallel: bool):
    """Names of functions called by *items*; also reports critical sections."""
    called, critical = set(), False
    for item in items:
        tag = item[0]
        exprs = []
        if tag == "stmt":
            exprs = _stmt_exprs(item[1])
        elif tag == "close":
            payload = item[3]
            if item[2] == COND:
                exprs = [payload]
            elif item[2] == RETURN and payload.value is not None:
                exprs = [payload.value]
        elif tag == "if":
            for sub in (item[1], item[2] or []):
                c, k = _item_calls(sub, into_parallel)
                called |= c
                critical |= k
        elif tag == "loop":
            for sub in (item[1], item[2]):
                c, k = _item_calls(sub, into_parallel)
                called |= c
                critical |= k
        elif tag == "scope":
            c, k = _item_calls(item[1], into_parallel)
            called |= c
            critical |= k
        elif tag == "critical":
            critical = True
            c, _ = _item_calls(item[2], into_parallel)
            called |= c
        elif tag == "parallel" and into_parallel:
            c, k = _item_calls(item[3], True)
            called |= c
            critical |= k
        for e in exprs:
            called |= {c.name for c in _calls_in(e) if c.name not in A.BUILTINS}
    return called, critical


class CodeGenerator:
    def __init__(self, lowered: LoweredProgram):
        self.lowered = lowered
        self.program = lowered.program
        self.res = Resolver(lowered).run()
        self.layout = MemoryLayout()
        self.out = _Emitter()
        self.tmp = 0
        self.pending: list[str] = []
        self.lock_names: list[str] = []
        self.function_names = [fn.name for fn in self.program.functions]
        for f in lowered.functions.values():
            self.function_names += [p.outlined_name for p in f.parallels]
        self.function_names += list(PSEUDO_FUNCTIONS)
        self.fids = {name: i for i, name in enumerate(self.function_names)}
        self.yielding = self._yielding()

    # analysis
    def _yielding(self) -> set:
        direct = {}
        for name, f in self.lowered.functions.items():
            direct[name] = _item_calls(f.items, into_parallel=False)
        yielding: set = set()
        changed = True
        while changed:
            changed = False
            for name, (calls, critical) in direct.items():
                if name not in yielding and (critical or calls & yielding):
                    yielding.add(name)
                    changed = True
        return yielding

    def _place(self):
        for sym in self.res.syms:
            if sym.is_view:
                continue
            region = SHARED if sym.shared else PRIVATE
            words = sym.size if sym.is_array else 1
            sym.placement = self.layout.place(f"{sym.owner}:{sym.name}", words, region)

    # helpers
    def t(self) -> str:
        self.tmp += 1
        return f"_t{self.tmp}"

    # Access-stream encoding: a private access is its data-cache line index
    # (precomputed per frame slot); a shared access is ``~address`` with bit 0
    # of the address set for a write (addresses are word aligned).
    def addr(self, sym: Sym) -> str:
        """Access token for a scalar read."""
        if sym.placement.region == SHARED:
            return str(~sym.placement.offset)
        return f"a{sym.uid}"

    def waddr(self, sym: Sym) -> str:
        if sym.placement.region == SHARED:
            return str(~(sym.placement.offset | 1))
        return f"a{sym.uid}"

    def element_token(self, sym: Sym, idx: str, write: bool) -> str:
        """Access token for an array element; views decide at run time."""
        address = f"{self.base(sym)} + ({idx} << 2)"
        flag = " | 1" if write else ""
        t = self.t()
        if sym.is_view:
            self.out(f"{t} = {address}")
            self.out(f"{t} = ({t} >> DS) if {t} >= PRIV else ~({t}{flag})")
        elif sym.placement.region == SHARED:
            self.out(f"{t} = ~({address}{flag})")
        else:
            self.out(f"{t} = ({address}) >> DS")
        return t

    def base(self, sym: Sym) -> str:
        if sym.is_view:
            return f"{sym.py}_b"
        if sym.placement.region == SHARED:
            return str(sym.placement.offset)
        return f"b{sym.uid}"

    def storage(self, sym: Sym) -> str:
        return f"{sym.py}_s" if sym.is_view else sym.py

    # expressions
    def element(self, node: A.Index, line: int) -> tuple[str, str]:
        """Emit index arithmetic and bounds check; return (storage, index temp)."""
        sym = self.res.refs[id(node)]
        strides = sym.strides()
        terms = []
        for idx, stride in zip(node.indices, strides):
            v = self.expr(idx)
            terms.append(v if stride == 1 else f"({v}) * {stride}")
        flat = " + ".join(terms)
        t = self.t()
        if sym.is_view:
            self.out(f"{t} = {sym.py}_o + {flat}")
            self.out(f"if not {sym.py}_o <= {t} < {sym.py}_n: OOB(core, {line}, {sym.name!r}, {t} - {sym.py}_o)")
        else:
            self.out(f"{t} = {flat}")
            self.out(f"if not 0 <= {t} < {sym.size}: OOB(core, {line}, {sym.name!r}, {t})")
        return self.storage(sym), t

    def view(self, node, line: int) -> str:
        """Array argument: return 'storage, offset, base, end'."""
        sym = self.res.refs[id(node)]
        given = node.indices if isinstance(node, A.Index) else ()
        if not given:
            if sym.is_view:
                return f"{sym.py}_s, {sym.py}_o, {sym.py}_b, {sym.py}_n"
            return f"{sym.py}, 0, {self.base(sym)}, {sym.size}"
        strides = sym.strides()
        terms = []
        for idx, stride in zip(given, strides):
            v = self.expr(idx)
            terms.append(f"({v}) * {stride}")
        extent = strides[len(given) - 1]
        t = self.t()
        if sym.is_view:
            self.out(f"{t} = {sym.py}_o + {' + '.join(terms)}")
            self.out(f"if not {sym.py}_o <= {t} <= {sym.py}_n - {extent}: "
                     f"OOB(core, {line}, {sym.name!r}, {t} - {sym.py}_o)")
            return f"{sym.py}_s, {t}, {sym.py}_b, {t} + {extent}"
        self.out(f"{t} = {' + '.join(terms)}")
        self.out(f"if not 0 <= {t} <= {sym.size - extent}: OOB(core, {line}, {sym.name!r}, {t})")
        return f"{sym.py}, {t}, {self.base(sym)}, {t} + {extent}"

    def expr(self, e) -> str:
        if isinstance(e, A.Num):
            return str(e.value)
        if isinstance(e, A.Var):
            sym = self.res.refs[id(e)]
            self.access(self.addr(sym))
            if self.capture:
                t = self.t()
                self.out(f"{t} = {sym.py}")
                return t
            return sym.py
        if isinstance(e, A.Index):
            st, idx = self.element(e, e.line)
            sym = self.res.refs[id(e)]
            self.access(self.element_token(sym, idx, False))
            t = self.t()
            self.out(f"{t} = {st}[{idx}]")
            return t
        if isinstance(e, A.Call):
            return self.call(e)
        if isinstance(e, A.Unary):
            v = self.expr(e.operand)
            return f"(-{v})" if e.op == "-" else f"(not {v})"
        if isinstance(e, A.Binary):
            op = e.op
            if op in ("&&", "||"):
                t = self.t()
                left = self.expr(e.left)
                self.out(f"{t} = bool({left})")
                # accesses of the right operand happen only if it is evaluated
                outer, self.pending = self.pending, []
                mark = len(self.out.lines)
                self.out(f"if {'' if op == '&&' else 'not '}{t}:")
                self.out.depth += 1
                right = self.expr(e.right)
                self.out(f"{t} = bool({right})")
                inner, self.pending = self.pending, outer
                if inner:
                    s = self.t()
                    self.out(f"{s} = ({', '.join(inner)},)")
                    self.out.depth -= 1
                    self.out.lines.insert(mark, "    " * self.out.depth + f"{s} = ()")
                    self.pending.append(f"*{s}")
                else:
                    self.out.depth -= 1
                return t
            left = self.expr(e.left)
            right = self.expr(e.right)
            if op == "/":
                return f"DIV(core, {left}, {right}, {e.line})"
            if op == "%":
                return f"MOD(core, {left}, {right}, {e.line})"
            return f"({left} {op} {right})"
        raise TypeError(type(e).__name__)

    def call(self, e: A.Call) -> str:
        if e.name == "abs":
            return f"abs({self.expr(e.args[0])})"
        if e.name == "print":
            v = self.expr(e.args[0])
            self.out(f"PRINT(core, {v})")
            return "None"
        fn = self.program.function(e.name)
        args = []
        for a, p in zip(e.args, fn.params):
            args.append(self.view(a, e.line) if p.is_array else self.expr(a))
        t = self.t()
        joined = ", ".join(["core"] + args)
        prefix = "yield from " if e.name in self.yielding else ""
        self.out(f"{t} = {prefix}F_{e.name}({joined})")
        return t

    # statements
    def store(self, target, value: str, op: str, line: int):
        sym = self.res.refs[id(target)]
        if isinstance(target, A.Var):
            name = sym.py
            if op != "=":
                self.access(self.addr(sym))
                value = self.combine(name, op, value, line)
            self.out(f"{name} = {value}")
            self.access(self.waddr(sym))
            return
        st, idx = self.element(target, line)
        if op != "=":
            self.access(self.element_token(sym, idx, False))
            value = self.combine(f"{st}[{idx}]", op, value, line)
        self.out(f"{st}[{idx}] = {value}")
        self.access(self.element_token(sym, idx, True))

    @staticmethod
    def combine(current: str, op: str, value: str, line: int) -> str:
        if op == "/=":
            return f"DIV(core, {current}, {value}, {line})"
        if op == "%=":
            return f"MOD(core, {current}, {value}, {line})"
        return f"{current} {op[0]} ({value})"

    def stmt(self, s):
        self.capture = any(True for e in _stmt_exprs(s) for _ in _calls_in(e))
        if isinstance(s, A.Decl):
            sym = self.res.decls[id(s)]
            if sym.is_array:
                self.out(f"{sym.py} = [0] * {sym.size}")
            elif s.init is None:
                self.out(f"{sym.py} = 0")
            else:
                self.out(f"{sym.py} = {self.expr(s.init)}")
                self.access(self.waddr(sym))
        elif isinstance(s, A.Assign):
            value = self.expr(s.value)
            self.store(s.target, value, s.op, s.line)
        elif isinstance(s, A.IncDec):
            self.store(s.target, "1", "+=" if s.op == "++" else "-=", s.line)
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr)
        else:  # pragma: no cover
            raise TypeError(type(s).__name__)

    def open_block(self):
        self.pending = []

    def access(self, token: str):
        self.pending.append(token)

    def tokens(self) -> str:
        """Tuple display of the block's access tokens, in program order."""
        toks, self.pending = self.pending, []
        if not toks:
            return "()"
        return "(" + ", ".join(toks) + ",)"

    def items(self, items, ctx):
        for item in items:
            tag = item[0]
            if tag == "open":
                self.open_block()
            elif tag == "stmt":
                self.stmt(item[1])
            elif tag == "close":
                self.close(item, ctx)
            elif tag == "scope":
                self.items(item[1], ctx)
            elif tag == "if":
                self.out("if _c:")
                self.out.depth += 1
                self.items(item[1], ctx)
                self.out.depth -= 1
                if item[2] is not None:
                    self.out("else:")
                    self.out.depth += 1
                    self.items(item[2], ctx)
                    self.out.depth -= 1
            elif tag == "loop":
                self.out("while True:")
                self.out.depth += 1
                self.items(item[1], ctx)
                self.out("if not _c:")
                self.out("    break")
                self.items(item[2], ctx)
                self.out.depth -= 1
            elif tag == "parallel":
                self.parallel(item, ctx)
            elif tag == "critical":
                lock = self.lock(item[1].name)
                self.out(f"yield {lock}")
                self.items(item[2], ctx)
            else:  # pragma: no cover
                raise ValueError(tag)

    def lock(self, name) -> str:
        key = name or ""
        if key not in self.lock_names:
            self.lock_names.append(key)
        return f"L{self.lock_names.index(key)}"

    def close(self, item, ctx):
        _, bid, term, payload = item
        self.capture = False
        if term == COND:
            self.capture = any(True for _ in _calls_in(payload))
            self.out(f"_c = {self.expr(payload)}")
            self.out(f"ADV(core, R{bid}, {self.tokens()})")
        elif term == RETURN:
            value = None
            if payload.value is not None:
                self.capture = any(True for _ in _calls_in(payload.value))
                value = self.expr(payload.value)
                self.out(f"_r = {value}")
            self.out(f"ADV(core, R{bid}, {self.tokens()})")
            self.out(f"LEAVE(core, {ctx['fid']})")
            self.out("return _r" if value is not None else "return 0")
        elif term == FORK:
            loop = payload.loop
            start = loop.init.init if isinstance(loop.init, A.Decl) else loop.init.value
            self.capture = any(True for _ in _calls_in(start))
            self.out(f"_plo = {self.expr(start)}")
            info = next(p for p in self.lowered.functions[ctx['fn']].parallels if p.node is payload)
            self.capture = any(True for _ in _calls_in(info.bound))
            self.out(f"_phi = {self.expr(info.bound)}")
            self.out(f"ADV(core, R{bid}, {self.tokens()})")
        elif term == UNLOCK:
            self.out(f"ADV(core, R{bid}, {self.tokens()})")
            self.out(f"RELEASE(core, {self.lock(payload.name)})")
        else:  # FALL, JUMP, LOCK
            self.out(f"ADV(core, R{bid}, {self.tokens()})")

    def prologue(self, syms):
        self.out("PB = core.pbase")
        for sym in syms:
            if sym.placement is None or sym.placement.region != PRIVATE:
                continue
            if sym.is_array:
                self.out(f"b{sym.uid} = PB + {sym.placement.offset}")
            else:
                self.out(f"a{sym.uid} = (PB + {sym.placement.offset}) >> DS")

    def global_writes(self, items) -> list[str]:
        names = set()

        def walk(items):
            for item in items:
                tag = item[0]
                if tag == "stmt" and isinstance(item[1], (A.Assign, A.IncDec)):
                    sym = self.res.refs[id(item[1].target)]
                    if sym.kind == "global" and not sym.is_array:
                        names.add(sym.py)
                elif tag in ("scope",):
                    walk(item[1])
                elif tag in ("if", "loop"):
                    walk(item[1])
                    walk(item[2] or [])
                elif tag in ("critical",):
                    walk(item[2])
                elif tag == "parallel":
                    walk(item[3])
        walk(items)
        return sorted(names)

    def parallel(self, item, ctx):
        _, info, header_items, body_items = item
        region = self.res.regions[id(info.node)]
        outlined = info.outlined_name
        name = f"_omp{self.fids[outlined]}"
        gen = _item_calls(body_items, True)
        is_gen = gen[1] or bool(gen[0] & self.yielding)
        self.out(f"def {name}(core, _lo, _hi):")
        self.out.depth += 1
        gw = self.global_writes(body_items)
        if gw:
            self.out(f"global {', '.join(gw)}")
        nonlocal_writes = sorted({s.py for s in region.writes if s.kind != "global" and not s.is_array})
        if nonlocal_writes:
            self.out(f"nonlocal {', '.join(nonlocal_writes)}")
        self.prologue([s for s in self.res.syms if s.owner == outlined])
        self.out(f"ENTER(core, {self.fids[outlined]})")
        loop_var = region.private[info.var]
        self.out(f"{loop_var.py} = _lo")
        for pname in info.node.private:
            sym = region.private[pname]
            self.out(f"{sym.py} = [0] * {sym.size}" if sym.is_array else f"{sym.py} = 0")
        self.out("while True:")
        self.out.depth += 1
        (open_tag, hb), close = header_items
        self.open_block()
        self.access(self.addr(loop_var))
        self.out(f"_c = {loop_var.py} < _hi")
        self.out(f"ADV(core, R{hb}, {self.tokens()})")
        self.out("if not _c:")
        self.out("    break")
        self.items(body_items, ctx)
        self.out.depth -= 1
        self.out(f"LEAVE(core, {self.fids[outlined]})")
        if is_gen:
            self.out("if False:")
            self.out("    yield")
        self.out.depth -= 1
        self.out(f"PAR(core, _plo, _phi, {int(info.inclusive)}, {info.step}, {name}, {is_gen})")

    def function(self, fn: A.FunctionDef):
        params = []
        for sym in self.res.params[fn.name]:
            if sym.is_view:
                params += [f"{sym.py}_s", f"{sym.py}_o", f"{sym.py}_b", f"{sym.py}_n"]
            else:
                params.append(sym.py)
        self.out(f"def F_{fn.name}({', '.join(['core'] + params)}):")
        self.out.depth += 1
        f = self.lowered.functions[fn.name]
        gw = self.global_writes([i for i in f.items if i[0] != "parallel"])
        if gw:
            self.out(f"global {', '.join(gw)}")
        self.prologue([s for s in self.res.syms if s.owner == fn.name])
        fid = self.fids[fn.name]
        self.out(f"ENTER(core, {fid})")
        self.items(f.items, {"fid": fid, "fn": fn.name})
        if fn.name in self.yielding:
            self.out("if False:")
            self.out("    yield")
        self.out.depth -= 1
        self.out("")

    def generate(self) -> CompiledProgram:
        self._place()
        for fn in self.program.functions:
            self.function(fn)
        source = "\n".join(self.out.lines) + "\n"
        code = compile(source, "<workload>", "exec")
        global_init = []
        for d in self.program.globals:
            sym = self.res.globals[d.name]
            if sym.is_array:
                global_init.append((sym.py, sym.size, True))
            else:
                global_init.append((sym.py, const_value(d.init) if d.init is not None else 0, False))
        return CompiledProgram(
            source=source,
            code=code,
            layout=self.layout,
            function_names=self.function_names,
            yielding=set(self.yielding),
            lock_names=list(self.lock_names),
            global_init=global_init,
            entry=self.program.entry,
            block_ids=[b.block_id for b in self.lowered.blocks],
        )


def compile_program(lowered: LoweredProgram) -> CompiledProgram:
    return CodeGenerator(lowered).generate()
