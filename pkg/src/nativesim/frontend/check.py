"""Semantic checks run after parsing: name resolution, typing, directive shape."""
from __future__ import annotations

from . import ast as A
from .parser import ParseError


def _err(message: str, line: int = 0) -> ParseError:
    return ParseError(message, line, 1 if line else 0)


def const_value(expr) -> int:
    """Evaluate a literal-only integer expression (used for global initializers)."""
    from ..kernel.values import c_binary, c_unary

    if isinstance(expr, A.Num):
        return expr.value
    if isinstance(expr, A.Unary):
        return c_unary(expr.op, const_value(expr.operand))
    if isinstance(expr, A.Binary):
        return c_binary(expr.op, const_value(expr.left), const_value(expr.right))
    raise _err("global initializer must be a constant expression", getattr(expr, "line", 0))


class _Scope:
    def __init__(self, parent=None):
        self.parent = parent
        self.names: dict[str, tuple] = {}

    def declare(self, name: str, dims: tuple, line: int):
        if name in self.names:
            raise _err(f"redeclaration of {name!r}", line)
        self.names[name] = dims

    def lookup(self, name: str):
        scope = self
        while scope is not None:
            if name in scope.names:
                return scope.names[name]
            scope = scope.parent
        return None


class Checker:
    def __init__(self, program: A.WorkloadProgram):
        self.program = program
        self.functions = {}
        self.calls: dict[str, set] = {}

    def run(self):
        program = self.program
        for fn in program.functions:
            if fn.name in self.functions or fn.name in A.BUILTINS:
                raise _err(f"duplicate function {fn.name!r}", fn.line)
            self.functions[fn.name] = fn
        entries = [fn for fn in program.functions if fn.name == program.entry]
        if len(entries) != 1:
            raise _err(f"program must define exactly one {program.entry!r} function")
        if entries[0].params:
            raise _err(f"{program.entry!r} takes no parameters", entries[0].line)
        globals_scope = _Scope()
        for decl in program.globals:
            if decl.name in self.functions:
                raise _err(f"{decl.name!r} declared as both variable and function", decl.line)
            globals_scope.declare(decl.name, decl.dims, decl.line)
            if decl.init is not None:
                const_value(decl.init)
        for fn in program.functions:
            self.current = fn
            self.calls[fn.name] = set()
            scope = _Scope(globals_scope)
            for p in fn.params:
                scope.declare(p.name, p.dims, fn.line)
            self.block(fn.body, scope, in_parallel=False, in_critical=False)
        self.check_recursion()

    def check_recursion(self):
        state: dict[str, int] = {}

        def visit(name, path):
            state[name] = 1
            for callee in sorted(self.calls.get(name, ())):
                if state.get(callee) == 1:
                    cycle = " -> ".join(path + [callee])
                    raise _err(f"recursion is not supported ({cycle})", self.functions[callee].line)
                if callee not in state:
                    visit(callee, path + [callee])
            state[name] = 2

        for fn in self.program.functions:
            if fn.name not in state:
                visit(fn.name, [fn.name])

    # statements
    def block(self, block: A.Block, scope: _Scope, **ctx):
        inner = _Scope(scope)
        for stmt in block.stmts:
            self.stmt(stmt, inner, **ctx)

    def stmt(self, s, scope: _Scope, in_parallel: bool, in_critical: bool):
        ctx = dict(in_parallel=in_parallel, in_critical=in_critical)
        if isinstance(s, A.Decl):
            if s.init is not None:
                self.scalar(s.init, scope)
            scope.declare(s.name, s.dims, s.line)
        elif isinstance(s, A.Assign):
            self.lvalue(s.target, scope)
            self.scalar(s.value, scope)
        elif isinstance(s, A.IncDec):
            self.lvalue(s.target, scope)
        elif isinstance(s, A.ExprStmt):
            self.call(s.expr, scope, need_value=False)
        elif isinstance(s, A.Block):
            self.block(s, scope, **ctx)
        elif isinstance(s, A.If):
            self.scalar(s.cond, scope)
            self.block(s.then, scope, **ctx)
            if s.orelse is not None:
                self.block(s.orelse, scope, **ctx)
        elif isinstance(s, A.While):
            self.scalar(s.cond, scope)
            self.block(s.body, scope, **ctx)
        elif isinstance(s, A.For):
            self.for_loop(s, scope, **ctx)
        elif isinstance(s, A.Return):
            if in_parallel or in_critical:
                raise _err("return is not allowed inside a parallel or critical region", s.line)
            if self.current.returns_value and s.value is None:
                raise _err(f"function {self.current.name!r} must return a value", s.line)
            if not self.current.returns_value and s.value is not None:
                raise _err(f"void function {self.current.name!r} returns a value", s.line)
            if s.value is not None:
                self.scalar(s.value, scope)
        elif isinstance(s, A.ParallelFor):
            if in_parallel:
                raise _err("nested parallel regions are not supported", s.line)
            for name in s.shared + s.private:
                dims = scope.lookup(name)
                if dims is None:
                    raise _err(f"undeclared identifier {name!r} in data-sharing clause", s.line)
            clash = set(s.shared) & set(s.private)
            if clash:
                raise _err(f"variable {sorted(clash)[0]!r} is both shared and private", s.line)
            canonical_loop(s.loop)
            self.for_loop(s.loop, scope, in_parallel=True, in_critical=in_critical)
        elif isinstance(s, A.Critical):
            self.block(s.body, scope, in_parallel=in_parallel, in_critical=True)
        else:  # pragma: no cover - parser produces no other nodes
            raise _err(f"unsupported statement {type(s).__name__}")

    def for_loop(self, s: A.For, scope: _Scope, **ctx):
        inner = _Scope(scope)
        if s.init is not None:
            self.stmt(s.init, inner, **ctx)
        self.scalar(s.cond, inner)
        if s.step is not None:
            self.stmt(s.step, inner, **ctx)
        self.block(s.body, inner, **ctx)

    # expressions
    def lookup(self, name: str, scope: _Scope, line: int):
        dims = scope.lookup(name)
        if dims is None:
            raise _err(f"undeclared identifier {name!r}", line)
        return dims

    def lvalue(self, target, scope):
        dims = self.lookup(target.name, scope, target.line)
        given = len(target.indices) if isinstance(target, A.Index) else 0
        if given != len(dims):
            raise _err(f"assignment to {target.name!r} needs {len(dims)} subscript(s)", target.line)
        if isinstance(target, A.Index):
            for idx in target.indices:
                self.scalar(idx, scope)

    def scalar(self, e, scope):
        if isinstance(e, A.Num):
            return
        if isinstance(e, (A.Var, A.Index)):
            dims = self.lookup(e.name, scope, e.line)
            given = len(e.indices) if isinstance(e, A.Index) else 0
            if given > len(dims):
                raise _err(f"too many subscripts for {e.name!r}", e.line)
            if given < len(dims):
                raise _err(f"array {e.name!r} used as a scalar", e.line)
            for idx in getattr(e, "indices", ()):
                self.scalar(idx, scope)
        elif isinstance(e, A.Call):
            self.call(e, scope, need_value=True)
        elif isinstance(e, A.Unary):
            self.scalar(e.operand, scope)
        elif isinstance(e, A.Binary):
            self.scalar(e.left, scope)
            self.scalar(e.right, scope)

    def call(self, e: A.Call, scope, need_value: bool):
        if e.name in A.BUILTINS:
            if len(e.args) != A.BUILTINS[e.name]:
                raise _err(f"{e.name}() takes {A.BUILTINS[e.name]} argument(s)", e.line)
            if need_value and e.name == "print":
                raise _err("print() has no value", e.line)
            for arg in e.args:
                self.scalar(arg, scope)
            return
        fn = self.functions.get(e.name)
        if fn is None:
            raise _err(f"call to undefined function {e.name!r}", e.line)
        self.calls[self.current.name].add(e.name)
        if need_value and not fn.returns_value:
            raise _err(f"void function {e.name!r} used as a value", e.line)
        if len(e.args) != len(fn.params):
            raise _err(f"{e.name}() takes {len(fn.params)} argument(s), got {len(e.args)}", e.line)
        for arg, param in zip(e.args, fn.params):
            if not param.is_array:
                self.scalar(arg, scope)
                continue
            if not isinstance(arg, (A.Var, A.Index)):
                raise _err(f"argument for array parameter {param.name!r} must be an array", e.line)
            dims = self.lookup(arg.name, scope, arg.line)
            given = len(arg.indices) if isinstance(arg, A.Index) else 0
            view = dims[given:]
            if not view:
                raise _err(f"argument for array parameter {param.name!r} must be an array", e.line)
            if len(view) != len(param.dims) or tuple(view[1:]) != tuple(param.dims[1:]):
                raise _err(f"array shape mismatch for parameter {param.name!r} of {e.name}()", e.line)
            if param.dims[0] is not None and view[0] < param.dims[0]:
                raise _err(f"array too small for parameter {param.name!r} of {e.name}()", e.line)
            for idx in getattr(arg, "indices", ()):
                self.scalar(idx, scope)


def canonical_loop(loop: A.For):
    """Return (var, bound_expr, inclusive, step) for a loop in OpenMP canonical form."""
    init = loop.init
    if isinstance(init, A.Decl) and not init.dims and init.init is not None:
        var = init.name
    elif isinstance(init, A.Assign) and init.op == "=" and isinstance(init.target, A.Var):
        var = init.target.name
    else:
        raise _err("parallel loop needs an initializer 'var = start'", loop.line)
    cond = loop.cond
    if not (isinstance(cond, A.Binary) and cond.op in ("<", "<=")
            and isinstance(cond.left, A.Var) and cond.left.name == var):
        raise _err(f"parallel loop condition must be '{var} < bound' or '{var} <= bound'", loop.line)
    step = loop.step
    if isinstance(step, A.IncDec) and step.op == "++" and step.target == A.Var(var):
        inc = 1
    elif (isinstance(step, A.Assign) and step.op == "+=" and step.target == A.Var(var)
          and isinstance(step.value, A.Num) and step.value.value > 0):
        inc = step.value.value
    elif (isinstance(step, A.Assign) and step.op == "=" and step.target == A.Var(var)
          and isinstance(step.value, A.Binary) and step.value.op == "+"
          and step.value.left == A.Var(var) and isinstance(step.value.right, A.Num)
          and step.value.right.value > 0):
        inc = step.value.right.value
    else:
        raise _err(f"parallel loop step must increment {var!r} by a positive constant", loop.line)
    return var, cond.right, cond.op == "<=", inc


def check_program(program: A.WorkloadProgram) -> None:
    Checker(program).run()
