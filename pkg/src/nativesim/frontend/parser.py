"""Recursive-descent parser and semantic checks for ``.nsc`` workload sources.

Grammar summary (C subset)::

    program   := (decl ';' | function)*
    function  := ('int' | 'void') ID '(' params ')' block
    decl      := 'int' declarator (',' declarator)*
    declarator:= ID ('[' NUM ']')* ('=' expr)?
    stmt      := decl ';' | assign ';' | incdec ';' | call ';' | block
               | 'if' '(' expr ')' stmt ('else' stmt)?
               | 'while' '(' expr ')' stmt
               | 'for' '(' (decl | assign)? ';' expr ';' (assign | incdec)? ')' stmt
               | 'return' expr? ';'
               | '#pragma omp parallel for' clause* <for stmt>
               | '#pragma omp critical' ('(' ID ')')? stmt

Clauses are ``shared(a, b)`` and ``private(c)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast as A


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)
        self.message = message
        self.line = line
        self.column = column


KEYWORDS = {"int", "void", "if", "else", "for", "while", "return"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<pragma>\#[^\n]*)
  | (?P<num>\d+)
  | (?P<id>[A-Za-z_]\w*)
  | (?P<op>\+\+|--|&&|\|\||<<|>>|[<>=!+\-*/%]=|[-+*/%<>=!&|^(){}\[\];,])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num', 'id', 'kw', 'op', 'pragma', 'eof'
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = pos + text.rfind("\n") + 1
        elif kind != "ws":
            if kind == "id" and text in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
]

PRECEDENCE = {op: level for level, ops in enumerate(_BINARY_LEVELS) for op in ops}

_PRAGMA_RE = re.compile(r"#\s*pragma\s+omp\s+(?P<body>.*)$")
_CLAUSE_RE = re.compile(r"\s*(?P<kind>shared|private)\s*\(\s*(?P<names>[^)]*)\)\s*")
_IDENT_RE = re.compile(r"[A-Za-z_]\w*$")


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    # token helpers
    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind in ("op", "kw") and tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind in ("op", "kw") and tok.text == text:
            return self.next()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"expected {text!r}, found {found}", tok.line, tok.col)

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "id":
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise ParseError(f"expected identifier, found {found}", tok.line, tok.col)
        return self.next()

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.peek()
        return ParseError(message, tok.line, tok.col)

    # top level
    def parse_program(self) -> A.WorkloadProgram:
        globals_, functions = [], []
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind == "pragma":
                raise self.error("pragma outside of a function body", tok)
            if not (self.at("int") or self.at("void")):
                raise self.error(f"expected declaration or function, found {tok.text!r}")
            if self.peek(1).kind == "id" and self.peek(2).text == "(":
                functions.append(self.parse_function())
            else:
                if self.at("void"):
                    raise self.error("variables must have type int")
                globals_.extend(self.parse_decl())
                self.expect(";")
        return A.WorkloadProgram(tuple(globals_), tuple(functions))

    def parse_function(self) -> A.FunctionDef:
        kind = self.next()
        name = self.expect_ident()
        self.expect("(")
        params = []
        if self.at("void") and self.peek(1).text == ")":
            self.next()
        elif not self.at(")"):
            while True:
                self.expect("int")
                pname = self.expect_ident().text
                dims = []
                while self.accept("["):
                    if self.at("]"):
                        if dims:
                            raise self.error("only the first array dimension may be omitted")
                        dims.append(None)
                    else:
                        dims.append(self.parse_dim())
                    self.expect("]")
                params.append(A.Param(pname, tuple(dims)))
                if not self.accept(","):
                    break
        self.expect(")")
        if not self.at("{"):
            raise self.error("expected function body")
        body = self.parse_block()
        return A.FunctionDef(name.text, kind.text == "int", tuple(params), body, line=kind.line)

    def parse_dim(self) -> int:
        tok = self.peek()
        if tok.kind != "num":
            raise self.error("array dimension must be an integer literal")
        self.next()
        value = int(tok.text)
        if value <= 0:
            raise self.error("array dimension must be positive", tok)
        return value

    def parse_decl(self) -> list[A.Decl]:
        self.expect("int")
        decls = []
        while True:
            name = self.expect_ident()
            dims = []
            while self.accept("["):
                dims.append(self.parse_dim())
                self.expect("]")
            init = None
            if self.accept("="):
                if dims:
                    raise self.error("array initializers are not supported")
                init = self.parse_expr()
            decls.append(A.Decl(name.text, tuple(dims), init, line=name.line))
            if not self.accept(","):
                return decls

    # statements
    def parse_block(self) -> A.Block:
        open_tok = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise ParseError("unbalanced brace: block opened here is never closed",
                                 open_tok.line, open_tok.col)
            stmts.extend(self.parse_stmt())
        self.expect("}")
        return A.Block(tuple(stmts), line=open_tok.line)

    def parse_body(self) -> A.Block:
        if self.at("{"):
            return self.parse_block()
        tok = self.peek()
        return A.Block(tuple(self.parse_stmt()), line=tok.line)

    def parse_stmt(self) -> list:
        tok = self.peek()
        if tok.kind == "pragma":
            return [self.parse_pragma()]
        if tok.kind == "op" and tok.text == "{":
            return [self.parse_block()]
        if tok.kind == "op" and tok.text == "}":
            raise self.error("unbalanced brace: unexpected '}'")
        if tok.kind == "kw":
            if tok.text == "int":
                decls = self.parse_decl()
                self.expect(";")
                return decls
            if tok.text == "if":
                self.next()
                self.expect("(")
                cond = self.parse_expr()
                self.expect(")")
                then = self.parse_body()
                orelse = self.parse_body() if self.accept("else") else None
                return [A.If(cond, then, orelse, line=tok.line)]
            if tok.text == "while":
                self.next()
                self.expect("(")
                cond = self.parse_expr()
                self.expect(")")
                return [A.While(cond, self.parse_body(), line=tok.line)]
            if tok.text == "for":
                return [self.parse_for()]
            if tok.text == "return":
                self.next()
                value = None if self.at(";") else self.parse_expr()
                self.expect(";")
                return [A.Return(value, line=tok.line)]
            raise self.error(f"unexpected keyword {tok.text!r}")
        stmt = self.parse_simple()
        self.expect(";")
        return [stmt]

    def parse_for(self) -> A.For:
        tok = self.expect("for")
        self.expect("(")
        init = None
        if self.at("int"):
            decls = self.parse_decl()
            if len(decls) != 1:
                raise self.error("for-loop initializer declares exactly one variable", tok)
            init = decls[0]
        elif not self.at(";"):
            init = self.parse_simple()
            if not isinstance(init, A.Assign):
                raise self.error("for-loop initializer must be an assignment", tok)
        self.expect(";")
        cond = self.parse_expr()
        self.expect(";")
        step = None
        if not self.at(")"):
            step = self.parse_simple()
            if isinstance(step, A.ExprStmt):
                raise self.error("for-loop step must be an assignment or ++/--", tok)
        self.expect(")")
        return A.For(init, cond, step, self.parse_body(), line=tok.line)

    def parse_simple(self):
        tok = self.peek()
        if self.at("++") or self.at("--"):
            op = self.next().text
            return A.IncDec(self.parse_lvalue(), op, line=tok.line)
        if tok.kind != "id":
            raise self.error(f"expected statement, found {tok.text or 'end of input'!r}")
        if self.peek(1).text == "(":
            call = self.parse_primary()
            return A.ExprStmt(call, line=tok.line)
        target = self.parse_lvalue()
        if self.at("++") or self.at("--"):
            return A.IncDec(target, self.next().text, line=tok.line)
        op_tok = self.peek()
        if op_tok.text in ("=", "+=", "-=", "*=", "/=", "%="):
            self.next()
            return A.Assign(target, op_tok.text, self.parse_expr(), line=tok.line)
        raise self.error(f"expected assignment operator, found {op_tok.text!r}", op_tok)

    def parse_lvalue(self):
        name = self.expect_ident()
        indices = []
        while self.accept("["):
            indices.append(self.parse_expr())
            self.expect("]")
        if indices:
            return A.Index(name.text, tuple(indices), line=name.line)
        return A.Var(name.text, line=name.line)

    def parse_pragma(self):
        tok = self.next()
        m = _PRAGMA_RE.match(tok.text)
        if not m:
            raise ParseError(f"unknown directive {tok.text!r}", tok.line, tok.col)
        body = m.group("body").strip()
        if body.startswith("critical"):
            rest = body[len("critical"):].strip()
            name = None
            if rest:
                cm = re.fullmatch(r"\(\s*([A-Za-z_]\w*)\s*\)", rest)
                if not cm:
                    raise ParseError(f"malformed critical directive {tok.text!r}", tok.line, tok.col)
                name = cm.group(1)
            return A.Critical(self.parse_body(), name, line=tok.line)
        pm = re.match(r"parallel\s+for\b", body)
        if pm:
            shared, private = [], []
            rest = body[pm.end():]
            while rest.strip():
                cm = _CLAUSE_RE.match(rest)
                if not cm:
                    raise ParseError(f"unknown clause in {tok.text!r}", tok.line, tok.col)
                names = [n.strip() for n in cm.group("names").split(",")]
                if not all(_IDENT_RE.match(n) for n in names):
                    raise ParseError(f"malformed variable list in {tok.text!r}", tok.line, tok.col)
                (shared if cm.group("kind") == "shared" else private).extend(names)
                rest = rest[cm.end():]
            if not self.at("for"):
                raise self.error("'#pragma omp parallel for' must precede a for loop")
            loop = self.parse_for()
            return A.ParallelFor(loop, tuple(shared), tuple(private), line=tok.line)
        raise ParseError(f"unknown directive {tok.text!r}", tok.line, tok.col)

    # expressions
    def parse_expr(self, level: int = 0):
        if level == len(_BINARY_LEVELS):
            return self.parse_unary()
        left = self.parse_expr(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.peek().kind == "op" and self.peek().text in ops:
            op = self.next()
            right = self.parse_expr(level + 1)
            left = A.Binary(op.text, left, right, line=op.line)
        return left

    def parse_unary(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text in ("-", "!"):
            self.next()
            return A.Unary(tok.text, self.parse_unary(), line=tok.line)
        return self.parse_primary()

    def parse_primary(self):
        tok = self.next()
        if tok.kind == "num":
            return A.Num(int(tok.text), line=tok.line)
        if tok.kind == "id":
            if self.accept("("):
                args = []
                if not self.at(")"):
                    while True:
                        args.append(self.parse_expr())
                        if not self.accept(","):
                            break
                self.expect(")")
                return A.Call(tok.text, tuple(args), line=tok.line)
            indices = []
            while self.accept("["):
                indices.append(self.parse_expr())
                self.expect("]")
            if indices:
                return A.Index(tok.text, tuple(indices), line=tok.line)
            return A.Var(tok.text, line=tok.line)
        if tok.kind == "op" and tok.text == "(":
            expr = self.parse_expr()
            self.expect(")")
            return expr
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"expected expression, found {found}", tok.line, tok.col)


def parse_syntax(source: str) -> A.WorkloadProgram:
    return Parser(source).parse_program()


def parse(source: str) -> A.WorkloadProgram:
    """Parse and semantically check a workload source."""
    from .check import check_program

    program = parse_syntax(source)
    check_program(program)
    return program


def parse_file(path) -> A.WorkloadProgram:
    with open(path, encoding="ascii") as fh:
        return parse(fh.read())
