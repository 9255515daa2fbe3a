"""Tensor-program DSL: parsing, shape checking and linearization.

The DSL is line oriented::

    # comment
    param W1 : R[1][2] = W1      # flash-resident; value read from weights[key]
    input X  : R[2][1]           # RAM-resident model input (optional)
    let   t  = relu(W1 * X)      # nested expressions are flattened
    return t + B1

Expressions use ``+``/``-`` (elementwise), ``*`` (matmul, or scalar
multiplication when one side is a number literal), ``<*>`` (Hadamard
product) and the functions ``sigmoid``, ``tanh``, ``relu``, ``exp``,
``argmax`` and ``reshape(x, rows, cols)``. Every operator application
becomes its own binding; anonymous intermediates are named ``t1``, ``t2``,
... skipping names the source already uses.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

OPS = ("matmul", "add", "sub", "hadamard", "smul", "sigmoid", "tanh", "relu", "exp", "argmax", "reshape")
UNARY = ("sigmoid", "tanh", "relu", "exp", "argmax")
ELEMENTWISE = ("add", "sub", "hadamard")

Shape = tuple[int, ...]


class DSLError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message, self.line, self.col = message, line, col
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


class ShapeError(DSLError):
    pass


@dataclass(frozen=True)
class TensorDecl:
    name: str
    shape: Shape
    key: Optional[str] = None  # weights key, params only


@dataclass(frozen=True)
class Binding:
    name: str
    op: str
    srcs: tuple[str, ...]
    const: Optional[float] = None  # scalar for smul
    shape: Optional[Shape] = None  # target shape for reshape


@dataclass(frozen=True)
class Program:
    params: tuple[TensorDecl, ...]
    input: Optional[TensorDecl]
    body: tuple[Binding, ...]
    output: str
    shapes: dict[str, Shape] = field(default_factory=dict, compare=False, hash=False)

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    @property
    def tensor_names(self) -> tuple[str, ...]:
        """Every tensor in declaration order: params, input, then bindings."""
        names = list(self.param_names)
        if self.input is not None:
            names.append(self.input.name)
        names.extend(b.name for b in self.body)
        return tuple(names)

    @property
    def ram_tensors(self) -> tuple[str, ...]:
        names = [] if self.input is None else [self.input.name]
        return tuple(names + [b.name for b in self.body])

    def cardinality(self, name: str) -> int:
        return math.prod(self.shapes[name])

    @property
    def is_classifier(self) -> bool:
        return any(b.name == self.output and b.op == "argmax" for b in self.body)

    def format(self) -> str:
        """Print back to DSL text that parses to an identical program."""
        lines = []
        for p in self.params:
            suffix = "" if p.key == p.name else f" = {p.key}"
            lines.append(f"param {p.name} : {_fmt_shape(p.shape)}{suffix}")
        if self.input is not None:
            lines.append(f"input {self.input.name} : {_fmt_shape(self.input.shape)}")
        for b in self.body:
            lines.append(f"let {b.name} = {_fmt_binding(b)}")
        lines.append(f"return {self.output}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Instruction:
    index: int
    op: str
    dest: Optional[str]
    srcs: tuple[str, ...]


def _fmt_shape(shape: Shape) -> str:
    return "R" + "".join(f"[{d}]" for d in shape)


def _fmt_binding(b: Binding) -> str:
    if b.op == "matmul":
        return f"{b.srcs[0]} * {b.srcs[1]}"
    if b.op == "add":
        return f"{b.srcs[0]} + {b.srcs[1]}"
    if b.op == "sub":
        return f"{b.srcs[0]} - {b.srcs[1]}"
    if b.op == "hadamard":
        return f"{b.srcs[0]} <*> {b.srcs[1]}"
    if b.op == "smul":
        return f"{b.const!r} * {b.srcs[0]}"
    if b.op == "reshape":
        return f"reshape({b.srcs[0]}, {', '.join(map(str, b.shape))})"
    return f"{b.op}({b.srcs[0]})"


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\d*\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op><\*>|[-+*(),]))"
)
_DECL = re.compile(
    r"^(?P<kind>param|input)\s+(?P<name>[A-Za-z_]\w*)\s*:\s*R(?P<dims>(?:\[\s*\d+\s*\])+)"
    r"\s*(?:=\s*(?P<key>[A-Za-z_][\w.\-/]*))?\s*$"
)
_LET = re.compile(r"^let\s+(?P<name>[A-Za-z_]\w*)\s*=\s*(?P<expr>.+)$")
_RETURN = re.compile(r"^return\s+(?P<expr>.+)$")
_NAME = re.compile(r"let\s+([A-Za-z_]\w*)|(?:param|input)\s+([A-Za-z_]\w*)")


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(text: str, line: int, col0: int) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise DSLError(f"unexpected character {text[pos:].lstrip()[:1]!r}", line, col0 + pos + 1)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), col0 + m.start(kind) + 1))
        pos = m.end()
    return toks


class _Builder:
    def __init__(self, reserved: set[str]):
        self.reserved = reserved
        self.defined: dict[str, tuple[int, int]] = {}
        self.body: list[Binding] = []
        self._counter = 0

    def fresh(self) -> str:
        while True:
            self._counter += 1
            name = f"t{self._counter}"
            if name not in self.reserved and name not in self.defined:
                self.reserved.add(name)
                return name

    def define(self, name: str, line: int, col: int) -> None:
        if name in self.defined:
            first = self.defined[name][0]
            raise DSLError(f"duplicate binding {name!r} (first bound on line {first})", line, col)
        self.defined[name] = (line, col)


class _ExprParser:
    """Recursive descent over one expression; emits flattened bindings."""

    def __init__(self, toks: list[_Tok], builder: _Builder, line: int):
        self.toks, self.i, self.b, self.line = toks, 0, builder, line

    def peek(self) -> Optional[_Tok]:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, text: Optional[str] = None) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise DSLError("unexpected end of expression", self.line, 0)
        if text is not None and tok.text != text:
            raise DSLError(f"expected {text!r}, found {tok.text!r}", self.line, tok.col)
        self.i += 1
        return tok

    def parse(self, target: Optional[str]):
        node = self.expr()
        tok = self.peek()
        if tok is not None:
            raise DSLError(f"unexpected {tok.text!r}", self.line, tok.col)
        return self.emit(node, target)

    # Nodes: ("name", str, col) | ("num", float, col) | (op, children, extra, col)
    def expr(self):
        node = self.term()
        while (tok := self.peek()) is not None and tok.text in "+-" and tok.kind == "op":
            self.take()
            node = ("add" if tok.text == "+" else "sub", [node, self.term()], None, tok.col)
        return node

    def term(self):
        node = self.factor()
        while (tok := self.peek()) is not None and tok.text in ("*", "<*>"):
            self.take()
            rhs = self.factor()
            if tok.text == "<*>":
                node = ("hadamard", [node, rhs], None, tok.col)
            elif node[0] == "num" and rhs[0] == "num":
                node = ("num", node[1] * rhs[1], node[2])
            elif node[0] == "num":
                node = ("smul", [rhs], node[1], tok.col)
            elif rhs[0] == "num":
                node = ("smul", [node], rhs[1], tok.col)
            else:
                node = ("matmul", [node, rhs], None, tok.col)
        return node

    def factor(self):
        tok = self.take()
        if tok.kind == "num":
            return ("num", float(tok.text), tok.col)
        if tok.text == "-" and (nxt := self.peek()) is not None and nxt.kind == "num":
            self.take()
            return ("num", -float(nxt.text), tok.col)
        if tok.text == "(":
            node = self.expr()
            self.take(")")
            return node
        if tok.kind == "name":
            nxt = self.peek()
            if nxt is not None and nxt.text == "(":
                return self.call(tok)
            return ("name", tok.text, tok.col)
        raise DSLError(f"unexpected {tok.text!r}", self.line, tok.col)

    def call(self, fn: _Tok):
        self.take("(")
        if fn.text in UNARY:
            arg = self.expr()
            self.take(")")
            return (fn.text, [arg], None, fn.col)
        if fn.text == "reshape":
            arg = self.expr()
            dims = []
            while self.peek() is not None and self.peek().text == ",":
                self.take()
                d = self.take()
                if d.kind != "num" or not d.text.isdigit() or int(d.text) < 1:
                    raise DSLError("reshape dimensions must be positive integers", self.line, d.col)
                dims.append(int(d.text))
            self.take(")")
            if not dims:
                raise DSLError("reshape needs at least one dimension", self.line, fn.col)
            return ("reshape", [arg], tuple(dims), fn.col)
        raise DSLError(f"unknown function {fn.text!r}", self.line, fn.col)

    def emit(self, node, target: Optional[str]) -> str:
        kind = node[0]
        if kind == "num":
            raise DSLError("a bare number is not a tensor", self.line, node[2])
        if kind == "name":
            name = node[1]
            if name not in self.b.defined:
                raise DSLError(f"undefined name {name!r}", self.line, node[2])
            if target is not None:
                raise DSLError(f"binding {target!r} must apply an operator", self.line, node[2])
            return name
        op, children, extra, col = node
        srcs = tuple(self.emit(c, None) for c in children)
        dest = target if target is not None else self.b.fresh()
        if target is not None:
            self.b.define(target, self.line, col)
        else:
            self.b.defined[dest] = (self.line, col)
        const = extra if op == "smul" else None
        shape = extra if op == "reshape" else None
        self.b.body.append(Binding(dest, op, srcs, const, shape))
        return dest


def parse(text: str) -> Program:
    """Parse DSL source into a shape-checked :class:`Program`."""
    lines = text.splitlines()
    reserved = set()
    for raw in lines:
        m = _NAME.match(raw.split("#", 1)[0].strip())
        if m:
            reserved.add(m.group(1) or m.group(2))

    builder = _Builder(reserved)
    params: list[TensorDecl] = []
    inp: Optional[TensorDecl] = None
    output: Optional[str] = None
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.split("#", 1)[0]
        line = stripped.strip()
        if not line:
            continue
        col0 = len(stripped) - len(stripped.lstrip())
        if output is not None:
            raise DSLError("statement after return", lineno, col0 + 1)
        if line.startswith(("param", "input")) and (m := _DECL.match(line)):
            name = m.group("name")
            builder.define(name, lineno, col0 + m.start("name") + 1)
            shape = tuple(int(d) for d in re.findall(r"\d+", m.group("dims")))
            if any(d < 1 for d in shape) or len(shape) > 2:
                raise DSLError(f"bad shape for {name!r}", lineno, col0 + 1)
            if m.group("kind") == "param":
                params.append(TensorDecl(name, shape, m.group("key") or name))
            else:
                if inp is not None:
                    raise DSLError("only one input is supported", lineno, col0 + 1)
                if m.group("key"):
                    raise DSLError("input declarations take no weights key", lineno, col0 + 1)
                inp = TensorDecl(name, shape)
        elif m := _LET.match(line):
            expr_col = col0 + m.start("expr")
            toks = _tokenize(m.group("expr"), lineno, expr_col)
            _ExprParser(toks, builder, lineno).parse(m.group("name"))
        elif m := _RETURN.match(line):
            expr_col = col0 + m.start("expr")
            toks = _tokenize(m.group("expr"), lineno, expr_col)
            parser = _ExprParser(toks, builder, lineno)
            node = parser.expr()
            if (tok := parser.peek()) is not None:
                raise DSLError(f"unexpected {tok.text!r}", lineno, tok.col)
            output = parser.emit(node, None)
        else:
            raise DSLError(f"cannot parse statement {line.split()[0]!r}", lineno, col0 + 1)
    if output is None:
        raise DSLError("no output: program has no return statement")

    prog = Program(tuple(params), inp, tuple(builder.body), output)
    prog.shapes.update(check_shapes(prog))
    return prog


def check_shapes(p: Program) -> dict[str, Shape]:
    """Infer every tensor's shape; raise :class:`ShapeError` on a mismatch."""
    shapes: dict[str, Shape] = {d.name: d.shape for d in p.params}
    if p.input is not None:
        shapes[p.input.name] = p.input.shape
    for b in p.body:
        ins = [shapes[s] for s in b.srcs]
        if b.op == "matmul":
            a, c = ins
            if len(a) != 2 or len(c) != 2 or a[1] != c[0]:
                raise ShapeError(
                    f"matmul {b.srcs[0]}{_fmt_shape(a)[1:]} x {b.srcs[1]}{_fmt_shape(c)[1:]}: inner dimensions differ"
                )
            out = (a[0], c[1])
        elif b.op in ELEMENTWISE:
            a, c = ins
            if a != c:
                raise ShapeError(
                    f"{b.op} of {b.srcs[0]}{_fmt_shape(a)[1:]} and {b.srcs[1]}{_fmt_shape(c)[1:]}: shapes differ"
                )
            out = a
        elif b.op == "argmax":
            out = (1,)
        elif b.op == "reshape":
            if math.prod(b.shape) != math.prod(ins[0]):
                raise ShapeError(f"cannot reshape {b.srcs[0]}{_fmt_shape(ins[0])[1:]} to {_fmt_shape(b.shape)[1:]}")
            out = b.shape
        else:
            out = ins[0]
        shapes[b.name] = out
    return shapes


def linearize(p: Program) -> list[Instruction]:
    """One instruction per binding in source order, then the return."""
    instrs = [Instruction(i, b.op, b.name, b.srcs) for i, b in enumerate(p.body)]
    instrs.append(Instruction(len(instrs), "return", None, (p.output,)))
    return instrs


def load_program(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())
