"""Small math expression language for declaring mechanical systems in files.

Supports numeric literals, declared variables, named parameters, the binary
operators ``+ - * / ^``, unary minus, and the functions ``sin``, ``cos``,
``exp``, ``sqrt``, ``abs``.  Expressions can be evaluated, symbolically
differentiated (except through ``abs``), and unparsed back to source text.

Grammar (recursive descent)::

    expr    := term  (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?          # right associative
    atom    := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

FUNCTIONS = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
             "sqrt": math.sqrt, "abs": abs}
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExprError(ValueError):
    """Parse or evaluation error, with source offset when available."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Name | Neg | Bin | Call

_TOKEN_RE = re.compile(r"""
    (?P<NUMBER>\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<OP>[-+*/^()])
  | (?P<WS>\s+)
""", re.VERBOSE)


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ExprError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "WS":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("END", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, known):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.known = known

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.next()
        if kind != "OP" or text != op:
            raise ExprError(f"expected {op!r}, found {text!r}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "END":
            raise ExprError(f"unexpected trailing input {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "OP" and text in "+-":
                self.next()
                node = Bin(text, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "OP" and text in "*/":
                self.next()
                node = Bin(text, node, self.factor())
            else:
                return node

    def factor(self):
        kind, text, _ = self.peek()
        if kind == "OP" and text == "-":
            self.next()
            return Neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, _ = self.peek()
        if kind == "OP" and text == "^":
            self.next()
            return Bin("^", base, self.factor())
        return base

    def atom(self):
        kind, text, pos = self.next()
        if kind == "NUMBER":
            return Num(float(text))
        if kind == "IDENT":
            nk, nt, _ = self.peek()
            if nk == "OP" and nt == "(":
                if text not in FUNCTIONS:
                    raise ExprError(f"unknown function {text!r}", pos)
                self.next()
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                raise ExprError(f"function {text!r} requires one argument", pos)
            if text not in self.known:
                raise ExprError(f"unknown identifier {text!r}", pos)
            return Name(text)
        if kind == "OP" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "END":
            raise ExprError("unexpected end of input", pos)
        raise ExprError(f"unexpected token {text!r}", pos)


def _num(value):
    # keep literals nonnegative so unparsed text reparses to the same tree
    if value < 0:
        return Neg(Num(-value))
    return Num(value)


def _add(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    if isinstance(a, Num) and a.value == 0:
        return b
    if isinstance(b, Num) and b.value == 0:
        return a
    return Bin("+", a, b)


def _sub(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    if isinstance(b, Num) and b.value == 0:
        return a
    if isinstance(a, Num) and a.value == 0:
        return Neg(b)
    return Bin("-", a, b)


def _mul(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    for x, y in ((a, b), (b, a)):
        if isinstance(x, Num):
            if x.value == 0:
                return Num(0.0)
            if x.value == 1:
                return y
    return Bin("*", a, b)


def _div(a, b):
    if isinstance(a, Num) and a.value == 0:
        return Num(0.0)
    if isinstance(b, Num) and b.value == 1:
        return a
    return Bin("/", a, b)


def _pow(a, b):
    if isinstance(b, Num):
        if b.value == 1:
            return a
        if b.value == 0:
            return Num(1.0)
    return Bin("^", a, b)


def _diff(node, var):
    if isinstance(node, Num):
        return Num(0.0)
    if isinstance(node, Name):
        return Num(1.0 if node.ident == var else 0.0)
    if isinstance(node, Neg):
        d = _diff(node.arg, var)
        return Num(0.0) if isinstance(d, Num) and d.value == 0 else Neg(d)
    if isinstance(node, Bin):
        a, b = node.left, node.right
        da, db = _diff(a, var), _diff(b, var)
        if node.op == "+":
            return _add(da, db)
        if node.op == "-":
            return _sub(da, db)
        if node.op == "*":
            return _add(_mul(da, b), _mul(a, db))
        if node.op == "/":
            return _div(_sub(_mul(da, b), _mul(a, db)), _pow(b, Num(2.0)))
        if node.op == "^":
            if isinstance(b, Num):
                return _mul(_mul(b, _pow(a, _num(b.value - 1))), da)
            if isinstance(a, Num):
                if a.value <= 0:
                    raise ExprError("cannot differentiate c^u for c <= 0")
                return _mul(_mul(node, Num(math.log(a.value))), db)
            raise ExprError("cannot differentiate u^v with both sides varying")
    if isinstance(node, Call):
        da = _diff(node.arg, var)
        if node.func == "sin":
            return _mul(Call("cos", node.arg), da)
        if node.func == "cos":
            return _mul(Neg(Call("sin", node.arg)), da)
        if node.func == "exp":
            return _mul(node, da)
        if node.func == "sqrt":
            return _div(da, _mul(Num(2.0), node))
        raise ExprError(f"cannot differentiate through {node.func!r}")
    raise TypeError(node)


_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "neg": 25, "^": 30}


def _prec(node):
    if isinstance(node, (Num, Name, Call)):
        return 100
    if isinstance(node, Neg):
        return _PREC["neg"]
    return _PREC[node.op]


def _fmt_number(value):
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _unparse(node):
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, Name):
        return node.ident
    if isinstance(node, Call):
        return f"{node.func}({_unparse(node.arg)})"
    if isinstance(node, Neg):
        inner = _unparse(node.arg)
        if _prec(node.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    left, right = _unparse(node.left), _unparse(node.right)
    p = _PREC[node.op]
    if node.op == "^":
        # right associative; unary minus binds looser than '^'
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) < p or (_prec(node.right) == p and node.op in "-/"):
            right = f"({right})"
    return f"{left}{node.op}{right}"


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        return env[node.ident]
    if isinstance(node, Neg):
        return -_eval(node.arg, env)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))
    a = _eval(node.left, env)
    b = _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a ** b


def _free_names(node, out):
    if isinstance(node, Name):
        out.add(node.ident)
    elif isinstance(node, Neg):
        _free_names(node.arg, out)
    elif isinstance(node, Bin):
        _free_names(node.left, out)
        _free_names(node.right, out)
    elif isinstance(node, Call):
        _free_names(node.arg, out)


@dataclass(frozen=True)
class Expr:
    """A parsed expression bound to an ordered variable list and parameters."""

    root: Node
    variables: tuple
    params: Mapping[str, float]

    def evaluate(self, values) -> float:
        """Evaluate at a vector of variable values (ordered as declared)."""
        env = dict(CONSTANTS)
        env.update(self.params)
        for name, v in zip(self.variables, values):
            env[name] = float(v)
        result = _eval(self.root, env)
        return float(result)

    def diff(self, var: str) -> "Expr":
        """Symbolic partial derivative with respect to one variable."""
        if var not in self.variables:
            raise ExprError(f"{var!r} is not a declared variable")
        return Expr(_diff(self.root, var), self.variables, self.params)

    def unparse(self) -> str:
        return _unparse(self.root)

    @property
    def free_variables(self):
        names = set()
        _free_names(self.root, names)
        return names & set(self.variables)

    @property
    def differentiable(self) -> bool:
        """True when every variable derivative exists symbolically."""
        try:
            for v in self.variables:
                self.diff(v)
        except ExprError:
            return False
        return True


def parse_expression(source: str, variables: Sequence[str],
                     params: Mapping[str, float] | None = None) -> Expr:
    """Parse ``source`` over the given variables and named parameters.

    Parameters
    ----------
    source : str
        Expression text, e.g. ``"0.5*k*(q2-pi/2)^2"``.
    variables : sequence of str
        Ordered variable names; identifiers outside this set, the parameter
        map, and the builtin constants (``pi``, ``e``) are parse errors.
    params : mapping, optional
        Named scalar parameters bound into the expression.

    Returns
    -------
    Expr
        Immutable syntax tree; round-trips through :meth:`Expr.unparse`.
    """
    if not source or not source.strip():
        raise ExprError("empty expression")
    params = dict(params or {})
    known = set(variables) | set(params) | set(CONSTANTS)
    root = _Parser(source, known).parse()
    return Expr(root, tuple(variables), params)
