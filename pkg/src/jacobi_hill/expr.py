"""Small real-expression language with exact symbolic derivatives.

Grammar (usual precedence, whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' integer)?
    atom   := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'

``func`` is one of sin, cos, exp, sqrt. Exponents are integer literals,
optionally negative. Evaluation raises :class:`DomainError` instead of
returning inf/nan.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnknownIdentifierError

FUNCTIONS = ("sin", "cos", "exp", "sqrt")
DEFAULT_VARIABLES = ("x", "y")
MAX_ORDER = 12


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Pi, Var, Neg, BinOp, Pow, Call]

ZERO = Num(0.0)
ONE = Num(1.0)


def serialize(node: Node) -> str:
    """Fully parenthesised canonical text; ``parse`` inverts it exactly."""
    if isinstance(node, Num):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Pi):
        return "pi"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{serialize(node.arg)})"
    if isinstance(node, BinOp):
        return f"({serialize(node.left)} {node.op} {serialize(node.right)})"
    if isinstance(node, Pow):
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"({serialize(node.base)} ^ {exp})"
    if isinstance(node, Call):
        return f"{node.func}({serialize(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def free_variables(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, (Num, Pi)):
        return frozenset()
    if isinstance(node, (Neg, Call)):
        return free_variables(node.arg)
    if isinstance(node, Pow):
        return free_variables(node.base)
    return free_variables(node.left) | free_variables(node.right)


def node_count(node: Node) -> int:
    if isinstance(node, (Num, Pi, Var)):
        return 1
    if isinstance(node, (Neg, Call)):
        return 1 + node_count(node.arg)
    if isinstance(node, Pow):
        return 1 + node_count(node.base)
    return 1 + node_count(node.left) + node_count(node.right)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, source: str, variables):
        self.source = source
        self.variables = tuple(variables)
        self.tokens = []
        pos = 0
        while True:
            m = _TOKEN.match(source, pos)
            if m is None:
                rest = source[pos:]
                if rest.strip() == "":
                    break
                bad = pos + (len(rest) - len(rest.lstrip()))
                raise ExprSyntaxError(f"unexpected character {source[bad]!r}", self._byte(bad))
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def _byte(self, char_index):
        return len(self.source[:char_index].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.source))

    def error(self, message):
        _, _, where = self.peek()
        raise ExprSyntaxError(message, self._byte(where))

    def take(self, op=None):
        tok = self.peek()
        if tok[0] is None:
            self.error("unexpected end of input" if op is None else f"expected {op!r}")
        if op is not None and tok[1] != op:
            self.error(f"expected {op!r}")
        self.i += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ExprSyntaxError("empty expression", 0)
        node = self.expr()
        if self.i < len(self.tokens):
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            arg = self.unary()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            base = Pow(base, self.integer_exponent())
            if self.peek()[1] == "^":
                self.error("chained '^' is not supported; parenthesise the base")
        return base

    def integer_exponent(self):
        kind, text, _ = self.peek()
        sign = 1
        parens = 0
        while text == "(":
            self.take()
            parens += 1
            kind, text, _ = self.peek()
        if text == "-":
            self.take()
            sign = -1
            kind, text, _ = self.peek()
        if kind != "num" or not re.fullmatch(r"\d+", text):
            self.error("exponent must be an integer literal")
        self.take()
        for _ in range(parens):
            self.take(")")
        return sign * int(text)

    def atom(self):
        kind, text, _ = self.peek()
        if kind == "num":
            self.take()
            return Num(float(text))
        if kind == "name":
            self.take()
            if text in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(text, arg)
            if text == "pi":
                return Pi()
            if text in self.variables:
                return Var(text)
            self.i -= 1
            _, _, where = self.peek()
            raise UnknownIdentifierError(f"unknown identifier {text!r}", self._byte(where))
        if text == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if kind is None:
            self.error("unexpected end of input")
        self.error(f"unexpected token {text!r}")


# --------------------------------------------------------------------------
# Simplifying constructors (constant folding, identities only)
# --------------------------------------------------------------------------


def _num(node):
    return node.value if isinstance(node, Num) else None


def add(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0.0:
        return b
    if vb == 0.0:
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return BinOp("+", a, b)


def sub(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0.0:
        return a
    if va == 0.0:
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return BinOp("-", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0.0 or vb == 0.0:
        return ZERO
    if va == 1.0:
        return b
    if vb == 1.0:
        return a
    if va == -1.0:
        return neg(b)
    if vb == -1.0:
        return neg(a)
    if vb is not None:
        a, b, va, vb = b, a, vb, va
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    if va is not None and isinstance(b, BinOp) and b.op == "*" and isinstance(b.left, Num):
        return mul(Num(va * b.left.value), b.right)
    return BinOp("*", a, b)


def div(a, b):
    va, vb = _num(a), _num(b)
    if va == 0.0 and vb != 0.0:
        return ZERO
    if vb == 1.0:
        return a
    if va is not None and vb is not None and vb != 0.0:
        return Num(va / vb)
    return BinOp("/", a, b)


def power(base, n):
    if n == 0:
        return ONE
    if n == 1:
        return base
    vb = _num(base)
    if vb is not None and (vb != 0.0 or n > 0):
        return Num(vb**n)
    if isinstance(base, Pow):
        return Pow(base.base, base.exponent * n)
    return Pow(base, n)


# --------------------------------------------------------------------------
# Differentiation
# --------------------------------------------------------------------------


def _diff(node, var, memo):
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    if isinstance(node, (Num, Pi)):
        out = ZERO
    elif isinstance(node, Var):
        out = ONE if node.name == var else ZERO
    elif isinstance(node, Neg):
        out = neg(_diff(node.arg, var, memo))
    elif isinstance(node, BinOp):
        da = _diff(node.left, var, memo)
        db = _diff(node.right, var, memo)
        if node.op == "+":
            out = add(da, db)
        elif node.op == "-":
            out = sub(da, db)
        elif node.op == "*":
            out = add(mul(da, node.right), mul(node.left, db))
        else:
            # (a/b)' = a'/b - a b'/b^2
            out = sub(div(da, node.right), div(mul(node.left, db), power(node.right, 2)))
    elif isinstance(node, Pow):
        db = _diff(node.base, var, memo)
        out = mul(mul(Num(float(node.exponent)), power(node.base, node.exponent - 1)), db)
    elif isinstance(node, Call):
        du = _diff(node.arg, var, memo)
        u = node.arg
        if node.func == "sin":
            out = mul(Call("cos", u), du)
        elif node.func == "cos":
            out = neg(mul(Call("sin", u), du))
        elif node.func == "exp":
            out = mul(node, du)
        else:
            out = div(du, mul(Num(2.0), node))
    else:
        raise TypeError(node)
    memo[key] = (node, out)  # keep node alive so its id stays unique
    return out


# --------------------------------------------------------------------------
# Compilation to Python callables
# --------------------------------------------------------------------------


def _codegen(node, mod):
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Pi):
        return f"{mod}.pi"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_codegen(node.arg, mod)})"
    if isinstance(node, BinOp):
        return f"({_codegen(node.left, mod)} {node.op} {_codegen(node.right, mod)})"
    if isinstance(node, Pow):
        return f"({_codegen(node.base, mod)} ** {node.exponent})"
    if isinstance(node, Call):
        return f"{mod}.{node.func}({_codegen(node.arg, mod)})"
    raise TypeError(node)


def _compile(node, variables, mod):
    src = f"lambda {', '.join(variables) or '_unused=None'}: {_codegen(node, mod)}"
    namespace = {"math": math, "np": np}
    if len(src) > 200_000:
        # very large derivative trees: fall back to a tree walker
        return None
    return eval(compile(src, "<DiffExpr>", "eval"), namespace)


def _walk(node, env, lib):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Pi):
        return math.pi
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_walk(node.arg, env, lib)
    if isinstance(node, BinOp):
        a = _walk(node.left, env, lib)
        b = _walk(node.right, env, lib)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        return a / b
    if isinstance(node, Pow):
        return _walk(node.base, env, lib) ** node.exponent
    return getattr(lib, node.func)(_walk(node.arg, env, lib))


# --------------------------------------------------------------------------
# Public type
# --------------------------------------------------------------------------


class DiffExpr:
    """Parsed expression with cached derivatives and compiled evaluators.

    Instances are immutable; derivative caches are filled lazily but never
    change a value once stored.
    """

    __slots__ = ("source", "ast", "variables", "_scalar", "_vector", "_derivs", "_pos")

    def __init__(self, ast: Node, variables=DEFAULT_VARIABLES, source: str | None = None):
        self.ast = ast
        self.variables = tuple(variables)
        self.source = serialize(ast) if source is None else source
        self._scalar = _compile(ast, self.variables, "math")
        self._vector = _compile(ast, self.variables, "np")
        self._derivs = {}
        free = free_variables(ast)
        name = next(iter(free)) if len(free) == 1 else None
        self._pos = self.variables.index(name) if name in self.variables else (0 if not free else None)

    # structural identity
    def __eq__(self, other):
        return isinstance(other, DiffExpr) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)

    def __repr__(self):
        return f"DiffExpr({self.serialize()!r})"

    @property
    def free(self) -> frozenset:
        return free_variables(self.ast)

    def serialize(self) -> str:
        return serialize(self.ast)

    def _resolve_var(self, var):
        if var is not None:
            if var not in self.variables:
                raise ValueError(f"{var!r} is not a variable of this expression")
            return var
        free = self.free
        if len(free) > 1:
            raise ValueError("expression has several variables; name the one to differentiate")
        return next(iter(free)) if free else self.variables[0]

    def derivative(self, order: int = 1, var: str | None = None) -> "DiffExpr":
        """Exact derivative of the given order with respect to ``var``."""
        if order < 0 or int(order) != order:
            raise ValueError("order must be a nonnegative integer")
        if order > MAX_ORDER:
            raise ValueError(f"order {order} exceeds the supported maximum {MAX_ORDER}")
        if order == 0:
            return self
        var = self._resolve_var(var)
        key = (var, order)
        cached = self._derivs.get(key)
        if cached is None:
            prev = self.derivative(order - 1, var)
            cached = DiffExpr(_diff(prev.ast, var, {}), self.variables)
            self._derivs[key] = cached
        return cached

    def _bind(self, args, kwargs):
        if kwargs:
            if args:
                raise TypeError("pass values either positionally or by name")
            return [kwargs.get(v, 0.0) for v in self.variables]
        if len(args) == len(self.variables):
            return list(args)
        if len(args) == 1:
            free = self.free
            if len(free) > 1:
                raise TypeError(f"expression needs values for {sorted(free)}")
            name = next(iter(free)) if free else self.variables[0]
            return [args[0] if v == name else 0.0 for v in self.variables]
        raise TypeError(f"expected 1 or {len(self.variables)} values, got {len(args)}")

    def eval(self, *args, **kwargs):
        """Evaluate at a point; arrays are evaluated elementwise.

        Raises
        ------
        DomainError
            Division by zero, sqrt of a negative number, or overflow.
        """
        if not kwargs and len(args) == 1 and self._pos is not None and isinstance(args[0], (float, int)):
            values = [0.0] * len(self.variables)
            values[self._pos] = float(args[0])
        else:
            values = self._bind(args, kwargs)
        if any(isinstance(v, np.ndarray) for v in values):
            return self._eval_array(values)
        values = [float(v) for v in values]
        try:
            if self._scalar is not None:
                out = self._scalar(*values)
            else:
                out = _walk(self.ast, dict(zip(self.variables, values)), math)
        except ZeroDivisionError as exc:
            raise DomainError(f"division by zero in {self.serialize()}") from exc
        except ValueError as exc:
            raise DomainError(f"math domain error in {self.serialize()}") from exc
        except OverflowError as exc:
            raise DomainError(f"overflow in {self.serialize()}") from exc
        out = float(out)
        if not math.isfinite(out):
            raise DomainError(f"non-finite value in {self.serialize()}")
        return out

    def _eval_array(self, values):
        arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values])
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            try:
                if self._vector is not None:
                    out = self._vector(*arrays)
                else:
                    out = _walk(self.ast, dict(zip(self.variables, arrays)), np)
            except (FloatingPointError, ZeroDivisionError) as exc:
                raise DomainError(f"domain error ({exc}) in {self.serialize()}") from exc
        out = np.broadcast_to(np.asarray(out, dtype=float), arrays[0].shape).copy()
        if not np.all(np.isfinite(out)):
            raise DomainError(f"non-finite value in {self.serialize()}")
        return out

    __call__ = eval


def parse(source: str, variables=DEFAULT_VARIABLES) -> DiffExpr:
    """Parse expression text.

    Raises
    ------
    ExprSyntaxError
        With the byte offset of the failure.
    UnknownIdentifierError
        For names that are neither functions, ``pi``, nor declared variables.
    """
    if not isinstance(source, str) or source.strip() == "":
        raise ExprSyntaxError("empty expression", 0)
    ast = _Parser(source, variables).parse()
    return DiffExpr(ast, variables, source)


def derivative(e: DiffExpr, order: int = 1, var: str | None = None) -> DiffExpr:
    return e.derivative(order, var)


def evaluate(e: DiffExpr, *args, **kwargs):
    return e.eval(*args, **kwargs)


def constant(value: float, variables=DEFAULT_VARIABLES) -> DiffExpr:
    return DiffExpr(Num(float(value)), variables)


def shifted(e: DiffExpr, amount: float) -> DiffExpr:
    """``e + amount`` as a new expression (used for WLOG normalisations)."""
    return DiffExpr(add(e.ast, Num(float(amount))), e.variables)


def renamed(e: DiffExpr, old: str, new: str) -> DiffExpr:
    """Substitute variable ``old`` by ``new``."""

    def walk(node):
        if isinstance(node, Var):
            return Var(new) if node.name == old else node
        if isinstance(node, (Num, Pi)):
            return node
        if isinstance(node, Neg):
            return Neg(walk(node.arg))
        if isinstance(node, Call):
            return Call(node.func, walk(node.arg))
        if isinstance(node, Pow):
            return Pow(walk(node.base), node.exponent)
        return BinOp(node.op, walk(node.left), walk(node.right))

    return DiffExpr(walk(e.ast), e.variables)
