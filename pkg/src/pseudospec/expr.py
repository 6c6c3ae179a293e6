"""A small expression language for coefficients and exact solutions.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | NAME | NAME '(' args ')' | '(' expr ')'

Variables are ``x``, ``t`` and ``v``; ``pi`` is the only named constant.
Evaluation is vectorized over numpy arrays.
"""
from __future__ import annotations

import math
import operator
import re
from dataclasses import dataclass

import numpy as np

VARIABLES = ("x", "t", "v")
FUNCTIONS = {
    "sin": 1, "cos": 1, "tan": 1, "exp": 1, "log": 1,
    "sqrt": 1, "abs": 1, "tanh": 1, "pow": 2,
}


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    pass


class EvalDomainError(ExprError, ArithmeticError):
    """Evaluation left the domain of a function (log or sqrt of a negative, x/0)."""


class UnsupportedDerivativeError(ExprError):
    pass


# ---------------------------------------------------------------------------
# tree


class Expr:
    __slots__ = ()

    def __str__(self):
        return to_string(self)

    def __call__(self, x=0.0, t=0.0, v=0.0):
        return evaluate(self, x, t, v)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Const(Expr):
    name: str  # only "pi"


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    args: tuple


ZERO = Num(0.0)
ONE = Num(1.0)


# ---------------------------------------------------------------------------
# parser

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(src):
    # Offsets are byte offsets into the UTF-8 encoding.
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", len(src[:pos].encode()))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), len(src[:pos].encode())))
        pos = m.end()
    tokens.append(("end", "", len(src.encode())))
    return tokens


MAX_NESTING = 100


class _Parser:
    def __init__(self, src):
        self.tokens = _tokenize(src)
        self.i = 0
        self.depth = 0

    def nest(self, pos):
        # Each level costs several Python frames; refuse before the interpreter does.
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ParseError(f"nesting deeper than {MAX_NESTING}", pos)

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, pos = self.peek()
        if val != text or kind == "end":
            got = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {text!r}, got {got}", pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"expected operator or end of input, got {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.nest(self.advance()[2])
            arg = self.unary()
            self.depth -= 1
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.nest(self.advance()[2])
            node = Bin("^", base, self.unary())
            self.depth -= 1
            return node
        return base

    def primary(self):
        kind, val, pos = self.peek()
        if kind == "num":
            self.advance()
            value = float(val)
            if not math.isfinite(value):
                raise ParseError(f"numeric literal {val!r} out of range", pos)
            return Num(value)
        if kind == "name":
            self.advance()
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if val not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", pos)
                self.nest(self.advance()[2])
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                self.depth -= 1
                if len(args) != FUNCTIONS[val]:
                    raise ParseError(f"{val} takes {FUNCTIONS[val]} argument(s), got {len(args)}", pos)
                return Call(val, tuple(args))
            if val in VARIABLES:
                return Var(val)
            if val == "pi":
                return Const("pi")
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument list", pos)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            self.nest(pos)
            self.advance()
            node = self.expr()
            self.expect(")")
            self.depth -= 1
            return node
        got = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"expected number, name or '(', got {got}", pos)


def parse(source) -> Expr:
    """Parse an expression string; raises ParseError carrying a byte offset."""
    if isinstance(source, Expr):
        return source
    if isinstance(source, (int, float)):
        return Num(float(source))
    return _Parser(str(source)).parse()


# ---------------------------------------------------------------------------
# printing


def to_string(e: Expr) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_string(e.arg)})"
    if isinstance(e, Bin):
        return f"({to_string(e.left)} {e.op} {to_string(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_string(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# evaluation


def _domain_check(result, node, *operands):
    res = np.asarray(result)
    if np.all(np.isfinite(res)):
        return result
    ok_in = np.ones(res.shape, dtype=bool)
    for op in operands:
        ok_in &= np.broadcast_to(np.isfinite(np.asarray(op)), res.shape)
    bad = ~np.isfinite(res) & ok_in
    if np.any(bad):
        raise EvalDomainError(f"domain error in {to_string(node)}")
    return result


def _ev(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Const):
        return math.pi
    if isinstance(e, Neg):
        return -_ev(e.arg, env)
    if isinstance(e, Bin):
        a = _ev(e.left, env)
        b = _ev(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if np.any(np.asarray(b) == 0):
                raise EvalDomainError(f"division by zero in {to_string(e)}")
            return a / b
        return _power(a, b, e)
    if isinstance(e, Call):
        args = [_ev(a, env) for a in e.args]
        if e.name == "pow":
            return _power(args[0], args[1], e)
        u = args[0]
        if e.name in ("log", "sqrt"):
            bad = np.asarray(u) < 0 if e.name == "sqrt" else np.asarray(u) <= 0
            if np.any(bad):
                raise EvalDomainError(f"{e.name} of a non-positive value in {to_string(e)}")
        fn = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
              "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh}[e.name]
        return _domain_check(fn(u), e, u)
    raise TypeError(f"not an expression: {e!r}")


def _power(a, b, node):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    integer_exp = np.all(b_arr == np.round(b_arr))
    if not integer_exp and np.any(a_arr < 0):
        raise EvalDomainError(f"non-integer power of a negative value in {to_string(node)}")
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise EvalDomainError(f"zero to a negative power in {to_string(node)}")
    return _domain_check(np.power(a_arr, b_arr), node, a, b)


_UNARY = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
          "sqrt": np.sqrt, "abs": np.abs, "tanh": np.tanh}
_BINARY = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv,
           "^": np.power}


def _build(e):
    """Nested closures evaluating ``e``; no domain checks (see evaluate)."""
    if isinstance(e, Num):
        val = e.value
        return lambda env: val
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Const):
        return lambda env: math.pi
    if isinstance(e, Neg):
        f = _fast(e.arg)
        return lambda env: -f(env)
    if isinstance(e, Bin):
        op = _BINARY[e.op]
        fa, fb = _fast(e.left), _fast(e.right)
        if e.op == "^":
            return lambda env: np.power(np.asarray(fa(env), dtype=float), fb(env))
        return lambda env: op(fa(env), fb(env))
    if isinstance(e, Call):
        if e.name == "pow":
            fa, fb = _fast(e.args[0]), _fast(e.args[1])
            return lambda env: np.power(np.asarray(fa(env), dtype=float), fb(env))
        fn = _UNARY[e.name]
        fa = _fast(e.args[0])
        return lambda env: fn(fa(env))
    raise TypeError(f"not an expression: {e!r}")


def _fast(e):
    fn = e.__dict__.get("_fn")
    if fn is None:
        fn = _build(e)
        object.__setattr__(e, "_fn", fn)
    return fn


def evaluate(e: Expr, x=0.0, t=0.0, v=0.0):
    """Evaluate at (x, t, v); scalars give a float, arrays broadcast.

    The unchecked fast path runs under numpy's raising error state; any
    floating-point fault or non-finite result is re-evaluated with per-node
    checks so the offending sub-expression can be reported.
    """
    env = {"x": x, "t": t, "v": v}
    try:
        with np.errstate(all="raise", under="ignore"):
            out = _fast(e)(env)
        ok = np.all(np.isfinite(out))
    except (FloatingPointError, ZeroDivisionError, OverflowError):
        ok = False
    if not ok:
        with np.errstate(all="ignore"):
            out = _ev(e, env)
    if np.ndim(out) == 0:
        return float(out)
    return np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# construction with light simplification


def _is(e, value):
    return isinstance(e, Num) and e.value == value


def _fold(op, a, b):
    with np.errstate(all="ignore"):
        r = {"+": a + b, "-": a - b, "*": a * b}.get(op)
        if op == "/" and b != 0:
            r = a / b
        if op == "^" and not (a < 0 and b != round(b)) and not (a == 0 and b < 0):
            r = float(np.power(a, b))
    if r is None or not math.isfinite(r):
        return None
    return Num(float(r))


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("+", a.value, b.value) or Bin("+", a, b)
    return Bin("+", a, b)


def sub(a, b):
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("-", a.value, b.value) or Bin("-", a, b)
    return Bin("-", a, b)


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("*", a.value, b.value) or Bin("*", a, b)
    return Bin("*", a, b)


def div(a, b):
    if _is(b, 1):
        return a
    if _is(a, 0) and not _is(b, 0):
        return ZERO
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("/", a.value, b.value) or Bin("/", a, b)
    return Bin("/", a, b)


def power(a, b):
    if _is(b, 0):
        return ONE
    if _is(b, 1):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return _fold("^", a.value, b.value) or Bin("^", a, b)
    return Bin("^", a, b)


def neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(name, *args):
    if all(isinstance(a, Num) for a in args) and name != "abs":
        try:
            val = evaluate(Call(name, tuple(args)))
        except EvalDomainError:
            val = None
        if val is not None and math.isfinite(val):
            return Num(val)
    return Call(name, tuple(args))


# ---------------------------------------------------------------------------
# symbolic operations


def free_vars(e):
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.arg)
    if isinstance(e, Bin):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Call):
        out = set()
        for a in e.args:
            out |= free_vars(a)
        return out
    return set()


def diff(e: Expr, var: str) -> Expr:
    """Exact partial derivative with respect to ``var`` (one of x, t, v)."""
    if var not in VARIABLES:
        raise ValueError(f"can only differentiate with respect to x, t or v, not {var!r}")
    e = parse(e)
    if var not in free_vars(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Neg):
        return neg(diff(e.arg, var))
    if isinstance(e, Bin):
        u, w = e.left, e.right
        if e.op == "+":
            return add(diff(u, var), diff(w, var))
        if e.op == "-":
            return sub(diff(u, var), diff(w, var))
        if e.op == "*":
            return add(mul(diff(u, var), w), mul(u, diff(w, var)))
        if e.op == "/":
            return div(sub(mul(diff(u, var), w), mul(u, diff(w, var))), power(w, Num(2.0)))
        return _diff_pow(u, w, var)
    if isinstance(e, Call):
        if e.name == "pow":
            return _diff_pow(e.args[0], e.args[1], var)
        u = e.args[0]
        du = diff(u, var)
        if e.name == "abs":
            raise UnsupportedDerivativeError(f"abs is not differentiable: {to_string(e)}")
        outer = {
            "sin": lambda: call("cos", u),
            "cos": lambda: neg(call("sin", u)),
            "tan": lambda: add(ONE, power(call("tan", u), Num(2.0))),
            "exp": lambda: call("exp", u),
            "log": lambda: div(ONE, u),
            "sqrt": lambda: div(Num(0.5), call("sqrt", u)),
            "tanh": lambda: sub(ONE, power(call("tanh", u), Num(2.0))),
        }[e.name]()
        return mul(outer, du)
    raise TypeError(f"not an expression: {e!r}")


def _diff_pow(u, w, var):
    du = diff(u, var)
    if var not in free_vars(w):
        return mul(mul(w, power(u, sub(w, ONE))), du)
    dw = diff(w, var)
    # d(u^w) = u^w (w' log u + w u'/u)
    return mul(power(u, w), add(mul(dw, call("log", u)), div(mul(w, du), u)))


def substitute(e: Expr, var: str, replacement) -> Expr:
    """Replace every occurrence of variable ``var`` by ``replacement``."""
    e = parse(e)
    replacement = parse(replacement)
    if isinstance(e, Var):
        return replacement if e.name == var else e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, var, replacement))
    if isinstance(e, Bin):
        return Bin(e.op, substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Call):
        return Call(e.name, tuple(substitute(a, var, replacement) for a in e.args))
    return e


def simplify(e: Expr) -> Expr:
    """Rebuild bottom-up through the simplifying constructors."""
    if isinstance(e, Neg):
        return neg(simplify(e.arg))
    if isinstance(e, Bin):
        a, b = simplify(e.left), simplify(e.right)
        return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[e.op](a, b)
    if isinstance(e, Call):
        return call(e.name, *(simplify(a) for a in e.args))
    return e
