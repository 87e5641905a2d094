"""Scalar field expressions with exact second-order derivatives.

Grammar (whitespace is ignored)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('+' | '-') unary | power
    power := atom ('^' ['-'] INTEGER)?
    atom  := NUMBER | VAR | FUNC '(' expr ')' | 'abs2' '(' VAR ':' VAR ')' | '(' expr ')'

Variables are ``x1 .. xn``; ``FUNC`` is one of ``exp``, ``log``, ``sqrt``.
``abs2(xi:xj)`` is the squared Euclidean norm of the slice ``xi .. xj``.

Derivatives are computed with forward-mode second-order jets that are
batched over evaluation points, so a Hessian field on a sample cloud is a
single pass through the tree.
"""
import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, NonFinite, UnknownVariable

FUNCTIONS = ("exp", "log", "sqrt")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


@dataclass(frozen=True)
class Abs2:
    lo: int  # zero based, inclusive
    hi: int


Node = Union[Num, Var, Neg, Bin, Pow, Call, Abs2]


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^():]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.toks = _tokenize(text)
        self.i = 0
        self.max_var = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, off = self.take()
        if val != value or kind not in ("op",):
            raise ExprSyntaxError(f"expected {value!r}, got {val or 'end of input'!r}", off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = Bin(op, node, self.unary())
        return node

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            arg = self.unary()
            return Neg(arg) if val == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            sign = 1
            if self.peek()[1] == "-":
                self.take()
                sign = -1
            kind, val, off = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", off)
            return Pow(base, sign * int(val))
        return base

    def variable(self, tok):
        kind, val, off = tok
        m = re.fullmatch(r"x(\d+)", val)
        if kind != "name" or m is None:
            raise UnknownVariable(f"unknown identifier {val!r} at offset {off}")
        k = int(m.group(1))
        if k < 1 or (self.n is not None and k > self.n):
            raise UnknownVariable(f"variable {val!r} outside x1..x{self.n}")
        self.max_var = max(self.max_var, k)
        return k - 1

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val == "abs2":
                self.expect("(")
                lo = self.variable(self.take())
                self.expect(":")
                hi = self.variable(self.take())
                self.expect(")")
                if hi < lo:
                    raise ExprSyntaxError("empty abs2 slice", off)
                return Abs2(lo, hi)
            return Var(self.variable((kind, val, off)))
        raise ExprSyntaxError(f"unexpected token {val or 'end of input'!r}", off)


def to_text(node):
    """Print an AST so that parsing the result gives the same tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, Bin):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Pow):
        return f"({to_text(node.base)})^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.fn}({to_text(node.arg)})"
    if isinstance(node, Abs2):
        return f"abs2(x{node.lo + 1}:x{node.hi + 1})"
    raise TypeError(node)


# --------------------------------------------------------------------------
# Jets
# --------------------------------------------------------------------------

class Jet:
    """Batched second-order jet: value, gradient and Hessian at ``m`` points.

    Shapes are ``val (m,)``, ``grad (m, n)`` and ``hess (m, n, n)``; ``hess``
    is ``None`` for first-order jets.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, c, m, n, order=2):
        val = np.full(m, float(c))
        hess = np.zeros((m, n, n)) if order == 2 else None
        return cls(val, np.zeros((m, n)), hess)

    @classmethod
    def variables(cls, points, order=2):
        """Jets of the coordinate functions; returns a list of ``n`` jets."""
        m, n = points.shape
        out = []
        for i in range(n):
            g = np.zeros((m, n))
            g[:, i] = 1.0
            out.append(cls(points[:, i].astype(float), g,
                           np.zeros((m, n, n)) if order == 2 else None))
        return out

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.grad, self.hess)
        hess = None if self.hess is None else self.hess + other.hess
        return Jet(self.val + other.val, self.grad + other.grad, hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val * other, self.grad * other,
                       None if self.hess is None else self.hess * other)
        a, b = self, other
        grad = a.val[:, None] * b.grad + b.val[:, None] * a.grad
        hess = None
        if a.hess is not None:
            cross = a.grad[:, :, None] * b.grad[:, None, :]
            hess = (a.val[:, None, None] * b.hess + b.val[:, None, None] * a.hess
                    + cross + np.swapaxes(cross, 1, 2))
        return Jet(a.val * b.val, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def apply(self, f0, f1, f2):
        """Chain rule for a scalar function with values ``f0, f1, f2``."""
        grad = f1[:, None] * self.grad
        hess = None
        if self.hess is not None:
            hess = (f1[:, None, None] * self.hess
                    + f2[:, None, None] * self.grad[:, :, None] * self.grad[:, None, :])
        return Jet(f0, grad, hess)

    def reciprocal(self):
        v = self.val
        if np.any(v == 0):
            raise DomainError("division by zero")
        return self.apply(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def ipow(self, k):
        v = self.val
        if k == 0:
            return Jet(np.ones_like(v), np.zeros_like(self.grad),
                       None if self.hess is None else np.zeros_like(self.hess))
        if k < 0 and np.any(v == 0):
            raise DomainError("negative power of zero")
        f1 = k * v ** (k - 1) if k != 1 else np.ones_like(v)
        f2 = k * (k - 1) * v ** (k - 2) if k not in (0, 1, 2) else np.full_like(v, k * (k - 1))
        return self.apply(v**k, f1, f2)

    def exp(self):
        e = np.exp(self.val)
        return self.apply(e, e, e)

    def log(self):
        v = self.val
        if np.any(v <= 0):
            raise DomainError("log of a nonpositive value")
        return self.apply(np.log(v), 1.0 / v, -1.0 / v**2)

    def sqrt(self):
        v = self.val
        if np.any(v <= 0):
            raise DomainError("sqrt of a nonpositive value")
        s = np.sqrt(v)
        return self.apply(s, 0.5 / s, -0.25 / (s * v))


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _eval_values(node, X):
    if isinstance(node, Num):
        return np.full(X.shape[0], node.value)
    if isinstance(node, Var):
        return X[:, node.index]
    if isinstance(node, Neg):
        return -_eval_values(node.arg, X)
    if isinstance(node, Bin):
        a = _eval_values(node.left, X)
        b = _eval_values(node.right, X)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if np.any(b == 0):
            raise DomainError("division by zero")
        return a / b
    if isinstance(node, Pow):
        a = _eval_values(node.base, X)
        if node.exponent < 0 and np.any(a == 0):
            raise DomainError("negative power of zero")
        return a ** float(node.exponent)
    if isinstance(node, Call):
        a = _eval_values(node.arg, X)
        if node.fn == "exp":
            return np.exp(a)
        if np.any(a <= 0):
            raise DomainError(f"{node.fn} of a nonpositive value")
        return np.log(a) if node.fn == "log" else np.sqrt(a)
    if isinstance(node, Abs2):
        return np.sum(X[:, node.lo:node.hi + 1] ** 2, axis=1)
    raise TypeError(node)


def _eval_jet(node, X, xs, order):
    m, n = X.shape
    if isinstance(node, Num):
        return Jet.constant(node.value, m, n, order)
    if isinstance(node, Var):
        return xs[node.index]
    if isinstance(node, Neg):
        return -_eval_jet(node.arg, X, xs, order)
    if isinstance(node, Bin):
        a = _eval_jet(node.left, X, xs, order)
        b = _eval_jet(node.right, X, xs, order)
        return {"+": a.__add__, "-": a.__sub__, "*": a.__mul__, "/": a.__truediv__}[node.op](b)
    if isinstance(node, Pow):
        return _eval_jet(node.base, X, xs, order).ipow(node.exponent)
    if isinstance(node, Call):
        a = _eval_jet(node.arg, X, xs, order)
        return getattr(a, node.fn)()
    if isinstance(node, Abs2):
        val = np.sum(X[:, node.lo:node.hi + 1] ** 2, axis=1)
        grad = np.zeros((m, n))
        grad[:, node.lo:node.hi + 1] = 2 * X[:, node.lo:node.hi + 1]
        hess = None
        if order == 2:
            hess = np.zeros((m, n, n))
            idx = np.arange(node.lo, node.hi + 1)
            hess[:, idx, idx] = 2.0
        return Jet(val, grad, hess)
    raise TypeError(node)


class Expr:
    """A parsed scalar field on R^n.

    Parameters
    ----------
    text : str
        Source in the grammar of this module.
    n : int, optional
        Ambient dimension.  Variables beyond ``xn`` raise ``UnknownVariable``.
        If omitted, the largest variable index is used.
    """

    def __init__(self, text, n=None):
        p = _Parser(text, n)
        self.root = p.parse()
        self.n = n if n is not None else max(p.max_var, 1)
        self.text = text

    @classmethod
    def from_node(cls, node, n):
        obj = cls.__new__(cls)
        obj.root = node
        obj.n = n
        obj.text = to_text(node)
        return obj

    def __repr__(self):
        return f"Expr({self.text!r}, n={self.n})"

    def __eq__(self, other):
        return isinstance(other, Expr) and self.root == other.root and self.n == other.n

    def __hash__(self):
        return hash((self.root, self.n))

    def _points(self, p):
        X = np.asarray(p, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n:
            raise ValueError(f"expected points in R^{self.n}, got shape {X.shape}")
        return X, single

    def __call__(self, p):
        """Value at a point ``(n,)`` or at a batch ``(m, n)``."""
        X, single = self._points(p)
        with np.errstate(all="ignore"):
            v = _eval_values(self.root, X)
        if not np.all(np.isfinite(v)):
            raise NonFinite(f"non-finite value of {self.text!r}")
        return float(v[0]) if single else v

    def jet(self, p, order=2):
        """Value, gradient and (for ``order=2``) Hessian.

        Returns a :class:`Jet`; for a single point the arrays keep a leading
        axis of length one.
        """
        X, _ = self._points(p)
        with np.errstate(all="ignore"):
            J = _eval_jet(self.root, X, Jet.variables(X, order), order)
        if J.hess is not None:
            J.hess = 0.5 * (J.hess + np.swapaxes(J.hess, 1, 2))
        parts = [J.val, J.grad] + ([J.hess] if J.hess is not None else [])
        if not all(np.all(np.isfinite(a)) for a in parts):
            raise NonFinite(f"non-finite derivative of {self.text!r}")
        return J

    def gradient(self, p):
        return self.jet(p, order=1).grad[0]

    def hessian(self, p):
        return self.jet(p).hess[0]


def parse(text, n: Optional[int] = None) -> Expr:
    return Expr(text, n)


def eval_jet2(e: Expr, p):
    """Value, gradient and Hessian of ``e`` at a single point."""
    J = e.jet(np.asarray(p, dtype=float)[None, :])
    return float(J.val[0]), J.grad[0], J.hess[0]
