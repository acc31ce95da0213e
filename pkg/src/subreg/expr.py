"""Small expression language for mapping definitions.

Grammar (lowest to highest binding):

    or_expr   := and_expr ("or" and_expr)*
    and_expr  := cmp_expr ("and" cmp_expr)*
    cmp_expr  := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)?
    sum       := term (("+" | "-") term)*
    term      := unary (("*" | "/") unary)*
    unary     := "-" unary | power
    power     := atom ("^" unary)?          # right associative, binds above unary minus
    atom      := NUMBER | "inf" | variable | function "(" args ")"
               | "(" or_expr ")" | "[" sum ("," sum)* "]"

Variables are ``x1, x2, ...`` (state) and ``p1, p2, ...`` (parameter).
Functions: abs, sin, cos, exp, sqrt (scalar), min, max (two or more scalars),
norm1, norm2, norminf (scalar or vector argument), piecewise(cond, a, b).
Ties at a piecewise boundary take the first branch; branches are evaluated
lazily, so guarded expressions like piecewise(x1 == 0, 0, 1/x1) are total.

Shapes are inferred statically: every subexpression is a scalar, a fixed-length
vector, or (for comparison/and/or nodes) a condition.  Shape errors, unknown
identifiers and arity mistakes are rejected at parse time with 1-based column
positions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

__all__ = [
    "ExprError",
    "ExprSyntaxError",
    "ExprEvalError",
    "Expr",
    "Const",
    "Var",
    "Unary",
    "Bin",
    "Cmp",
    "BoolOp",
    "Call",
    "Vec",
    "Piecewise",
    "parse_expr",
    "parse_condition",
    "format_expr",
    "eval_expr",
    "eval_expr_batch",
    "eval_condition",
    "free_vars",
    "var_dims",
    "out_dim",
]


class ExprError(ValueError):
    """Base class for expression language failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, col: int):
        super().__init__(f"column {col}: {message}")
        self.col = col


class ExprEvalError(ExprError):
    """Unbound variable or domain error during evaluation."""


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Node:
    pos: int = field(compare=False, default=0, kw_only=True)
    # shape: None = scalar, int m = vector of length m, "bool" = condition
    shape: Union[None, int, str] = field(compare=False, default=None, kw_only=True)


@dataclass(frozen=True)
class Const(Node):
    value: float = 0.0


@dataclass(frozen=True)
class Var(Node):
    name: str = ""


@dataclass(frozen=True)
class Unary(Node):
    op: str = "-"
    arg: "Expr" = None


@dataclass(frozen=True)
class Bin(Node):
    op: str = "+"
    left: "Expr" = None
    right: "Expr" = None


@dataclass(frozen=True)
class Cmp(Node):
    op: str = "=="
    left: "Expr" = None
    right: "Expr" = None


@dataclass(frozen=True)
class BoolOp(Node):
    op: str = "and"
    parts: tuple = ()


@dataclass(frozen=True)
class Call(Node):
    fn: str = ""
    args: tuple = ()


@dataclass(frozen=True)
class Vec(Node):
    items: tuple = ()


@dataclass(frozen=True)
class Piecewise(Node):
    cond: "Expr" = None
    then: "Expr" = None
    other: "Expr" = None


Expr = Union[Const, Var, Unary, Bin, Cmp, BoolOp, Call, Vec, Piecewise]

_SCALAR_FNS = {"abs", "sin", "cos", "exp", "sqrt"}
_VARIADIC_FNS = {"min", "max"}
_NORM_FNS = {"norm1", "norm2", "norminf"}
_ALL_FNS = _SCALAR_FNS | _VARIADIC_FNS | _NORM_FNS | {"piecewise"}
_VAR_RE = re.compile(r"^[xp][1-9][0-9]*$")


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|!=|<|>|[-+*/^()\[\],]))"
)


@dataclass
class _Tok:
    kind: str  # "num", "ident", "op", "end"
    text: str
    col: int  # 1-based


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            stripped = text[i:].lstrip()
            if not stripped:
                break
            col = len(text) - len(stripped) + 1
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}", col)
        if m.lastgroup == "num":
            toks.append(_Tok("num", m.group("num"), m.start("num") + 1))
        elif m.lastgroup == "ident":
            toks.append(_Tok("ident", m.group("ident"), m.start("ident") + 1))
        else:
            toks.append(_Tok("op", m.group("op"), m.start("op") + 1))
        i = m.end()
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.cur.kind == "op" and self.cur.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str, what: str = "") -> None:
        if not self.accept(text):
            want = what or f"'{text}'"
            raise ExprSyntaxError(f"expected {want}", self.cur.col)

    def or_expr(self) -> Expr:
        node = self.and_expr()
        parts = [node]
        col = node.pos
        while self.cur.kind == "ident" and self.cur.text == "or":
            self.advance()
            parts.append(self.and_expr())
        if len(parts) == 1:
            return node
        for p in parts:
            _require_bool(p)
        return BoolOp(op="or", parts=tuple(parts), pos=col, shape="bool")

    def and_expr(self) -> Expr:
        node = self.cmp_expr()
        parts = [node]
        col = node.pos
        while self.cur.kind == "ident" and self.cur.text == "and":
            self.advance()
            parts.append(self.cmp_expr())
        if len(parts) == 1:
            return node
        for p in parts:
            _require_bool(p)
        return BoolOp(op="and", parts=tuple(parts), pos=col, shape="bool")

    def cmp_expr(self) -> Expr:
        left = self.sum()
        if self.cur.kind == "op" and self.cur.text in ("<", "<=", ">", ">=", "==", "!="):
            op = self.advance()
            right = self.sum()
            _require_scalar(left, f"left side of '{op.text}'")
            _require_scalar(right, f"right side of '{op.text}'")
            return Cmp(op=op.text, left=left, right=right, pos=op.col, shape="bool")
        return left

    def sum(self) -> Expr:
        node = self.term()
        while self.cur.kind == "op" and self.cur.text in ("+", "-"):
            op = self.advance()
            right = self.term()
            node = _make_bin(op.text, node, right, op.col)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.cur.kind == "op" and self.cur.text in ("*", "/"):
            op = self.advance()
            right = self.unary()
            node = _make_bin(op.text, node, right, op.col)
        return node

    def unary(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text == "-":
            op = self.advance()
            arg = self.unary()
            _require_value(arg, "operand of unary '-'")
            return Unary(op="-", arg=arg, pos=op.col, shape=arg.shape)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            op = self.advance()
            exponent = self.unary()
            _require_scalar(base, "base of '^'")
            _require_scalar(exponent, "exponent of '^'")
            return Bin(op="^", left=base, right=exponent, pos=op.col, shape=None)
        return base

    def atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return Const(value=float(tok.text), pos=tok.col, shape=None)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.or_expr()
            self.expect(")")
            return node
        if tok.kind == "op" and tok.text == "[":
            self.advance()
            items = [self.sum()]
            while self.accept(","):
                items.append(self.sum())
            self.expect("]")
            for it in items:
                _require_scalar(it, "vector component")
            return Vec(items=tuple(items), pos=tok.col, shape=len(items))
        if tok.kind == "ident":
            name = tok.text
            if name == "inf":
                self.advance()
                return Const(value=math.inf, pos=tok.col, shape=None)
            if name in ("and", "or"):
                raise ExprSyntaxError(f"unexpected '{name}'", tok.col)
            if _VAR_RE.match(name):
                self.advance()
                return Var(name=name, pos=tok.col, shape=None)
            if name in _ALL_FNS:
                self.advance()
                self.expect("(")
                return self.call(name, tok.col)
            raise ExprSyntaxError(f"unknown identifier '{name}'", tok.col)
        raise ExprSyntaxError("expected expression", tok.col)

    def call(self, fn: str, col: int) -> Expr:
        args = []
        if not self.accept(")"):
            args.append(self.or_expr())
            while self.accept(","):
                args.append(self.or_expr())
            self.expect(")")
        if fn == "piecewise":
            if len(args) != 3:
                raise ExprSyntaxError(
                    f"piecewise takes 3 arguments, got {len(args)}", col
                )
            cond, a, b = args
            _require_bool(cond, "piecewise condition")
            _require_value(a, "piecewise branch")
            _require_value(b, "piecewise branch")
            if a.shape != b.shape:
                raise ExprSyntaxError(
                    f"piecewise branches disagree in shape "
                    f"({_shape_name(a.shape)} vs {_shape_name(b.shape)})",
                    col,
                )
            return Piecewise(cond=cond, then=a, other=b, pos=col, shape=a.shape)
        if fn in _SCALAR_FNS:
            if len(args) != 1:
                raise ExprSyntaxError(f"{fn} takes 1 argument, got {len(args)}", col)
            _require_scalar(args[0], f"argument of {fn}")
            return Call(fn=fn, args=tuple(args), pos=col, shape=None)
        if fn in _VARIADIC_FNS:
            if len(args) < 2:
                raise ExprSyntaxError(
                    f"{fn} takes at least 2 arguments, got {len(args)}", col
                )
            for a in args:
                _require_scalar(a, f"argument of {fn}")
            return Call(fn=fn, args=tuple(args), pos=col, shape=None)
        if fn in _NORM_FNS:
            if len(args) != 1:
                raise ExprSyntaxError(f"{fn} takes 1 argument, got {len(args)}", col)
            _require_value(args[0], f"argument of {fn}")
            return Call(fn=fn, args=tuple(args), pos=col, shape=None)
        raise ExprSyntaxError(f"unknown function '{fn}'", col)  # pragma: no cover


def _shape_name(shape) -> str:
    if shape is None:
        return "scalar"
    if shape == "bool":
        return "condition"
    return f"vector[{shape}]"


def _require_scalar(node: Expr, what: str = "operand") -> None:
    if node.shape is not None:
        raise ExprSyntaxError(f"{what} must be a scalar, got {_shape_name(node.shape)}", node.pos)


def _require_bool(node: Expr, what: str = "operand of and/or") -> None:
    if node.shape != "bool":
        raise ExprSyntaxError(f"{what} must be a condition, got {_shape_name(node.shape)}", node.pos)


def _require_value(node: Expr, what: str = "operand") -> None:
    if node.shape == "bool":
        raise ExprSyntaxError(f"{what} must be a value, not a condition", node.pos)


def _make_bin(op: str, left: Expr, right: Expr, col: int) -> Expr:
    _require_value(left, f"left operand of '{op}'")
    _require_value(right, f"right operand of '{op}'")
    ls, rs = left.shape, right.shape
    if op in ("+", "-"):
        if ls != rs:
            raise ExprSyntaxError(
                f"'{op}' needs matching shapes, got {_shape_name(ls)} and {_shape_name(rs)}",
                col,
            )
        shape = ls
    else:  # * /
        if ls is not None and rs is not None:
            raise ExprSyntaxError(
                f"'{op}' needs at least one scalar operand, got "
                f"{_shape_name(ls)} and {_shape_name(rs)}",
                col,
            )
        if op == "/" and rs is not None:
            raise ExprSyntaxError("divisor must be a scalar", col)
        shape = ls if ls is not None else rs
    return Bin(op=op, left=left, right=right, pos=col, shape=shape)


def _parse(text: str) -> tuple[Expr, _Parser]:
    p = _Parser(text)
    node = p.or_expr()
    if p.cur.kind != "end":
        raise ExprSyntaxError(f"unexpected '{p.cur.text}'", p.cur.col)
    return node, p


def parse_expr(text: str) -> Expr:
    """Parse a value expression (scalar or vector valued)."""
    node, _ = _parse(text)
    if node.shape == "bool":
        raise ExprSyntaxError("expected a value, got a condition", node.pos)
    return node


def parse_condition(text: str) -> Expr:
    """Parse a boolean condition (comparisons joined by and/or)."""
    node, _ = _parse(text)
    if node.shape != "bool":
        raise ExprSyntaxError("expected a condition, got a value", node.pos)
    return node


# ---------------------------------------------------------------------------
# Pretty printing

_PREC = {"or": 1, "and": 2, "cmp": 3, "+": 4, "-": 4, "*": 5, "/": 5, "neg": 6, "^": 7}


def format_expr(node: Expr) -> str:
    """Canonical text form; parse(format(e)) reproduces e structurally."""
    return _fmt(node, 0)


def _fmt(node: Expr, parent_prec: int) -> str:
    if isinstance(node, Const):
        v = node.value
        if math.isinf(v):
            s = "inf" if v > 0 else "-inf"
        elif v == int(v) and abs(v) < 1e15:
            s = str(int(v))
        else:
            s = repr(v)
        return s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        inner = _fmt(node.arg, _PREC["neg"] + 1)
        s = f"-{inner}"
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(node, Bin):
        prec = _PREC[node.op]
        if node.op == "^":
            left = _fmt(node.left, prec + 1)
            right = _fmt(node.right, _PREC["neg"])
        else:
            left = _fmt(node.left, prec)
            right = _fmt(node.right, prec + 1)
        s = f"{left} {node.op} {right}" if node.op in ("+", "-") else f"{left}{node.op}{right}"
        return f"({s})" if parent_prec > prec else s
    if isinstance(node, Cmp):
        s = f"{_fmt(node.left, _PREC['cmp'] + 1)} {node.op} {_fmt(node.right, _PREC['cmp'] + 1)}"
        return f"({s})" if parent_prec > _PREC["cmp"] else s
    if isinstance(node, BoolOp):
        prec = _PREC[node.op]
        s = f" {node.op} ".join(_fmt(p, prec + 1) for p in node.parts)
        return f"({s})" if parent_prec > prec else s
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(_fmt(a, 0) for a in node.args)})"
    if isinstance(node, Vec):
        return f"[{', '.join(_fmt(a, 0) for a in node.items)}]"
    if isinstance(node, Piecewise):
        parts = (_fmt(node.cond, 0), _fmt(node.then, 0), _fmt(node.other, 0))
        return f"piecewise({parts[0]}, {parts[1]}, {parts[2]})"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation


def free_vars(node: Expr) -> set[str]:
    out: set[str] = set()
    _collect_vars(node, out)
    return out


def _collect_vars(node: Expr, out: set[str]) -> None:
    if isinstance(node, Var):
        out.add(node.name)
    elif isinstance(node, Unary):
        _collect_vars(node.arg, out)
    elif isinstance(node, (Bin, Cmp)):
        _collect_vars(node.left, out)
        _collect_vars(node.right, out)
    elif isinstance(node, BoolOp):
        for p in node.parts:
            _collect_vars(p, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_vars(a, out)
    elif isinstance(node, Vec):
        for a in node.items:
            _collect_vars(a, out)
    elif isinstance(node, Piecewise):
        _collect_vars(node.cond, out)
        _collect_vars(node.then, out)
        _collect_vars(node.other, out)


def var_dims(node: Expr) -> tuple[int, int]:
    """Smallest (n, k) such that all x-vars are x1..xn and p-vars are p1..pk."""
    n = k = 0
    for name in free_vars(node):
        idx = int(name[1:])
        if name[0] == "x":
            n = max(n, idx)
        else:
            k = max(k, idx)
    return n, k


def out_dim(node: Expr) -> int:
    """Output dimension of a value expression (1 for scalars)."""
    return 1 if node.shape is None else int(node.shape)


def eval_expr(node: Expr, env: dict) -> float | np.ndarray:
    """Evaluate with scalar bindings; returns a float or an (m,) array."""
    val = _ev_scalar(node, env)
    if isinstance(val, np.ndarray):
        return val
    return float(val)


def eval_condition(node: Expr, env: dict) -> bool:
    return bool(_ev_scalar(node, env))


def _ev_scalar(node: Expr, env: dict):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return float(env[node.name])
        except KeyError:
            raise ExprEvalError(f"unbound variable '{node.name}'") from None
    if isinstance(node, Unary):
        return -_ev_scalar(node.arg, env)
    if isinstance(node, Bin):
        a = _ev_scalar(node.left, env)
        b = _ev_scalar(node.right, env)
        return _apply_bin(node, a, b, scalar=True)
    if isinstance(node, Cmp):
        return _CMP_OPS[node.op](_ev_scalar(node.left, env), _ev_scalar(node.right, env))
    if isinstance(node, BoolOp):
        if node.op == "and":
            return all(bool(_ev_scalar(p, env)) for p in node.parts)
        return any(bool(_ev_scalar(p, env)) for p in node.parts)
    if isinstance(node, Call):
        args = [_ev_scalar(a, env) for a in node.args]
        return _apply_call(node, args, scalar=True)
    if isinstance(node, Vec):
        return np.array([_ev_scalar(a, env) for a in node.items], dtype=float)
    if isinstance(node, Piecewise):
        branch = node.then if bool(_ev_scalar(node.cond, env)) else node.other
        return _ev_scalar(branch, env)
    raise TypeError(f"not an expression node: {node!r}")


def eval_expr_batch(node: Expr, env: dict) -> np.ndarray:
    """Evaluate with array bindings of common length B.

    Returns shape (B,) for scalar expressions and (m, B) for vector ones.
    Piecewise branches see only the rows their condition selects, so guarded
    expressions stay total in batch mode as well.
    """
    sizes = {np.asarray(v).shape[0] for v in env.values()}
    if len(sizes) > 1:
        raise ExprEvalError(f"inconsistent batch sizes {sorted(sizes)}")
    batch = sizes.pop() if sizes else 0
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    return _ev_batch(node, env, batch)


def _ev_batch(node: Expr, env: dict, batch: int):
    if isinstance(node, Const):
        return np.full(batch, node.value)
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExprEvalError(f"unbound variable '{node.name}'") from None
    if isinstance(node, Unary):
        return -_ev_batch(node.arg, env, batch)
    if isinstance(node, Bin):
        a = _ev_batch(node.left, env, batch)
        b = _ev_batch(node.right, env, batch)
        return _apply_bin(node, a, b, scalar=False)
    if isinstance(node, Cmp):
        return _CMP_OPS[node.op](
            _ev_batch(node.left, env, batch), _ev_batch(node.right, env, batch)
        )
    if isinstance(node, BoolOp):
        parts = [_ev_batch(p, env, batch) for p in node.parts]
        out = parts[0]
        for p in parts[1:]:
            out = (out & p) if node.op == "and" else (out | p)
        return out
    if isinstance(node, Call):
        args = [_ev_batch(a, env, batch) for a in node.args]
        return _apply_call(node, args, scalar=False)
    if isinstance(node, Vec):
        return np.stack([_ev_batch(a, env, batch) for a in node.items], axis=0)
    if isinstance(node, Piecewise):
        mask = _ev_batch(node.cond, env, batch)
        if mask.all():
            return _ev_batch(node.then, env, batch)
        if not mask.any():
            return _ev_batch(node.other, env, batch)
        env_t = {k: v[mask] for k, v in env.items()}
        env_f = {k: v[~mask] for k, v in env.items()}
        val_t = _ev_batch(node.then, env_t, int(mask.sum()))
        val_f = _ev_batch(node.other, env_f, int(batch - mask.sum()))
        if node.shape is None:
            out = np.empty(batch)
            out[mask] = val_t
            out[~mask] = val_f
        else:
            out = np.empty((int(node.shape), batch))
            out[:, mask] = val_t
            out[:, ~mask] = val_f
        return out
    raise TypeError(f"not an expression node: {node!r}")


_CMP_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _apply_bin(node: Bin, a, b, scalar: bool):
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        bad = (b == 0) if scalar else bool(np.any(b == 0))
        if bad:
            raise ExprEvalError(f"division by zero in '{format_expr(node)}'")
        return a / b
    if op == "^":
        neg_base = (a < 0) if scalar else bool(np.any(a < 0))
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.power(a, b) if not scalar else a**b
        bad = (not scalar and bool(np.any(np.isnan(out)))) or (
            scalar and isinstance(out, complex)
        )
        if neg_base and bad:
            raise ExprEvalError(
                f"fractional power of a negative base in '{format_expr(node)}'"
            )
        return out
    raise AssertionError(op)


def _apply_call(node: Call, args, scalar: bool):
    fn = node.fn
    if fn == "abs":
        return abs(args[0]) if scalar else np.abs(args[0])
    if fn == "sin":
        return math.sin(args[0]) if scalar else np.sin(args[0])
    if fn == "cos":
        return math.cos(args[0]) if scalar else np.cos(args[0])
    if fn == "exp":
        with np.errstate(over="ignore"):
            return math.exp(args[0]) if scalar and args[0] < 700 else np.exp(args[0])
    if fn == "sqrt":
        bad = (args[0] < 0) if scalar else bool(np.any(args[0] < 0))
        if bad:
            raise ExprEvalError(
                f"square root of a negative value in '{format_expr(node)}'"
            )
        return math.sqrt(args[0]) if scalar else np.sqrt(args[0])
    if fn == "min":
        if scalar:
            return min(args)
        return np.minimum.reduce(args)
    if fn == "max":
        if scalar:
            return max(args)
        return np.maximum.reduce(args)
    if fn in _NORM_FNS:
        v = args[0]
        if scalar:
            vec = np.atleast_1d(np.asarray(v, dtype=float))
            if fn == "norm1":
                return float(np.sum(np.abs(vec)))
            if fn == "norm2":
                return float(np.sqrt(np.sum(vec * vec)))
            return float(np.max(np.abs(vec)))
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 1:  # scalar argument, batched
            return np.abs(arr)
        if fn == "norm1":
            return np.sum(np.abs(arr), axis=0)
        if fn == "norm2":
            return np.sqrt(np.sum(arr * arr, axis=0))
        return np.max(np.abs(arr), axis=0)
    raise AssertionError(fn)
