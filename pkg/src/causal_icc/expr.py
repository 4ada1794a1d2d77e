"""Structural-equation expression language.

Grammar, loosest binding first::

    expr    := xor ("or" xor)*
    xor     := and ("xor" and)*
    and     := not ("and" not)*
    not     := "not" not | cmp
    cmp     := add (("=="|"!="|"<"|"<="|">"|">=") add)*
    add     := mul (("+"|"-") mul)*
    mul     := unary (("*"|"/"|"mod") unary)*
    unary   := "-" unary | primary
    primary := NUMBER | STRING | "n" | "pa" "." NAME
             | ("max"|"min"|"abs"|"floor"|"if") "(" expr ("," expr)* ")"
             | "(" expr ")"

Values are Python ``int``, ``float`` or ``str`` (categorical labels).
``eval_expr`` is the scalar reference semantics; ``eval_array`` evaluates
the same expression over numpy columns and must agree with it row by row.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import CausalIccError

Value = Union[int, float, str]

NOISE_SYMBOL = "n"
PARENT_PREFIX = "pa."
KEYWORDS = {"and", "or", "not", "xor", "mod"}
FUNCTIONS = {"max": (1, None), "min": (1, None), "abs": (1, 1), "floor": (1, 1), "if": (3, 3)}
COMPARISONS = ("==", "!=", "<=", ">=", "<", ">")
LOGICAL = ("and", "or")


class ExprError(CausalIccError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.line = line
        self.column = column
        self.expected = expected
        self.reason = message
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{message} at line {line}, column {column}{detail}")


class EvalError(ExprError):
    pass


class ExprTypeError(EvalError, TypeError):
    pass


class DivisionByZero(EvalError, ZeroDivisionError):
    pass


class UnknownSymbol(EvalError):
    pass


# -- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int | float


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple[Expr, ...]


Expr = Union[Num, Str, Sym, Unary, Binary, Call]


# -- Lexer -----------------------------------------------------------------


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, str, name, op, eof
    text: str
    value: object
    line: int
    col: int


_OPS = ("==", "!=", "<=", ">=", "<", ">", "+", "-", "*", "/", "(", ")", ",", ".")


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c.isspace():
            i, col = i + 1, col + 1
            continue
        start, scol = i, col
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            is_float = False
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    is_float = True
                    j = k
                    while j < n and src[j].isdigit():
                        j += 1
            text = src[start:j]
            value = float(text) if is_float else int(text)
            if isinstance(value, float) and not math.isfinite(value):
                raise ParseError("numeric literal out of range", line, scol)
            toks.append(_Tok("num", text, value, line, scol))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            buf: list[str] = []
            while True:
                if j >= n or src[j] == "\n":
                    raise ParseError("unterminated string literal", line, scol)
                ch = src[j]
                if ch == "\\":
                    if j + 1 < n and src[j + 1] in '"\\':
                        buf.append(src[j + 1])
                        j += 2
                        continue
                    raise ParseError("invalid escape in string literal", line, col + (j - i))
                if ch == '"':
                    j += 1
                    break
                buf.append(ch)
                j += 1
            toks.append(_Tok("str", src[start:j], "".join(buf), line, scol))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("name", src[i:j], src[i:j], line, scol))
            col += j - i
            i = j
            continue
        for op in _OPS:
            if src.startswith(op, i):
                toks.append(_Tok("op", op, op, line, scol))
                i += len(op)
                col += len(op)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Tok("eof", "", None, line, col))
    return toks


# -- Parser ----------------------------------------------------------------

_OPERAND_START = frozenset({"number", "string", "n", "pa", "(", "-", "not", *FUNCTIONS})


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.pos = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def _is(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "name") and t.text == text

    def _fail(self, expected: frozenset[str]) -> ParseError:
        t = self.tok
        what = "end of input" if t.kind == "eof" else f"token {t.text!r}"
        return ParseError(f"unexpected {what}", t.line, t.col, expected)

    def _expect(self, text: str) -> _Tok:
        if not self._is(text):
            raise self._fail(frozenset({text}))
        t = self.tok
        self.pos += 1
        return t

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "eof":
            raise self._fail(frozenset({"operator", "end of input"}))
        return e

    def _left_assoc(self, ops: tuple[str, ...], sub: Callable[[], Expr]) -> Expr:
        left = sub()
        while any(self._is(o) for o in ops):
            op = self.tok.text
            self.pos += 1
            left = Binary(op, left, sub())
        return left

    def expr(self) -> Expr:
        return self._left_assoc(("or",), self.xor)

    def xor(self) -> Expr:
        return self._left_assoc(("xor",), self.and_)

    def and_(self) -> Expr:
        return self._left_assoc(("and",), self.not_)

    def not_(self) -> Expr:
        if self._is("not"):
            self.pos += 1
            return Unary("not", self.not_())
        return self.cmp()

    def cmp(self) -> Expr:
        return self._left_assoc(COMPARISONS, self.add)

    def add(self) -> Expr:
        return self._left_assoc(("+", "-"), self.mul)

    def mul(self) -> Expr:
        return self._left_assoc(("*", "/", "mod"), self.unary)

    def unary(self) -> Expr:
        if self._is("-"):
            self.pos += 1
            return Unary("-", self.unary())
        return self.primary()

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return Num(t.value)  # type: ignore[arg-type]
        if t.kind == "str":
            self.pos += 1
            return Str(t.value)  # type: ignore[arg-type]
        if self._is("("):
            self.pos += 1
            e = self.expr()
            self._expect(")")
            return e
        if t.kind == "name" and t.text not in KEYWORDS:
            self.pos += 1
            if t.text == NOISE_SYMBOL:
                return Sym(NOISE_SYMBOL)
            if t.text == "pa":
                self._expect(".")
                name = self.tok
                if name.kind != "name" or name.text in KEYWORDS:
                    raise self._fail(frozenset({"parent name"}))
                self.pos += 1
                return Sym(PARENT_PREFIX + name.text)
            if t.text in FUNCTIONS:
                return self._call(t)
            raise ParseError(f"unknown identifier {t.text!r}", t.line, t.col, _OPERAND_START)
        raise self._fail(_OPERAND_START)

    def _call(self, name: _Tok) -> Expr:
        self._expect("(")
        args = [self.expr()]
        while self._is(","):
            self.pos += 1
            args.append(self.expr())
        self._expect(")")
        lo, hi = FUNCTIONS[name.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ParseError(f"wrong number of arguments to {name.text}()", name.line, name.col)
        return Call(name.text, tuple(args))


def parse(source: str) -> Expr:
    """Parse DSL source into an AST. Raises ``ParseError``."""
    if not isinstance(source, str):
        raise TypeError("expression source must be a string")
    return _Parser(source).parse()


# -- Printing and inspection -----------------------------------------------


def to_source(expr: Expr) -> str:
    """Fully parenthesised source that re-parses to an equal AST."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Str):
        return json.dumps(expr.value, ensure_ascii=False)
    if isinstance(expr, Sym):
        return expr.name
    if isinstance(expr, Unary):
        sep = " " if expr.op == "not" else ""
        return f"({expr.op}{sep}{to_source(expr.operand)})"
    if isinstance(expr, Binary):
        return f"({to_source(expr.left)} {expr.op} {to_source(expr.right)})"
    if isinstance(expr, Call):
        return f"{expr.func}({', '.join(to_source(a) for a in expr.args)})"
    raise TypeError(f"not an expression node: {expr!r}")


def _children(expr: Expr) -> tuple[Expr, ...]:
    if isinstance(expr, Unary):
        return (expr.operand,)
    if isinstance(expr, Binary):
        return (expr.left, expr.right)
    if isinstance(expr, Call):
        return expr.args
    return ()


def free_symbols(expr: Expr) -> frozenset[str]:
    out: set[str] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, Sym):
            out.add(e.name)
        stack.extend(_children(e))
    return frozenset(out)


def referenced_parents(expr: Expr) -> frozenset[str]:
    return frozenset(s[len(PARENT_PREFIX):] for s in free_symbols(expr) if s.startswith(PARENT_PREFIX))


def rename_parent(expr: Expr, old: str, new: str) -> Expr:
    """Replace every ``pa.<old>`` with ``pa.<new>``."""
    if isinstance(expr, Sym):
        return Sym(PARENT_PREFIX + new) if expr.name == PARENT_PREFIX + old else expr
    if isinstance(expr, Unary):
        return Unary(expr.op, rename_parent(expr.operand, old, new))
    if isinstance(expr, Binary):
        return Binary(expr.op, rename_parent(expr.left, old, new), rename_parent(expr.right, old, new))
    if isinstance(expr, Call):
        return Call(expr.func, tuple(rename_parent(a, old, new) for a in expr.args))
    return expr


def is_finite_valued(expr: Expr, finite: Mapping[str, bool]) -> bool:
    """Conservative check that the expression takes finitely many values.

    ``finite`` maps symbol names (``n``, ``pa.X``) to whether that input has
    finite support.  Comparisons and logical operators always do.
    """
    if isinstance(expr, (Num, Str)):
        return True
    if isinstance(expr, Sym):
        return finite.get(expr.name, False)
    if isinstance(expr, Unary) and expr.op == "not":
        return True
    if isinstance(expr, Binary) and expr.op in COMPARISONS + LOGICAL:
        return True
    if isinstance(expr, Call) and expr.func == "if":
        return is_finite_valued(expr.args[1], finite) and is_finite_valued(expr.args[2], finite)
    return all(is_finite_valued(c, finite) for c in _children(expr))


# -- Scalar evaluation -----------------------------------------------------


def _is_num(v: object) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v: object) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _num(op: str, *vals: Value) -> None:
    for v in vals:
        if not _is_num(v):
            raise ExprTypeError(f"{op} needs numeric operands, got {v!r}")


def _neg(v: Value) -> Value:
    _num("-", v)
    return -v  # type: ignore[operator]


def _truth(op: str, v: Value) -> int:
    if _is_num(v) and v in (0, 1):
        return int(v)
    raise ExprTypeError(f"{op} needs a 0/1 operand, got {v!r}")


def _binary(op: str, a: Value, b: Value) -> Value:
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op in LOGICAL:
        x, y = _truth(op, a), _truth(op, b)
        return (x & y) if op == "and" else (x | y)
    if op == "xor":
        if not (_is_int(a) and _is_int(b)):
            raise ExprTypeError(f"xor needs integer operands, got {a!r}, {b!r}")
        return a ^ b
    _num(op, a, b)
    if op == "+":
        return a + b  # type: ignore[operator]
    if op == "-":
        return a - b  # type: ignore[operator]
    if op == "*":
        return a * b  # type: ignore[operator]
    if op in ("/", "mod"):
        if b == 0:
            raise DivisionByZero(f"{op} by zero")
        return a / b if op == "/" else a % b  # type: ignore[operator]
    if op == "<":
        return int(a < b)  # type: ignore[operator]
    if op == "<=":
        return int(a <= b)  # type: ignore[operator]
    if op == ">":
        return int(a > b)  # type: ignore[operator]
    if op == ">=":
        return int(a >= b)  # type: ignore[operator]
    raise ExprError(f"unknown operator {op!r}")


def _call(func: str, args: list[Value]) -> Value:
    _num(func, *args)
    if func == "max":
        return max(args)  # type: ignore[type-var]
    if func == "min":
        return min(args)  # type: ignore[type-var]
    if func == "abs":
        return abs(args[0])  # type: ignore[arg-type]
    if func == "floor":
        return math.floor(args[0])  # type: ignore[arg-type]
    raise ExprError(f"unknown function {func!r}")


def _lookup(name: str, parents: Mapping[str, Value], noise: Value) -> Value:
    if name == NOISE_SYMBOL:
        return noise
    key = name[len(PARENT_PREFIX):]
    try:
        return parents[key]
    except KeyError:
        raise UnknownSymbol(f"no value for {name}") from None


def eval_expr(expr: Expr, parents: Mapping[str, Value], noise: Value) -> Value:
    """Evaluate ``expr`` for one row of parent values and a noise value."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Str):
        return expr.value
    if isinstance(expr, Sym):
        return _lookup(expr.name, parents, noise)
    if isinstance(expr, Unary):
        v = eval_expr(expr.operand, parents, noise)
        if expr.op == "not":
            return 1 - _truth("not", v)
        return _neg(v)
    if isinstance(expr, Binary):
        return _binary(expr.op, eval_expr(expr.left, parents, noise), eval_expr(expr.right, parents, noise))
    if isinstance(expr, Call):
        if expr.func == "if":
            c = _truth("if", eval_expr(expr.args[0], parents, noise))
            return eval_expr(expr.args[1] if c else expr.args[2], parents, noise)
        return _call(expr.func, [eval_expr(a, parents, noise) for a in expr.args])
    raise TypeError(f"not an expression node: {expr!r}")


# -- Column evaluation -----------------------------------------------------

_INT64_MIN, _INT64_MAX = -(2**63), 2**63 - 1


def as_value_array(values) -> np.ndarray:
    """Pack Python values into int64, float64, or (mixed/labels) object arrays."""
    if isinstance(values, np.ndarray) and values.dtype.kind in "if" and values.dtype.itemsize == 8:
        return values
    vals = values.tolist() if isinstance(values, np.ndarray) else list(values)
    if all(type(v) is int and _INT64_MIN <= v <= _INT64_MAX for v in vals):
        return np.array(vals, dtype=np.int64)
    if all(type(v) is float for v in vals):
        return np.array(vals, dtype=np.float64)
    out = np.empty(len(vals), dtype=object)
    out[:] = vals
    return out


def _typed(*arrs: np.ndarray) -> bool:
    return all(a.dtype.kind in "if" for a in arrs)


def _elementwise(fn: Callable[..., Value], *arrs: np.ndarray) -> np.ndarray:
    cols = [a.tolist() for a in arrs]
    return as_value_array([fn(*row) for row in zip(*cols)])


def _check_truth(op: str, a: np.ndarray) -> np.ndarray:
    if not _typed(a):
        return as_value_array([_truth(op, v) for v in a.tolist()])
    if not np.all((a == 0) | (a == 1)):
        bad = a[(a != 0) & (a != 1)][0]
        raise ExprTypeError(f"{op} needs a 0/1 operand, got {bad.item()!r}")
    return a.astype(np.int64)


def _binary_array(op: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if op in ("==", "!=") and (a.dtype == object or b.dtype == object):
        return _elementwise(lambda x, y: _binary(op, x, y), a, b)
    if op in LOGICAL:
        x, y = _check_truth(op, a), _check_truth(op, b)
        return (x & y) if op == "and" else (x | y)
    if not _typed(a, b):
        return _elementwise(lambda x, y: _binary(op, x, y), a, b)
    both_int = a.dtype.kind == "i" and b.dtype.kind == "i"
    if op == "xor":
        if not both_int:
            raise ExprTypeError("xor needs integer operands")
        return np.bitwise_xor(a, b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op in ("/", "mod"):
        if np.any(b == 0):
            raise DivisionByZero(f"{op} by zero")
        return np.true_divide(a, b) if op == "/" else np.mod(a, b)
    cmp = {"==": np.equal, "!=": np.not_equal, "<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal}
    return cmp[op](a, b).astype(np.int64)


def _call_array(func: str, args: list[np.ndarray]) -> np.ndarray:
    if not _typed(*args) or (func in ("max", "min") and len({a.dtype.kind for a in args}) > 1):
        return _elementwise(lambda *row: _call(func, list(row)), *args)
    if func == "max":
        return np.maximum.reduce(args) if len(args) > 1 else args[0]
    if func == "min":
        return np.minimum.reduce(args) if len(args) > 1 else args[0]
    if func == "abs":
        return np.abs(args[0])
    if func == "floor":
        a = args[0]
        return a if a.dtype.kind == "i" else np.floor(a).astype(np.int64)
    raise ExprError(f"unknown function {func!r}")


def _merge(size: int, mask: np.ndarray, yes: np.ndarray, no: np.ndarray) -> np.ndarray:
    if yes.dtype == no.dtype and yes.dtype != object:
        out = np.empty(size, dtype=yes.dtype)
        out[mask] = yes
        out[~mask] = no
        return out
    out = np.empty(size, dtype=object)
    out[mask] = yes.tolist() if len(yes) else []
    out[~mask] = no.tolist() if len(no) else []
    return as_value_array(out.tolist())


def _literal(value: Value, size: int) -> np.ndarray:
    if isinstance(value, str):
        out = np.empty(size, dtype=object)
        out[:] = value
        return out
    return np.full(size, value, dtype=np.int64 if _is_int(value) else np.float64)


def eval_array(expr: Expr, parents: Mapping[str, np.ndarray], noise: np.ndarray) -> np.ndarray:
    """Evaluate ``expr`` over columns; row ``i`` equals ``eval_expr`` on row ``i``."""
    noise = as_value_array(noise)
    return _eval_cols(expr, {k: as_value_array(v) for k, v in parents.items()}, noise, len(noise))


def _eval_cols(expr: Expr, parents: Mapping[str, np.ndarray], noise: np.ndarray, size: int) -> np.ndarray:
    if isinstance(expr, (Num, Str)):
        return _literal(expr.value, size)
    if isinstance(expr, Sym):
        return _lookup(expr.name, parents, noise)  # type: ignore[return-value]
    if isinstance(expr, Unary):
        v = _eval_cols(expr.operand, parents, noise, size)
        if expr.op == "not":
            return 1 - _check_truth("not", v)
        if not _typed(v):
            return _elementwise(_neg, v)
        return -v
    if isinstance(expr, Binary):
        return _binary_array(
            expr.op, _eval_cols(expr.left, parents, noise, size), _eval_cols(expr.right, parents, noise, size)
        )
    if isinstance(expr, Call):
        if expr.func == "if":
            mask = _check_truth("if", _eval_cols(expr.args[0], parents, noise, size)) == 1
            sub_yes = {k: v[mask] for k, v in parents.items()}
            sub_no = {k: v[~mask] for k, v in parents.items()}
            yes = _eval_cols(expr.args[1], sub_yes, noise[mask], int(mask.sum()))
            no = _eval_cols(expr.args[2], sub_no, noise[~mask], size - int(mask.sum()))
            return _merge(size, mask, yes, no)
        return _call_array(expr.func, [_eval_cols(a, parents, noise, size) for a in expr.args])
    raise TypeError(f"not an expression node: {expr!r}")
