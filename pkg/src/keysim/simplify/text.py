"""Canonical token rendering of expressions, and its inverse parser.

Grammar (precedence low to high, all binary operators left-associative)::

    |   ^   &   << >> s>>   + -   *   unary ~ -

Atoms: ``var<n>``, ``init_<reg>``, ``0x<hex>``, ``ret(<callee>[#n][:reg])``,
``mem<w>(e)``, ``zext<w>(e)``, ``sext<w>(e)``, ``trunc<w>(e)``, ``iter(e)``.
A cast whose operand has no width-bearing leaf (only constants, possibly
under ``iter``) also names the operand width: ``zext64_32(iter(0x1))``.
"""

from __future__ import annotations

import re
from functools import lru_cache

from keysim.expr import (
    BinKind,
    BinOp,
    Const,
    Expr,
    Ext,
    Iter,
    Loc,
    Mem,
    Reg,
    Ret,
    Trunc,
    UnKind,
    UnOp,
    Var,
    make_iter,
)

PRECEDENCE = {
    BinKind.OR: 0,
    BinKind.XOR: 1,
    BinKind.AND: 2,
    BinKind.SHL: 3,
    BinKind.SHR: 3,
    BinKind.SAR: 3,
    BinKind.ADD: 4,
    BinKind.SUB: 4,
    BinKind.MUL: 5,
}
_ATOM_PREC = 10

# rank used when ordering operands of commutative operators; constants last
KIND_RANK = {Var: 0, Reg: 1, Ret: 2, Mem: 3, Iter: 4, Ext: 5, Trunc: 5, UnOp: 6, BinOp: 7, Loc: 8, Const: 9}


class ExprSyntaxError(ValueError):
    pass


def _ret_text(e: Ret) -> str:
    inner = e.callee
    if e.site:
        inner += f"#{e.site}"
    if e.reg:
        inner += f":{e.reg}"
    return f"ret({inner})"


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return PRECEDENCE[e.kind]
    if isinstance(e, UnOp):
        return 6
    return _ATOM_PREC


def _width_in_text(e: Expr) -> bool:
    """Whether the parser can recover ``e``'s width from its own text."""
    if isinstance(e, Const):
        return False
    if isinstance(e, (Iter, UnOp)):
        return _width_in_text(e.children()[0])
    if isinstance(e, BinOp):
        return _width_in_text(e.lhs) or _width_in_text(e.rhs)
    return True


def _cast_head(name: str, e: Ext | Trunc) -> str:
    if _width_in_text(e.arg):
        return f"{name}{e.width}"
    return f"{name}{e.width}_{e.arg.width}"


@lru_cache(maxsize=1 << 16)
def canonical_text(e: Expr) -> str:
    if isinstance(e, Var):
        return f"var{e.index}"
    if isinstance(e, Reg):
        return f"init_{e.name}"
    if isinstance(e, Loc):
        return f"${e.name}"
    if isinstance(e, Const):
        return f"{e.value:#x}"
    if isinstance(e, Ret):
        return _ret_text(e)
    if isinstance(e, Mem):
        return f"mem{e.width}({canonical_text(e.addr)})"
    if isinstance(e, Iter):
        return f"iter({canonical_text(e.body)})"
    if isinstance(e, Ext):
        return f"{_cast_head('sext' if e.signed else 'zext', e)}({canonical_text(e.arg)})"
    if isinstance(e, Trunc):
        return f"{_cast_head('trunc', e)}({canonical_text(e.arg)})"
    if isinstance(e, UnOp):
        inner = canonical_text(e.arg)
        if isinstance(e.arg, BinOp):
            inner = f"({inner})"
        return f"{e.kind.value}{inner}"
    if isinstance(e, BinOp):
        p = PRECEDENCE[e.kind]
        left = canonical_text(e.lhs)
        if _prec(e.lhs) < p:
            left = f"({left})"
        right = canonical_text(e.rhs)
        if _prec(e.rhs) <= p:
            right = f"({right})"
        return f"{left} {e.kind.value} {right}"
    raise TypeError(f"cannot render {type(e).__name__}")


def sort_key(e: Expr) -> tuple[int, str]:
    return (KIND_RANK[type(e)], canonical_text(e))


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<ret>ret\([^()\s]+\))
      | (?P<func>(?:mem|zext|sext|trunc)\d+(?:_\d+)?|iter)\(
      | (?P<var>var\d+)
      | (?P<init>init_[A-Za-z0-9_@.]+)
      | (?P<hex>0x[0-9a-f]+)
      | (?P<op>s>>|<<|>>|[-+*&|^~()])
    )""",
    re.VERBOSE,
)


def tokenize(text: str) -> list[str]:
    """Split canonical text into tokens; function heads keep their '('."""
    tokens: list[str] = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
        tokens.append(m.group(m.lastgroup) + ("(" if m.lastgroup == "func" else ""))
        pos = m.end()
    return tokens


_BINARY = {k.value: k for k in BinKind}
_RET_RE = re.compile(r"ret\((?P<callee>[^#:()]+)(?:#(?P<site>\d+))?(?::(?P<reg>\w+))?\)")


class _Parser:
    # parse into an untyped tree first; widths are resolved afterwards
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ExprSyntaxError(f"expected {expected or 'token'}, got {tok!r}")
        self.i += 1
        return tok

    def expr(self, min_prec: int = 0):
        lhs = self.unary()
        while True:
            tok = self.peek()
            kind = _BINARY.get(tok) if tok else None
            if kind is None or PRECEDENCE[kind] < min_prec:
                return lhs
            self.take()
            rhs = self.expr(PRECEDENCE[kind] + 1)
            lhs = ("bin", kind, lhs, rhs)

    def unary(self):
        tok = self.peek()
        if tok == "~":
            self.take()
            return ("un", UnKind.NOT, self.unary())
        if tok == "-":
            self.take()
            return ("un", UnKind.NEG, self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        if tok == "(":
            inner = self.expr()
            self.take(")")
            return inner
        if tok.endswith("("):
            inner = self.expr()
            self.take(")")
            return ("func", tok[:-1], inner)
        if tok.startswith("var"):
            return ("var", int(tok[3:]))
        if tok.startswith("init_"):
            return ("init", tok[5:])
        if tok.startswith("0x"):
            return ("const", int(tok, 16))
        if tok.startswith("ret("):
            m = _RET_RE.fullmatch(tok)
            if m is None:
                raise ExprSyntaxError(f"malformed ret token {tok!r}")
            return ("ret", m["callee"], int(m["site"] or 0), m["reg"])
        raise ExprSyntaxError(f"unexpected token {tok!r}")


def _intrinsic(node, base: int) -> int | None:
    tag = node[0]
    if tag in ("var", "init", "ret"):
        return base
    if tag == "const":
        return None
    if tag == "func":
        name = node[1]
        if name == "iter":
            return _intrinsic(node[2], base)
        return int(re.sub(r"^\D+", "", name).split("_")[0])
    if tag == "un":
        return _intrinsic(node[2], base)
    if tag == "bin":
        w = _intrinsic(node[2], base)
        return w if w is not None else _intrinsic(node[3], base)
    raise AssertionError(tag)


def _build(node, width: int, base: int) -> Expr:
    tag = node[0]
    if tag == "var":
        return Var(node[1], width)
    if tag == "init":
        return Reg(node[1], width)
    if tag == "ret":
        return Ret(node[1], node[2], node[3], width)
    if tag == "const":
        return Const(node[1], width)
    if tag == "un":
        return UnOp(node[1], _build(node[2], width, base))
    if tag == "bin":
        return BinOp(node[1], _build(node[2], width, base), _build(node[3], width, base))
    name, inner = node[1], node[2]
    if name == "iter":
        return make_iter(_build(inner, width, base))
    head, _, source = name.partition("_")
    inner_w = int(source) if source else _intrinsic(inner, base) or base
    name = head
    if name.startswith("mem"):
        return Mem(_build(inner, inner_w, base), width)
    arg = _build(inner, inner_w, base)
    if name.startswith("zext"):
        return Ext(arg, width)
    if name.startswith("sext"):
        return Ext(arg, width, signed=True)
    return Trunc(arg, width)


def parse_expr(text: str, width: int | None = None, base: int = 64) -> Expr:
    """Parse canonical text back into an expression.

    ``base`` is the width of parameter, register-seed and callee-result
    leaves (64 for x86-64, 32 for ARM32). ``width`` forces the root width,
    which is only needed for a bare constant.
    """
    parser = _Parser(tokenize(text))
    tree = parser.expr()
    if parser.peek() is not None:
        raise ExprSyntaxError(f"trailing tokens starting at {parser.peek()!r}")
    if width is None:
        width = _intrinsic(tree, base) or base
    try:
        return _build(tree, width, base)
    except ValueError as exc:
        raise ExprSyntaxError(str(exc)) from None
