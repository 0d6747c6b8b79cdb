"""Immutable symbolic bitvector expressions.

Every node carries a bit width. Nodes are hash-consed lazily: the hash of a
node is computed once from its children's cached hashes, so deep trees stay
cheap to use as dict keys.
"""

from __future__ import annotations

import enum
from typing import Iterator

WIDTHS = (8, 16, 32, 64)


def mask(width: int) -> int:
    return (1 << width) - 1


class BinKind(enum.Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    AND = "&"
    OR = "|"
    XOR = "^"
    SHL = "<<"
    SHR = ">>"
    SAR = "s>>"


class UnKind(enum.Enum):
    NOT = "~"
    NEG = "-"


COMMUTATIVE = frozenset({BinKind.ADD, BinKind.MUL, BinKind.AND, BinKind.OR, BinKind.XOR})


class Expr:
    __slots__ = ("width", "_hash")

    width: int

    def _key(self) -> tuple:
        raise NotImplementedError

    def children(self) -> tuple["Expr", ...]:
        return ()

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        assert isinstance(other, Expr)
        return self._hash == other._hash and self._key() == other._key()

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _init(self, width: int) -> None:
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "_hash", hash((type(self).__name__,) + self._key()))

    def walk(self) -> Iterator["Expr"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children())

    def __repr__(self) -> str:
        from keysim.simplify.text import canonical_text

        return f"<{type(self).__name__} {canonical_text(self)}>"


def _check_width(width: int) -> None:
    if width not in WIDTHS:
        raise ValueError(f"unsupported width {width}")


class Var(Expr):
    """Parameter seed: the function's ``index``-th argument at entry."""

    __slots__ = ("index",)

    def __init__(self, index: int, width: int = 64):
        _check_width(width)
        object.__setattr__(self, "index", index)
        self._init(width)

    def _key(self):
        return (self.index, self.width)


class Reg(Expr):
    """Seed for a register read before any write (not a parameter)."""

    __slots__ = ("name",)

    def __init__(self, name: str, width: int = 64):
        _check_width(width)
        object.__setattr__(self, "name", name)
        self._init(width)

    def _key(self):
        return (self.name, self.width)


class Loc(Expr):
    """Template leaf: current value of a register or temporary.

    Only appears in lifted micro-op templates, never in symbolic values.
    """

    __slots__ = ("name",)

    def __init__(self, name: str, width: int):
        _check_width(width)
        object.__setattr__(self, "name", name)
        self._init(width)

    def _key(self):
        return (self.name, self.width)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: int, width: int = 64):
        _check_width(width)
        object.__setattr__(self, "value", value & mask(width))
        self._init(width)

    def _key(self):
        return (self.value, self.width)

    @property
    def signed(self) -> int:
        if self.value >> (self.width - 1):
            return self.value - (1 << self.width)
        return self.value


class BinOp(Expr):
    __slots__ = ("kind", "lhs", "rhs")

    def __init__(self, kind: BinKind, lhs: Expr, rhs: Expr):
        if lhs.width != rhs.width:
            raise ValueError(f"width mismatch in {kind.name}: {lhs.width} vs {rhs.width}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)
        self._init(lhs.width)

    def _key(self):
        return (self.kind, self.lhs, self.rhs)

    def children(self):
        return (self.lhs, self.rhs)


class UnOp(Expr):
    __slots__ = ("kind", "arg")

    def __init__(self, kind: UnKind, arg: Expr):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "arg", arg)
        self._init(arg.width)

    def _key(self):
        return (self.kind, self.arg)

    def children(self):
        return (self.arg,)


class Mem(Expr):
    """Initial memory content at ``addr`` (a read that hit no prior store)."""

    __slots__ = ("addr",)

    def __init__(self, addr: Expr, width: int):
        _check_width(width)
        object.__setattr__(self, "addr", addr)
        self._init(width)

    def _key(self):
        return (self.addr, self.width)

    def children(self):
        return (self.addr,)


class Ret(Expr):
    """Value produced by an unanalyzed callee.

    ``site`` is the ordinal of the call site among the function's calls to
    the same callee (address order), so values stay comparable across
    binaries. ``reg`` tags clobbered non-return registers.
    """

    __slots__ = ("callee", "site", "reg")

    def __init__(self, callee: str, site: int = 0, reg: str | None = None, width: int = 64):
        _check_width(width)
        object.__setattr__(self, "callee", callee)
        object.__setattr__(self, "site", site)
        object.__setattr__(self, "reg", reg)
        self._init(width)

    def _key(self):
        return (self.callee, self.site, self.reg, self.width)


class Iter(Expr):
    """Marks a value that changes from one loop iteration to the next."""

    __slots__ = ("body",)

    def __init__(self, body: Expr):
        if isinstance(body, Iter):
            raise ValueError("ITER may not directly wrap ITER; use make_iter()")
        object.__setattr__(self, "body", body)
        self._init(body.width)

    def _key(self):
        return (self.body,)

    def children(self):
        return (self.body,)


class Ext(Expr):
    __slots__ = ("signed", "arg")

    def __init__(self, arg: Expr, width: int, signed: bool = False):
        _check_width(width)
        if width <= arg.width:
            raise ValueError(f"extension must widen: {arg.width} -> {width}")
        object.__setattr__(self, "signed", signed)
        object.__setattr__(self, "arg", arg)
        self._init(width)

    def _key(self):
        return (self.signed, self.arg, self.width)

    def children(self):
        return (self.arg,)


class Trunc(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr, width: int):
        _check_width(width)
        if width >= arg.width:
            raise ValueError(f"truncation must narrow: {arg.width} -> {width}")
        object.__setattr__(self, "arg", arg)
        self._init(width)

    def _key(self):
        return (self.arg, self.width)

    def children(self):
        return (self.arg,)


def make_iter(e: Expr) -> Expr:
    return e if isinstance(e, Iter) else Iter(e)


def zext(e: Expr, width: int) -> Expr:
    if e.width == width:
        return e
    if e.width > width:
        return Trunc(e, width)
    return Ext(e, width)


def sext(e: Expr, width: int) -> Expr:
    if e.width == width:
        return e
    if e.width > width:
        return Trunc(e, width)
    return Ext(e, width, signed=True)


def trunc(e: Expr, width: int) -> Expr:
    return e if e.width == width else Trunc(e, width)


def rebuild(e: Expr, children: tuple[Expr, ...]) -> Expr:
    """Return ``e`` with its children replaced (identity if unchanged)."""
    old = e.children()
    if all(a is b for a, b in zip(old, children)):
        return e
    if isinstance(e, BinOp):
        return BinOp(e.kind, *children)
    if isinstance(e, UnOp):
        return UnOp(e.kind, children[0])
    if isinstance(e, Mem):
        return Mem(children[0], e.width)
    if isinstance(e, Iter):
        return make_iter(children[0])
    if isinstance(e, Ext):
        return Ext(children[0], e.width, e.signed)
    if isinstance(e, Trunc):
        return Trunc(children[0], e.width)
    raise TypeError(f"leaf {e!r} has no children")


def substitute(e: Expr, fn) -> Expr:
    """Bottom-up rewrite: ``fn(node)`` returns a replacement or None."""
    memo: dict[Expr, Expr] = {}

    def go(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        kids = node.children()
        out = rebuild(node, tuple(go(k) for k in kids)) if kids else node
        repl = fn(out)
        if repl is not None:
            out = repl
        memo[node] = out
        return out

    return go(e)


def contains_nested_iter(e: Expr) -> bool:
    return any(isinstance(n, Iter) and isinstance(n.body, Iter) for n in e.walk())
