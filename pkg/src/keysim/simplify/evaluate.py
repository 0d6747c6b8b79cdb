from __future__ import annotations

from typing import Callable, Mapping

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
    mask,
)
from keysim.simplify.text import canonical_text


class UnboundLeafError(KeyError):
    """A symbolic leaf had no concrete binding."""


def to_signed(value: int, width: int) -> int:
    return value - (1 << width) if value >> (width - 1) else value


def binop_value(kind: BinKind, a: int, b: int, width: int) -> int:
    m = mask(width)
    if kind is BinKind.ADD:
        return (a + b) & m
    if kind is BinKind.SUB:
        return (a - b) & m
    if kind is BinKind.MUL:
        return (a * b) & m
    if kind is BinKind.AND:
        return a & b
    if kind is BinKind.OR:
        return a | b
    if kind is BinKind.XOR:
        return a ^ b
    # shift amounts at or beyond the width saturate, as in SMT-LIB
    if kind is BinKind.SHL:
        return (a << b) & m if b < width else 0
    if kind is BinKind.SHR:
        return a >> b if b < width else 0
    if kind is BinKind.SAR:
        return (to_signed(a, width) >> min(b, width - 1)) & m
    raise AssertionError(kind)


def unop_value(kind: UnKind, a: int, width: int) -> int:
    if kind is UnKind.NOT:
        return ~a & mask(width)
    return -a & mask(width)


LeafFn = Callable[[Expr], int]


def evaluate(e: Expr, leaf: LeafFn, memory: Callable[[int, int], int] | None = None) -> int:
    """Evaluate with a callback for leaves; ``memory(addr, width)`` for MEM."""
    cache: dict[Expr, int] = {}

    def go(node: Expr) -> int:
        hit = cache.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Const):
            out = node.value
        elif isinstance(node, BinOp):
            out = binop_value(node.kind, go(node.lhs), go(node.rhs), node.width)
        elif isinstance(node, UnOp):
            out = unop_value(node.kind, go(node.arg), node.width)
        elif isinstance(node, Trunc):
            out = go(node.arg) & mask(node.width)
        elif isinstance(node, Ext):
            v = go(node.arg)
            if node.signed:
                v = to_signed(v, node.arg.width)
            out = v & mask(node.width)
        elif isinstance(node, Iter):
            out = go(node.body)
        elif isinstance(node, Mem) and memory is not None:
            out = memory(go(node.addr), node.width) & mask(node.width)
        else:
            out = leaf(node) & mask(node.width)
        cache[node] = out
        return out

    return go(e)


def eval_concrete(
    e: Expr,
    bindings: Mapping[str, int],
    memory: Callable[[int, int], int] | None = None,
) -> int:
    """Modular evaluation of ``e`` at its declared widths.

    Leaves are looked up in ``bindings`` by canonical text: ``var0``,
    ``init_rbx``, ``ret(f)``, and ``mem64(var0 + 0x8)`` for MEM leaves. When
    ``memory`` is given, MEM leaves are instead read from it at their
    concrete address.
    """

    def leaf(node: Expr) -> int:
        if isinstance(node, Loc):
            key = f"${node.name}"
        elif isinstance(node, (Var, Reg, Ret, Mem)):
            key = canonical_text(node)
        else:
            raise TypeError(f"not a leaf: {node!r}")
        try:
            return bindings[key]
        except KeyError:
            raise UnboundLeafError(key) from None

    return evaluate(e, leaf, memory)


def leaf_names(e: Expr) -> set[str]:
    """Binding keys ``eval_concrete`` needs for ``e`` (without a memory map)."""
    out = set()
    for node in e.walk():
        if isinstance(node, (Var, Reg, Ret, Mem)):
            out.add(canonical_text(node))
    return out
