"""Rewrite rules over modular bitvector expressions.

Each rule inspects the root of an expression whose children are already in
normal form and returns a replacement, or None when it does not apply. All
rules are semantics-preserving modulo 2**width.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable

from keysim.expr import (
    BinKind,
    BinOp,
    Const,
    Expr,
    Ext,
    Trunc,
    UnKind,
    UnOp,
    mask,
)
from keysim.simplify.evaluate import binop_value, to_signed, unop_value
from keysim.simplify.text import sort_key


@dataclass(frozen=True)
class RewriteRule:
    name: str
    pattern: str
    replacement: str
    apply: Callable[[Expr], Expr | None]
    condition: str = ""


def _fold_binop(e: Expr):
    if isinstance(e, BinOp) and isinstance(e.lhs, Const) and isinstance(e.rhs, Const):
        return Const(binop_value(e.kind, e.lhs.value, e.rhs.value, e.width), e.width)
    return None


def _fold_unop(e: Expr):
    if isinstance(e, UnOp) and isinstance(e.arg, Const):
        return Const(unop_value(e.kind, e.arg.value, e.width), e.width)
    return None


def _fold_cast(e: Expr):
    if isinstance(e, Trunc) and isinstance(e.arg, Const):
        return Const(e.arg.value, e.width)
    if isinstance(e, Ext) and isinstance(e.arg, Const):
        v = to_signed(e.arg.value, e.arg.width) if e.signed else e.arg.value
        return Const(v, e.width)
    return None


_SHIFTS = (BinKind.SHL, BinKind.SHR, BinKind.SAR)


def _shift_zero(e: Expr):
    if isinstance(e, BinOp) and e.kind in _SHIFTS and isinstance(e.rhs, Const) and e.rhs.value == 0:
        return e.lhs
    return None


def _shift_overflow(e: Expr):
    if not (isinstance(e, BinOp) and e.kind in _SHIFTS and isinstance(e.rhs, Const)):
        return None
    if e.rhs.value < e.width:
        return None
    if e.kind is BinKind.SAR:
        if e.rhs.value == e.width - 1:
            return None
        return BinOp(BinKind.SAR, e.lhs, Const(e.width - 1, e.width))
    return Const(0, e.width)


def _not_not(e: Expr):
    if isinstance(e, UnOp) and e.kind is UnKind.NOT and isinstance(e.arg, UnOp) and e.arg.kind is UnKind.NOT:
        return e.arg.arg
    return None


# ---- linear (add/sub/neg/mul-by-constant/shl-by-constant) normal form ----

_LINEAR = (BinKind.ADD, BinKind.SUB, BinKind.MUL, BinKind.SHL)


def _is_linear_root(e: Expr) -> bool:
    if isinstance(e, UnOp):
        return e.kind is UnKind.NEG
    if isinstance(e, BinOp):
        if e.kind is BinKind.SHL:
            return isinstance(e.rhs, Const) and 0 < e.rhs.value < e.width
        return e.kind in _LINEAR
    return False


def _product(factors: list[Expr]) -> Expr:
    factors = sorted(factors, key=sort_key)
    out = factors[0]
    for f in factors[1:]:
        out = BinOp(BinKind.MUL, out, f)
    return out


def _mul_factors(e: Expr, out: list[Expr]) -> int:
    """Flatten a MUL chain into ``out``; return the product of constants."""
    if isinstance(e, BinOp) and e.kind is BinKind.MUL:
        return _mul_factors(e.lhs, out) * _mul_factors(e.rhs, out)
    if isinstance(e, Const):
        return e.value
    out.append(e)
    return 1


def _collect(e: Expr, coef: int, terms: dict[Expr, int], acc: list[int]) -> None:
    m = mask(e.width)
    coef &= m
    if coef == 0:
        return
    if isinstance(e, Const):
        acc[0] = (acc[0] + coef * e.value) & m
    elif isinstance(e, BinOp) and e.kind is BinKind.ADD:
        _collect(e.lhs, coef, terms, acc)
        _collect(e.rhs, coef, terms, acc)
    elif isinstance(e, BinOp) and e.kind is BinKind.SUB:
        _collect(e.lhs, coef, terms, acc)
        _collect(e.rhs, -coef, terms, acc)
    elif isinstance(e, UnOp) and e.kind is UnKind.NEG:
        _collect(e.arg, -coef, terms, acc)
    elif isinstance(e, BinOp) and e.kind is BinKind.SHL and isinstance(e.rhs, Const) and e.rhs.value < e.width:
        _collect(e.lhs, coef << e.rhs.value, terms, acc)
    elif isinstance(e, BinOp) and e.kind is BinKind.MUL:
        if isinstance(e.rhs, Const):
            _collect(e.lhs, coef * e.rhs.value, terms, acc)
        elif isinstance(e.lhs, Const):
            _collect(e.rhs, coef * e.lhs.value, terms, acc)
        else:
            factors: list[Expr] = []
            c = _mul_factors(e, factors)
            if not factors:
                acc[0] = (acc[0] + coef * c) & m
            elif len(factors) == 1:
                _collect(factors[0], coef * c, terms, acc)
            else:
                term = _product(factors)
                terms[term] = (terms.get(term, 0) + coef * c) & m
    else:
        terms[e] = (terms.get(e, 0) + coef) & m


def _scaled(term: Expr, coef: int) -> Expr:
    return term if coef == 1 else BinOp(BinKind.MUL, term, Const(coef, term.width))


def linear_form(e: Expr) -> Expr:
    w = e.width
    terms: dict[Expr, int] = {}
    acc = [0]
    _collect(e, 1, terms, acc)
    half = 1 << (w - 1)
    full = 1 << w
    pos, neg = [], []
    for term in sorted((t for t, c in terms.items() if c), key=sort_key):
        c = terms[term]
        # half is its own negation; keeping it positive avoids a rewrite cycle
        if c <= half:
            pos.append(_scaled(term, c))
        else:
            neg.append(_scaled(term, full - c))
    const = acc[0]
    if pos:
        out = pos[0]
        for t in pos[1:]:
            out = BinOp(BinKind.ADD, out, t)
    elif const and neg:
        out = Const(const, w)
        const = 0
    elif neg:
        out = UnOp(UnKind.NEG, neg.pop(0))
    else:
        return Const(const, w)
    for t in neg:
        out = BinOp(BinKind.SUB, out, t)
    if const:
        if const <= half:
            out = BinOp(BinKind.ADD, out, Const(const, w))
        else:
            out = BinOp(BinKind.SUB, out, Const(full - const, w))
    return out


def _linear(e: Expr):
    if not _is_linear_root(e):
        return None
    out = linear_form(e)
    return None if out == e else out


# ---- and/or/xor chains ----

_BITWISE = (BinKind.AND, BinKind.OR, BinKind.XOR)


def _flatten(e: Expr, kind: BinKind, out: list[Expr]) -> None:
    if isinstance(e, BinOp) and e.kind is kind:
        _flatten(e.lhs, kind, out)
        _flatten(e.rhs, kind, out)
    else:
        out.append(e)


def bitwise_form(e: BinOp) -> Expr:
    kind, w = e.kind, e.width
    ones = mask(w)
    items: list[Expr] = []
    _flatten(e, kind, items)
    const = ones if kind is BinKind.AND else 0
    terms: list[Expr] = []
    for item in items:
        if isinstance(item, Const):
            const = binop_value(kind, const, item.value, w)
        elif kind is BinKind.XOR and isinstance(item, UnOp) and item.kind is UnKind.NOT:
            const ^= ones
            terms.append(item.arg)
        else:
            terms.append(item)
    if kind is BinKind.XOR:
        counts = Counter(terms)
        terms = [t for t, n in counts.items() if n % 2]
    else:
        terms = list(dict.fromkeys(terms))
        present = set(terms)
        if any(isinstance(t, UnOp) and t.kind is UnKind.NOT and t.arg in present for t in terms):
            return Const(0 if kind is BinKind.AND else ones, w)
    if kind is BinKind.AND and const == 0 or kind is BinKind.OR and const == ones:
        return Const(const, w)
    terms.sort(key=sort_key)
    negate = False
    if kind is BinKind.XOR and const == ones and terms:
        negate, const = True, 0
    identity = ones if kind is BinKind.AND else 0
    if not terms:
        return Const(const, w)
    out = terms[0]
    for t in terms[1:]:
        out = BinOp(kind, out, t)
    if const != identity:
        out = BinOp(kind, out, Const(const, w))
    return UnOp(UnKind.NOT, out) if negate else out


def _bitwise(e: Expr):
    if not (isinstance(e, BinOp) and e.kind in _BITWISE):
        return None
    out = bitwise_form(e)
    return None if out == e else out


_LOW_MASKS = {0xFF: 8, 0xFFFF: 16, 0xFFFFFFFF: 32}


def _mask_to_zext(e: Expr):
    if isinstance(e, BinOp) and e.kind is BinKind.AND and isinstance(e.rhs, Const):
        narrow = _LOW_MASKS.get(e.rhs.value)
        if narrow is not None and narrow < e.width:
            return Ext(Trunc(e.lhs, narrow), e.width)
    return None


# ---- width casts ----


def _cast_cast(e: Expr):
    if isinstance(e, Trunc):
        inner = e.arg
        if isinstance(inner, Trunc):
            return Trunc(inner.arg, e.width)
        if isinstance(inner, Ext):
            src = inner.arg
            if src.width == e.width:
                return src
            if src.width > e.width:
                return Trunc(src, e.width)
            return Ext(src, e.width, inner.signed)
    if isinstance(e, Ext) and isinstance(e.arg, Ext) and e.arg.signed == e.signed:
        return Ext(e.arg.arg, e.width, e.signed)
    return None


_TRUNC_DISTRIBUTES = (BinKind.ADD, BinKind.SUB, BinKind.MUL, BinKind.AND, BinKind.OR, BinKind.XOR)


def _trunc_distribute(e: Expr):
    if not isinstance(e, Trunc):
        return None
    inner = e.arg
    if isinstance(inner, BinOp) and inner.kind in _TRUNC_DISTRIBUTES:
        return BinOp(inner.kind, Trunc(inner.lhs, e.width), Trunc(inner.rhs, e.width))
    if isinstance(inner, UnOp):
        return UnOp(inner.kind, Trunc(inner.arg, e.width))
    return None


RULES: tuple[RewriteRule, ...] = (
    RewriteRule("fold-binop", "c1 op c2", "c", _fold_binop),
    RewriteRule("fold-unop", "op c", "c", _fold_unop),
    RewriteRule("fold-cast", "ext/trunc(c)", "c", _fold_cast),
    RewriteRule("shift-zero", "x shift 0", "x", _shift_zero),
    RewriteRule("shift-overflow", "x shift c", "0 | x s>> (w-1)", _shift_overflow, "c >= width"),
    RewriteRule("not-not", "~~x", "x", _not_not),
    RewriteRule(
        "linear-normalize",
        "sum of c_i * t_i + c over + - neg *c <<c",
        "sorted terms, coefficients merged, constant last",
        _linear,
    ),
    RewriteRule(
        "bitwise-normalize",
        "x1 op ... op xn op c, op in & | ^",
        "sorted deduplicated terms, identities and annihilators applied",
        _bitwise,
    ),
    RewriteRule("mask-to-zext", "x & 0xff..", "zext(trunc(x))", _mask_to_zext, "mask narrower than x"),
    RewriteRule("cast-cast", "trunc/ext(trunc/ext(x))", "single cast or x", _cast_cast),
    RewriteRule("trunc-distribute", "trunc(a op b)", "trunc(a) op trunc(b)", _trunc_distribute, "op in + - * & | ^ ~ neg"),
)

RULES_BY_NAME = {r.name: r for r in RULES}
