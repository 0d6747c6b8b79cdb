import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keysim.expr import BinKind, BinOp, Const, Ext, Iter, Mem, Reg, Ret, Trunc, UnKind, UnOp, Var, make_iter
from keysim.simplify import (
    ExprSyntaxError,
    UnboundLeafError,
    canonical_text,
    eval_concrete,
    evaluate,
    parse_expr,
    simplify,
    simplify_with_stats,
)

from oracles import HashedValuation, random_expr, ref_eval
from simplify_checks import check_global, check_rules

V0, V1 = Var(0), Var(1)


def add(a, b):
    return BinOp(BinKind.ADD, a, b)


def c(v, w=64):
    return Const(v, w)


def text(e):
    return canonical_text(simplify(e))


def test_identity_element():
    assert simplify(add(V0, c(0))) == V0


def test_constant_folding():
    assert text(add(add(V0, c(3)), c(5))) == "var0 + 0x8"


def test_xor_cancellation_matches_exhaustive_8bit_evaluation():
    a, b = Var(0, 8), Var(1, 8)
    e = BinOp(BinKind.XOR, BinOp(BinKind.XOR, a, b), b)
    s = simplify(e)
    assert s == a
    for x, y in itertools.product(range(256), repeat=2):
        env = {"var0": x, "var1": y}
        assert eval_concrete(e, env) == x


def test_commutative_operands_get_one_text():
    assert text(add(V1, V0)) == text(add(V0, V1)) == "var0 + var1"


def test_fixed_grammar():
    assert canonical_text(Mem(add(V0, c(8)), 64)) == "mem64(var0 + 0x8)"
    assert canonical_text(make_iter(add(V0, c(1)))) == "iter(var0 + 0x1)"
    assert canonical_text(Ret("f", 2, "rcx")) == "ret(f#2:rcx)"
    assert canonical_text(Reg("rbx")) == "init_rbx"


def test_eval_examples():
    assert eval_concrete(add(V0, c(8)), {"var0": 5}) == 13
    assert eval_concrete(Trunc(c(0x1_0000_0005), 32), {}) == 5


def test_shift_pair_is_not_collapsed():
    e = BinOp(BinKind.SHR, BinOp(BinKind.MUL, V0, c(2)), c(1))
    env = {"var0": 0x8000000000000001}
    assert eval_concrete(e, env) != env["var0"]
    s = simplify(e)
    assert s != V0
    assert eval_concrete(s, env) == eval_concrete(e, env)


def test_unbound_leaf_is_named():
    with pytest.raises(UnboundLeafError) as err:
        eval_concrete(add(V0, Var(3)), {"var0": 1})
    assert "var3" in str(err.value)


def test_iter_is_opaque_to_arithmetic():
    e = add(make_iter(add(V0, c(1))), c(0))
    assert text(e) == "iter(var0 + 0x1)"
    # constants outside the marker are not merged into it
    assert text(add(make_iter(add(V0, c(1))), c(2))) == "iter(var0 + 0x1) + 0x2"
    assert make_iter(make_iter(V0)) == Iter(V0)


def test_half_modulus_coefficient_terminates():
    e = BinOp(BinKind.SHL, Var(1, 32), Const(31, 32))
    r = simplify_with_stats(e)
    assert not r.exhausted
    assert canonical_text(r.expr) == "var1 * 0x80000000"


def test_budget_exhaustion_returns_best_so_far():
    e = add(add(add(V0, c(1)), c(2)), c(3))
    r = simplify_with_stats(e, budget=1)
    assert r.exhausted and r.firings == 1
    env = {"var0": 7}
    assert eval_concrete(r.expr, env) == eval_concrete(e, env)


def test_constant_only_casts_name_their_source_width():
    e = Ext(add(make_iter(Const(1, 32)), Const(3, 32)), 64)
    t = canonical_text(e)
    assert t == "zext64_32(iter(0x1) + 0x3)"
    assert parse_expr(t) == e


def test_parse_errors():
    for bad in ("var0 +", "zext64(init_rbx)", "foo(1)", "var0 ) "):
        with pytest.raises(ExprSyntaxError):
            parse_expr(bad)


def test_parse_respects_base_width():
    e = parse_expr("var0 + mem32(var1)", base=32)
    assert e.width == 32 and e == add(Var(0, 32), Mem(Var(1, 32), 32))


def test_library_evaluator_matches_reference():
    rng = random.Random(2)
    for _ in range(300):
        e = random_expr(rng, rng.choice((8, 16, 32, 64)), 6)
        v = HashedValuation(rng.getrandbits(16))
        assert evaluate(e, v.leaf, v.memory) == ref_eval(e, v.leaf, v.memory)


def test_rules_sound_small():
    counts, bad = check_rules(valuations_per_cell=60)
    assert bad == []
    assert sum(counts.values()) > 200


def test_global_soundness_small():
    n, bad = check_global(count=120, vals_each=6, seed=4)
    assert n == 360 and bad == []


# ---- properties ----

seeds = st.integers(0, 2**32 - 1)
widths = st.sampled_from((8, 16, 32, 64))


@settings(max_examples=200, deadline=None)
@given(seeds, widths)
def test_simplify_preserves_value(seed, width):
    rng = random.Random(seed)
    e = random_expr(rng, width, 7)
    s = simplify(e)
    for k in range(3):
        v = HashedValuation(seed + k)
        assert eval_concrete(s, v.bindings(), v.memory) == eval_concrete(e, v.bindings(), v.memory)


@settings(max_examples=200, deadline=None)
@given(seeds, widths)
def test_simplify_is_idempotent(seed, width):
    s = simplify(random_expr(random.Random(seed), width, 7))
    assert simplify(s) == s


@settings(max_examples=300, deadline=None)
@given(seeds, st.sampled_from((32, 64)), widths)
def test_canonical_text_round_trips(seed, base, width):
    if width > base:
        width = base
    s = simplify(random_expr(random.Random(seed), width, 7, base))
    assert parse_expr(canonical_text(s), width=width, base=base) == s


@settings(max_examples=100, deadline=None)
@given(seeds, seeds)
def test_distinct_forms_have_distinct_texts(s1, s2):
    a = simplify(random_expr(random.Random(s1), 32, 5, 64))
    b = simplify(random_expr(random.Random(s2), 32, 5, 64))
    assert (canonical_text(a) == canonical_text(b)) == (a == b)


def test_unop_and_cast_texts():
    assert canonical_text(UnOp(UnKind.NOT, add(V0, V1))) == "~(var0 + var1)"
    assert canonical_text(Ext(Var(0, 32), 64, signed=True)) == "sext64(var0)"
