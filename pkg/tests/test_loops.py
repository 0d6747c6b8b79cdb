from keysim.symexec import detect_loops

from conftest import all_functions
from oracles import dominates, loop_bodies_by_cycles


def succ_map(f):
    return {b.id: list(b.succ_ids) for b in f.blocks}


def test_diamond_has_no_back_edges(shape):
    info = detect_loops(shape("diamond"))
    assert info.back_edges == frozenset() and info.loops == ()


def test_self_loop_body_is_the_block(shape):
    info = detect_loops(shape("self_loop"))
    assert info.back_edges == {(1, 1)}
    (lp,) = info.loops
    assert lp.header == 1 and lp.body == {1} and lp.has_exit


def test_nested_loops(shape):
    info = detect_loops(shape("nested_loop"))
    assert info.back_edges == {(2, 2), (3, 1)}
    assert info.by_header(1).body == {1, 2, 3}
    assert info.by_header(2).body == {2}
    assert info.innermost(2).header == 2


def test_while_loop_header_holds_the_exit_test(shape):
    info = detect_loops(shape("while_loop"))
    (lp,) = info.loops
    assert lp.header == 1 and lp.body == {1, 2}
    assert lp.exit_distance[1] == 1 and lp.exit_distance[2] == 2


def test_irreducible_cycle_is_diagnosed(shape):
    f = shape("irreducible")
    info = detect_loops(f)
    assert info.loops == ()
    assert len(info.irreducible_edges) == 1
    (u, v), = info.irreducible_edges
    assert {u, v} == {1, 2}
    assert len(info.diagnostics) == 1 and "irreducible" in info.diagnostics[0].message


def test_loops_agree_with_cycle_enumeration():
    """Reducible fixtures: bodies match the brute-force cycle construction."""
    for f in all_functions():
        info = detect_loops(f)
        if info.irreducible_edges:
            continue
        expect = loop_bodies_by_cycles(succ_map(f), f.entry)
        assert {lp.header: set(lp.body) for lp in info.loops} == expect, f.name


def test_back_edge_targets_dominate_their_sources():
    for f in all_functions():
        succ = succ_map(f)
        for u, v in detect_loops(f).back_edges:
            assert dominates(succ, f.entry, v, u), (f.name, u, v)
