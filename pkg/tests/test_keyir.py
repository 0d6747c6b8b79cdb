import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keysim.expr import Var
from keysim.keyir import KeyKind, build_key_graph, classify, instruction_successors, key_edges, return_values
from keysim.lift import lift_function
from keysim.symexec import execute

from conftest import all_functions
from equivalence import instruction
from oracles import key_edges_by_paths


def graph(f, runs=8, seed=0):
    lf = lift_function(f)
    vs = execute(lf, runs=runs, seed=seed)
    return lf, vs, build_key_graph(lf, vs)


def kind_of(text, arch="x86_64"):
    from keysim.asm import Arch
    from keysim.lift import lift_instruction

    return classify(lift_instruction(instruction(text), Arch(arch)))


@pytest.mark.parametrize(
    "text, arch, kind",
    [
        ("call EVP_CIPHER_CTX_ctrl", "x86_64", KeyKind.CALL),
        ("cmp rax, rbp", "x86_64", KeyKind.COMPARE),
        ("mov qword ptr [rsp+0x68], rax", "x86_64", KeyKind.MEMWRITE),
        ("ret", "x86_64", KeyKind.RETURN),
        ("test eax, eax", "x86_64", KeyKind.COMPARE),
        ("push rbx", "x86_64", None),
        ("pop rbp", "x86_64", None),
        ("mov rax, rdi", "x86_64", None),
        ("bl helper", "arm32", KeyKind.CALL),
        ("tst r0, #1", "arm32", KeyKind.COMPARE),
        ("str r1, [r0, #4]", "arm32", KeyKind.MEMWRITE),
        ("bx lr", "arm32", KeyKind.RETURN),
        ("push {r4, lr}", "arm32", None),
    ],
)
def test_classification(text, arch, kind):
    assert kind_of(text, arch) is kind


def test_constant_return_through_stack_balancing(shape):
    _, _, g = graph(shape("stack_balance"))
    (ret,) = [n for n in g.nodes if n.kind is KeyKind.RETURN]
    assert ret.texts() == ["0xffffffff"]


def test_return_of_first_parameter(shape):
    lf, vs, _ = graph(shape("unsupported"))
    vals, diags = return_values(lf, vs)
    assert vals == {Var(0)} and diags == []


def test_two_return_sites(shape):
    _, _, g = graph(shape("two_returns"), runs=8)
    rets = [n for n in g.nodes if n.kind is KeyKind.RETURN]
    assert [n.texts() for n in rets] == [["0x0"], ["var0 + 0x1"]]


def test_no_return_is_diagnosed(shape):
    lf, vs, _ = graph(shape("shuffle"))
    vals, diags = return_values(lf, vs)
    assert vals == set() and len(diags) == 1


def test_win64_call_arguments(shape):
    _, _, g = graph(shape("win64_ctrl"))
    (call,) = [n for n in g.nodes if n.kind is KeyKind.CALL]
    assert call.texts() == ["EVP_CIPHER_CTX_ctrl(init_rbx, 0x12)"]


def test_sysv_call_arguments(shape):
    _, _, g = graph(shape("call_store_ret"))
    assert g.nodes[0].texts() == ["consume(var0, mem64(var0 + 0x10))"]


def test_call_without_written_arguments():
    from keysim.ingest import parse_bundle

    f = parse_bundle("program p\nfunction f arch=x86_64 entry=0\nblock 0 @0 succ=\n0 call g\n5 ret\n").functions[0]
    _, _, g = graph(f)
    assert g.nodes[0].texts() == ["g()"]


def test_call_store_return_chain(shape):
    _, _, g = graph(shape("call_store_ret"))
    assert [n.kind for n in g.nodes] == [KeyKind.CALL, KeyKind.MEMWRITE, KeyKind.RETURN]
    assert g.edges == ((0, 1), (1, 2))


def test_compare_links_to_both_arms(shape):
    _, _, g = graph(shape("diamond"))
    kinds = {n.id: n.kind for n in g.nodes}
    (cmp,) = [i for i, k in kinds.items() if k is KeyKind.COMPARE]
    stores = {i for i, k in kinds.items() if k is KeyKind.MEMWRITE}
    assert len(stores) == 2
    assert {b for a, b in g.edges if a == cmp} == stores


def test_empty_graph_is_diagnosed(shape):
    _, _, g = graph(shape("shuffle"))
    assert g.nodes == () and g.edges == ()
    assert any("no key instructions" in d.message for d in g.diagnostics)


def test_memwrite_is_not_control_relevant():
    assert not KeyKind.MEMWRITE.affects_control
    assert all(k.affects_control for k in KeyKind if k is not KeyKind.MEMWRITE)


def _blocks(f):
    return [(b.id, [i.address for i in b.instructions], list(b.succ_ids)) for b in f.blocks]


def test_edges_match_path_enumeration():
    checked = 0
    for f in all_functions():
        if len(f.blocks) > 10:
            continue
        _, _, g = graph(f, runs=2)
        addr = {n.id: n.address for n in g.nodes}
        got = {(addr[a], addr[b]) for a, b in g.edges}
        assert got == key_edges_by_paths(_blocks(f), set(addr.values())), f.name
        checked += 1
    assert checked >= 20


def test_payloads_come_from_observed_values():
    for f in all_functions():
        lf, vs, g = graph(f, runs=4)
        for n in g.nodes:
            seen = {canon for obs in vs.values[n.address] for rec in obs for canon in _texts(rec)}
            for p in n.payloads:
                for e in _exprs(p):
                    assert _texts((e,)) <= seen, (f.name, n.address)


def _texts(rec):
    from keysim.simplify import canonical_text

    return {canonical_text(v) for v in rec}


def _exprs(p):
    return [v for v in vars(p).values() if hasattr(v, "width")] + [a for a in getattr(p, "args", ())]


def test_graph_is_deterministic(shape):
    a, b = graph(shape("cmp_loop_store"), seed=4)[2], graph(shape("cmp_loop_store"), seed=4)[2]
    assert a.to_json() == b.to_json()
    assert a.to_json()["schema_version"] == 1


# ---- property: edge rule over random CFGs and key sets ----


@st.composite
def cfgs(draw):
    n = draw(st.integers(1, 7))
    blocks = []
    addr = 0
    for b in range(n):
        size = draw(st.integers(1, 3))
        addrs = list(range(addr, addr + size))
        addr += size
        succs = draw(st.lists(st.integers(0, n - 1), max_size=2, unique=True))
        blocks.append((b, addrs, succs))
    every = [a for _, addrs, _ in blocks for a in addrs]
    keys = set(draw(st.lists(st.sampled_from(every), max_size=len(every), unique=True)))
    return blocks, keys


class _Block:
    def __init__(self, bid, addrs, succs):
        from keysim.ingest import Instruction

        self.id = bid
        self.instructions = tuple(Instruction(a, "nop") for a in addrs)
        self.succ_ids = tuple(succs)


class _Function:
    def __init__(self, blocks):
        self.blocks = [_Block(*b) for b in blocks]

    def block(self, bid):
        return self.blocks[bid]


@settings(max_examples=300, deadline=None)
@given(cfgs())
def test_edge_rule_matches_enumeration(case):
    blocks, keys = case
    succ = instruction_successors(_Function(blocks))
    assert key_edges(succ, keys) == key_edges_by_paths(blocks, keys)
