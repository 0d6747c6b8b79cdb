"""One pass/fail line per acceptance criterion, at full tolerance."""

import time

import pytest

from keysim.bench import read_pairs, run_bench
from keysim.expr import Iter
from keysim.keyir import build_key_graph
from keysim.lift import lift_function
from keysim.lift.micro import Call
from keysim.symexec import detect_loops, execute, run_once

from compare_checks import check_oracle_agreement, check_self_and_symmetry, fixture_graphs
from conftest import CORPUS, all_functions, shapes, straight
from equivalence import run_cases
from oracles import ALL_CASES, key_edges_by_paths
from simplify_checks import check_global, check_rules
from symexec_checks import check_all


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def test_criterion_1_lifter_equivalence(report):
    start = time.perf_counter()
    failures = run_cases(ALL_CASES, 1000)
    elapsed = time.perf_counter() - start
    detail = f"{len(ALL_CASES)} instruction forms x 1000 valuations, {len(failures)} mismatching, {elapsed:.1f}s"
    report(1, not failures and elapsed < 10, detail)


def test_criterion_2_symbolic_soundness(report):
    fns = straight().functions
    for f in fns:
        lf = lift_function(f)
        assert not detect_loops(f).back_edges
        assert not any(isinstance(op, Call) for ops in lf.micro.values() for op in ops)
    n, bad = check_all(fns, vectors=100)
    report(2, n >= 10 and not bad, f"{n} fixtures x 100 vectors, {len(bad)} mismatches")


def test_criterion_3_per_run_coverage(report):
    fns = list(all_functions())
    loops = [f for f in fns if detect_loops(f).back_edges]
    irreducible = [f for f in fns if detect_loops(f).irreducible_edges]
    misses = []
    for f in fns:
        lf, info = lift_function(f), detect_loops(f)
        for s in range(32):
            if run_once(lf, info, f"accept/{s}").plan.covered() != f.reachable():
                misses.append(f"{f.name}@{s}")
    detail = f"{len(fns)} fixtures ({len(loops)} with loops, {len(irreducible)} irreducible) x 32 seeds, {len(misses)} uncovered runs"
    report(3, len(loops) >= 2 and len(irreducible) >= 1 and not misses, detail)


def test_criterion_4_iter_rule(report):
    loop = execute(lift_function(shapes().function("self_loop")))
    carried = loop.texts(0x4004)
    nested = execute(lift_function(shapes().function("nested_loop")))
    doubled = [
        v
        for obs in nested.values.values()
        for o in obs
        for rec in o
        for v in rec
        if any(isinstance(n, Iter) and isinstance(n.body, Iter) for n in v.walk())
    ]
    ok = carried == ["iter(var0 + 0x1)"] and not doubled
    report(4, ok, f"self-loop observation {carried}, nested ITER(ITER) count {len(doubled)}")


def test_criterion_5_simplifier_soundness(report):
    counts, rule_bad = check_rules()
    n, global_bad = check_global()
    rules = len({r for r, _ in counts})
    detail = f"{rules} rules at widths 8/32/64, {n} random terms; {len(rule_bad) + len(global_bad)} violations"
    report(5, not rule_bad and not global_bad and n == 3000, detail)


def test_criterion_6_key_edge_soundness(report):
    checked, bad = 0, []
    for f in all_functions():
        if len(f.blocks) > 10:
            continue
        lf = lift_function(f)
        g = build_key_graph(lf, execute(lf))
        addr = {n.id: n.address for n in g.nodes}
        got = {(addr[a], addr[b]) for a, b in g.edges}
        blocks = [(b.id, [i.address for i in b.instructions], list(b.succ_ids)) for b in f.blocks]
        if got != key_edges_by_paths(blocks, set(addr.values())):
            bad.append(f.name)
        checked += 1
    report(6, checked > 0 and not bad, f"{checked} fixtures, {len(bad)} edge-set differences")


def test_criterion_7_comparison_oracle(report):
    every = list(all_functions())
    small = fixture_graphs(every, max_nodes=5)
    n, worst, bad = check_oracle_agreement(small)
    sym = check_self_and_symmetry(fixture_graphs(every, max_nodes=10**6))
    detail = f"{n} small pairs, worst gap {worst:.3f}; {len(sym)} self/symmetry failures"
    report(7, not bad and not sym, detail)


def test_criterion_8_bench(report):
    pairs = read_pairs(CORPUS / "pairs.tsv")
    start = time.perf_counter()
    result = run_bench(CORPUS / "pairs.tsv")
    elapsed = time.perf_counter() - start
    c = result.confusion
    similar, dissimilar = sum(p.label for p in pairs), sum(not p.label for p in pairs)
    ok = similar >= 8 and dissimilar >= 8 and result.accuracy >= 0.8 and elapsed < 60
    detail = f"{len(pairs)} pairs ({similar} similar), accuracy {result.accuracy:.3f}, tp {c['tp']} tn {c['tn']} fp {c['fp']} fn {c['fn']}, {elapsed:.1f}s"
    report(8, ok, detail)
