import random

import pytest

from keysim.lift import lift_function
from keysim.symexec import cover_residual, detect_loops, run_once, sample_main_path
from keysim.symexec.paths import VISIT_CAP

from conftest import all_functions, shapes

SEEDS = range(32)


def test_straight_function_has_one_path(shape):
    f = shape("straight3")
    paths = {tuple(sample_main_path(f, random.Random(s))) for s in range(20)}
    assert paths == {tuple(b.id for b in f.blocks)}


def test_branch_arms_vary_with_the_seed(shape):
    f = shape("join_arms")
    firsts = {sample_main_path(f, random.Random(s))[1] for s in range(40)}
    assert len(firsts) == 2


def test_self_loop_is_walked_twice(shape):
    f = shape("self_loop")
    for s in range(10):
        path = sample_main_path(f, random.Random(s))
        assert path == [0, 1, 1, 2]


def test_visit_cap_bounds_every_block():
    for f in shapes().functions:
        loops = detect_loops(f)
        for s in range(8):
            path = sample_main_path(f, random.Random(s), loops)
            # the cap is per loop entry, so bound by entries into the block's loops
            entries = 1 + sum(1 for a, b in zip(path, path[1:]) for lp in loops.loops if b in lp.body and a not in lp.body)
            for b in set(path):
                assert path.count(b) <= VISIT_CAP * entries, (f.name, path)


def test_nested_inner_loop_restarts_per_outer_iteration(shape):
    f = shape("nested_loop")
    path = sample_main_path(f, random.Random(3))
    assert path.count(2) == 4 and path.count(1) == 2


def test_aux_path_stops_at_covered_join(shape):
    f = shape("diamond")
    main = sample_main_path(f, random.Random(0))
    aux = cover_residual(f, set(main), random.Random(0))
    assert len(aux) == 1
    (missing,) = {b.id for b in f.blocks} - set(main)
    assert aux[0].blocks == (missing,)


@pytest.mark.parametrize("f", list(all_functions()), ids=lambda f: f.name)
def test_runs_cover_every_reachable_block(f):
    lf = lift_function(f)
    loops = detect_loops(f)
    for s in SEEDS:
        plan = run_once(lf, loops, f"cover/{s}").plan
        assert plan.covered() == f.reachable(), s
