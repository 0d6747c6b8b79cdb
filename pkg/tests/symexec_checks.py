"""Concrete soundness of symbolic return values on call-free, loop-free code."""

from __future__ import annotations

import random

from keysim.lift import lift_function
from keysim.lift.interp import run_function
from keysim.lift.micro import Return
from keysim.simplify import eval_concrete
from keysim.symexec import execute

from oracles import Valuation, memory_byte


def return_value(lf, vs):
    """The single return-register observation of a one-run execution."""
    found = []
    for addr, micro in lf.micro.items():
        for k, op in enumerate(micro):
            if isinstance(op, Return):
                found.extend(obs[k][0] for obs in vs.values.get(addr, ()))
    assert len(found) == 1, found
    return found[0]


def _memory(byte):
    def read(addr, width):
        return sum(byte(addr + k) << (8 * k) for k in range(width // 8))

    return read


class _Names:
    def __init__(self, valuation):
        self.valuation = valuation

    def __getitem__(self, name):
        return self.valuation(name)


def check_function(f, vectors: int, seed: int) -> list[str]:
    lf = lift_function(f)
    expr = return_value(lf, execute(lf, runs=1, seed=seed))
    rng = random.Random(f"{f.name}/{seed}")
    bad = []
    for i in range(vectors):
        val = Valuation(rng, f.arch.word)
        byte = memory_byte(i)
        concrete = run_function(lf, val, byte).return_value
        symbolic = eval_concrete(expr, _Names(val), _memory(byte))
        if concrete != symbolic:
            bad.append(f"{f.name}#{i}: concrete {concrete:#x} symbolic {symbolic:#x}")
    return bad


def check_all(functions, vectors: int = 100, seed: int = 0) -> tuple[int, list[str]]:
    bad = []
    n = 0
    for f in functions:
        bad += check_function(f, vectors, seed)
        n += 1
    return n, bad
