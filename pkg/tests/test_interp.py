import pytest

from keysim.asm import Arch, Convention
from keysim.lift import lift_function, lift_instruction
from keysim.lift.interp import ConcreteError, Machine, run_function

from conftest import shapes
from equivalence import instruction


def leaves(**values):
    return lambda name: values.get(name, 0)


def test_self_loop_counts_up_to_the_bound():
    lf = lift_function(shapes().function("self_loop"))
    run = run_function(lf, leaves(var0=3, var1=9), lambda a: 0)
    assert run.return_value == 9
    assert run.path == [0] + [1] * 6 + [2]


def test_join_arms_takes_the_branch_on_zero():
    lf = lift_function(shapes().function("join_arms"))
    taken = run_function(lf, leaves(var0=5, var1=0, var2=0x1000), lambda a: 0)
    assert taken.path == [0, 2] and taken.return_value == 5
    fall = run_function(lf, leaves(var0=5, var1=2, var2=0x1000), lambda a: 0)
    assert fall.path == [0, 1, 2] and fall.return_value == (5 + 2) * 2 - 3
    assert fall.machine.read_mem(0x1000, 64) == 11


def test_call_results_come_from_the_callback():
    lf = lift_function(shapes().function("call_store_ret"))
    seen = []

    def result(callee, site, reg):
        seen.append((callee, site, reg))
        return 77 if reg is None else 0

    run = run_function(lf, leaves(var0=0x100, init_rbx=0x2000), lambda a: 0, result)
    assert run.return_value == 77 and ("consume", 0, None) in seen
    assert run.machine.read_mem(0x2000, 64) == 77


def test_memory_is_little_endian():
    m = Machine(Arch.X86_64, Convention.SYSV64, {}, lambda a: 0)
    m.write_mem(0x10, 0x11223344, 32)
    assert m.memory[0x10] == 0x44 and m.read_mem(0x12, 16) == 0x1122


def test_push_rsp_stores_the_old_value():
    regs = {r: 0 for r in ("rax", "rsp")}
    regs["rsp"] = 0x8000
    m = Machine(Arch.X86_64, Convention.SYSV64, regs, lambda a: 0)
    m.run(lift_instruction(instruction("push rsp"), Arch.X86_64))
    assert m.regs["rsp"] == 0x7FF8 and m.read_mem(0x7FF8, 64) == 0x8000


def test_runaway_loop_hits_the_block_budget():
    lf = lift_function(shapes().function("self_loop"))
    with pytest.raises(ConcreteError):
        run_function(lf, leaves(var0=1, var1=0), lambda a: 0, max_blocks=50)
