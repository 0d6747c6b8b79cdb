"""Concrete interpretation of micro-ops.

The machine models flags the same way the lifter does: a record of the last
comparison ``(lhs, rhs, flavor, width)``; condition codes are derived from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from keysim.asm import Arch, Convention
from keysim.expr import BinKind, Expr, Loc
from keysim.ingest import EdgeKind
from keysim.lift import LiftedFunction
from keysim.lift.micro import (
    Bin,
    Branch,
    Call,
    Compare,
    Cond,
    Flavor,
    Load,
    MicroOp,
    Move,
    Pop,
    Push,
    Return,
    Store,
    Unsupported,
)
from keysim.lift.regs import ARG_REGISTERS, CALLER_SAVED, REGISTERS, RETURN_REGISTER, STACK_POINTER, is_temp
from keysim.simplify.evaluate import binop_value, evaluate, unop_value

LastCmp = tuple[int, int, Flavor, int]


class ConcreteError(RuntimeError):
    pass


def flags_of(record: LastCmp) -> dict[str, bool]:
    """ZF/SF/borrow/OF implied by a last-comparison record."""
    lhs, rhs, flavor, width = record
    m = (1 << width) - 1
    top = 1 << (width - 1)
    if flavor is Flavor.SUB_CMP:
        res = (lhs - rhs) & m
        borrow = lhs < rhs
        overflow = bool((lhs ^ rhs) & (lhs ^ res) & top)
    else:
        res = lhs & rhs
        borrow = overflow = False
    return {
        "Z": res == 0,
        "N": bool(res & top),
        "borrow": borrow,
        "V": overflow,
        "parity": bin(res & 0xFF).count("1") % 2 == 0,
    }


_CONDITIONS = {
    Cond.EQ: lambda z, n, b, v, p: z,
    Cond.NE: lambda z, n, b, v, p: not z,
    Cond.LT: lambda z, n, b, v, p: n != v,
    Cond.GE: lambda z, n, b, v, p: n == v,
    Cond.LE: lambda z, n, b, v, p: z or n != v,
    Cond.GT: lambda z, n, b, v, p: not z and n == v,
    Cond.LO: lambda z, n, b, v, p: b,
    Cond.HS: lambda z, n, b, v, p: not b,
    Cond.LS: lambda z, n, b, v, p: b or z,
    Cond.HI: lambda z, n, b, v, p: not b and not z,
    Cond.MI: lambda z, n, b, v, p: n,
    Cond.PL: lambda z, n, b, v, p: not n,
    Cond.VS: lambda z, n, b, v, p: v,
    Cond.VC: lambda z, n, b, v, p: not v,
    Cond.PE: lambda z, n, b, v, p: p,
    Cond.PO: lambda z, n, b, v, p: not p,
}


def condition_holds(cond: Cond, record: LastCmp | None) -> bool:
    if record is None:
        raise ConcreteError("conditional branch without a preceding comparison")
    f = flags_of(record)
    return _CONDITIONS[cond](f["Z"], f["N"], f["borrow"], f["V"], f["parity"])


def seed_name(arch: Arch, reg: str) -> str:
    """Leaf name bound to a register's value at function entry (non-parameter)."""
    return "init_sp" if reg == STACK_POINTER[arch] else f"init_{reg}"


@dataclass
class Machine:
    arch: Arch
    convention: Convention
    regs: dict[str, int]
    memory_init: Callable[[int], int]
    call_result: Callable[[str, int, str | None], int] = lambda callee, site, reg: 0
    memory: dict[int, int] = field(default_factory=dict)
    lastcmp: LastCmp | None = None
    temps: dict[str, int] = field(default_factory=dict)
    taken: bool | None = None
    returned: bool = False

    @property
    def word(self) -> int:
        return self.arch.word

    def read_mem(self, addr: int, width: int) -> int:
        amask = (1 << self.word) - 1
        value = 0
        for k in range(width // 8):
            a = (addr + k) & amask
            byte = self.memory.get(a)
            if byte is None:
                byte = self.memory_init(a) & 0xFF
            value |= byte << (8 * k)
        return value

    def write_mem(self, addr: int, value: int, width: int) -> None:
        amask = (1 << self.word) - 1
        for k in range(width // 8):
            self.memory[(addr + k) & amask] = (value >> (8 * k)) & 0xFF

    def _leaf(self, node: Expr) -> int:
        if isinstance(node, Loc):
            if is_temp(node.name):
                return self.temps[node.name]
            return self.regs[node.name]
        raise ConcreteError(f"template leaf {node!r} is not a location")

    def eval(self, template: Expr) -> int:
        return evaluate(template, self._leaf)

    def set(self, dst: str, value: int, width: int | None = None) -> None:
        if is_temp(dst):
            self.temps[dst] = value & ((1 << (width or 64)) - 1)
        else:
            self.regs[dst] = value & ((1 << self.word) - 1)

    def run(self, ops, call_site: int = 0) -> None:
        self.temps = {}
        self.taken = None
        for op in ops:
            self.step(op, call_site)

    def step(self, op: MicroOp, call_site: int = 0) -> None:
        if isinstance(op, Move):
            self.set(op.dst, self.eval(op.src), op.src.width)
        elif isinstance(op, Bin):
            w = op.lhs.width
            lhs = self.eval(op.lhs)
            if isinstance(op.kind, BinKind):
                value = binop_value(op.kind, lhs, self.eval(op.rhs), w)
            else:
                value = unop_value(op.kind, lhs, w)
            self.set(op.dst, value, w)
            if op.sets_flags:
                self.lastcmp = (value, 0, Flavor.SUB_CMP, w)
        elif isinstance(op, Load):
            self.set(op.dst, self.read_mem(self.eval(op.addr), op.width), op.width)
        elif isinstance(op, Store):
            self.write_mem(self.eval(op.addr), self.eval(op.src), op.width)
        elif isinstance(op, Compare):
            self.lastcmp = (self.eval(op.lhs), self.eval(op.rhs), op.flavor, op.lhs.width)
        elif isinstance(op, Branch):
            self.taken = True if op.cond is None else condition_holds(op.cond, self.lastcmp)
        elif isinstance(op, Call):
            ret = RETURN_REGISTER[self.arch]
            for reg in CALLER_SAVED[self.convention]:
                self.set(reg, self.call_result(op.target, call_site, None if reg == ret else reg))
            self.lastcmp = None
        elif isinstance(op, Return):
            self.returned = True
        elif isinstance(op, Push):
            value = self.eval(op.src)  # push sp stores the old value
            sp = STACK_POINTER[self.arch]
            self.regs[sp] = (self.regs[sp] - op.width // 8) & ((1 << self.word) - 1)
            self.write_mem(self.regs[sp], value, op.width)
        elif isinstance(op, Pop):
            sp = STACK_POINTER[self.arch]
            value = self.read_mem(self.regs[sp], op.width)
            self.regs[sp] = (self.regs[sp] + op.width // 8) & ((1 << self.word) - 1)
            self.set(op.dst, value, op.width)
        elif isinstance(op, Unsupported):
            raise ConcreteError(f"cannot execute unsupported instruction {op.mnemonic!r}")
        else:
            raise TypeError(op)


@dataclass
class ConcreteRun:
    machine: Machine
    return_value: int | None
    path: list[int]


def run_function(
    lf: LiftedFunction,
    leaf_value: Callable[[str], int],
    memory_init: Callable[[int], int],
    call_result: Callable[[str, int, str | None], int] | None = None,
    max_blocks: int = 10_000,
) -> ConcreteRun:
    """Run a lifted function concretely.

    ``leaf_value`` supplies entry values by leaf name (``var0``, ``init_rbx``,
    ``init_sp``), matching the names symbolic execution uses for seeds.
    """
    f = lf.function
    params = ARG_REGISTERS[f.convention]
    regs = {}
    for reg in REGISTERS[f.arch]:
        name = f"var{params.index(reg)}" if reg in params else seed_name(f.arch, reg)
        regs[reg] = leaf_value(name) & ((1 << f.arch.word) - 1)
    machine = Machine(f.arch, f.convention, regs, memory_init, call_result or (lambda c, s, r: 0))
    block = f.block(f.entry)
    path = []
    for _ in range(max_blocks):
        path.append(block.id)
        for insn in block.instructions:
            machine.run(lf.micro[insn.address], call_site=lf.call_sites.get(insn.address, 0))
            if machine.returned:
                return ConcreteRun(machine, machine.regs[RETURN_REGISTER[f.arch]], path)
        if not block.successors:
            return ConcreteRun(machine, None, path)
        if len(block.successors) == 1:
            nxt = block.successors[0][0]
        else:
            want = EdgeKind.TAKEN if machine.taken else EdgeKind.FALLTHROUGH
            nxt = next(s for s, k in block.successors if k is want)
        block = f.block(nxt)
    raise ConcreteError("block budget exceeded")
