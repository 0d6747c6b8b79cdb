"""Lifting of x86-64 and ARM32 instructions into the shared micro-IR."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from keysim.asm import Arch, Convention, OperandError, RegOp, parse_operand
from keysim.diagnostics import Diagnostic
from keysim.expr import Const, Loc
from keysim.ingest import Function, Instruction
from keysim.lift.arm import lift_arm
from keysim.lift.micro import (
    Bin,
    Branch,
    Call,
    Compare,
    Flavor,
    MicroOp,
    Unsupported,
)
from keysim.lift.x86 import LiftError, lift_x86

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LiftedFunction:
    function: Function
    micro: dict[int, tuple[MicroOp, ...]]
    diagnostics: tuple[Diagnostic, ...] = ()
    # call-site address -> ordinal among calls to the same callee
    call_sites: dict[int, int] = field(default_factory=dict)

    @property
    def arch(self) -> Arch:
        return self.function.arch

    @property
    def convention(self) -> Convention:
        return self.function.convention


def _unsupported(i: Instruction, arch: Arch) -> Unsupported:
    dsts: tuple[str, ...] = ()
    if i.operands:
        try:
            op = parse_operand(i.operands[0], arch)
        except OperandError:
            op = None
        if isinstance(op, RegOp):
            dsts = (op.name,)
    return Unsupported(i.mnemonic, dsts)


def try_lift(i: Instruction, arch: Arch) -> tuple[list[MicroOp], Diagnostic | None]:
    try:
        if arch is Arch.X86_64:
            return lift_x86(i.mnemonic, i.operands), None
        return lift_arm(i.mnemonic, i.operands), None
    except (LiftError, OperandError) as exc:
        msg = str(exc)
        if not msg.startswith("unsupported mnemonic"):
            msg = f"cannot lift {i.mnemonic!r}: {msg}"
        return [_unsupported(i, arch)], Diagnostic.warning(msg, i.address)


def lift_instruction(i: Instruction, arch: Arch, convention: Convention | None = None) -> list[MicroOp]:
    """Micro-ops for one instruction; unsupported ones become an UNSUPPORTED marker.

    ``convention`` is accepted for interface symmetry; the lifted semantics
    do not depend on it (calls are resolved by the executor).
    """
    ops, diag = try_lift(i, arch)
    if diag is not None:
        log.debug("%s", diag)
    return ops


def _flag_result(op: Bin) -> Loc:
    return Loc(op.dst, op.lhs.width)


def _mark_implicit_compares(block_micro: list[list[MicroOp]], arch: Arch) -> None:
    """Make flag-setting arithmetic that feeds the block's branch an explicit COMPARE.

    Covers the ``dec; jnz`` / ``subs; bne`` idiom: the last flag writer in
    a block that ends in a conditional branch, when it is not already a
    comparison.
    """
    if not block_micro or not any(isinstance(o, Branch) and o.cond for o in block_micro[-1]):
        return
    for ops in reversed(block_micro):
        for k in range(len(ops) - 1, -1, -1):
            op = ops[k]
            if isinstance(op, (Compare, Call, Unsupported)):
                return
            if isinstance(op, Bin) and op.sets_flags:
                ops.insert(k + 1, Compare(_flag_result(op), Const(0, op.lhs.width), Flavor.SUB_CMP))
                return


def lift_function(f: Function) -> LiftedFunction:
    micro: dict[int, tuple[MicroOp, ...]] = {}
    diags: list[Diagnostic] = []
    for block in f.blocks:
        per_insn = []
        for insn in block.instructions:
            ops, diag = try_lift(insn, f.arch)
            if diag is not None:
                diags.append(diag)
            per_insn.append(ops)
        _mark_implicit_compares(per_insn, f.arch)
        for insn, ops in zip(block.instructions, per_insn):
            micro[insn.address] = tuple(ops)
    counts: dict[str, int] = {}
    call_sites: dict[int, int] = {}
    for addr in sorted(micro):
        for op in micro[addr]:
            if isinstance(op, Call):
                call_sites[addr] = counts.get(op.target, 0)
                counts[op.target] = call_sites[addr] + 1
    return LiftedFunction(f, micro, tuple(diags), call_sites)


__all__ = ["LiftError", "LiftedFunction", "lift_function", "lift_instruction", "try_lift"]
