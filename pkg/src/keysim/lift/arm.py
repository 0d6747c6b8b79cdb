from __future__ import annotations

from keysim.asm import ARM_CONDITIONS, Arch, ImmOp, LabelOp, MemOp, Operand, RegListOp, RegOp, ShiftOp, parse_operand
from keysim.expr import BinKind, BinOp, Const, Expr, Loc, UnKind, sext, trunc, zext
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
)
from keysim.lift.x86 import LiftError
from keysim.simplify import simplify

ARM_COND = {
    "eq": Cond.EQ, "ne": Cond.NE, "cs": Cond.HS, "hs": Cond.HS, "cc": Cond.LO, "lo": Cond.LO,
    "mi": Cond.MI, "pl": Cond.PL, "vs": Cond.VS, "vc": Cond.VC, "hi": Cond.HI, "ls": Cond.LS,
    "ge": Cond.GE, "lt": Cond.LT, "gt": Cond.GT, "le": Cond.LE,
}

DATA = {
    "add": BinKind.ADD, "sub": BinKind.SUB, "and": BinKind.AND, "orr": BinKind.OR,
    "eor": BinKind.XOR, "mul": BinKind.MUL, "lsl": BinKind.SHL, "lsr": BinKind.SHR,
    "asr": BinKind.SAR,
}
# mnemonics that accept the flag-setting 's' suffix
_S_CAPABLE = set(DATA) | {"mov", "mvn", "rsb"}

LOADS = {"ldr": (32, False), "ldrh": (16, False), "ldrb": (8, False), "ldrsh": (16, True), "ldrsb": (8, True)}
STORES = {"str": 32, "strh": 16, "strb": 8}

_SHIFT_KIND = {"lsl": BinKind.SHL, "lsr": BinKind.SHR, "asr": BinKind.SAR}


def _reg(name: str) -> Expr:
    if name == "pc":
        raise LiftError("reading pc is not supported")
    return Loc(name, 32)


def address_of(m: MemOp) -> Expr:
    addr = _reg(m.base)
    if m.index:
        off: Expr = _reg(m.index)
        if m.shift:
            off = BinOp(BinKind.SHL, off, Const(m.shift, 32))
        addr = BinOp(BinKind.ADD, addr, off)
    else:
        addr = BinOp(BinKind.ADD, addr, Const(m.disp, 32))
    return simplify(addr)


def _shifted(value: Expr, shift: ShiftOp) -> Expr:
    limit = 31 if shift.kind == "lsl" else 32
    if not 0 <= shift.amount <= limit:
        raise LiftError(f"shift amount {shift.amount} out of range")
    return BinOp(_SHIFT_KIND[shift.kind], value, Const(shift.amount, 32))


def _operand2(ops: list[Operand], i: int) -> Expr:
    op = ops[i]
    rest = ops[i + 1 :]
    if isinstance(op, ImmOp):
        if rest:
            raise LiftError("immediate operand cannot be shifted")
        return Const(op.value, 32)
    if isinstance(op, RegOp):
        if not rest:
            return _reg(op.name)
        if len(rest) == 1 and isinstance(rest[0], ShiftOp):
            return _shifted(_reg(op.name), rest[0])
    raise LiftError("bad flexible operand")


def split_mnemonic(mnemonic: str) -> tuple[str, bool]:
    """Strip a flag-setting 's' suffix: ``subs`` -> (``sub``, True)."""
    if mnemonic.endswith("s") and mnemonic[:-1] in _S_CAPABLE:
        return mnemonic[:-1], True
    return mnemonic, False


def _dst(op: Operand) -> str:
    if not isinstance(op, RegOp) or op.name == "pc":
        raise LiftError("destination must be a general register")
    return op.name


def lift_arm(mnemonic: str, operand_texts: tuple[str, ...]) -> list[MicroOp]:
    ops = [parse_operand(t, Arch.ARM32) for t in operand_texts]
    n = len(ops)
    base, flags = split_mnemonic(mnemonic)

    if base == "nop":
        return []
    if base in ("mov", "mvn"):
        if n < 2:
            raise LiftError(f"{mnemonic} expects 2 operands")
        value = _operand2(ops, 1)
        dst = _dst(ops[0])
        if base == "mov":
            if flags:
                return [Bin(BinKind.OR, dst, value, Const(0, 32), True)]
            return [Move(dst, simplify(value))]
        return [Bin(UnKind.NOT, dst, value, None, flags)]
    if base in ("movw", "movt"):
        if n != 2 or not isinstance(ops[1], ImmOp) or not 0 <= ops[1].value <= 0xFFFF:
            raise LiftError(f"{mnemonic} expects register, #imm16")
        dst = _dst(ops[0])
        if base == "movw":
            return [Move(dst, Const(ops[1].value, 32))]
        low = BinOp(BinKind.AND, _reg(dst), Const(0xFFFF, 32))
        return [Move(dst, simplify(BinOp(BinKind.OR, low, Const(ops[1].value << 16, 32))))]
    if base in ("lsl", "lsr", "asr") and n == 3 and isinstance(ops[2], RegOp):
        dst = _dst(ops[0])
        if not isinstance(ops[1], RegOp):
            raise LiftError(f"{mnemonic}: bad operands")
        amount = simplify(BinOp(BinKind.AND, _reg(ops[2].name), Const(0xFF, 32)))
        return [Bin(DATA[base], dst, _reg(ops[1].name), amount, flags)]
    if base in ("lsl", "lsr", "asr"):
        if n != 3 or not isinstance(ops[1], RegOp) or not isinstance(ops[2], ImmOp):
            raise LiftError(f"{mnemonic}: bad operands")
        value = _shifted(_reg(ops[1].name), ShiftOp(base, ops[2].value))
        return [Bin(DATA[base], _dst(ops[0]), value.lhs, value.rhs, flags)]
    if base == "mul":
        if n != 3 or not all(isinstance(o, RegOp) for o in ops):
            raise LiftError("mul expects three registers")
        return [Bin(BinKind.MUL, _dst(ops[0]), _reg(ops[1].name), _reg(ops[2].name), flags)]
    if base in DATA or base == "rsb":
        if n == 2:
            ops = [ops[0], ops[0], ops[1]]
        if len(ops) < 3 or not isinstance(ops[1], RegOp):
            raise LiftError(f"{mnemonic}: bad operands")
        lhs, rhs = _reg(ops[1].name), _operand2(ops, 2)
        if base == "rsb":
            return [Bin(BinKind.SUB, _dst(ops[0]), rhs, lhs, flags)]
        return [Bin(DATA[base], _dst(ops[0]), lhs, rhs, flags)]
    if base in ("cmp", "tst"):
        if n < 2 or not isinstance(ops[0], RegOp):
            raise LiftError(f"{mnemonic}: bad operands")
        flavor = Flavor.SUB_CMP if base == "cmp" else Flavor.AND_TST
        return [Compare(_reg(ops[0].name), simplify(_operand2(ops, 1)), flavor)]
    if base in LOADS:
        width, signed = LOADS[base]
        if n != 2 or not isinstance(ops[1], MemOp):
            raise LiftError(f"{mnemonic}: expects register, memory")
        dst = _dst(ops[0])
        if width == 32:
            return [Load(dst, address_of(ops[1]), 32)]
        ext = sext if signed else zext
        return [Load("t0", address_of(ops[1]), width), Move(dst, ext(Loc("t0", width), 32))]
    if base in STORES:
        width = STORES[base]
        if n != 2 or not isinstance(ops[0], RegOp) or not isinstance(ops[1], MemOp):
            raise LiftError(f"{mnemonic}: expects register, memory")
        return [Store(address_of(ops[1]), simplify(trunc(_reg(ops[0].name), width)), width)]
    if base == "push":
        if n != 1 or not isinstance(ops[0], RegListOp):
            raise LiftError("push expects a register list")
        if "pc" in ops[0].regs:
            raise LiftError("push {pc} is not supported")
        # highest register lands at the highest address
        return [Push(_reg(r), 32) for r in reversed(ops[0].regs)]
    if base == "pop":
        if n != 1 or not isinstance(ops[0], RegListOp):
            raise LiftError("pop expects a register list")
        out: list[MicroOp] = [Pop(r, 32) for r in ops[0].regs]
        if "pc" in ops[0].regs:
            out.append(Return())
        return out
    if base == "bx":
        if n != 1 or not isinstance(ops[0], RegOp):
            raise LiftError("bx expects a register")
        if ops[0].name == "lr":
            return [Return()]
        # indirect tail call
        return [Call(ops[0].name, indirect=True), Return()]
    if base == "bl":
        if n != 1 or not isinstance(ops[0], LabelOp):
            raise LiftError("bl expects a label")
        return [Call(ops[0].text)]
    if base == "blx":
        if n != 1:
            raise LiftError("blx expects one operand")
        if isinstance(ops[0], RegOp):
            return [Call(ops[0].name, indirect=True)]
        return [Call(operand_texts[0])]
    if base == "b":
        return [Branch(None)]
    if base.startswith("b") and base[1:] in ARM_CONDITIONS:
        return [Branch(ARM_COND[base[1:]])]
    raise LiftError(f"unsupported mnemonic {mnemonic!r}")
