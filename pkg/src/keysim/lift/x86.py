from __future__ import annotations

from keysim.asm import Arch, ImmOp, LabelOp, MemOp, Operand, RegOp, parse_operand
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
from keysim.simplify import simplify


class LiftError(ValueError):
    """The instruction is outside the supported subset."""


JCC = {
    "je": Cond.EQ, "jz": Cond.EQ, "jne": Cond.NE, "jnz": Cond.NE,
    "jl": Cond.LT, "jnge": Cond.LT, "jle": Cond.LE, "jng": Cond.LE,
    "jg": Cond.GT, "jnle": Cond.GT, "jge": Cond.GE, "jnl": Cond.GE,
    "jb": Cond.LO, "jnae": Cond.LO, "jc": Cond.LO, "jbe": Cond.LS, "jna": Cond.LS,
    "ja": Cond.HI, "jnbe": Cond.HI, "jae": Cond.HS, "jnb": Cond.HS, "jnc": Cond.HS,
    "js": Cond.MI, "jns": Cond.PL, "jo": Cond.VS, "jno": Cond.VC,
    "jp": Cond.PE, "jpe": Cond.PE, "jnp": Cond.PO, "jpo": Cond.PO,
}

ARITH = {
    "add": BinKind.ADD, "sub": BinKind.SUB, "and": BinKind.AND, "or": BinKind.OR,
    "xor": BinKind.XOR, "shl": BinKind.SHL, "sal": BinKind.SHL, "shr": BinKind.SHR,
    "sar": BinKind.SAR, "imul": BinKind.MUL,
}
_SHIFTS = (BinKind.SHL, BinKind.SHR, BinKind.SAR)

NOPS = frozenset({"nop", "endbr64"})


def _reg(name: str) -> Loc:
    return Loc(name, 64)


def address_of(m: MemOp) -> Expr:
    addr: Expr = Const(m.disp, 64)
    if m.base:
        addr = BinOp(BinKind.ADD, _reg(m.base), addr)
    if m.index:
        idx: Expr = _reg(m.index)
        if m.scale != 1:
            idx = BinOp(BinKind.MUL, idx, Const(m.scale, 64))
        addr = BinOp(BinKind.ADD, addr, idx)
    return simplify(addr)


class _Builder:
    def __init__(self, mnemonic: str, operands: list[Operand]):
        self.mnemonic = mnemonic
        self.operands = operands
        self.ops: list[MicroOp] = []
        self.ntemps = 0

    def temp(self) -> str:
        name = f"t{self.ntemps}"
        self.ntemps += 1
        return name

    def width_of(self, *ops: Operand) -> int:
        for op in ops:
            if isinstance(op, RegOp):
                return op.width
            if isinstance(op, MemOp) and op.width:
                return op.width
        raise LiftError(f"{self.mnemonic}: operand size is ambiguous")

    def read(self, op: Operand, width: int) -> Expr:
        if isinstance(op, RegOp):
            return trunc(_reg(op.name), op.width)
        if isinstance(op, ImmOp):
            return Const(op.value, width)
        if isinstance(op, MemOp):
            t = self.temp()
            w = op.width or width
            self.ops.append(Load(t, address_of(op), w))
            return Loc(t, w)
        raise LiftError(f"{self.mnemonic}: unexpected operand {op}")

    def write(self, op: Operand, value: Expr) -> None:
        if isinstance(op, RegOp):
            self.ops.append(Move(op.name, simplify(merge_subregister(op, value))))
        elif isinstance(op, MemOp):
            self.ops.append(Store(address_of(op), simplify(value), value.width))
        else:
            raise LiftError(f"{self.mnemonic}: cannot write {op}")

    def binop(self, kind, dst: Operand, lhs: Expr, rhs: Expr | None, flags: bool) -> None:
        if isinstance(dst, RegOp) and dst.width == 64:
            self.ops.append(Bin(kind, dst.name, lhs, rhs, flags))
            return
        t = self.temp()
        self.ops.append(Bin(kind, t, lhs, rhs, flags))
        self.write(dst, Loc(t, lhs.width))


def merge_subregister(op: RegOp, value: Expr) -> Expr:
    """Full-register value after writing ``value`` into sub-register ``op``."""
    if op.width == 64:
        return value
    if op.width == 32:
        return zext(value, 64)
    keep = ~((1 << op.width) - 1) & ((1 << 64) - 1)
    return BinOp(BinKind.OR, BinOp(BinKind.AND, _reg(op.name), Const(keep, 64)), zext(value, 64))


def lift_x86(mnemonic: str, operand_texts: tuple[str, ...]) -> list[MicroOp]:
    ops = [parse_operand(t, Arch.X86_64) for t in operand_texts]
    b = _Builder(mnemonic, ops)
    n = len(ops)

    def need(count: int) -> None:
        if n != count:
            raise LiftError(f"{mnemonic} expects {count} operands, got {n}")

    if mnemonic in NOPS:
        return []
    if mnemonic == "mov":
        need(2)
        dst, src = ops
        if isinstance(dst, MemOp) and isinstance(src, MemOp):
            raise LiftError("mov: memory to memory")
        w = b.width_of(dst, src)
        if isinstance(dst, RegOp) and isinstance(src, MemOp):
            if dst.width == 64:
                b.ops.append(Load(dst.name, address_of(src), 64))
                return b.ops
        b.write(dst, b.read(src, w))
        return b.ops
    if mnemonic in ("movzx", "movsx", "movsxd"):
        need(2)
        dst, src = ops
        if not isinstance(dst, RegOp):
            raise LiftError(f"{mnemonic}: destination must be a register")
        if isinstance(src, MemOp) and src.width is None:
            if mnemonic != "movsxd":
                raise LiftError(f"{mnemonic}: memory source needs a size prefix")
            src = MemOp(src.base, src.index, src.scale, src.disp, 32)
        value = b.read(src, 32)
        ext = zext if mnemonic == "movzx" else sext
        b.write(dst, ext(value, dst.width))
        return b.ops
    if mnemonic == "lea":
        need(2)
        dst, src = ops
        if not isinstance(dst, RegOp) or not isinstance(src, MemOp):
            raise LiftError("lea: expects register, memory")
        b.write(dst, trunc(address_of(src), dst.width))
        return b.ops
    if mnemonic == "cdqe":
        need(0)
        b.ops.append(Move("rax", sext(trunc(_reg("rax"), 32), 64)))
        return b.ops
    if mnemonic in ARITH:
        kind = ARITH[mnemonic]
        if kind is BinKind.MUL and n == 3:
            dst, src, imm = ops
            if not isinstance(dst, RegOp) or not isinstance(imm, ImmOp):
                raise LiftError("imul: three-operand form needs register, r/m, immediate")
            w = dst.width
            b.binop(kind, dst, b.read(src, w), Const(imm.value, w), True)
            return b.ops
        need(2)
        dst, src = ops
        if isinstance(dst, MemOp) and isinstance(src, MemOp) or isinstance(dst, ImmOp):
            raise LiftError(f"{mnemonic}: bad operand combination")
        if kind is BinKind.MUL and not isinstance(dst, RegOp):
            raise LiftError("imul: destination must be a register")
        w = b.width_of(dst, src) if kind not in _SHIFTS else b.width_of(dst)
        if kind in _SHIFTS:
            limit = 63 if w == 64 else 31
            if isinstance(src, ImmOp):
                count = src.value & limit
                if count == 0:
                    return []
                lhs = b.read(dst, w)
                b.binop(kind, dst, lhs, Const(count, w), True)
            elif isinstance(src, RegOp) and src.name == "rcx" and src.width == 8:
                lhs = b.read(dst, w)
                amount = simplify(BinOp(BinKind.AND, zext(trunc(_reg("rcx"), 8), w), Const(limit, w)))
                # flags after a variable-count shift are not modeled
                b.binop(kind, dst, lhs, amount, False)
            else:
                raise LiftError(f"{mnemonic}: count must be an immediate or cl")
            return b.ops
        lhs = b.read(dst, w)
        rhs = b.read(src, w)
        b.binop(kind, dst, lhs, rhs, True)
        return b.ops
    if mnemonic in ("inc", "dec"):
        need(1)
        (dst,) = ops
        w = b.width_of(dst)
        kind = BinKind.ADD if mnemonic == "inc" else BinKind.SUB
        b.binop(kind, dst, b.read(dst, w), Const(1, w), True)
        return b.ops
    if mnemonic in ("neg", "not"):
        need(1)
        (dst,) = ops
        w = b.width_of(dst)
        kind = UnKind.NEG if mnemonic == "neg" else UnKind.NOT
        b.binop(kind, dst, b.read(dst, w), None, mnemonic == "neg")
        return b.ops
    if mnemonic in ("cmp", "test"):
        need(2)
        lhs_op, rhs_op = ops
        w = b.width_of(lhs_op, rhs_op)
        lhs = b.read(lhs_op, w)
        if mnemonic == "test" and isinstance(lhs_op, RegOp) and lhs_op == rhs_op:
            # test r, r sets exactly the flags of cmp r, 0
            b.ops.append(Compare(lhs, Const(0, w), Flavor.SUB_CMP))
            return b.ops
        rhs = b.read(rhs_op, w)
        flavor = Flavor.SUB_CMP if mnemonic == "cmp" else Flavor.AND_TST
        b.ops.append(Compare(lhs, rhs, flavor))
        return b.ops
    if mnemonic == "push":
        need(1)
        (src,) = ops
        if isinstance(src, RegOp) and src.width != 64:
            raise LiftError("push: only 64-bit registers")
        b.ops.append(Push(b.read(src, 64), 64))
        return b.ops
    if mnemonic == "pop":
        need(1)
        (dst,) = ops
        if not isinstance(dst, RegOp) or dst.width != 64:
            raise LiftError("pop: only 64-bit registers")
        b.ops.append(Pop(dst.name, 64))
        return b.ops
    if mnemonic == "leave":
        need(0)
        return [Move("rsp", _reg("rbp")), Pop("rbp", 64)]
    if mnemonic == "call":
        need(1)
        (target,) = ops
        if isinstance(target, LabelOp):
            return [Call(target.text)]
        if isinstance(target, ImmOp):
            return [Call(f"sub_{target.value:x}")]
        if isinstance(target, RegOp):
            return [Call(target.name, indirect=True)]
        return [Call(operand_texts[0], indirect=True)]
    if mnemonic == "ret":
        return [Return()]
    if mnemonic == "jmp":
        return [Branch(None)]
    if mnemonic in JCC:
        return [Branch(JCC[mnemonic])]
    raise LiftError(f"unsupported mnemonic {mnemonic!r}")
