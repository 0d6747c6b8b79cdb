"""Operand grammar for the supported x86-64 and ARM32 assembly syntax."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import lru_cache


class Arch(enum.Enum):
    X86_64 = "x86_64"
    ARM32 = "arm32"

    @property
    def word(self) -> int:
        return 64 if self is Arch.X86_64 else 32


class Convention(enum.Enum):
    SYSV64 = "sysv64"
    WIN64 = "win64"
    AAPCS32 = "aapcs32"


DEFAULT_CONVENTION = {Arch.X86_64: Convention.SYSV64, Arch.ARM32: Convention.AAPCS32}
ARCH_CONVENTIONS = {
    Arch.X86_64: (Convention.SYSV64, Convention.WIN64),
    Arch.ARM32: (Convention.AAPCS32,),
}


class OperandError(ValueError):
    pass


# x86-64: every sub-register name maps to (full register, width)
X86_FULL = ("rax", "rbx", "rcx", "rdx", "rsi", "rdi", "rbp", "rsp") + tuple(f"r{i}" for i in range(8, 16))
X86_REGS: dict[str, tuple[str, int]] = {}
for _full, _r32, _r16, _r8 in zip(
    X86_FULL[:8],
    ("eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp"),
    ("ax", "bx", "cx", "dx", "si", "di", "bp", "sp"),
    ("al", "bl", "cl", "dl", "sil", "dil", "bpl", "spl"),
):
    X86_REGS.update({_full: (_full, 64), _r32: (_full, 32), _r16: (_full, 16), _r8: (_full, 8)})
for _i in range(8, 16):
    _full = f"r{_i}"
    X86_REGS.update({_full: (_full, 64), f"{_full}d": (_full, 32), f"{_full}w": (_full, 16), f"{_full}b": (_full, 8)})

ARM_FULL = tuple(f"r{i}" for i in range(13)) + ("sp", "lr", "pc")
ARM_ALIASES = {"r13": "sp", "r14": "lr", "r15": "pc", "fp": "r11", "ip": "r12"}


def arm_reg(name: str) -> str | None:
    name = ARM_ALIASES.get(name, name)
    return name if name in ARM_FULL else None


@dataclass(frozen=True)
class RegOp:
    name: str  # full register
    width: int


@dataclass(frozen=True)
class ImmOp:
    value: int


@dataclass(frozen=True)
class MemOp:
    base: str | None
    index: str | None = None
    scale: int = 1
    disp: int = 0
    width: int | None = None  # from a size prefix; None when implied
    shift: int = 0  # ARM register offset shifted left


@dataclass(frozen=True)
class ShiftOp:
    kind: str  # lsl / lsr / asr
    amount: int


@dataclass(frozen=True)
class RegListOp:
    regs: tuple[str, ...]


@dataclass(frozen=True)
class LabelOp:
    text: str


Operand = RegOp | ImmOp | MemOp | ShiftOp | RegListOp | LabelOp

_INT_RE = re.compile(r"[-+]?(0x[0-9a-fA-F]+|\d+)")
_LABEL_RE = re.compile(r"[A-Za-z_.$@?][\w.$@?]*")
_SIZE_PREFIX = {"byte": 8, "word": 16, "dword": 32, "qword": 64}


def parse_int(text: str) -> int:
    text = text.strip()
    if not _INT_RE.fullmatch(text):
        raise OperandError(f"bad integer {text!r}")
    return int(text, 0)


def split_operands(text: str) -> list[str]:
    """Split on top-level commas (brackets and braces nest)."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
            if depth < 0:
                raise OperandError("unbalanced brackets")
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise OperandError("unbalanced brackets")
    tail = "".join(cur).strip()
    if tail or out:
        out.append(tail)
    if any(not o for o in out):
        raise OperandError("empty operand")
    return out


def _x86_mem(text: str) -> MemOp:
    width = None
    m = re.fullmatch(r"(byte|word|dword|qword)\s+ptr\s+(\[.*\])", text)
    if m:
        width = _SIZE_PREFIX[m.group(1)]
        text = m.group(2)
    if not (text.startswith("[") and text.endswith("]")):
        raise OperandError(f"bad memory operand {text!r}")
    inner = text[1:-1].replace(" ", "")
    if not inner:
        raise OperandError("empty memory operand")
    base = index = None
    scale, disp = 1, 0
    for sign, term in re.findall(r"([+-]?)([^+-]+)", inner):
        if "*" in term:
            a, b = term.split("*", 1)
            reg, factor = (a, b) if a in X86_REGS else (b, a)
            if reg not in X86_REGS or sign == "-" or index is not None:
                raise OperandError(f"bad index term {term!r}")
            scale = parse_int(factor)
            if scale not in (1, 2, 4, 8):
                raise OperandError(f"bad scale {scale}")
            index = reg
        elif term in X86_REGS:
            if sign == "-":
                raise OperandError("negated register in address")
            if base is None:
                base = term
            elif index is None:
                index = term
            else:
                raise OperandError("too many registers in address")
        else:
            disp += -parse_int(term) if sign == "-" else parse_int(term)
    for reg in (base, index):
        if reg is not None and X86_REGS[reg][1] != 64:
            raise OperandError(f"address register {reg} must be 64-bit")
    return MemOp(
        X86_REGS[base][0] if base else None,
        X86_REGS[index][0] if index else None,
        scale,
        disp,
        width,
    )


def _x86_operand(text: str) -> Operand:
    if text in X86_REGS:
        return RegOp(*X86_REGS[text])
    if "[" in text:
        return _x86_mem(text)
    if _INT_RE.fullmatch(text):
        return ImmOp(parse_int(text))
    if _LABEL_RE.fullmatch(text):
        return LabelOp(text)
    raise OperandError(f"unparseable x86-64 operand {text!r}")


def _arm_imm(text: str) -> int:
    if not text.startswith("#"):
        raise OperandError(f"ARM immediate must start with '#': {text!r}")
    return parse_int(text[1:])


def _arm_shift(text: str) -> ShiftOp | None:
    m = re.fullmatch(r"(lsl|lsr|asr)\s+(#\S+)", text)
    if m is None:
        return None
    return ShiftOp(m.group(1), _arm_imm(m.group(2)))


def _arm_mem(text: str) -> MemOp:
    parts = [p.strip() for p in text[1:-1].split(",")]
    base = arm_reg(parts[0])
    if base is None:
        raise OperandError(f"bad base register in {text!r}")
    if len(parts) == 1:
        return MemOp(base)
    if len(parts) == 2 and parts[1].startswith("#"):
        return MemOp(base, disp=_arm_imm(parts[1]))
    index = arm_reg(parts[1])
    if index is None:
        raise OperandError(f"bad offset in {text!r}")
    if len(parts) == 2:
        return MemOp(base, index)
    shift = _arm_shift(parts[2]) if len(parts) == 3 else None
    if shift is None or shift.kind != "lsl":
        raise OperandError(f"bad memory operand {text!r}")
    return MemOp(base, index, shift=shift.amount)


def _arm_operand(text: str) -> Operand:
    reg = arm_reg(text)
    if reg is not None:
        return RegOp(reg, 32)
    if text.startswith("#"):
        return ImmOp(_arm_imm(text))
    if text.startswith("[") and text.endswith("]"):
        return _arm_mem(text)
    if text.startswith("{") and text.endswith("}"):
        regs: list[str] = []
        for item in text[1:-1].split(","):
            item = item.strip()
            if "-" in item:
                lo, hi = (arm_reg(x.strip()) for x in item.split("-", 1))
                if lo is None or hi is None:
                    raise OperandError(f"bad register range {item!r}")
                i, j = ARM_FULL.index(lo), ARM_FULL.index(hi)
                regs.extend(ARM_FULL[i : j + 1])
            else:
                r = arm_reg(item)
                if r is None:
                    raise OperandError(f"bad register {item!r} in list")
                regs.append(r)
        if not regs:
            raise OperandError("empty register list")
        return RegListOp(tuple(sorted(set(regs), key=ARM_FULL.index)))
    shift = _arm_shift(text)
    if shift is not None:
        return shift
    if _INT_RE.fullmatch(text) or _LABEL_RE.fullmatch(text):
        return LabelOp(text)
    raise OperandError(f"unparseable ARM32 operand {text!r}")


@lru_cache(maxsize=4096)
def parse_operand(text: str, arch: Arch) -> Operand:
    text = text.strip()
    parse = _x86_operand if arch is Arch.X86_64 else _arm_operand
    op = parse(text.lower())
    # symbol names are case-sensitive
    return LabelOp(text) if isinstance(op, LabelOp) else op


X86_CONDITIONAL = frozenset(
    "jo jno jb jnae jc jnb jae jnc je jz jne jnz jbe jna jnbe ja js jns jp jpe jnp jpo "
    "jl jnge jnl jge jle jng jnle jg".split()
)
ARM_CONDITIONS = frozenset("eq ne cs hs cc lo mi pl vs vc hi ls ge lt gt le".split())


def is_conditional_branch(mnemonic: str, arch: Arch) -> bool:
    if arch is Arch.X86_64:
        return mnemonic in X86_CONDITIONAL
    return mnemonic.startswith("b") and mnemonic[1:] in ARM_CONDITIONS
