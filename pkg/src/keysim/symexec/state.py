from __future__ import annotations

from dataclasses import dataclass, field

from keysim.asm import Arch, Convention
from keysim.expr import Expr, Reg, Var
from keysim.lift.micro import Flavor
from keysim.lift.regs import ARG_REGISTERS, ARITY_BUDGET, REGISTERS, STACK_POINTER
from keysim.simplify import canonical_text

LastCmp = tuple[Expr, Expr, Flavor]


@dataclass
class Cell:
    addr: Expr
    value: Expr
    width: int


@dataclass
class SymState:
    registers: dict[str, Expr]
    memory: dict[str, Cell] = field(default_factory=dict)
    lastcmp: LastCmp | None = None
    # architectural registers written since entry or the last call
    written: set[str] = field(default_factory=set)

    @classmethod
    def initial(cls, arch: Arch, convention: Convention) -> "SymState":
        word = arch.word
        params = ARG_REGISTERS[convention]
        regs: dict[str, Expr] = {}
        for r in REGISTERS[arch]:
            if r in params:
                regs[r] = Var(params.index(r), word)
            elif r == STACK_POINTER[arch]:
                regs[r] = Reg("sp", word)
            else:
                regs[r] = Reg(r, word)
        return cls(regs)

    def copy(self) -> "SymState":
        return SymState(dict(self.registers), dict(self.memory), self.lastcmp, set(self.written))

    def snapshot(self) -> tuple[dict[str, Expr], dict[str, Cell]]:
        return dict(self.registers), dict(self.memory)


def call_args(state: SymState, convention: Convention, budget: int | None = None) -> list[Expr]:
    """Argument registers up to the last one written since entry or the previous call."""
    regs = ARG_REGISTERS[convention][: budget or ARITY_BUDGET[convention]]
    last = max((k for k, r in enumerate(regs) if r in state.written), default=-1)
    return [state.registers[r] for r in regs[: last + 1]]


def same_value(a: Expr, b: Expr) -> bool:
    return a is b or canonical_text(a) == canonical_text(b)
