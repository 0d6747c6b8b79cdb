from __future__ import annotations

from keysim.asm import ARM_FULL, X86_FULL, Arch, Convention

REGISTERS = {Arch.X86_64: X86_FULL, Arch.ARM32: ARM_FULL}
STACK_POINTER = {Arch.X86_64: "rsp", Arch.ARM32: "sp"}
RETURN_REGISTER = {Arch.X86_64: "rax", Arch.ARM32: "r0"}

ARG_REGISTERS = {
    Convention.SYSV64: ("rdi", "rsi", "rdx", "rcx", "r8", "r9"),
    Convention.WIN64: ("rcx", "rdx", "r8", "r9"),
    Convention.AAPCS32: ("r0", "r1", "r2", "r3"),
}

CALLER_SAVED = {
    Convention.SYSV64: ("rax", "rcx", "rdx", "rsi", "rdi", "r8", "r9", "r10", "r11"),
    Convention.WIN64: ("rax", "rcx", "rdx", "r8", "r9", "r10", "r11"),
    # bl also overwrites lr with the return address
    Convention.AAPCS32: ("r0", "r1", "r2", "r3", "r12", "lr"),
}

ARITY_BUDGET = {Convention.SYSV64: 6, Convention.WIN64: 4, Convention.AAPCS32: 4}


def is_temp(name: str) -> bool:
    return name.startswith("t") and name[1:].isdigit()
