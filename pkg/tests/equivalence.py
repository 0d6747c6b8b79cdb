"""Lifted micro-ops vs. the reference semantics in ``oracles``."""

from __future__ import annotations

import random
import zlib
from functools import lru_cache

from keysim.asm import Arch, Convention, split_operands
from keysim.lift import lift_instruction
from keysim.ingest import Instruction
from keysim.lift.interp import Machine, condition_holds
from keysim.lift.micro import Cond

from oracles import (
    ARM_COND_OF,
    ARM_GPRS,
    X86_COND_OF,
    X86_GPRS,
    ZS_CONDS,
    Case,
    RefARM,
    RefX86,
    memory_byte,
)

ARCH = {"x86_64": Arch.X86_64, "arm32": Arch.ARM32}
CONV = {"sysv64": Convention.SYSV64, "win64": Convention.WIN64, "aapcs32": Convention.AAPCS32}


def instruction(text: str) -> Instruction:
    mnemonic, _, rest = text.partition(" ")
    return Instruction(0x1000, mnemonic, tuple(split_operands(rest)) if rest.strip() else ())


def _specials(width: int) -> tuple[int, ...]:
    top = 1 << (width - 1)
    return (0, 1, 2, 0xFF, 0x80, (1 << width) - 1, top, top - 1, top + 1, 31, 32, 63, 64)


SPECIALS = {w: _specials(w) for w in (32, 64)}


def register_file(rng: random.Random, names: tuple[str, ...], width: int) -> dict[str, int]:
    """Random values, a quarter of them drawn from boundary cases."""
    special = SPECIALS[width]
    bits = rng.getrandbits
    return {r: special[bits(8) % len(special)] if bits(2) == 0 else bits(width) for r in names}


def _call_result(target: str, site: int, reg: str | None) -> int:
    return zlib.crc32(f"{target}/{site}/{reg}".encode()) * 0x9E3779B97F4A7C15 & ((1 << 64) - 1)


@lru_cache(maxsize=None)
def _conditions(arch: Arch, scope: str) -> tuple[tuple[Cond, str], ...]:
    names = X86_COND_OF if arch is Arch.X86_64 else ARM_COND_OF
    return tuple(
        (c, names[c.value]) for c in Cond if c.value in names and (scope == "full" or c.value in ZS_CONDS)
    )


def check(case: Case, rng: random.Random, ops_cache: dict) -> list[str]:
    """Run one valuation; return human-readable mismatches."""
    arch = ARCH[case.arch]
    word = arch.word
    gprs = X86_GPRS if arch is Arch.X86_64 else ARM_GPRS
    regs = register_file(rng, gprs, word)
    mem = memory_byte(rng.getrandbits(32))

    key = (case.arch, case.text, case.prefix)
    if key not in ops_cache:
        pre = lift_instruction(instruction(case.prefix), arch) if case.prefix else []
        ops_cache[key] = (pre, lift_instruction(instruction(case.text), arch))
    pre, ops = ops_cache[key]

    m = Machine(arch, CONV[case.conv], dict(regs), mem, _call_result)
    if pre:
        m.run(pre)
    m.run(ops)

    ref = (RefX86 if arch is Arch.X86_64 else RefARM)(regs, mem)
    if case.text.startswith(("call ", "bl ", "blx ")) or case.text == "bx r3":
        case.ref(ref, _call_result)
    else:
        case.ref(ref)

    bad = []
    for r in gprs:
        if m.regs[r] != ref.r[r]:
            bad.append(f"{r}: lifted {m.regs[r]:#x}, reference {ref.r[r]:#x}")
    for a in sorted(set(m.memory) | set(ref.mem)):
        got, want = m.read_mem(a, 8), ref.rd(a, 8)
        if got != want:
            bad.append(f"mem[{a:#x}]: lifted {got:#x}, reference {want:#x}")
    if m.returned != ref.returned:
        bad.append(f"returned: lifted {m.returned}, reference {ref.returned}")
    if (m.taken or False) != (ref.taken or False):
        bad.append(f"taken: lifted {m.taken}, reference {ref.taken}")

    if case.flags == "none" and not case.prefix:
        if m.lastcmp is not None:
            bad.append(f"flags changed by a non-flag instruction: {m.lastcmp}")
    elif case.flags in ("full", "zs") and not case.prefix and ref.flags is None:
        bad.append("reference semantics set no flags")
    elif case.flags in ("full", "zs") and not case.prefix:
        for cond, name in _conditions(arch, case.flags):
            got = condition_holds(cond, m.lastcmp)
            want = ref.cond(name)
            if got != want:
                bad.append(f"condition {cond.value}: lifted {got}, reference {want}")
    return bad


def run_cases(cases: list[Case], valuations: int, seed: int = 7) -> dict[str, list[str]]:
    """Map of case text to the first mismatches found (empty when all agree)."""
    rng = random.Random(seed)
    cache: dict = {}
    failures = {}
    for case in cases:
        for _ in range(valuations):
            bad = check(case, rng, cache)
            if bad:
                failures[f"{case.arch}: {case.text}"] = bad[:4]
                break
    return failures
