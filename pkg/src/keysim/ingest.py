"""Textual CFG bundle format.

A bundle is a line-oriented document::

    program demo
    function add8 arch=x86_64 cc=sysv64 entry=0
    block 0 @401000 succ=
    401000 lea rax, [rdi+8]
    401004 ret

Full-line comments start with ``#``; a trailing comment is ``#`` preceded by
whitespace and followed by whitespace or end of line (so ARM ``#imm``
operands are not comments). ``cc=`` is optional and defaults per arch.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field

from keysim.asm import (
    ARCH_CONVENTIONS,
    DEFAULT_CONVENTION,
    Arch,
    Convention,
    OperandError,
    is_conditional_branch,
    parse_operand,
    split_operands,
)
from keysim.diagnostics import Diagnostic


class EdgeKind(enum.Enum):
    FALLTHROUGH = "ft"
    TAKEN = "taken"
    UNCONDITIONAL = "jmp"


@dataclass(frozen=True)
class Instruction:
    address: int
    mnemonic: str
    operands: tuple[str, ...] = ()

    def __str__(self) -> str:
        ops = ", ".join(self.operands)
        return f"{self.address:x} {self.mnemonic}" + (f" {ops}" if ops else "")


@dataclass(frozen=True)
class BasicBlock:
    id: int
    address: int
    instructions: tuple[Instruction, ...]
    successors: tuple[tuple[int, EdgeKind], ...] = ()

    @property
    def succ_ids(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.successors)

    @property
    def last(self) -> Instruction:
        return self.instructions[-1]


@dataclass(frozen=True)
class Function:
    name: str
    arch: Arch
    convention: Convention
    entry: int
    blocks: tuple[BasicBlock, ...]
    _index: dict[int, BasicBlock] = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {b.id: b for b in self.blocks})

    def block(self, block_id: int) -> BasicBlock:
        return self._index[block_id]

    def has_block(self, block_id: int) -> bool:
        return block_id in self._index

    def successors(self, block_id: int) -> tuple[int, ...]:
        return self._index[block_id].succ_ids

    def predecessors(self) -> dict[int, list[int]]:
        preds: dict[int, list[int]] = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for s in b.succ_ids:
                if s in preds:
                    preds[s].append(b.id)
        return preds

    def reachable(self) -> set[int]:
        seen = {self.entry} if self.entry in self._index else set()
        queue = deque(seen)
        while queue:
            for s in self._index[queue.popleft()].succ_ids:
                if s in self._index and s not in seen:
                    seen.add(s)
                    queue.append(s)
        return seen

    def instructions(self):
        for b in self.blocks:
            yield from b.instructions


@dataclass(frozen=True)
class Program:
    source_name: str
    functions: tuple[Function, ...]

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)


class BundleError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_COMMENT_RE = re.compile(r"(^|\s)#(\s|$)")
_NAME = r"[A-Za-z_.$@?][\w.$@?]*"
_PROGRAM_RE = re.compile(rf"program\s+(?P<name>{_NAME})")
_FUNCTION_RE = re.compile(
    rf"function\s+(?P<name>{_NAME})\s+arch=(?P<arch>\S+)(?:\s+cc=(?P<cc>\S+))?\s+entry=(?P<entry>\d+)"
)
_BLOCK_RE = re.compile(r"block\s+(?P<id>\d+)\s+@(?P<addr>[0-9a-fA-F]+)\s+succ=(?P<succ>\S*)")
_SUCC_RE = re.compile(r"(\d+):(ft|taken|jmp)")
_INSN_RE = re.compile(r"(?P<addr>[0-9a-fA-F]+)\s+(?P<mn>[A-Za-z][\w.]*)(?:\s+(?P<ops>.*))?")


def _strip_comment(line: str) -> str:
    m = _COMMENT_RE.search(line)
    return line[: m.start()] if m else line


class _FunctionBuilder:
    def __init__(self, name, arch, cc, entry, line):
        self.name, self.arch, self.cc, self.entry, self.line = name, arch, cc, entry, line
        self.blocks: list[dict] = []

    def build(self) -> Function:
        if not self.blocks:
            raise BundleError(f"function {self.name!r} has no blocks", self.line)
        ids = {}
        for b in self.blocks:
            if b["id"] in ids:
                raise BundleError(f"duplicate block id {b['id']}", b["line"])
            ids[b["id"]] = b
            if not b["insns"]:
                raise BundleError(f"block {b['id']} has no instructions", b["line"])
        for b in self.blocks:
            for succ, _ in b["succ"]:
                if succ not in ids:
                    raise BundleError(f"block {b['id']} has dangling successor {succ}", b["line"])
            if len(b["succ"]) > 2:
                raise BundleError(f"block {b['id']} has {len(b['succ'])} successors (max 2)", b["line"])
            if len(b["succ"]) == 2 and not is_conditional_branch(b["insns"][-1].mnemonic, self.arch):
                raise BundleError(f"block {b['id']} has 2 successors but does not end in a conditional branch", b["line"])
            if len(b["succ"]) == 2 and sorted(k.value for _, k in b["succ"]) != ["ft", "taken"]:
                raise BundleError(f"block {b['id']} fork edges must be one ft and one taken", b["line"])
        if self.entry not in ids:
            raise BundleError(f"entry block {self.entry} does not exist", self.line)
        blocks = tuple(
            BasicBlock(b["id"], b["addr"], tuple(b["insns"]), tuple(b["succ"])) for b in self.blocks
        )
        return Function(self.name, self.arch, self.cc, self.entry, blocks)


def parse_bundle(text: str, source_name: str | None = None) -> Program:
    """Parse a bundle document; raises BundleError with line/column."""
    program_name = None
    functions: list[Function] = []
    current: _FunctionBuilder | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        col = raw.find(line[0]) + 1
        head = line.split(None, 1)[0]
        if program_name is None:
            m = _PROGRAM_RE.fullmatch(line)
            if m is None:
                raise BundleError("expected 'program <name>' header", lineno, col)
            program_name = m["name"]
            continue
        if head == "program":
            raise BundleError("duplicate program header", lineno, col)
        if head == "function":
            m = _FUNCTION_RE.fullmatch(line)
            if m is None:
                raise BundleError("malformed function record", lineno, col)
            try:
                arch = Arch(m["arch"])
            except ValueError:
                raise BundleError(f"unknown arch tag {m['arch']!r}", lineno, col + m.start("arch")) from None
            if m["cc"] is None:
                cc = DEFAULT_CONVENTION[arch]
            else:
                try:
                    cc = Convention(m["cc"])
                except ValueError:
                    raise BundleError(f"unknown calling convention {m['cc']!r}", lineno, col + m.start("cc")) from None
                if cc not in ARCH_CONVENTIONS[arch]:
                    raise BundleError(f"convention {cc.value} is not valid for {arch.value}", lineno, col + m.start("cc"))
            if current is not None:
                functions.append(current.build())
            if any(f.name == m["name"] for f in functions):
                raise BundleError(f"duplicate function name {m['name']!r}", lineno, col)
            current = _FunctionBuilder(m["name"], arch, cc, int(m["entry"]), lineno)
            continue
        if current is None:
            raise BundleError("record outside a function", lineno, col)
        if head == "block":
            m = _BLOCK_RE.fullmatch(line)
            if m is None:
                raise BundleError("malformed block record", lineno, col)
            succ = []
            if m["succ"]:
                for item in m["succ"].split(","):
                    sm = _SUCC_RE.fullmatch(item)
                    if sm is None:
                        raise BundleError(f"malformed successor {item!r}", lineno, col + m.start("succ"))
                    succ.append((int(sm[1]), EdgeKind(sm[2])))
            current.blocks.append(
                {"id": int(m["id"]), "addr": int(m["addr"], 16), "succ": succ, "insns": [], "line": lineno}
            )
            continue
        m = _INSN_RE.fullmatch(line)
        if m is None:
            raise BundleError("malformed instruction line", lineno, col)
        if not current.blocks:
            raise BundleError("instruction outside a block", lineno, col)
        block = current.blocks[-1]
        addr = int(m["addr"], 16)
        if block["insns"] and addr <= block["insns"][-1].address:
            raise BundleError("instruction addresses must increase within a block", lineno, col)
        ops: tuple[str, ...] = ()
        if m["ops"]:
            try:
                ops = tuple(split_operands(m["ops"]))
                for op in ops:
                    parse_operand(op, current.arch)
            except OperandError as exc:
                raise BundleError(str(exc), lineno, col + m.start("ops")) from None
        block["insns"].append(Instruction(addr, m["mn"].lower(), ops))
    if program_name is None:
        raise BundleError("empty bundle", 1)
    if current is not None:
        functions.append(current.build())
    return Program(source_name or program_name, tuple(functions))


def serialize_bundle(program: Program) -> str:
    lines = [f"program {program.source_name}"]
    for f in program.functions:
        lines.append(f"function {f.name} arch={f.arch.value} cc={f.convention.value} entry={f.entry}")
        for b in f.blocks:
            succ = ",".join(f"{s}:{k.value}" for s, k in b.successors)
            lines.append(f"block {b.id} @{b.address:x} succ={succ}")
            lines.extend(str(i) for i in b.instructions)
    return "\n".join(lines) + "\n"


def validate_cfg(f: Function) -> list[Diagnostic]:
    """Invariant breaks are errors; unreachable blocks are warnings."""
    diags: list[Diagnostic] = []
    ids = [b.id for b in f.blocks]
    if len(set(ids)) != len(ids):
        diags.append(Diagnostic.error("duplicate block ids"))
    if not f.has_block(f.entry):
        diags.append(Diagnostic.error(f"entry block {f.entry} does not exist"))
        return diags
    for b in f.blocks:
        if not b.instructions:
            diags.append(Diagnostic.error(f"block {b.id} is empty", b.address))
            continue
        for s in b.succ_ids:
            if not f.has_block(s):
                diags.append(Diagnostic.error(f"block {b.id} has dangling successor {s}", b.address))
        if len(b.successors) > 2:
            diags.append(Diagnostic.error(f"block {b.id} has {len(b.successors)} successors", b.address))
        elif len(b.successors) == 2:
            if not is_conditional_branch(b.last.mnemonic, f.arch):
                diags.append(Diagnostic.error(f"block {b.id} forks without a conditional branch", b.address))
            if sorted(k.value for _, k in b.successors) != ["ft", "taken"]:
                diags.append(Diagnostic.error(f"block {b.id} fork edges must be one ft and one taken", b.address))
        addrs = [i.address for i in b.instructions]
        if any(x >= y for x, y in zip(addrs, addrs[1:])):
            diags.append(Diagnostic.error(f"block {b.id} instruction addresses not increasing", b.address))
        for insn in b.instructions:
            try:
                for op in insn.operands:
                    parse_operand(op, f.arch)
            except OperandError as exc:
                diags.append(Diagnostic.error(f"bad operand: {exc}", insn.address))
    if any(d.severity.value == "error" for d in diags):
        return diags
    reachable = f.reachable()
    for b in f.blocks:
        if b.id not in reachable:
            diags.append(Diagnostic.warning(f"block {b.id} is unreachable from entry", b.address))
    return diags
