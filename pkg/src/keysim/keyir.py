"""Key instruction extraction and the Key IR graph."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from keysim.diagnostics import Diagnostic
from keysim.expr import Expr
from keysim.ingest import Function
from keysim.lift import LiftedFunction
from keysim.lift.micro import Call, Compare, Flavor, MicroOp, Return, Store
from keysim.simplify import canonical_text
from keysim.symexec import ValueSets

SCHEMA_VERSION = 1


class KeyKind(enum.Enum):
    CALL = "call"
    COMPARE = "compare"
    RETURN = "return"
    MEMWRITE = "memwrite"

    @property
    def affects_control(self) -> bool:
        return self is not KeyKind.MEMWRITE


@dataclass(frozen=True)
class CallPayload:
    callee: str
    args: tuple[Expr, ...]

    def text(self) -> str:
        return f"{self.callee}({', '.join(canonical_text(a) for a in self.args)})"


@dataclass(frozen=True)
class ComparePayload:
    lhs: Expr
    rhs: Expr
    flavor: Flavor

    def text(self) -> str:
        return f"{canonical_text(self.lhs)} {self.flavor.value} {canonical_text(self.rhs)}"


@dataclass(frozen=True)
class ReturnPayload:
    value: Expr

    def text(self) -> str:
        return canonical_text(self.value)


@dataclass(frozen=True)
class MemWritePayload:
    addr: Expr
    value: Expr

    def text(self) -> str:
        return f"[{canonical_text(self.addr)}] = {canonical_text(self.value)}"


KeyPayload = CallPayload | ComparePayload | ReturnPayload | MemWritePayload


@dataclass(frozen=True)
class KeyNode:
    id: int
    address: int
    kind: KeyKind
    payloads: tuple[KeyPayload, ...]

    def texts(self) -> list[str]:
        return [p.text() for p in self.payloads]


@dataclass(frozen=True)
class KeyGraph:
    nodes: tuple[KeyNode, ...]
    edges: tuple[tuple[int, int], ...]
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    def node(self, node_id: int) -> KeyNode:
        return self.nodes[node_id]

    def neighbors(self, node_id: int) -> set[int]:
        """Undirected adjacency."""
        out = set()
        for a, b in self.edges:
            if a == node_id:
                out.add(b)
            if b == node_id:
                out.add(a)
        out.discard(node_id)
        return out

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "nodes": [
                {"id": n.id, "address": f"{n.address:x}", "kind": n.kind.value, "payloads": n.texts()}
                for n in self.nodes
            ],
            "edges": [list(e) for e in self.edges],
        }


def _key_index(micro: tuple[MicroOp, ...], kind: KeyKind) -> int:
    want = {KeyKind.CALL: Call, KeyKind.COMPARE: Compare, KeyKind.RETURN: Return}.get(kind)
    if want is not None:
        return next(k for k, op in enumerate(micro) if isinstance(op, want))
    return max(k for k, op in enumerate(micro) if isinstance(op, Store))


def classify(micro: tuple[MicroOp, ...] | list[MicroOp]) -> KeyKind | None:
    """Key category of one instruction's micro-ops, CALL taking precedence."""
    if any(isinstance(op, Call) for op in micro):
        return KeyKind.CALL
    if any(isinstance(op, Compare) for op in micro):
        return KeyKind.COMPARE
    if any(isinstance(op, Return) for op in micro):
        return KeyKind.RETURN
    # pushes lift to Push, not Store, so push slots never land here
    if any(isinstance(op, Store) for op in micro):
        return KeyKind.MEMWRITE
    return None


def payload_of(kind: KeyKind, op: MicroOp, record: tuple[Expr, ...]) -> KeyPayload:
    if kind is KeyKind.CALL:
        return CallPayload(op.target, tuple(record))
    if kind is KeyKind.COMPARE:
        return ComparePayload(record[0], record[1], op.flavor)
    if kind is KeyKind.RETURN:
        return ReturnPayload(record[0])
    return MemWritePayload(record[0], record[1])


def return_values(lf: LiftedFunction, vs: ValueSets) -> tuple[set[Expr], list[Diagnostic]]:
    """Values of the return register observed at every RET site."""
    out: set[Expr] = set()
    sites = 0
    for addr, micro in lf.micro.items():
        for k, op in enumerate(micro):
            if isinstance(op, Return):
                sites += 1
                out.update(obs[k][0] for obs in vs.values.get(addr, ()))
    if not sites:
        return out, [Diagnostic.warning("function has no return instruction")]
    return out, []


def instruction_successors(f: Function) -> dict[int, list[int]]:
    """Instruction-level control flow, keyed by address."""
    succ: dict[int, list[int]] = {}
    for b in f.blocks:
        insns = b.instructions
        for i, j in zip(insns, insns[1:]):
            succ[i.address] = [j.address]
        succ[insns[-1].address] = [f.block(s).instructions[0].address for s in b.succ_ids]
    return succ


def key_edges(succ: dict[int, list[int]], keys: set[int]) -> set[tuple[int, int]]:
    """(a, b) for key instructions joined by a path through non-key instructions only."""
    edges = set()
    for a in keys:
        seen: set[int] = set()
        queue = deque(succ.get(a, ()))
        while queue:
            n = queue.popleft()
            if n in seen:
                continue
            seen.add(n)
            if n in keys:
                edges.add((a, n))
                continue
            queue.extend(succ.get(n, ()))
    return edges


def build_key_graph(lf: LiftedFunction, vs: ValueSets) -> KeyGraph:
    f = lf.function
    diags: list[Diagnostic] = []
    nodes: list[KeyNode] = []
    for insn in sorted(f.instructions(), key=lambda i: i.address):
        micro = lf.micro[insn.address]
        kind = classify(micro)
        if kind is None:
            continue
        observed = vs.values.get(insn.address, ())
        if not observed:
            diags.append(Diagnostic.warning("key instruction never executed; dropped", insn.address))
            continue
        k = _key_index(micro, kind)
        uniq = {}
        for obs in observed:
            p = payload_of(kind, micro[k], obs[k])
            uniq.setdefault(p.text(), p)
        payloads = tuple(uniq[t] for t in sorted(uniq))
        nodes.append(KeyNode(len(nodes), insn.address, kind, payloads))
    if not nodes:
        diags.append(Diagnostic.warning(f"function {f.name} has no key instructions"))
    ids = {n.address: n.id for n in nodes}
    edges = key_edges(instruction_successors(f), set(ids))
    return KeyGraph(tuple(nodes), tuple(sorted((ids[a], ids[b]) for a, b in edges)), tuple(diags))
