"""Symbolic execution of lifted functions along sampled paths."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

from keysim.diagnostics import Diagnostic
from keysim.expr import BinKind, BinOp, Const, Expr, Loc, Mem, Reg, Ret, UnOp, make_iter, substitute, trunc
from keysim.lift import LiftedFunction
from keysim.lift.micro import (
    Bin,
    Branch,
    Call,
    Compare,
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
from keysim.lift.regs import CALLER_SAVED, RETURN_REGISTER, STACK_POINTER, is_temp
from keysim.simplify import canonical_text, simplify
from keysim.symexec.loops import LoopInfo, detect_loops
from keysim.symexec.paths import AuxPath, RunPlan, next_aux_path, walk_main
from keysim.symexec.state import Cell, SymState, call_args, same_value

log = logging.getLogger(__name__)

DEFAULT_RUNS = 8
DEFAULT_SEED = 20240
DEFAULT_STEP_BUDGET = 50_000

# One record per micro-op of the instruction; each record is the tuple of
# values that micro-op produced (empty for temps, branches and the like).
Observation = tuple[tuple[Expr, ...], ...]


def observation_text(obs: Observation) -> str:
    return "; ".join(", ".join(canonical_text(v) for v in rec) for rec in obs if rec)


class BudgetExceeded(Exception):
    pass


@dataclass
class RunResult:
    observations: dict[int, Observation]
    plan: RunPlan
    diagnostics: list[Diagnostic] = field(default_factory=list)


@dataclass
class ValueSets:
    values: dict[int, tuple[Observation, ...]]
    run_count: int
    plans: tuple[RunPlan, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = ()

    def texts(self, address: int) -> list[str]:
        return [observation_text(o) for o in self.values.get(address, ())]

    def to_json(self) -> dict:
        return {f"{a:x}": self.texts(a) for a in sorted(self.values)}


# Loop context: header -> snapshot taken at the first back-edge since entry.
LoopCtx = dict[int, "tuple | None"]


class Executor:
    """Applies micro-ops to a SymState and records per-instruction observations."""

    def __init__(self, lf: LiftedFunction, budget: int = DEFAULT_STEP_BUDGET):
        self.lf = lf
        self.arch = lf.arch
        self.conv = lf.convention
        self.word = lf.arch.word
        self.budget = budget
        self.steps = 0
        self.temps: dict[str, Expr] = {}

    def _instantiate(self, s: SymState, template: Expr) -> Expr:
        def leaf(node: Expr):
            if isinstance(node, Loc):
                if is_temp(node.name):
                    return self.temps[node.name]
                return trunc(s.registers[node.name], node.width)
            return None

        return simplify(substitute(template, leaf))

    def _set(self, s: SymState, dst: str, value: Expr) -> tuple[Expr, ...]:
        if is_temp(dst):
            self.temps[dst] = value
            return ()
        s.registers[dst] = value
        s.written.add(dst)
        return (value,)

    def _load(self, s: SymState, addr: Expr, width: int) -> Expr:
        cell = s.memory.get(canonical_text(addr))
        if cell is not None:
            if cell.width == width:
                return cell.value
            if cell.width > width:
                return simplify(trunc(cell.value, width))
        return Mem(addr, width)

    def _store(self, s: SymState, addr: Expr, value: Expr, width: int) -> None:
        s.memory[canonical_text(addr)] = Cell(addr, value, width)

    def _sp_adjust(self, s: SymState, delta: int) -> Expr:
        sp = STACK_POINTER[self.arch]
        kind = BinKind.ADD if delta >= 0 else BinKind.SUB
        s.registers[sp] = simplify(BinOp(kind, s.registers[sp], Const(abs(delta), self.word)))
        return s.registers[sp]

    def step(self, s: SymState, op: MicroOp, address: int) -> tuple[Expr, ...]:
        self.steps += 1
        if self.steps > self.budget:
            raise BudgetExceeded
        if isinstance(op, Move):
            return self._set(s, op.dst, self._instantiate(s, op.src))
        if isinstance(op, Bin):
            lhs = self._instantiate(s, op.lhs)
            raw = UnOp(op.kind, lhs) if op.rhs is None else BinOp(op.kind, lhs, self._instantiate(s, op.rhs))
            value = simplify(raw)
            if op.sets_flags:
                s.lastcmp = (value, Const(0, value.width), Flavor.SUB_CMP)
            return self._set(s, op.dst, value)
        if isinstance(op, Load):
            addr = self._instantiate(s, op.addr)
            return self._set(s, op.dst, self._load(s, addr, op.width))
        if isinstance(op, Store):
            addr = self._instantiate(s, op.addr)
            value = self._instantiate(s, op.src)
            self._store(s, addr, value, op.width)
            return (addr, value)
        if isinstance(op, Push):
            value = self._instantiate(s, op.src)
            addr = self._sp_adjust(s, -(op.width // 8))
            self._store(s, addr, value, op.width)
            return (addr, value)
        if isinstance(op, Pop):
            sp = STACK_POINTER[self.arch]
            value = self._load(s, s.registers[sp], op.width)
            self._sp_adjust(s, op.width // 8)
            return self._set(s, op.dst, value)
        if isinstance(op, Compare):
            lhs, rhs = self._instantiate(s, op.lhs), self._instantiate(s, op.rhs)
            s.lastcmp = (lhs, rhs, op.flavor)
            return (lhs, rhs)
        if isinstance(op, Call):
            args = call_args(s, self.conv)
            site = self.lf.call_sites.get(address, 0)
            ret = RETURN_REGISTER[self.arch]
            for r in CALLER_SAVED[self.conv]:
                s.registers[r] = Ret(op.target, site, None if r == ret else r, self.word)
            s.written = set()
            s.lastcmp = None
            return tuple(args)
        if isinstance(op, Return):
            return (s.registers[RETURN_REGISTER[self.arch]],)
        if isinstance(op, Unsupported):
            out = ()
            for r in op.dsts:
                out += self._set(s, r, Reg(f"x{address:x}_{r}", self.word))
            return out
        if isinstance(op, Branch):
            return ()
        raise TypeError(op)

    def run_block(self, s: SymState, block_id: int, sink: dict[int, list[Observation]] | None) -> None:
        for insn in self.lf.function.block(block_id).instructions:
            self.temps = {}
            obs = tuple(self.step(s, op, insn.address) for op in self.lf.micro[insn.address])
            if sink is not None:
                sink.setdefault(insn.address, []).append(obs)


def _wrap_updated(s: SymState, snap) -> None:
    """Wrap every location whose value moved since the pass-1 snapshot."""
    regs, mem = snap
    for r, v in s.registers.items():
        if not same_value(v, regs[r]):
            s.registers[r] = make_iter(regs[r])
    for key, cell in s.memory.items():
        old = mem.get(key)
        if old is not None and not same_value(cell.value, old.value):
            s.memory[key] = Cell(old.addr, make_iter(old.value), old.width)


def transition(loops: LoopInfo, s: SymState, ctx: LoopCtx, prev: int | None, block: int) -> None:
    """Apply loop bookkeeping for the edge ``prev -> block``."""
    if prev is None:
        for lp in loops.containing(block):
            ctx[lp.header] = None
        return
    for lp in loops.containing(prev):
        if block not in lp.body:
            snap = ctx.pop(lp.header, None)
            if snap is not None:
                _wrap_updated(s, snap)
    if (prev, block) in loops.back_edges and ctx.get(block, 0) is None:
        ctx[block] = s.snapshot()
    for lp in loops.containing(block):
        if prev not in lp.body:
            ctx[lp.header] = None


def reduce_occurrences(occ: list[Observation]) -> Observation:
    """Collapse repeated executions of one instruction: changed values become ITER(first)."""
    first = occ[0]
    if len(occ) == 1:
        return first
    out = []
    for i, rec in enumerate(first):
        vals = []
        for j, v in enumerate(rec):
            stable = all(i < len(o) and j < len(o[i]) and same_value(o[i][j], v) for o in occ[1:])
            vals.append(v if stable else make_iter(v))
        out.append(tuple(vals))
    return tuple(out)


def run_once(
    lf: LiftedFunction,
    loops: LoopInfo | None,
    seed,
    budget: int = DEFAULT_STEP_BUDGET,
) -> RunResult:
    f = lf.function
    loops = loops or detect_loops(f)
    rng = random.Random(str(seed))
    ex = Executor(lf, budget)
    sink: dict[int, list[Observation]] = {}
    stored: dict[int, tuple[SymState, LoopCtx]] = {}
    diags: list[Diagnostic] = []

    main, frames = walk_main(f, loops, rng)
    aux_paths: list[AuxPath] = []
    try:
        s = SymState.initial(f.arch, f.convention)
        ctx: LoopCtx = {}
        prev = None
        for b in main:
            transition(loops, s, ctx, prev, b)
            ex.run_block(s, b, sink)
            stored[b] = (s.copy(), dict(ctx))
            prev = b
        covered = set(main)
        while (aux := next_aux_path(f, loops, covered, frames, rng)) is not None:
            aux_paths.append(aux)
            base, base_ctx = stored[aux.origin]
            s, ctx, prev = base.copy(), dict(base_ctx), aux.origin
            for b in aux.blocks:
                transition(loops, s, ctx, prev, b)
                ex.run_block(s, b, sink)
                stored[b] = (s.copy(), dict(ctx))
                prev = b
    except BudgetExceeded:
        diags.append(Diagnostic.warning(f"step budget of {budget} micro-ops exceeded; partial result"))
        log.warning("run %s: step budget exceeded", seed)

    observations = {a: reduce_occurrences(o) for a, o in sink.items()}
    plan = RunPlan(tuple(main), tuple(aux_paths), str(seed))
    return RunResult(observations, plan, diags)


def run_seed(seed, index: int) -> str:
    return f"{seed}/{index}"


def execute(
    lf: LiftedFunction,
    runs: int = DEFAULT_RUNS,
    seed=DEFAULT_SEED,
    budget: int = DEFAULT_STEP_BUDGET,
    loops: LoopInfo | None = None,
) -> ValueSets:
    if runs < 1:
        raise ValueError("runs must be at least 1")
    loops = loops or detect_loops(lf.function)
    merged: dict[int, dict[str, Observation]] = {}
    plans = []
    diags: list[Diagnostic] = list(loops.diagnostics)
    for i in range(runs):
        result = run_once(lf, loops, run_seed(seed, i), budget)
        plans.append(result.plan)
        diags.extend(result.diagnostics)
        for addr, obs in result.observations.items():
            merged.setdefault(addr, {}).setdefault(observation_text(obs), obs)
    values = {a: tuple(v for _, v in sorted(d.items())) for a, d in sorted(merged.items())}
    return ValueSets(values, runs, tuple(plans), tuple(diags))
