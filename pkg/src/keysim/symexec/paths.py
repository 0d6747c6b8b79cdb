"""Randomized path selection over a CFG.

A path is a block-id sequence. Every block may be visited at most ``VISIT_CAP``
times; entering a loop from outside resets the counts of its body, so each
entry of a loop walks its body twice. When the walker runs out of allowed
successors inside a loop it switches that loop to *exit mode*: it then moves
only along edges that strictly shorten the distance to a loop exit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from keysim.ingest import Function
from keysim.symexec.loops import LoopInfo, detect_loops

VISIT_CAP = 2
MAX_PATH_BLOCKS = 10_000


@dataclass
class Frame:
    """Walker bookkeeping after a block has been entered."""

    visits: dict[int, int] = field(default_factory=dict)
    exiting: set[int] = field(default_factory=set)  # loop headers in exit mode

    def copy(self) -> "Frame":
        return Frame(dict(self.visits), set(self.exiting))


@dataclass(frozen=True)
class AuxPath:
    origin: int  # covered block whose stored exit state seeds the path
    blocks: tuple[int, ...]


@dataclass(frozen=True)
class RunPlan:
    main_path: tuple[int, ...]
    aux_paths: tuple[AuxPath, ...]
    seed: str

    def covered(self) -> set[int]:
        out = set(self.main_path)
        for p in self.aux_paths:
            out.update(p.blocks)
        return out


class Walker:
    def __init__(self, f: Function, loops: LoopInfo, rng: random.Random, allowed: set[int] | None = None):
        self.f = f
        self.loops = loops
        self.rng = rng
        self.allowed = allowed

    def enter(self, frame: Frame, prev: int | None, block: int) -> None:
        """Update ``frame`` for the move ``prev -> block``."""
        if prev is None:
            for lp in self.loops.containing(block):
                for b in lp.body:
                    frame.visits.pop(b, None)
        else:
            for lp in self.loops.loops:
                inside_prev, inside_next = prev in lp.body, block in lp.body
                if inside_prev and not inside_next:
                    frame.exiting.discard(lp.header)
                elif inside_next and not inside_prev:
                    frame.exiting.discard(lp.header)
                    for b in lp.body:
                        frame.visits.pop(b, None)
        frame.visits[block] = frame.visits.get(block, 0) + 1

    def _count(self, frame: Frame, block: int, succ: int) -> int:
        for lp in self.loops.loops:
            if succ in lp.body and block not in lp.body:
                return 0
        return frame.visits.get(succ, 0)

    def _exit_move(self, block: int, succs: list[int], frame: Frame) -> int | None:
        for lp in self.loops.containing(block):
            if lp.header not in frame.exiting:
                continue
            here = lp.exit_distance.get(block)
            if here is None:
                return None
            cands = [s for s in succs if s not in lp.body or lp.exit_distance.get(s, here) < here]
            return self.rng.choice(cands) if cands else None
        raise AssertionError("no loop in exit mode")

    def next_block(self, block: int, frame: Frame) -> int | None:
        succs = list(self.f.successors(block))
        if self.allowed is not None:
            succs = [s for s in succs if s in self.allowed]
        if not succs:
            return None
        if any(lp.header in frame.exiting for lp in self.loops.containing(block)):
            return self._exit_move(block, succs, frame)
        open_ = [s for s in succs if self._count(frame, block, s) < VISIT_CAP]
        inner = self.loops.innermost(block)
        if open_:
            if inner is not None:
                stay = [s for s in open_ if s in inner.body]
                if stay:
                    open_ = stay
            return self.rng.choice(open_)
        if inner is None:
            return None
        frame.exiting.add(inner.header)
        return self._exit_move(block, succs, frame)

    def walk(self, start: int, frame: Frame, prev: int | None = None):
        """Yield ``(block, frame)`` from ``start`` until the walk stops.

        The yielded frame is live; copy it to keep a snapshot.
        """
        block: int | None = start
        for _ in range(MAX_PATH_BLOCKS):
            if block is None:
                return
            self.enter(frame, prev, block)
            yield block, frame
            prev, block = block, self.next_block(block, frame)


def walk_main(f: Function, loops: LoopInfo, rng: random.Random) -> tuple[list[int], dict[int, Frame]]:
    path: list[int] = []
    frames: dict[int, Frame] = {}
    for block, frame in Walker(f, loops, rng).walk(f.entry, Frame()):
        path.append(block)
        frames[block] = frame.copy()
    return path, frames


def sample_main_path(f: Function, rng: random.Random, loops: LoopInfo | None = None) -> list[int]:
    """Random depth-first path from the entry block under the loop rules."""
    return walk_main(f, loops or detect_loops(f), rng)[0]


def next_aux_path(
    f: Function,
    loops: LoopInfo,
    covered: set[int],
    frames: dict[int, Frame],
    rng: random.Random,
) -> AuxPath | None:
    """One auxiliary path into uncovered territory, or None when nothing is left.

    ``covered`` and ``frames`` are updated in place with the new blocks.
    """
    reachable = f.reachable()
    frontier = sorted(
        (u, v) for u in covered for v in f.successors(u) if v in reachable and v not in covered
    )
    if not frontier:
        return None
    origin, first = rng.choice(frontier)
    walker = Walker(f, loops, rng, allowed=reachable - covered)
    frame = frames[origin].copy() if origin in frames else Frame()
    blocks = []
    for block, live in walker.walk(first, frame, prev=origin):
        blocks.append(block)
        frames[block] = live.copy()
    covered.update(blocks)
    return AuxPath(origin, tuple(blocks))


def cover_residual(
    f: Function,
    covered: set[int],
    rng: random.Random,
    loops: LoopInfo | None = None,
    frames: dict[int, Frame] | None = None,
) -> list[AuxPath]:
    """Auxiliary paths that together reach every reachable block not in ``covered``."""
    loops = loops or detect_loops(f)
    covered = set(covered)
    frames = {} if frames is None else frames
    out = []
    while (aux := next_aux_path(f, loops, covered, frames, rng)) is not None:
        out.append(aux)
    return out
