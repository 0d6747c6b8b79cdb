"""Back-edges and natural loops from dominator analysis."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import networkx as nx

from keysim.diagnostics import Diagnostic
from keysim.ingest import Function

Edge = tuple[int, int]


@dataclass(frozen=True)
class Loop:
    header: int
    back_edges: frozenset[Edge]
    body: frozenset[int]
    # block -> hops to leave the loop (0 outside); blocks with no way out are absent
    exit_distance: dict[int, int] = field(compare=False, hash=False, repr=False)

    @property
    def has_exit(self) -> bool:
        return self.header in self.exit_distance


@dataclass(frozen=True)
class LoopInfo:
    loops: tuple[Loop, ...]
    back_edges: frozenset[Edge]
    natural_bodies: dict[Edge, frozenset[int]]
    irreducible_edges: frozenset[Edge]
    diagnostics: tuple[Diagnostic, ...] = ()

    def containing(self, block: int) -> list[Loop]:
        """Loops whose body holds ``block``, innermost first."""
        return sorted((lp for lp in self.loops if block in lp.body), key=lambda lp: len(lp.body))

    def innermost(self, block: int) -> Loop | None:
        found = self.containing(block)
        return found[0] if found else None

    def by_header(self, header: int) -> Loop:
        return next(lp for lp in self.loops if lp.header == header)


def cfg_graph(f: Function) -> nx.DiGraph:
    g = nx.DiGraph()
    for b in f.blocks:
        g.add_node(b.id)
    for b in f.blocks:
        for s in b.succ_ids:
            g.add_edge(b.id, s)
    return g


def _dominates(idom: dict[int, int], a: int, b: int) -> bool:
    while True:
        if a == b:
            return True
        parent = idom.get(b, b)
        if parent == b:
            return False
        b = parent


def _natural_body(f: Function, preds: dict[int, list[int]], tail: int, head: int) -> frozenset[int]:
    body = {head, tail}
    work = [tail] if tail != head else []
    while work:
        n = work.pop()
        for p in preds[n]:
            if p not in body:
                body.add(p)
                work.append(p)
    return frozenset(body)


def _exit_distance(f: Function, body: frozenset[int]) -> dict[int, int]:
    dist: dict[int, int] = {}
    queue: deque[int] = deque()
    for b in body:
        if any(s not in body for s in f.successors(b)):
            dist[b] = 1
            queue.append(b)
    preds = f.predecessors()
    while queue:
        n = queue.popleft()
        for p in preds[n]:
            if p in body and p not in dist:
                dist[p] = dist[n] + 1
                queue.append(p)
    return dist


def detect_loops(f: Function) -> LoopInfo:
    g = cfg_graph(f)
    reach = nx.descendants(g, f.entry) | {f.entry}
    g = g.subgraph(reach)
    idom = nx.immediate_dominators(g, f.entry)
    post = {n: k for k, n in enumerate(nx.dfs_postorder_nodes(g, f.entry))}
    preds = {n: [p for p in g.predecessors(n)] for n in g}

    back: set[Edge] = set()
    irreducible: set[Edge] = set()
    for u, v in g.edges:
        if post[v] < post[u]:
            continue  # forward or cross edge
        if _dominates(idom, v, u):
            back.add((u, v))
        else:
            irreducible.add((u, v))

    natural = {e: _natural_body(f, preds, *e) for e in sorted(back)}
    merged: dict[int, tuple[set[Edge], set[int]]] = {}
    for (u, v), body in natural.items():
        edges, blocks = merged.setdefault(v, (set(), set()))
        edges.add((u, v))
        blocks |= body
    loops = []
    for head in sorted(merged):
        edges, blocks = merged[head]
        body = frozenset(blocks)
        loops.append(Loop(head, frozenset(edges), body, _exit_distance(f, body)))

    diags = tuple(
        Diagnostic.warning(f"irreducible edge {u} -> {v}; treated as a plain edge", f.block(u).address)
        for u, v in sorted(irreducible)
    )
    return LoopInfo(tuple(loops), frozenset(back), natural, frozenset(irreducible), diags)
