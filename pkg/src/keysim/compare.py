"""Fuzzy matching of Key IR graphs."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass, field
from functools import lru_cache

from keysim.diagnostics import Diagnostic
from keysim.expr import Expr
from keysim.keyir import CallPayload, ComparePayload, KeyGraph, KeyNode, KeyPayload, MemWritePayload, SCHEMA_VERSION
from keysim.simplify import canonical_text, tokenize


@dataclass(frozen=True)
class CompareParams:
    node_threshold: float = 0.8
    boundary: int = 1
    pair_threshold: float = 0.5
    context_weight: float = 0.5

    def __post_init__(self):
        for name in ("node_threshold", "pair_threshold", "context_weight"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.boundary < 0:
            raise ValueError("boundary must be non-negative")


@dataclass(frozen=True)
class Anchor:
    a: int
    b: int
    node_score: float
    context_score: float
    combined: float


@dataclass(frozen=True)
class MatchReport:
    anchors: tuple[Anchor, ...]
    aggregate: float
    similar: bool
    params: CompareParams
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    @property
    def verdict(self) -> str:
        return "similar" if self.similar else "dissimilar"

    def to_json(self, ga: KeyGraph | None = None, gb: KeyGraph | None = None) -> dict:
        def addr(g, i):
            return f"{g.node(i).address:x}" if g is not None else None

        return {
            "schema_version": SCHEMA_VERSION,
            "aggregate": self.aggregate,
            "verdict": self.verdict,
            "params": asdict(self.params),
            "anchors": [
                {
                    "a": x.a,
                    "b": x.b,
                    "a_address": addr(ga, x.a),
                    "b_address": addr(gb, x.b),
                    "node_score": x.node_score,
                    "context_score": x.context_score,
                    "combined": x.combined,
                }
                for x in self.anchors
            ],
            "diagnostics": [str(d) for d in self.diagnostics],
        }


# Width markers are dropped from similarity tokens: the same source compiled
# for a 32-bit and a 64-bit target differs mostly in casts.
_CAST_HEADS = ("zext", "sext", "trunc")


@lru_cache(maxsize=1 << 16)
def expr_tokens(e: Expr) -> tuple[str, ...]:
    out: list[str] = []
    dropped: list[bool] = []
    for tok in tokenize(canonical_text(e)):
        if tok.endswith("("):
            head = tok[:-1]
            drop = head.startswith(_CAST_HEADS)
            dropped.append(drop)
            if not drop:
                out.append("mem(" if head.startswith("mem") else tok)
        elif tok == ")":
            if not dropped.pop():
                out.append(tok)
        else:
            out.append(tok)
    return tuple(out)


def payload_tokens(p: KeyPayload) -> tuple[str, ...]:
    if isinstance(p, ComparePayload):
        return expr_tokens(p.lhs) + (p.flavor.value,) + expr_tokens(p.rhs)
    if isinstance(p, MemWritePayload):
        return ("[",) + expr_tokens(p.addr) + ("]", "=") + expr_tokens(p.value)
    if isinstance(p, CallPayload):
        return _arg_tokens(p)
    return expr_tokens(p.value)


def _arg_tokens(p: CallPayload) -> tuple[str, ...]:
    out: list[str] = []
    for k, a in enumerate(p.args):
        if k:
            out.append(",")
        out.extend(expr_tokens(a))
    return tuple(out)


def edit_distance(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    """Token-level Levenshtein distance."""
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def token_similarity(a: tuple[str, ...], b: tuple[str, ...]) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - edit_distance(a, b) / longest


def payload_similarity(p: KeyPayload, q: KeyPayload) -> float:
    if type(p) is not type(q):
        return 0.0
    if isinstance(p, CallPayload):
        name = 1.0 if p.callee == q.callee else 0.0
        return (name + token_similarity(_arg_tokens(p), _arg_tokens(q))) / 2
    return token_similarity(payload_tokens(p), payload_tokens(q))


def node_similarity(a: KeyNode, b: KeyNode) -> float:
    if a.kind is not b.kind:
        return 0.0
    return max((payload_similarity(p, q) for p in a.payloads for q in b.payloads), default=0.0)


def k_hop(g: KeyGraph, start: int, k: int) -> set[int]:
    """Nodes within ``k`` undirected hops of ``start``, excluding it."""
    adj: dict[int, set[int]] = {n.id: set() for n in g.nodes}
    for x, y in g.edges:
        adj[x].add(y)
        adj[y].add(x)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        if dist[n] == k:
            continue
        for m in adj[n]:
            if m not in dist:
                dist[m] = dist[n] + 1
                queue.append(m)
    dist.pop(start)
    return set(dist)


def _signature(node: KeyNode) -> tuple:
    return (node.address, node.kind.value, tuple(node.texts()))


def greedy_pairs(
    ga: KeyGraph, na: list[int], gb: KeyGraph, nb: list[int], theta: float, sim=None
) -> list[tuple[int, int, float]]:
    """Greedy one-to-one pairing by descending similarity, keeping scores >= theta.

    Ties are broken on the unordered pair of node signatures, so swapping the
    graphs selects the mirrored pairs.
    """
    sim = sim or (lambda x, y: node_similarity(ga.node(x), gb.node(y)))
    cands = []
    for x in na:
        sx = _signature(ga.node(x))
        for y in nb:
            s = sim(x, y)
            if s >= theta:
                sy = _signature(gb.node(y))
                cands.append((-s, min(sx, sy), max(sx, sy), x, y, s))
    cands.sort(key=lambda c: c[:3])
    used_a: set[int] = set()
    used_b: set[int] = set()
    out = []
    for *_, x, y, s in cands:
        if x in used_a or y in used_b:
            continue
        used_a.add(x)
        used_b.add(y)
        out.append((x, y, s))
    return out


def context_similarity(ga: KeyGraph, a: int, gb: KeyGraph, b: int, k: int, theta: float = 0.8) -> float:
    na, nb = sorted(k_hop(ga, a, k)), sorted(k_hop(gb, b, k))
    if not na and not nb:
        return 1.0
    if not na or not nb:
        return 0.0
    return len(greedy_pairs(ga, na, gb, nb, theta)) / max(len(na), len(nb))


def match_graphs(ga: KeyGraph, gb: KeyGraph, params: CompareParams | None = None) -> MatchReport:
    params = params or CompareParams()
    if not ga.nodes and not gb.nodes:
        diag = Diagnostic.warning("both key graphs are empty")
        return MatchReport((), 1.0, 1.0 >= params.pair_threshold, params, (diag,))
    if not ga.nodes or not gb.nodes:
        return MatchReport((), 0.0, 0.0 >= params.pair_threshold, params)
    scores: dict[tuple[int, int], float] = {}

    def sim(x: int, y: int) -> float:
        if (x, y) not in scores:
            scores[(x, y)] = node_similarity(ga.node(x), gb.node(y))
        return scores[(x, y)]

    ids_a = [n.id for n in ga.nodes]
    ids_b = [n.id for n in gb.nodes]
    anchors = []
    w = params.context_weight
    for x, y, s in greedy_pairs(ga, ids_a, gb, ids_b, params.node_threshold, sim):
        ctx = context_similarity(ga, x, gb, y, params.boundary, params.node_threshold)
        anchors.append(Anchor(x, y, s, ctx, (1 - w) * s + w * ctx))
    aggregate = sum(x.combined for x in anchors) / max(len(ids_a), len(ids_b))
    aggregate = min(1.0, max(0.0, aggregate))
    return MatchReport(tuple(anchors), aggregate, classify_pair(aggregate, params.pair_threshold), params)


def classify_pair(aggregate: float, tau: float) -> bool:
    """True for "similar"; a score exactly at the threshold counts as similar."""
    return aggregate >= tau
