"""Rule-based expression simplification and canonical rendering."""

from __future__ import annotations

import logging
from dataclasses import dataclass

from keysim.expr import Expr, rebuild
from keysim.simplify.evaluate import UnboundLeafError, eval_concrete, evaluate
from keysim.simplify.rules import RULES, RewriteRule
from keysim.simplify.text import ExprSyntaxError, canonical_text, parse_expr, tokenize

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10_000

__all__ = [
    "DEFAULT_BUDGET",
    "ExprSyntaxError",
    "RULES",
    "RewriteRule",
    "SimplifyResult",
    "UnboundLeafError",
    "canonical_text",
    "eval_concrete",
    "evaluate",
    "parse_expr",
    "simplify",
    "simplify_with_stats",
    "tokenize",
]


@dataclass(frozen=True)
class SimplifyResult:
    expr: Expr
    firings: int
    exhausted: bool


class _Run:
    def __init__(self, rules: tuple[RewriteRule, ...], budget: int):
        self.rules = rules
        self.budget = budget
        self.firings = 0
        self.memo: dict[Expr, Expr] = {}

    @property
    def exhausted(self) -> bool:
        return self.firings >= self.budget

    def normalize(self, e: Expr) -> Expr:
        hit = self.memo.get(e)
        if hit is not None:
            return hit
        kids = e.children()
        node = rebuild(e, tuple(self.normalize(k) for k in kids)) if kids else e
        while not self.exhausted:
            for rule in self.rules:
                out = rule.apply(node)
                if out is not None:
                    self.firings += 1
                    break
            else:
                break
            # the replacement may contain fresh, unnormalized subterms
            kids = out.children()
            node = rebuild(out, tuple(self.normalize(k) for k in kids)) if kids else out
        if not self.exhausted:
            self.memo[e] = node
        return node


_cache: dict[Expr, Expr] = {}
_CACHE_LIMIT = 1 << 17


def simplify_with_stats(
    e: Expr, budget: int = DEFAULT_BUDGET, rules: tuple[RewriteRule, ...] = RULES
) -> SimplifyResult:
    """Innermost rewriting to a fixpoint, bounded by ``budget`` rule firings."""
    run = _Run(rules, budget)
    out = run.normalize(e)
    if run.exhausted:
        log.warning("simplify: rewrite budget of %d firings exhausted", budget)
    return SimplifyResult(out, run.firings, run.exhausted)


def simplify(e: Expr, budget: int = DEFAULT_BUDGET) -> Expr:
    hit = _cache.get(e)
    if hit is not None:
        return hit
    result = simplify_with_stats(e, budget)
    if not result.exhausted and budget == DEFAULT_BUDGET:
        if len(_cache) >= _CACHE_LIMIT:
            _cache.clear()
        _cache[e] = result.expr
        _cache[result.expr] = result.expr
    return result.expr
