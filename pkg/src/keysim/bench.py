"""Pair-classification benchmark over a labelled TSV of function pairs."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from keysim.compare import CompareParams, match_graphs
from keysim.keyir import SCHEMA_VERSION
from keysim.pipeline import ExecConfig, GraphCache


class PairsFileError(ValueError):
    pass


@dataclass(frozen=True)
class PairSpec:
    bundle_a: str
    function_a: str
    bundle_b: str
    function_b: str
    label: bool


@dataclass(frozen=True)
class PairRow:
    pair: PairSpec
    aggregate: float
    similar: bool

    @property
    def correct(self) -> bool:
        return self.similar == self.pair.label


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[PairRow, ...]

    @property
    def confusion(self) -> dict[str, int]:
        c = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
        for r in self.rows:
            key = ("t" if r.correct else "f") + ("p" if r.similar else "n")
            c[key] += 1
        return c

    @property
    def accuracy(self) -> float:
        if not self.rows:
            return 0.0
        c = self.confusion
        return (c["tp"] + c["tn"]) / len(self.rows)

    def to_json(self, params: CompareParams, config: ExecConfig) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": vars(params).copy(),
            "runs": config.runs,
            "seed": config.seed,
            "pairs": [
                {
                    "bundle_a": r.pair.bundle_a,
                    "function_a": r.pair.function_a,
                    "bundle_b": r.pair.bundle_b,
                    "function_b": r.pair.function_b,
                    "label": int(r.pair.label),
                    "aggregate": r.aggregate,
                    "verdict": "similar" if r.similar else "dissimilar",
                }
                for r in self.rows
            ],
            "accuracy": self.accuracy,
            "confusion": self.confusion,
        }


def read_pairs(path: str | Path) -> list[PairSpec]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter="\t"), 1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 5 or row[4].strip() not in ("0", "1"):
                raise PairsFileError(f"{path}:{lineno}: expected 5 tab-separated fields ending in 0 or 1")
            a, fa, b, fb, label = (x.strip() for x in row)
            out.append(PairSpec(a, fa, b, fb, label == "1"))
    return out


def run_bench(
    pairs_path: str | Path,
    params: CompareParams = CompareParams(),
    config: ExecConfig = ExecConfig(),
) -> BenchResult:
    """Bundle paths in the TSV are resolved relative to the TSV's directory."""
    base = Path(pairs_path).parent
    cache = GraphCache(config)
    rows = []
    for p in read_pairs(pairs_path):
        ga = cache.graph(base / p.bundle_a, p.function_a)
        gb = cache.graph(base / p.bundle_b, p.function_b)
        report = match_graphs(ga, gb, params)
        rows.append(PairRow(p, report.aggregate, report.similar))
    return BenchResult(tuple(rows))
