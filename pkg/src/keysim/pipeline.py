"""Bundle function -> Key IR graph, with memoization for repeated lookups."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from keysim.ingest import Function, Program, parse_bundle
from keysim.keyir import KeyGraph, build_key_graph
from keysim.lift import LiftedFunction, lift_function
from keysim.symexec import DEFAULT_RUNS, DEFAULT_SEED, DEFAULT_STEP_BUDGET, ValueSets, execute


@dataclass(frozen=True)
class ExecConfig:
    runs: int = DEFAULT_RUNS
    seed: int = DEFAULT_SEED
    budget: int = DEFAULT_STEP_BUDGET

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")


@dataclass(frozen=True)
class Analysis:
    lifted: LiftedFunction
    values: ValueSets
    graph: KeyGraph


def analyze(f: Function, config: ExecConfig = ExecConfig()) -> Analysis:
    lf = lift_function(f)
    vs = execute(lf, config.runs, config.seed, config.budget)
    return Analysis(lf, vs, build_key_graph(lf, vs))


def load_program(path: str | Path) -> Program:
    path = Path(path)
    return parse_bundle(path.read_text(encoding="utf-8"), source_name=path.name)


class GraphCache:
    def __init__(self, config: ExecConfig = ExecConfig()):
        self.config = config
        self._programs: dict[Path, Program] = {}
        self._graphs: dict[tuple[Path, str], KeyGraph] = {}

    def program(self, path: Path) -> Program:
        path = path.resolve()
        if path not in self._programs:
            self._programs[path] = load_program(path)
        return self._programs[path]

    def graph(self, path: Path, function: str) -> KeyGraph:
        key = (path.resolve(), function)
        if key not in self._graphs:
            self._graphs[key] = analyze(self.program(path).function(function), self.config).graph
        return self._graphs[key]
