from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import pytest

from keysim.ingest import Program, parse_bundle

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS = FIXTURES / "corpus"


@lru_cache(maxsize=None)
def load(path: str | Path) -> Program:
    path = Path(path)
    return parse_bundle(path.read_text(encoding="utf-8"), path.name)


def shapes() -> Program:
    return load(FIXTURES / "shapes.bundle")


def straight() -> Program:
    return load(FIXTURES / "straight.bundle")


def corpus_programs() -> list[Program]:
    return [load(p) for p in sorted(CORPUS.glob("*.bundle"))]


def all_functions():
    for program in [shapes(), straight(), *corpus_programs()]:
        yield from program.functions


@pytest.fixture
def shape():
    return shapes().function
