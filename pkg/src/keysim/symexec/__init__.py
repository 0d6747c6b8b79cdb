"""Path-sampled symbolic execution over the micro-IR."""

from keysim.symexec.engine import (
    DEFAULT_RUNS,
    DEFAULT_SEED,
    DEFAULT_STEP_BUDGET,
    Executor,
    Observation,
    RunResult,
    ValueSets,
    execute,
    observation_text,
    run_once,
)
from keysim.symexec.loops import Loop, LoopInfo, detect_loops
from keysim.symexec.paths import AuxPath, RunPlan, cover_residual, sample_main_path
from keysim.symexec.state import SymState, call_args

__all__ = [
    "DEFAULT_RUNS",
    "DEFAULT_SEED",
    "DEFAULT_STEP_BUDGET",
    "AuxPath",
    "Executor",
    "Loop",
    "LoopInfo",
    "Observation",
    "RunPlan",
    "RunResult",
    "SymState",
    "ValueSets",
    "call_args",
    "cover_residual",
    "detect_loops",
    "execute",
    "observation_text",
    "run_once",
    "sample_main_path",
]
