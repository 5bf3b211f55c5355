"""Closed-loop, PPA-aware Verilog generation with an evolving experience memory."""

from .domain import (
    DesignTask,
    MemoryNode,
    PpaMetrics,
    SemanticSignal,
    SimulationResult,
    SynthesisResult,
    TaskOutcome,
    Trajectory,
    VerilogSource,
)
from .orchestrator import Features, RunConfig, run_benchmark, run_task

__version__ = "0.1.0"

__all__ = [
    "DesignTask",
    "Features",
    "MemoryNode",
    "PpaMetrics",
    "RunConfig",
    "SemanticSignal",
    "SimulationResult",
    "SynthesisResult",
    "TaskOutcome",
    "Trajectory",
    "VerilogSource",
    "run_benchmark",
    "run_task",
]
