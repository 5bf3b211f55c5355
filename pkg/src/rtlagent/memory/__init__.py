"""Evolvable structured memory: bank, triggering and evolution."""

from .bank import SCHEMA_VERSION, MemoryBank, load_bank, save_bank
from .manager import (
    TaskContext,
    apply_action,
    decide,
    evolve,
    format_signals,
    generate_nodes,
    retrieve,
    seed_nodes,
    select_memory,
    trajectory_digest,
)

__all__ = [
    "SCHEMA_VERSION",
    "MemoryBank",
    "TaskContext",
    "apply_action",
    "decide",
    "evolve",
    "format_signals",
    "generate_nodes",
    "load_bank",
    "retrieve",
    "save_bank",
    "seed_nodes",
    "select_memory",
    "trajectory_digest",
]
