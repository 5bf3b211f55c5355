"""Simulation/synthesis execution, report parsers and the mock backend."""

from .mock import MockScenario, mock_backend
from .parsers import ParseError, parse_area, parse_delay, parse_power, parse_worst_slack
from .tools import (
    CommandSimulator,
    CommandSynthesizer,
    SpawnError,
    ToolCommand,
    ToolError,
    ToolRunRecord,
    Toolchain,
    Workspace,
    run_simulation,
    run_synthesis,
)

__all__ = [
    "CommandSimulator",
    "CommandSynthesizer",
    "MockScenario",
    "ParseError",
    "SpawnError",
    "ToolCommand",
    "ToolError",
    "ToolRunRecord",
    "Toolchain",
    "Workspace",
    "mock_backend",
    "parse_area",
    "parse_delay",
    "parse_power",
    "parse_worst_slack",
    "run_simulation",
    "run_synthesis",
]
