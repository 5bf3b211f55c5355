"""Deterministic stand-in for the simulator and synthesis flow.

Outcomes are a pure function of ``(seed, source text)`` unless a
:class:`MockScenario` pins them. Synthesis output is rendered as the same
report text the real parsers read, so the full parsing path is exercised.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..domain import PpaMetrics, ReportKind
from .tools import ToolRunRecord, Toolchain

SIM_OUTCOMES = ("pass", "mismatch", "compile_error", "runtime_error", "timeout")
NAMED_SCENARIOS: dict[str, dict] = {
    "fail-then-pass": {"simulation": ["mismatch:3", "pass"]},
    "always-fail": {"simulation": ["mismatch:1"] * 64},
    "synth-fail": {"synthesis": ["fail"] * 64},
}


def _check_sim_outcome(outcome: str) -> str:
    head = outcome.split(":", 1)[0]
    if head not in SIM_OUTCOMES:
        raise ValueError(f"unknown simulation outcome {outcome!r}")
    if head == "mismatch" and ":" in outcome and not outcome.split(":", 1)[1].isdigit():
        raise ValueError(f"bad mismatch count in {outcome!r}")
    return outcome


def _check_synth_outcome(outcome: Any) -> Any:
    if isinstance(outcome, dict):
        PpaMetrics(**outcome)
        return outcome
    if outcome in ("ok", "fail", "timeout") or (isinstance(outcome, str) and outcome.startswith("missing:")):
        if isinstance(outcome, str) and outcome.startswith("missing:"):
            ReportKind(outcome.split(":", 1)[1])
        return outcome
    raise ValueError(f"unknown synthesis outcome {outcome!r}")


@dataclass
class MockScenario:
    """Pinned outcomes, consumed in order before falling back to hash-derived ones.

    ``code_rules`` map a substring of the source to a simulation outcome and
    take precedence over the FIFO. Simulation outcomes: ``pass``,
    ``mismatch[:n]``, ``compile_error``, ``runtime_error``, ``timeout``.
    Synthesis outcomes: ``ok``, ``fail``, ``timeout``, ``missing:<report>``
    or an explicit metrics mapping.
    """

    simulation: list[str] = field(default_factory=list)
    synthesis: list[Any] = field(default_factory=list)
    code_rules: list[tuple[str, str]] = field(default_factory=list)
    sim_pass_rate: float = 1.0

    def __post_init__(self):
        self.simulation = [_check_sim_outcome(o) for o in self.simulation]
        self.synthesis = [_check_synth_outcome(o) for o in self.synthesis]
        self.code_rules = [(str(s), _check_sim_outcome(o)) for s, o in self.code_rules]

    @classmethod
    def named(cls, name: str) -> "MockScenario":
        if name not in NAMED_SCENARIOS:
            raise ValueError(f"unknown scenario {name!r}; known: {sorted(NAMED_SCENARIOS)}")
        return cls.from_dict(NAMED_SCENARIOS[name])

    @classmethod
    def from_dict(cls, d: dict) -> "MockScenario":
        unknown = set(d) - {"simulation", "synthesis", "code_rules", "sim_pass_rate"}
        if unknown:
            raise ValueError(f"unknown scenario fields {sorted(unknown)}")
        return cls(
            list(d.get("simulation", [])),
            list(d.get("synthesis", [])),
            [tuple(r) for r in d.get("code_rules", [])],
            float(d.get("sim_pass_rate", 1.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "MockScenario":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _digest(seed: int, code: str) -> bytes:
    return hashlib.sha256(f"{seed}\x00{code}".encode()).digest()


def _unit(raw: bytes) -> float:
    return int.from_bytes(raw, "big") / float(1 << (8 * len(raw)))


def generated_metrics(seed: int, code: str) -> PpaMetrics:
    h = _digest(seed, code)
    delay = round(0.05 * 10 ** (2 * _unit(h[0:4])), 3)
    area = round(5.0 * 10 ** (3 * _unit(h[4:8])), 3)
    power = float(f"{1e-7 * 10 ** (4 * _unit(h[8:12])):.3g}")
    return PpaMetrics(delay, area, power)


def render_reports(metrics: PpaMetrics, clock_ns: float | None) -> dict[ReportKind, str]:
    """Report text in Yosys ``stat`` / OpenSTA style."""
    timing = [
        "Startpoint: in (input port)",
        "Endpoint: out (output port)",
        f"{metrics.delay_ns:>10}   data arrival time",
    ]
    if clock_ns is not None:
        slack = round(clock_ns - metrics.delay_ns, 6)
        timing += [f"clock period {clock_ns:g}", f"worst slack {slack:g}"]
    p = metrics.power_w
    power = [
        "Group                  Internal  Switching    Leakage      Total",
        "                          Power      Power      Power      Power (Watts)",
        "----------------------------------------------------------------",
        f"Combinational          {p * 0.6:.2e}   {p * 0.3:.2e}   {p * 0.1:.2e}   {p!r}  100.0%",
        "----------------------------------------------------------------",
        f"Total                  {p * 0.6:.2e}   {p * 0.3:.2e}   {p * 0.1:.2e}   {p!r}  100.0%",
    ]
    synth = [
        "=== top ===",
        "   Number of cells:                 42",
        f"   Chip area for module '\\top': {metrics.area_um2!r}",
    ]
    return {
        ReportKind.SYNTHESIS_LOG: "\n".join(synth) + "\n",
        ReportKind.TIMING_REPORT: "\n".join(timing) + "\n",
        ReportKind.POWER_REPORT: "\n".join(power) + "\n",
    }


class _Backend:
    def __init__(self, seed: int, scenario: MockScenario | None):
        self.seed = seed
        self.scenario = scenario or MockScenario()
        self._sim_queue = list(self.scenario.simulation)
        self._synth_queue = list(self.scenario.synthesis)
        self._lock = threading.Lock()
        self.sim_calls = 0
        self.synth_calls = 0

    def _workdir(self, code: str) -> str:
        return f"mock://{_digest(self.seed, code).hex()[:12]}"

    def sim_outcome(self, code: str) -> str:
        with self._lock:
            self.sim_calls += 1
            for needle, outcome in self.scenario.code_rules:
                if needle in code:
                    return outcome
            if self._sim_queue:
                return self._sim_queue.pop(0)
        u = _unit(_digest(self.seed, code)[12:16])
        return "pass" if u < self.scenario.sim_pass_rate else "mismatch"

    def synth_outcome(self) -> Any:
        with self._lock:
            self.synth_calls += 1
            return self._synth_queue.pop(0) if self._synth_queue else "ok"


class MockSimulator:
    def __init__(self, backend: _Backend):
        self.backend = backend

    def simulate(self, code: str, testbench: str, label: str = "sim") -> ToolRunRecord:
        outcome = self.backend.sim_outcome(code)
        head, _, arg = outcome.partition(":")
        wd = self.backend._workdir(code)
        if head == "pass":
            return ToolRunRecord(0, "Test finished\nMismatches: 0 in 100 samples\n", "", 0.0, False, wd)
        if head == "mismatch":
            n = int(arg) if arg else 1 + _digest(self.backend.seed, code)[16] % 20
            return ToolRunRecord(0, f"Test finished\nMismatches: {n} in 100 samples\n", "", 0.0, False, wd)
        if head == "compile_error":
            return ToolRunRecord(1, "", "top.v:3: syntax error\nI give up.\n", 0.0, False, wd)
        if head == "runtime_error":
            return ToolRunRecord(2, "", "FATAL: simulation aborted (segmentation fault)\n", 0.0, False, wd)
        return ToolRunRecord(-1, "", "", 60.0, True, wd)


class MockSynthesizer:
    def __init__(self, backend: _Backend):
        self.backend = backend

    def synthesize(self, code: str, clock_ns: float | None, label: str = "synth"):
        outcome = self.backend.synth_outcome()
        wd = self.backend._workdir(code)
        if outcome == "fail":
            return ToolRunRecord(1, "", "ERROR: synthesis failed: unsupported construct\n", 0.0, False, wd), {}
        if outcome == "timeout":
            return ToolRunRecord(-1, "", "", 600.0, True, wd), {}
        metrics = PpaMetrics(**outcome) if isinstance(outcome, dict) else generated_metrics(self.backend.seed, code)
        reports = render_reports(metrics, clock_ns)
        if isinstance(outcome, str) and outcome.startswith("missing:"):
            reports.pop(ReportKind(outcome.split(":", 1)[1]))
        return ToolRunRecord(0, "synthesis finished\n", "", 0.0, False, wd), reports


def mock_backend(seed: int = 0, scenario: MockScenario | str | None = None) -> Toolchain:
    if isinstance(scenario, str):
        scenario = MockScenario.named(scenario)
    backend = _Backend(seed, scenario)
    return Toolchain(MockSimulator(backend), MockSynthesizer(backend))
