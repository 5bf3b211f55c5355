"""Programmer, Correctness and PPA agents.

Verdicts (simulation status, synthesizability, metrics) are computed by
rules from tool output; the LLM is only used to write code and to abstract
raw logs into :class:`SemanticSignal` lists.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Sequence

from .domain import (
    DesignTask,
    MemoryNode,
    PpaMetrics,
    ReportKind,
    SemanticSignal,
    Severity,
    SignalCategory,
    SimStatus,
    SimulationResult,
    SynthesisResult,
    VerilogSource,
)
from .eda.parsers import ParseError, parse_area, parse_delay, parse_power, parse_worst_slack
from .eda.tools import Simulator, SpawnError, Synthesizer, ToolRunRecord
from .llm import ChatMessage, Gateway, LLMError, ProviderProfile
from .memory.manager import format_signals
from .prompting import DEFAULT_PROMPTS, PromptLibrary, parse_json_block, truncate

log = logging.getLogger(__name__)


class ExtractionError(ValueError):
    pass


@dataclass
class AgentConfig:
    pass_markers: list[str] = field(default_factory=lambda: [r"Mismatches:\s*0\b", r"(?i)your design passed", r"(?i)\b0 failures\b"])
    failure_markers: list[str] = field(default_factory=lambda: [r"(?i)\bfail", r"(?i)\berror\b", r"(?i)\bmismatch(es)?\b(?!:\s*0\b)"])
    compile_markers: list[str] = field(
        default_factory=lambda: [r"syntax error", r"I give up", r"(?m)^\S+\.s?v:\d+: error:", r"Unknown module type", r"(?i)compile error"]
    )
    area_growth_factor: float = 3.0
    summarize_reports: bool = True
    delay_patterns: list[str] | None = None
    area_patterns: list[str] | None = None
    log_excerpt_chars: int = 2000
    prompts: PromptLibrary = field(default_factory=lambda: DEFAULT_PROMPTS)


DEFAULT_AGENT_CONFIG = AgentConfig()


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    injected_guidance: tuple[tuple[str, str], ...] = ()
    feedback_digest: str | None = None

    def messages(self) -> list[ChatMessage]:
        return [ChatMessage("system", self.system), ChatMessage("user", self.user)]


# ---------------------------------------------------------------- extraction

_FENCE = re.compile(r"```[ \t]*([\w+-]*)[^\n]*\n(.*?)```", re.DOTALL)
_HDL_TAGS = {"verilog", "systemverilog", "sv", "v"}
_BARE_MODULE = re.compile(r"(?s)(?<![\w$])module\b.*\bendmodule\b")


def extract_code(completion: str) -> str:
    """Last verilog-tagged fenced block, else last untagged block, else a bare module span."""
    blocks = [(tag.lower(), body) for tag, body in _FENCE.findall(completion)]
    preferred = [b for t, b in blocks if t in _HDL_TAGS] or [b for t, b in blocks if not t]
    for body in reversed(preferred):
        if body.strip():
            return body.strip()
    bare = _BARE_MODULE.search(completion)
    if bare:
        return bare.group(0).strip()
    raise ExtractionError("no Verilog code found in completion")


# ---------------------------------------------------------------- programmer

_INSTRUCTIONS = {
    "initial": "Write a complete, synthesizable implementation of the specification.",
    "correctness_fix": "The current implementation failed functional verification. Correct it so it meets the specification exactly.",
    "ppa": "The current implementation is functionally correct. Rewrite it to reduce critical-path delay, cell area and power while keeping its behavior and interface identical.",
}


def metrics_line(metrics: PpaMetrics) -> str:
    return f"Measured PPA: delay {metrics.delay_ns} ns, area {metrics.area_um2} um^2, power {metrics.power_w} W"


def build_programmer_prompt(
    task: DesignTask,
    guidance: Sequence[MemoryNode] = (),
    feedback: Sequence[SemanticSignal] = (),
    previous_code: VerilogSource | None = None,
    metrics: PpaMetrics | None = None,
    purpose: str = "initial",
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> PromptBundle:
    if purpose not in _INSTRUCTIONS:
        raise ValueError(f"unknown generation purpose {purpose!r}")
    parts = []
    if metrics is not None:
        parts.append(metrics_line(metrics))
    if feedback:
        parts.append(format_signals(feedback))
    digest = "\n".join(parts) or None
    user = prompts.render(
        "programmer_user",
        purpose=purpose,
        spec=task.spec_text,
        previous_code=previous_code.code if previous_code else "",
        previous_version=previous_code.version if previous_code else 0,
        guidance=[n.guidance for n in guidance],
        feedback=digest or "",
        instruction=_INSTRUCTIONS[purpose],
    )
    return PromptBundle(
        system=prompts.render("programmer_system"),
        user=user,
        injected_guidance=tuple((n.id, n.guidance) for n in guidance),
        feedback_digest=digest,
    )


def programmer_generate(
    task: DesignTask,
    guidance: Sequence[MemoryNode],
    feedback: Sequence[SemanticSignal],
    previous_code: VerilogSource | None,
    gateway: Gateway,
    main_profile: ProviderProfile | None = None,
    *,
    metrics: PpaMetrics | None = None,
    purpose: str = "initial",
    next_version: int | None = None,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> VerilogSource:
    bundle = build_programmer_prompt(task, guidance, feedback, previous_code, metrics, purpose, prompts)
    completion = gateway.chat(main_profile or gateway.main, bundle.messages())
    if next_version is None:
        next_version = previous_code.version + 1 if previous_code else 1
    return VerilogSource(extract_code(completion), next_version)


# --------------------------------------------------------------- correctness

_MISMATCH_COUNT = re.compile(r"Mismatches:\s*(\d+)")
_SIGNAL_CATEGORIES = ", ".join(c.value for c in SignalCategory)


def classify_simulation(record: ToolRunRecord, cfg: AgentConfig = DEFAULT_AGENT_CONFIG) -> tuple[SimStatus, int | None]:
    """Rule-based verdict from runner output alone."""
    text = record.log
    if record.timed_out:
        return SimStatus.TIMEOUT, None
    counts = _MISMATCH_COUNT.findall(text)
    count = int(counts[-1]) if counts else None
    if record.exit_code != 0 and any(re.search(p, text) for p in cfg.compile_markers):
        return SimStatus.COMPILE_ERROR, None
    if count:
        return SimStatus.MISMATCH, count
    if record.exit_code != 0:
        return SimStatus.RUNTIME_ERROR, None
    if any(re.search(p, text) for p in cfg.pass_markers) or not any(re.search(p, text) for p in cfg.failure_markers):
        return SimStatus.PASS, count
    return SimStatus.MISMATCH, count


def parse_signals(reply: str) -> list[SemanticSignal]:
    items = parse_json_block(reply, list) or []
    signals = []
    for item in items:
        try:
            signals.append(SemanticSignal.from_dict(item))
        except ValueError:
            continue
    return signals


def _status_signal(status: SimStatus, count: int | None, log_text: str) -> SemanticSignal:
    first = next((ln.strip() for ln in log_text.splitlines() if ln.strip()), "")
    if status is SimStatus.COMPILE_ERROR:
        return SemanticSignal(SignalCategory.COMPILE_ERROR, first or "the design did not compile", Severity.CRITICAL)
    if status is SimStatus.TIMEOUT:
        return SemanticSignal(SignalCategory.TIMEOUT, "simulation exceeded its time limit", Severity.CRITICAL)
    if status is SimStatus.MISMATCH:
        what = f"{count} output mismatches against the testbench" if count else "testbench reported failing checks"
        return SemanticSignal(SignalCategory.OTHER, what, Severity.CRITICAL)
    return SemanticSignal(SignalCategory.OTHER, f"simulation crashed: {first}" if first else "simulation crashed with no output", Severity.CRITICAL)


def correctness_check(
    code: VerilogSource,
    task: DesignTask,
    sim: Simulator,
    gateway: Gateway,
    main_profile: ProviderProfile | None = None,
    cfg: AgentConfig = DEFAULT_AGENT_CONFIG,
) -> SimulationResult:
    if not task.testbench_source:
        note = SemanticSignal(SignalCategory.OTHER, "no testbench provided; functional verification skipped", Severity.INFO)
        return SimulationResult(SimStatus.PASS, "", None, (note,))
    try:
        record = sim.simulate(code.code, task.testbench_source, label=task.id)
    except SpawnError as exc:
        msg = f"simulator could not be started: {exc}"
        return SimulationResult(SimStatus.RUNTIME_ERROR, msg, None, (SemanticSignal(SignalCategory.OTHER, msg, Severity.CRITICAL),))
    status, count = classify_simulation(record, cfg)
    if status is SimStatus.PASS:
        return SimulationResult(status, record.log, count)

    prompt = cfg.prompts.render(
        "summarize_simulation", status=status.value, code=code.code, log=truncate(record.log, 8000), categories=_SIGNAL_CATEGORIES
    )
    try:
        signals = parse_signals(gateway.chat(main_profile or gateway.main, [ChatMessage("user", prompt)]))
    except LLMError as exc:
        log.warning("signal summarization failed (%s); falling back to the raw log", exc)
        excerpt = record.log[: cfg.log_excerpt_chars].strip()
        try:
            signals = [SemanticSignal(SignalCategory.OTHER, excerpt, Severity.CRITICAL)]
        except ValueError:  # empty or too generic to stand alone
            signals = [_status_signal(status, count, "")]
    if not signals:
        signals = [_status_signal(status, count, record.log)]
    return SimulationResult(status, record.log, count, tuple(signals))


# ----------------------------------------------------------------------- ppa


def ppa_check(
    code: VerilogSource,
    task: DesignTask,
    synth: Synthesizer,
    gateway: Gateway,
    main_profile: ProviderProfile | None = None,
    cfg: AgentConfig = DEFAULT_AGENT_CONFIG,
) -> SynthesisResult:
    try:
        record, reports = synth.synthesize(code.code, task.clock_period_ns, label=task.id)
    except SpawnError as exc:
        return SynthesisResult(False, None, {}, (SemanticSignal(SignalCategory.COMPILE_ERROR, f"synthesis tool could not be started: {exc}", Severity.CRITICAL),))
    if record.timed_out:
        return SynthesisResult(False, None, reports, (SemanticSignal(SignalCategory.TIMEOUT, "synthesis exceeded its time limit", Severity.CRITICAL),))
    if record.exit_code != 0:
        tail = "\n".join(record.log.strip().splitlines()[-5:]) or "no output"
        sig = SemanticSignal(SignalCategory.COMPILE_ERROR, f"synthesis failed (exit {record.exit_code}): {tail}", Severity.CRITICAL)
        return SynthesisResult(False, None, reports, (sig,))

    values: dict[ReportKind, float] = {}
    problems: list[SemanticSignal] = []
    parsers = {
        ReportKind.TIMING_REPORT: lambda t: parse_delay(t, task.clock_period_ns, cfg.delay_patterns),
        ReportKind.SYNTHESIS_LOG: lambda t: parse_area(t, cfg.area_patterns),
        ReportKind.POWER_REPORT: parse_power,
    }
    for kind, parse in parsers.items():
        text = reports.get(kind)
        if text is None:
            problems.append(SemanticSignal(SignalCategory.OTHER, f"{kind.value} missing after synthesis", Severity.CRITICAL))
            continue
        try:
            values[kind] = parse(text)
        except ParseError as exc:
            problems.append(SemanticSignal(SignalCategory.OTHER, f"could not parse {kind.value}: {exc}", Severity.CRITICAL))
    if problems:
        return SynthesisResult(False, None, reports, tuple(problems))

    metrics = PpaMetrics(values[ReportKind.TIMING_REPORT], values[ReportKind.SYNTHESIS_LOG], values[ReportKind.POWER_REPORT])
    signals: list[SemanticSignal] = []
    slack = parse_worst_slack(reports[ReportKind.TIMING_REPORT])
    if slack is not None and slack < 0:
        period = f" at clock period {task.clock_period_ns:g} ns" if task.clock_period_ns else ""
        signals.append(SemanticSignal(SignalCategory.NEGATIVE_SLACK, f"worst slack {slack:g} ns{period}", Severity.CRITICAL))
    baseline = task.baseline_metrics
    if baseline is not None and metrics.area_um2 > cfg.area_growth_factor * baseline.area_um2:
        signals.append(
            SemanticSignal(
                SignalCategory.ABNORMAL_AREA_GROWTH,
                f"area {metrics.area_um2} um^2 exceeds {cfg.area_growth_factor:g}x the reference {baseline.area_um2} um^2",
                Severity.WARNING,
            )
        )
    if cfg.summarize_reports:
        prompt = cfg.prompts.render(
            "summarize_synthesis",
            delay=metrics.delay_ns,
            area=metrics.area_um2,
            power=metrics.power_w,
            code=code.code,
            reports=[(k.value, truncate(v, 4000)) for k, v in reports.items()],
            categories=_SIGNAL_CATEGORIES,
        )
        try:
            extra = parse_signals(gateway.chat(main_profile or gateway.main, [ChatMessage("user", prompt)]))
        except LLMError as exc:
            log.info("report summarization skipped: %s", exc)
            extra = []
        seen = {(s.category, s.description) for s in signals}
        signals += [s for s in extra if (s.category, s.description) not in seen]
    return SynthesisResult(True, metrics, reports, tuple(signals))
