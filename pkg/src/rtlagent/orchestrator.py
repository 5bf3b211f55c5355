"""The generate -> verify -> synthesize/optimize loop and benchmark driver."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from .agents import DEFAULT_AGENT_CONFIG, AgentConfig, correctness_check, ppa_check, programmer_generate
from .domain import (
    CodeGenerated,
    DesignTask,
    ErrorRaised,
    EvolutionAction,
    EvolutionApplied,
    MemoryActivated,
    PpaMetrics,
    Role,
    Runtime,
    SemanticSignal,
    SimulationRun,
    SpecLoaded,
    SynthesisRun,
    TaskOutcome,
    TrajectoryRecorder,
    VerilogSource,
    dumps,
)
from .eda.tools import Toolchain
from .evalkit import BenchmarkReport, TaskSampleRecord, emit_table, ppa_score
from .llm import Gateway
from .memory import MemoryBank, TaskContext, evolve, save_bank, select_memory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Features:
    memory_enabled: bool = True
    tool_feedback_enabled: bool = True
    ppa_agent_enabled: bool = True


@dataclass(frozen=True)
class RunConfig:
    max_correctness_rounds: int = 2
    max_ppa_rounds: int = 2
    memory_k: int = 3
    evolution_K: int = 3
    features: Features = field(default_factory=Features)
    candidate_samples: int = 1

    def __post_init__(self):
        if self.max_correctness_rounds < 0 or self.max_ppa_rounds < 0:
            raise ValueError("round budgets must be >= 0")
        if self.memory_k < 1 or self.evolution_K < 1 or self.candidate_samples < 1:
            raise ValueError("memory_k, evolution_K and candidate_samples must be >= 1")


class _TaskLoop:
    def __init__(self, task, bank, cfg, gateway, tools, agent_cfg, runtime):
        self.task, self.bank, self.cfg = task, bank, cfg
        self.gateway, self.tools, self.agent_cfg = gateway, tools, agent_cfg
        self.rec = TrajectoryRecorder(task.id, runtime.clock)
        self.version = 0
        self.latest: VerilogSource | None = None

    @property
    def feedback_on(self) -> bool:
        return self.cfg.features.tool_feedback_enabled

    def generate(self, purpose: str, role: Role, previous: VerilogSource | None, feedback: Sequence[SemanticSignal] = (), metrics: PpaMetrics | None = None) -> VerilogSource:
        if not self.feedback_on:
            feedback, metrics = (), None
        guidance = []
        if self.cfg.features.memory_enabled:
            ctx = TaskContext(self.task.spec_text, role, previous.code if previous else None, tuple(feedback))
            ids = select_memory(ctx, self.bank, self.cfg.memory_k, self.gateway, prompts=self.agent_cfg.prompts)
            self.rec.record(MemoryActivated, tuple(ids), role)
            guidance = [self.bank.get(i) for i in ids]
        src = programmer_generate(
            self.task, guidance, feedback, previous, self.gateway,
            metrics=metrics, purpose=purpose, next_version=self.version + 1, prompts=self.agent_cfg.prompts,
        )
        self.version = src.version
        self.latest = src
        self.rec.record(CodeGenerated, src, purpose)
        return src

    def verify(self, code: VerilogSource, round_index: int, phase: str):
        result = correctness_check(code, self.task, self.tools.simulator, self.gateway, cfg=self.agent_cfg)
        self.rec.record(SimulationRun, result, round_index, code.version, phase)
        return result

    def synthesize(self, code: VerilogSource, round_index: int):
        result = ppa_check(code, self.task, self.tools.synthesizer, self.gateway, cfg=self.agent_cfg)
        self.rec.record(SynthesisRun, result, round_index, code.version)
        return result

    def fail(self, stage: str, exc: Exception) -> None:
        log.warning("task %s: %s failed: %s", self.task.id, stage, exc)
        self.rec.record(ErrorRaised, stage, f"{type(exc).__name__}: {exc}")

    def run(self) -> TaskOutcome:
        self.rec.record(SpecLoaded, self.task.id)
        fix_rounds = 0
        passing: VerilogSource | None = None
        try:
            code = self.generate("initial", Role.PROGRAMMER, None)
            while True:
                result = self.verify(code, fix_rounds, "correctness")
                if result.passed:
                    passing = code
                    break
                if fix_rounds >= self.cfg.max_correctness_rounds:
                    break
                fix_rounds += 1
                code = self.generate("correctness_fix", Role.CORRECTNESS, code, result.signals)
        except Exception as exc:  # noqa: BLE001 - a task never raises past its boundary
            self.fail("correctness", exc)

        best, best_metrics, ppa_rounds = passing, None, 0
        if passing is not None and self.cfg.features.ppa_agent_enabled:
            try:
                synth = self.synthesize(passing, 0)
                best_metrics = synth.metrics
                feedback = synth.signals
                while ppa_rounds < self.cfg.max_ppa_rounds:
                    ppa_rounds += 1
                    candidate = self.generate("ppa", Role.PPA, best, feedback, best_metrics)
                    check = self.verify(candidate, ppa_rounds, "ppa")
                    if not check.passed:
                        feedback = check.signals
                        continue
                    synth = self.synthesize(candidate, ppa_rounds)
                    feedback = synth.signals
                    if synth.metrics and (best_metrics is None or ppa_score(synth.metrics) > ppa_score(best_metrics)):
                        best, best_metrics = candidate, synth.metrics
            except Exception as exc:  # noqa: BLE001
                self.fail("ppa", exc)

        return TaskOutcome(
            task_id=self.task.id,
            final_code=best if passing is not None else self.latest,
            functional_pass=passing is not None,
            synthesizable=best_metrics is not None,
            metrics=best_metrics,
            correctness_rounds_used=fix_rounds,
            ppa_rounds_used=ppa_rounds,
            trajectory=self.rec.freeze(),
        )


def run_task(
    task: DesignTask,
    bank: MemoryBank,
    cfg: RunConfig,
    gateway: Gateway,
    tools: Toolchain,
    agent_cfg: AgentConfig = DEFAULT_AGENT_CONFIG,
    runtime: Runtime | None = None,
) -> TaskOutcome:
    """Run one task through the closed loop. Never raises; errors land in the trajectory.

    The bank is only read here (plus activation counters); evolution is the
    caller's job.
    """
    return _TaskLoop(task, bank, cfg, gateway, tools, agent_cfg, runtime or Runtime()).run()


def evolve_after(outcome: TaskOutcome, bank: MemoryBank, cfg: RunConfig, gateway: Gateway, agent_cfg: AgentConfig, runtime: Runtime) -> tuple[TaskOutcome, list[EvolutionAction]]:
    """Fold an outcome's trajectory into the bank; returns the outcome with the evolution recorded."""
    traj = outcome.trajectory
    if not traj.of_type(CodeGenerated):
        return outcome, []
    try:
        actions = evolve(traj, bank, cfg.evolution_K, gateway, runtime, agent_cfg.prompts)
    except Exception as exc:  # noqa: BLE001
        log.warning("memory evolution after %s failed: %s", outcome.task_id, exc)
        traj = traj.appended(ErrorRaised(runtime.clock.now(), "evolution", f"{type(exc).__name__}: {exc}"))
        actions = []
    traj = traj.appended(EvolutionApplied(runtime.clock.now(), tuple(actions)))
    return replace(outcome, trajectory=traj), actions


@dataclass
class BenchmarkRun:
    report: BenchmarkReport
    outcomes: dict[str, list[TaskOutcome]]
    order: list[str]
    evolutions: dict[str, list[EvolutionAction]]


def best_metrics_of(outcomes: Sequence[TaskOutcome]) -> PpaMetrics | None:
    scored = [o.metrics for o in outcomes if o.functional_pass and o.metrics]
    return max(scored, key=ppa_score) if scored else None


def write_outcome(outcome: TaskOutcome, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "trajectory.json").write_text(outcome.trajectory.to_json(), encoding="utf-8")
    summary = outcome.to_dict()
    del summary["trajectory"]
    (directory / "outcome.json").write_text(dumps(summary), encoding="utf-8")
    if outcome.final_code:
        (directory / "final.v").write_text(outcome.final_code.code + "\n", encoding="utf-8")


def run_benchmark(
    manifest: Sequence[DesignTask],
    bank: MemoryBank,
    cfg: RunConfig,
    gateway: Gateway,
    tools: Toolchain,
    agent_cfg: AgentConfig = DEFAULT_AGENT_CONFIG,
    runtime: Runtime | None = None,
    ks: Sequence[int] = (1,),
    shuffle_seed: int | None = None,
    out_dir: str | Path | None = None,
    method_name: str = "Method",
) -> BenchmarkRun:
    """Run tasks one after another, evolving the bank between tasks.

    Samples of one task share the bank read-only; only the first sample's
    trajectory feeds evolution.
    """
    if not manifest:
        raise ValueError("manifest is empty")
    runtime = runtime or Runtime()
    order = list(manifest)
    if shuffle_seed is not None:
        random.Random(shuffle_seed).shuffle(order)
    out = Path(out_dir) if out_dir is not None else None

    outcomes: dict[str, list[TaskOutcome]] = {}
    evolutions: dict[str, list[EvolutionAction]] = {}
    for n, task in enumerate(order, start=1):
        samples = [run_task(task, bank, cfg, gateway, tools, agent_cfg, runtime) for _ in range(cfg.candidate_samples)]
        actions: list[EvolutionAction] = []
        if cfg.features.memory_enabled:
            samples[0], actions = evolve_after(samples[0], bank, cfg, gateway, agent_cfg, runtime)
        outcomes[task.id] = samples
        evolutions[task.id] = actions
        if out is not None:
            for s, outcome in enumerate(samples, start=1):
                write_outcome(outcome, out / task.id if s == 1 else out / task.id / f"sample-{s}")
            save_bank(bank, out / f"bank-after-{n}.json")

    records = []
    for task in manifest:
        samples = outcomes[task.id]
        records.append(
            TaskSampleRecord(
                task.id,
                len(samples),
                sum(o.functional_pass for o in samples),
                sum(o.synthesizable for o in samples),
                best_metrics_of(samples),
            )
        )
    baselines = {t.id: t.baseline_metrics for t in manifest if t.baseline_metrics}
    report = BenchmarkReport(records, baselines, tuple(ks))
    if out is not None:
        (out / "report.csv").write_text(emit_table(report, fmt="csv"), encoding="utf-8")
        (out / "report.md").write_text(emit_table(report, fmt="markdown", method_name=method_name), encoding="utf-8")
        (out / "report.json").write_text(dumps(report.to_dict()), encoding="utf-8")
    return BenchmarkRun(report, outcomes, [t.id for t in order], evolutions)
