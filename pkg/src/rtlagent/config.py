"""Experiment configuration and task manifests.

A config file is TOML with the sections ``[llm]``, ``[tools]``, ``[run]`` and
``[memory]``. Values resolve as: CLI flag > environment > file > default.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import tomli
import yaml

from .agents import AgentConfig
from .domain import DesignTask, PpaMetrics, ReportKind
from .eda.tools import CommandSimulator, CommandSynthesizer, ToolCommand, Toolchain, Workspace
from .llm import API_BASE_ENV, API_KEY_ENV, Gateway, OpenAICompatibleProvider, ProviderProfile, RetryPolicy
from .orchestrator import Features, RunConfig
from .prompting import PromptLibrary


class ConfigError(ValueError):
    pass


DEFAULT_SIMULATION = ToolCommand(
    "sh",
    ("-c", "iverilog -g2012 -o {workdir}/sim.out {src} {tb} && vvp -n {workdir}/sim.out"),
    timeout_s=60.0,
)
DEFAULT_SYNTHESIS = ToolCommand(
    "yosys_openroad_flow.sh",
    ("{src}", "{workdir}", "{clock_ns}"),
    timeout_s=600.0,
    expected_reports=(
        (ReportKind.SYNTHESIS_LOG, "synth.log"),
        (ReportKind.TIMING_REPORT, "timing.rpt"),
        (ReportKind.POWER_REPORT, "power.rpt"),
    ),
)


@dataclass
class LLMSettings:
    api_base: str | None = None
    api_key: str | None = None
    main_model: str = "gpt-4o"
    light_model: str = "gpt-4o-mini"
    temperature: float = 0.8
    max_tokens: int = 4096
    retries: int = 3
    prompt_dir: str | None = None


@dataclass
class ToolSettings:
    simulation: ToolCommand = DEFAULT_SIMULATION
    synthesis: ToolCommand = DEFAULT_SYNTHESIS
    workroot: str | None = None
    keep_workdirs: int = 5
    default_clock_ns: float | None = None
    area_growth_factor: float = 3.0
    summarize_reports: bool = True
    pass_markers: list[str] | None = None
    failure_markers: list[str] | None = None
    compile_markers: list[str] | None = None
    delay_patterns: list[str] | None = None
    area_patterns: list[str] | None = None


@dataclass
class MemorySettings:
    capacity: int | None = None
    seed_file: str | None = None


@dataclass
class Settings:
    llm: LLMSettings = field(default_factory=LLMSettings)
    tools: ToolSettings = field(default_factory=ToolSettings)
    run: RunConfig = field(default_factory=RunConfig)
    memory: MemorySettings = field(default_factory=MemorySettings)
    base_dir: Path = field(default_factory=Path.cwd)

    def gateway(self, provider=None) -> Gateway:
        llm = self.llm
        if provider is None:
            key = llm.api_key or os.environ.get(API_KEY_ENV)
            if not key:
                raise ConfigError(f"no LLM credentials: set {API_KEY_ENV} or use a mock script")
            provider = OpenAICompatibleProvider(key, llm.api_base or os.environ.get(API_BASE_ENV))
        main = ProviderProfile("main", llm.main_model, llm.temperature, llm.max_tokens, "main")
        light = ProviderProfile("light", llm.light_model, llm.temperature, llm.max_tokens, "light")
        return Gateway(provider, main, light, RetryPolicy(attempts=llm.retries))

    def agent_config(self) -> AgentConfig:
        t = self.tools
        cfg = AgentConfig(
            area_growth_factor=t.area_growth_factor,
            summarize_reports=t.summarize_reports,
            delay_patterns=t.delay_patterns,
            area_patterns=t.area_patterns,
            prompts=PromptLibrary(self.resolve(self.llm.prompt_dir)) if self.llm.prompt_dir else PromptLibrary(),
        )
        for name in ("pass_markers", "failure_markers", "compile_markers"):
            if getattr(t, name) is not None:
                setattr(cfg, name, list(getattr(t, name)))
        return cfg

    def toolchain(self) -> Toolchain:
        t = self.tools
        workspace = Workspace(self.resolve(t.workroot) if t.workroot else None, t.keep_workdirs)
        return Toolchain(CommandSimulator(t.simulation, workspace), CommandSynthesizer(t.synthesis, workspace, t.default_clock_ns))

    def resolve(self, path: str | Path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _take(section: Mapping[str, Any], name: str, allowed: set[str]) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    return dict(section)


def _tool_command(d: Mapping[str, Any], where: str, default: ToolCommand) -> ToolCommand:
    d = _take(d, where, {"executable", "args", "timeout_s", "reports"})
    reports = d.get("reports")
    try:
        return ToolCommand(
            d.get("executable", default.executable),
            tuple(d.get("args", default.arg_template)),
            float(d.get("timeout_s", default.timeout_s)),
            tuple((ReportKind(k), v) for k, v in reports.items()) if reports is not None else default.expected_reports,
        )
    except ValueError as exc:
        raise ConfigError(f"[{where}] {exc}") from None


def _anchor(cmd: ToolCommand, base: Path) -> ToolCommand:
    """Relative executables with a path separator resolve against the config's directory."""
    exe = Path(cmd.executable)
    if exe.is_absolute() or len(exe.parts) < 2:
        return cmd
    return replace(cmd, executable=str(base / exe))


def load_settings(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> Settings:
    env = os.environ if env is None else env
    data: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = tomli.loads(path.read_text(encoding="utf-8"))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent.resolve()
    _take(data, "top level", {"llm", "tools", "run", "memory"})

    llm_in = _take(data.get("llm", {}), "llm", {f.name for f in fields(LLMSettings)})
    llm = replace(LLMSettings(), **llm_in)
    if env.get(API_BASE_ENV):
        llm.api_base = env[API_BASE_ENV]
    if env.get(API_KEY_ENV):
        llm.api_key = env[API_KEY_ENV]

    tools_in = _take(data.get("tools", {}), "tools", {f.name for f in fields(ToolSettings)})
    sim = _tool_command(tools_in.pop("simulation", {}), "tools.simulation", DEFAULT_SIMULATION)
    syn = _tool_command(tools_in.pop("synthesis", {}), "tools.synthesis", DEFAULT_SYNTHESIS)
    sim, syn = (_anchor(c, base) for c in (sim, syn))
    tools = replace(ToolSettings(), simulation=sim, synthesis=syn, **tools_in)

    run_in = _take(
        data.get("run", {}), "run",
        {f.name for f in fields(RunConfig)} - {"features"} | {"memory", "tool_feedback", "ppa_agent"},
    )
    features = Features(
        memory_enabled=bool(run_in.pop("memory", True)),
        tool_feedback_enabled=bool(run_in.pop("tool_feedback", True)),
        ppa_agent_enabled=bool(run_in.pop("ppa_agent", True)),
    )
    try:
        run = RunConfig(features=features, **run_in)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[run] {exc}") from None

    memory = replace(MemorySettings(), **_take(data.get("memory", {}), "memory", {f.name for f in fields(MemorySettings)}))
    return Settings(llm, tools, run, memory, base)


# ------------------------------------------------------------------ manifest


def load_structured(path: str | Path) -> Any:
    """Parse a JSON, YAML or TOML document chosen by file extension."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    try:
        if suffix in (".yaml", ".yml"):
            return yaml.safe_load(text)
        if suffix == ".toml":
            return tomli.loads(text)
        return json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


_ENTRY_KEYS = {"id", "name", "spec", "spec_file", "testbench", "baseline", "clock_period_ns"}


def load_manifest(path: str | Path) -> list[DesignTask]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    data = load_structured(path)
    entries = data.get("tasks") if isinstance(data, dict) else data
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{path}: expected a non-empty list of tasks")
    tasks, seen = [], set()
    for i, entry in enumerate(entries):
        where = f"{path}: tasks[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: expected an object")
        unknown = set(entry) - _ENTRY_KEYS
        if unknown:
            raise ConfigError(f"{where}: unknown fields {sorted(unknown)}")
        if "id" not in entry:
            raise ConfigError(f"{where}: missing id")
        task_id = str(entry["id"])
        if task_id in seen:
            raise ConfigError(f"{where}: duplicate id {task_id!r}")
        seen.add(task_id)
        spec = entry.get("spec")
        if spec is None and "spec_file" in entry:
            spec = _read_rel(path, entry["spec_file"], where)
        if not spec:
            raise ConfigError(f"{where}: needs 'spec' or 'spec_file'")
        testbench = _read_rel(path, entry["testbench"], where) if entry.get("testbench") else None
        try:
            baseline = PpaMetrics(**entry["baseline"]) if entry.get("baseline") else None
            tasks.append(DesignTask(task_id, str(entry.get("name", task_id)), spec, testbench, baseline, entry.get("clock_period_ns")))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
    return tasks


def _read_rel(manifest: Path, rel: str, where: str) -> str:
    p = Path(rel)
    p = p if p.is_absolute() else manifest.parent / p
    if not p.is_file():
        raise ConfigError(f"{where}: file not found: {p}")
    return p.read_text(encoding="utf-8")
