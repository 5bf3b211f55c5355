"""Command-line driver: ``run``, ``bench``, ``memory`` and ``score``.

Exit codes: 0 success (functional pass for ``run``), 1 functional failure,
2 configuration or input error.
"""

from __future__ import annotations

import functools
import json
import logging
from pathlib import Path

import click

from .config import ConfigError, Settings, load_manifest, load_settings, load_structured
from .domain import FixedClock, IdFactory, Runtime, SchemaError, SystemClock, Trajectory, dumps
from .eda.mock import MockScenario, mock_backend
from .evalkit import (
    BenchmarkReport,
    CsvFormatError,
    TaskSampleRecord,
    emit_table,
    fmt_triple,
    method_and_baseline_geomeans,
    ppa_score,
    read_metrics_csv,
    relative_ppa_per_task,
    relative_ppa_score,
    win_rate,
)
from .llm import load_mock_script
from .memory import MemoryBank, evolve, load_bank, save_bank, seed_nodes
from .orchestrator import Features, RunConfig, evolve_after, run_benchmark, run_task, write_outcome


class ConfigFailure(click.ClickException):
    exit_code = 2


def _guard(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, SchemaError, CsvFormatError, OSError, ValueError) as exc:
            raise ConfigFailure(str(exc)) from exc

    return wrapper


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TOML experiment config.")(fn)
    fn = click.option("--fixed-clock", is_flag=True, help="Freeze timestamps and seed node ids (golden-file runs).")(fn)
    fn = click.option("--seed", type=int, default=None, help="Seed for node ids.")(fn)
    return fn


def llm_options(fn):
    fn = click.option("--mock-llm", "mock_llm", type=click.Path(dir_okay=False), help="JSON script for the mock LLM.")(fn)
    return fn


def tool_options(fn):
    fn = click.option("--mock-eda", is_flag=True, help="Use the deterministic mock simulator/synthesizer.")(fn)
    fn = click.option("--eda-seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--eda-scenario", default=None, help="Named mock scenario or JSON scenario file.")(fn)
    return fn


def ablation_options(fn):
    fn = click.option("--no-memory", is_flag=True, help="Disable memory triggering and evolution.")(fn)
    fn = click.option("--no-tool-feedback", is_flag=True, help="Run tools but withhold their signals from prompts.")(fn)
    fn = click.option("--no-ppa", is_flag=True, help="Skip the PPA agent.")(fn)
    return fn


def _settings(config_path: str | None) -> Settings:
    if config_path is not None and not Path(config_path).is_file():
        raise ConfigError(f"config file not found: {config_path}")
    return load_settings(config_path)


def _runtime(fixed_clock: bool, seed: int | None) -> Runtime:
    if fixed_clock:
        return Runtime(FixedClock(), IdFactory(0 if seed is None else seed))
    return Runtime(SystemClock(), IdFactory(seed))


def _gateway(settings: Settings, mock_llm: str | None):
    if mock_llm is None:
        return settings.gateway()
    if not Path(mock_llm).is_file():
        raise ConfigError(f"mock LLM script not found: {mock_llm}")
    return settings.gateway(load_mock_script(mock_llm))


def _tools(settings: Settings, mock_eda: bool, eda_seed: int, eda_scenario: str | None):
    if not mock_eda:
        return settings.toolchain()
    scenario = None
    if eda_scenario:
        scenario = MockScenario.load(eda_scenario) if Path(eda_scenario).is_file() else MockScenario.named(eda_scenario)
    return mock_backend(eda_seed, scenario)


def _run_config(base: RunConfig, no_memory: bool, no_tool_feedback: bool, no_ppa: bool, samples: int | None = None) -> RunConfig:
    f = base.features
    features = Features(
        f.memory_enabled and not no_memory,
        f.tool_feedback_enabled and not no_tool_feedback,
        f.ppa_agent_enabled and not no_ppa,
    )
    kwargs = {"features": features}
    if samples is not None:
        kwargs["candidate_samples"] = samples
    return RunConfig(**{**base.__dict__, **kwargs})


def _open_bank(settings: Settings, bank_path: str | None, runtime: Runtime) -> MemoryBank:
    if bank_path and Path(bank_path).exists():
        return load_bank(bank_path)
    bank = MemoryBank(capacity=settings.memory.capacity)
    if settings.memory.seed_file:
        entries = load_structured(settings.resolve(settings.memory.seed_file))
        for node in seed_nodes(entries, runtime):
            bank.add(node)
    return bank


def _run_id(run_id: str | None, runtime: Runtime) -> str:
    return run_id or runtime.clock.now().strftime("%Y%m%dT%H%M%SZ")


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool) -> None:
    """Closed-loop, PPA-aware Verilog generation with evolving memory."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.argument("task_file", type=click.Path(dir_okay=False))
@click.option("--task", "task_id", default=None, help="Task id when the manifest holds several.")
@click.option("--bank", "bank_path", type=click.Path(dir_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--run-id", default=None)
@common_options
@llm_options
@tool_options
@ablation_options
@_guard
def run(task_file, task_id, bank_path, out_dir, run_id, config_path, fixed_clock, seed, mock_llm, mock_eda, eda_seed, eda_scenario, no_memory, no_tool_feedback, no_ppa):
    """Run one task through the generate/verify/optimize loop."""
    settings = _settings(config_path)
    runtime = _runtime(fixed_clock, seed)
    tasks = load_manifest(task_file)
    if task_id is not None:
        tasks = [t for t in tasks if t.id == task_id]
        if not tasks:
            raise ConfigError(f"{task_file}: no task with id {task_id!r}")
    elif len(tasks) > 1:
        raise ConfigError(f"{task_file} holds {len(tasks)} tasks; pick one with --task")
    task = tasks[0]
    cfg = _run_config(settings.run, no_memory, no_tool_feedback, no_ppa)
    gateway = _gateway(settings, mock_llm)
    tools = _tools(settings, mock_eda, eda_seed, eda_scenario)
    agent_cfg = settings.agent_config()
    bank = _open_bank(settings, bank_path, runtime)

    outcome = run_task(task, bank, cfg, gateway, tools, agent_cfg, runtime)
    if cfg.features.memory_enabled:
        outcome, _ = evolve_after(outcome, bank, cfg, gateway, agent_cfg, runtime)
        if bank_path:
            save_bank(bank, bank_path)
    target = Path(out_dir) / _run_id(run_id, runtime) / task.id
    write_outcome(outcome, target)

    verdict = "PASS" if outcome.functional_pass else "FAIL"
    metrics = f" metrics={fmt_triple(outcome.metrics.as_tuple())}" if outcome.metrics else ""
    click.echo(
        f"{task.id}: {verdict} syn={'yes' if outcome.synthesizable else 'no'}{metrics} "
        f"rounds={outcome.correctness_rounds_used}/{outcome.ppa_rounds_used} -> {target}"
    )
    raise SystemExit(0 if outcome.functional_pass else 1)


@main.command()
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--bank", "bank_path", type=click.Path(dir_okay=False), default=None)
@click.option("--samples", type=click.IntRange(min=1), default=None, help="Candidate samples per task.")
@click.option("--k", "ks", default="1", show_default=True, help="Comma-separated k values for pass@k.")
@click.option("--shuffle", "shuffle_seed", type=int, default=None, help="Shuffle task order with this seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--run-id", default=None)
@click.option("--method-name", default="Method", show_default=True)
@common_options
@llm_options
@tool_options
@ablation_options
@_guard
def bench(manifest, bank_path, samples, ks, shuffle_seed, out_dir, run_id, method_name, config_path, fixed_clock, seed, mock_llm, mock_eda, eda_seed, eda_scenario, no_memory, no_tool_feedback, no_ppa):
    """Run a benchmark manifest and emit CSV/markdown reports."""
    settings = _settings(config_path)
    runtime = _runtime(fixed_clock, seed)
    tasks = load_manifest(manifest)
    try:
        k_values = tuple(int(k) for k in ks.split(",") if k.strip())
    except ValueError:
        raise ConfigError(f"--k expects comma-separated integers, got {ks!r}") from None
    cfg = _run_config(settings.run, no_memory, no_tool_feedback, no_ppa, samples)
    if any(k < 1 or k > cfg.candidate_samples for k in k_values):
        raise ConfigError(f"every k must lie in 1..{cfg.candidate_samples} (the sample count)")
    gateway = _gateway(settings, mock_llm)
    tools = _tools(settings, mock_eda, eda_seed, eda_scenario)
    bank = _open_bank(settings, bank_path, runtime)
    out = Path(out_dir) / _run_id(run_id, runtime)

    result = run_benchmark(tasks, bank, cfg, gateway, tools, settings.agent_config(), runtime, k_values, shuffle_seed, out, method_name)
    if cfg.features.memory_enabled:
        save_bank(bank, bank_path or out / "bank-final.json")
    agg = result.report.aggregate()
    for k, v in agg["pass_at_k"].items():
        click.echo(f"pass@{k}: {v:.4f}")
    rel = agg["relative_ppa_score"]
    if rel is not None:
        click.echo(f"relative PPA score: {rel:.3f}")
    click.echo(f"report: {out / 'report.md'}")


@main.group()
@click.option("--bank", "bank_path", type=click.Path(dir_okay=False), required=True)
@click.pass_context
def memory(ctx, bank_path):
    """Inspect or update a memory bank file."""
    ctx.obj = {"bank": bank_path}


def _existing_bank(ctx) -> tuple[MemoryBank, str]:
    path = ctx.obj["bank"]
    return (load_bank(path) if Path(path).exists() else MemoryBank()), path


@memory.command("list")
@click.pass_context
@_guard
def memory_list(ctx):
    bank, _ = _existing_bank(ctx)
    click.echo(f"{len(bank)} nodes")
    for n in bank.nodes:
        click.echo(f"{n.id}  {n.kind.value:<10} v{n.version}  activations={n.activation_count}  {n.trigger}")


@memory.command("show")
@click.argument("node_id")
@click.pass_context
@_guard
def memory_show(ctx, node_id):
    bank, _ = _existing_bank(ctx)
    if node_id not in bank:
        raise ConfigError(f"no node {node_id!r} in bank")
    click.echo(dumps(bank.get(node_id).to_dict()), nl=False)


@memory.command("seed")
@click.argument("seed_file", type=click.Path(dir_okay=False, exists=True))
@common_options
@click.pass_context
@_guard
def memory_seed(ctx, seed_file, config_path, fixed_clock, seed):
    """Add hand-written nodes (kind defaults to rule) from a JSON/YAML list."""
    bank, path = _existing_bank(ctx)
    entries = load_structured(seed_file)
    if isinstance(entries, dict):
        entries = entries.get("nodes", [])
    if not isinstance(entries, list):
        raise ConfigError(f"{seed_file}: expected a list of nodes")
    for node in seed_nodes(entries, _runtime(fixed_clock, seed)):
        bank.add(node)
    save_bank(bank, path)
    click.echo(f"{len(bank)} nodes")


@memory.command("evolve")
@click.argument("trajectory_file", type=click.Path(dir_okay=False, exists=True))
@common_options
@llm_options
@click.option("--K", "K", type=click.IntRange(min=1), default=None, help="Retrieval size (default from config).")
@click.pass_context
@_guard
def memory_evolve(ctx, trajectory_file, config_path, fixed_clock, seed, mock_llm, K):
    """Apply memory evolution offline to a stored trajectory."""
    settings = _settings(config_path)
    bank, path = _existing_bank(ctx)
    trajectory = Trajectory.from_json(Path(trajectory_file).read_text(encoding="utf-8"))
    gateway = _gateway(settings, mock_llm)
    actions = evolve(trajectory, bank, K or settings.run.evolution_K, gateway, _runtime(fixed_clock, seed), settings.agent_config().prompts)
    save_bank(bank, path)
    for a in actions:
        click.echo(f"{a.action.value}: {a.target_id or a.candidate.trigger}")
    click.echo(f"{len(bank)} nodes")


@main.command()
@click.argument("method_csv", type=click.Path(dir_okay=False, exists=True))
@click.argument("baseline_csv", type=click.Path(dir_okay=False, exists=True))
@click.option("--win-rate", "other_csv", type=click.Path(dir_okay=False, exists=True), default=None, help="Compare PPA scores against this CSV.")
@click.option("--na-policy", type=click.Choice(["baseline", "skip", "strict"]), default="baseline", show_default=True)
@click.option("--relative-mode", type=click.Choice(["geomean", "per_task"]), default="geomean", show_default=True)
@click.option("--table", "table_fmt", type=click.Choice(["markdown", "csv"]), default=None, help="Also print the per-task table.")
@_guard
def score(method_csv, baseline_csv, other_csv, na_policy, relative_mode, table_fmt):
    """Recompute geomeans, relative PPA score and win rate from metric CSVs."""
    method = read_metrics_csv(method_csv)
    baseline_raw = read_metrics_csv(baseline_csv)
    baseline = {t: m for t, m in baseline_raw.items() if m is not None}
    geo = method_and_baseline_geomeans(method, baseline, na_policy)
    ok = sum(m is not None for m in method.values())
    click.echo(f"method:   {fmt_triple(geo['method_geo'])}  ({ok}/{len(method)} tasks with metrics)")
    click.echo(f"baseline: {fmt_triple(geo['baseline_geo'])}  ({len(baseline)} tasks)")
    if geo["method_geo"] and geo["baseline_geo"]:
        if relative_mode == "per_task":
            rel = relative_ppa_per_task(method, baseline, na_policy)
        else:
            rel = relative_ppa_score(geo["method_geo"], geo["baseline_geo"])
        click.echo(f"relative PPA score: {rel:.3f}")
    else:
        click.echo("relative PPA score: N/A")
    if other_csv:
        other = read_metrics_csv(other_csv)
        wr = win_rate(
            {t: ppa_score(m) for t, m in method.items() if m},
            {t: ppa_score(m) for t, m in other.items() if m},
        )
        click.echo(f"win rate: wins {wr.wins_a}, losses {wr.wins_b}, ties {wr.ties}, common: {wr.common}, rate {wr.rate_a:.3f}")
    if table_fmt:
        records = [TaskSampleRecord(t, 1, int(m is not None), int(m is not None), m) for t, m in method.items()]
        report = BenchmarkReport(records, baseline, na_policy=na_policy, relative_mode=relative_mode)
        click.echo(emit_table(report, fmt=table_fmt), nl=False)


if __name__ == "__main__":
    main()
