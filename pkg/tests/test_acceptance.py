"""Acceptance criteria, one marked group per criterion.

The terminal summary prints one ``criterion N: PASS|FAIL|SKIP`` line each.
"""

from __future__ import annotations

import json
import os
import re
import shutil
import time
from collections import Counter
from dataclasses import replace
from fractions import Fraction
from itertools import combinations
from math import comb

import pytest
from click.testing import CliRunner
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from conftest import DEMO, FIXTURES, T0, make_node, writer_gateway
from rtlagent.cli import main
from rtlagent.domain import (
    CodeGenerated,
    DesignTask,
    Intent,
    MemoryActivated,
    MemoryKind,
    PpaMetrics,
    Role,
    Runtime,
    SimulationRun,
    SpecLoaded,
    SynthesisRun,
    Trajectory,
    VerilogSource,
)
from rtlagent.eda.mock import MockScenario, mock_backend
from rtlagent.eda.parsers import ParseError, parse_area, parse_delay, parse_power
from rtlagent.evalkit import pass_at_k, ppa_score
from rtlagent.llm import Gateway, RetryPolicy, render_prompt
from rtlagent.memory import MemoryBank, evolve, load_bank, save_bank
from rtlagent.orchestrator import Features, RunConfig, run_benchmark, run_task

REFERENCE = FIXTURES / "reference_scores"
REPORTS = FIXTURES / "reports"
TASK = DesignTask("adder", "adder", "8-bit adder", testbench_source="module tb; endmodule", clock_period_ns=1.0)
SECOND = DesignTask("mux", "mux", "2:1 mux", testbench_source="module tb; endmodule", clock_period_ns=1.0)


def cli(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def within(actual: float, expected: float, rel: float) -> bool:
    return abs(actual - expected) <= rel * abs(expected)


# ----------------------------------------------------------- criterion 1


@pytest.mark.acceptance(1)
def test_reference_scores_through_score():
    started = time.perf_counter()
    outputs = {m: cli("score", REFERENCE / f"{m}.csv", REFERENCE / "original.csv") for m in ("chipseek_r1", "gpt4o", "gemini3")}
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    for m, expected in {"chipseek_r1": 2.196, "gpt4o": 5.119, "gemini3": 8.539}.items():
        res = outputs[m]
        assert res.exit_code == 0, res.output
        rel = float(re.search(r"relative PPA score: ([\d.]+)", res.output).group(1))
        assert within(rel, expected, 0.02), (m, rel)
        base = re.search(r"baseline: ([\d.e+-]+) / ([\d.e+-]+) / ([\d.e+-]+)", res.output)
        for got, want in zip(map(float, base.groups()), (0.417, 142, 2.65e-05)):
            assert within(got, want, 0.02), (got, want)


# ----------------------------------------------------------- criterion 2


def enumerated_pass_at_k(n: int, c: int, k: int) -> Fraction:
    hits = sum(1 for subset in combinations(range(n), k) if min(subset) < c)
    return Fraction(hits, comb(n, k))


@pytest.mark.acceptance(2)
def test_pass_at_k_matches_enumeration():
    started = time.perf_counter()
    for n in range(1, 13):
        for c in range(n + 1):
            for k in range(1, n + 1):
                assert abs(pass_at_k(n, c, k) - float(enumerated_pass_at_k(n, c, k))) <= 1e-12, (n, c, k)
    assert time.perf_counter() - started < 10.0


# ----------------------------------------------------------- criterion 3

text = st.text(st.characters(whitelist_categories=("L", "N", "Zs")), min_size=1, max_size=20).filter(str.strip)
enum_set = lambda e: st.frozensets(st.sampled_from(list(e)), min_size=1)  # noqa: E731

stored_node = st.builds(
    lambda i, trig, guide, kind, intents, roles, acts, ver: make_node(
        f"s{i}", trig, guide, kind=kind, intents=intents, roles=roles, activation_count=acts, version=ver
    ),
    st.integers(0, 10**6),
    text,
    text,
    st.sampled_from(list(MemoryKind)),
    enum_set(Intent),
    enum_set(Role),
    st.integers(0, 50),
    st.integers(1, 9),
)

verdict = st.one_of(
    st.just({"action": "discard"}),
    st.just({"action": "insert"}),
    st.builds(lambda i, t, g: {"action": "refine", "target_index": i, "trigger": t, "guidance": g}, st.integers(0, 4), text, text),
    st.sampled_from(["not json", '{"action": "merge"}', '{"action": "refine", "target_index": 1}', "[1, 2]"]),
)

candidate = st.builds(
    lambda t, g, k: {"kind": k.value, "trigger": t, "guidance": g, "intents": ["timing"], "roles": ["ppa"]},
    text,
    text,
    st.sampled_from(list(MemoryKind)),
)


class ScriptedEvolution:
    """Answers generate/retrieve/decide; retrieval returns the first K stored nodes."""

    def __init__(self, bank: MemoryBank, candidates: list, verdicts: list, K: int):
        self.bank, self.K = bank, K
        self.generated = json.dumps(candidates)
        self.verdicts = [v if isinstance(v, str) else json.dumps(v) for v in verdicts]

    def complete(self, profile, messages):
        prompt = render_prompt(messages)
        if "### task: generate_memory" in prompt:
            return self.generated
        if "### task: retrieve_memory" in prompt:
            size = min(self.K, len(self.bank))
            return ",".join(str(i) for i in range(1, size + 1)) or "none"
        return self.verdicts.pop(0)


def model_expectation(stored_ids: list[str], verdicts: list, K: int):
    """Independent model of one evolution pass over a bank without capacity."""
    order = list(stored_ids)
    inserts, refines, content = 0, Counter(), {}
    for v in verdicts:
        retrieved = order[: min(K, len(order))]
        action = v.get("action") if isinstance(v, dict) else None
        if action == "insert":
            inserts += 1
            order.append(None)
        elif action == "refine" and 1 <= v["target_index"] <= len(retrieved):
            target = retrieved[v["target_index"] - 1]
            refines[target] += 1
            content[target] = (v["trigger"].strip(), v["guidance"].strip())
    return inserts, refines, content


def evolution_trajectory() -> Trajectory:
    return Trajectory("t1", (SpecLoaded(T0, "t1"), CodeGenerated(T0, VerilogSource("module top; endmodule", 1))))


@pytest.mark.acceptance(3)
@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    st.lists(stored_node, max_size=6, unique_by=lambda n: n.id),
    st.data(),
    st.integers(1, 4),
)
def test_memory_evolution_invariants(stored, data, K):
    candidates = data.draw(st.lists(candidate, min_size=1, max_size=4))
    verdicts = data.draw(st.lists(verdict, min_size=len(candidates), max_size=len(candidates)))
    bank = MemoryBank(stored)
    before = bank.copy()
    gw = Gateway(ScriptedEvolution(bank, candidates, verdicts, K), retry=RetryPolicy(1, 0.0), sleep=lambda s: None)
    evolve(evolution_trajectory(), bank, K, gw, Runtime.deterministic(3))

    inserts, refines, content = model_expectation([n.id for n in stored], verdicts, K)
    # (b) inserts grow the bank by exactly their count
    assert len(bank) == len(before) + inserts
    # (c) refine touches only trigger, guidance, version and updated_at of its target
    for old in before.nodes:
        new = bank.get(old.id)
        assert new.version == old.version + refines[old.id]
        if old.id in content:
            assert (new.trigger, new.guidance) == content[old.id]
            assert replace(new, trigger=old.trigger, guidance=old.guidance, version=old.version, updated_at=old.updated_at) == old
        else:
            assert new == old
    # (a) pure discard is a no-op
    if inserts == 0 and not refines:
        assert bank == before
    # (d) save/load round-trips field for field
    assert MemoryBank.from_dict(json.loads(json.dumps(bank.to_dict()))) == bank


@pytest.mark.acceptance(3)
def test_memory_bank_file_round_trip(tmp_path):
    bank = MemoryBank([make_node("a"), make_node("b", kind="structure", always_on=True, activation_count=4)], capacity=8)
    save_bank(bank, tmp_path / "bank.json")
    assert load_bank(tmp_path / "bank.json") == bank


# ----------------------------------------------------------- criterion 4

sim_outcome = st.one_of(
    st.sampled_from(["pass", "compile_error", "runtime_error", "timeout"]),
    st.integers(1, 9).map(lambda n: f"mismatch:{n}"),
)
synth_outcome = st.one_of(
    st.sampled_from(["ok", "fail"]),
    st.tuples(st.floats(0.05, 5.0), st.floats(1.0, 500.0), st.floats(1e-7, 1e-3)).map(
        lambda t: {"delay_ns": t[0], "area_um2": t[1], "power_w": t[2]}
    ),
)
scenario = st.builds(
    MockScenario,
    simulation=st.lists(sim_outcome, max_size=8),
    synthesis=st.lists(synth_outcome, max_size=4),
    sim_pass_rate=st.floats(0.0, 1.0),
)


@pytest.mark.acceptance(4)
@settings(max_examples=200, deadline=None)
@given(scenario, st.integers(0, 2**16))
def test_orchestrator_round_budget_and_ordering(scen, seed):
    out = run_task(TASK, MemoryBank(), RunConfig(), writer_gateway(), mock_backend(seed, scen), runtime=Runtime.deterministic(seed))
    assert out.correctness_rounds_used <= 2 and out.ppa_rounds_used <= 2

    passed_versions: set[int] = set()
    for ev in out.trajectory.events:
        if isinstance(ev, SimulationRun) and ev.result.passed:
            passed_versions.add(ev.code_version)
        if isinstance(ev, SynthesisRun):
            assert ev.code_version in passed_versions

    synthesized = [e for e in out.trajectory.of_type(SynthesisRun) if e.result.synthesizable]
    if synthesized:
        best = max(ppa_score(e.result.metrics) for e in synthesized)
        assert ppa_score(out.metrics) == best
        assert out.final_code.version in {e.code_version for e in synthesized if ppa_score(e.result.metrics) == best}
    else:
        assert out.metrics is None


# ----------------------------------------------------------- criterion 5


@pytest.mark.acceptance(5)
def test_cross_task_memory_flow(tmp_path):
    node_json = json.dumps([{"kind": "rule", "trigger": "wide adder carry chain", "guidance": "one concatenated add", "intents": ["timing"], "roles": ["programmer", "correctness", "ppa"]}])
    gw = writer_gateway(select="1", replies={"generate_memory": node_json, "decide_memory": '{"action": "insert"}'})
    bank = MemoryBank()
    run = run_benchmark([TASK, SECOND], bank, RunConfig(), gw, mock_backend(0), runtime=Runtime.deterministic(5), out_dir=tmp_path)

    snapshot = load_bank(tmp_path / "bank-after-1.json")
    [inserted] = snapshot.nodes
    assert inserted.trigger == "wide adder carry chain" and inserted.provenance_task == "adder"

    task2_selects = [p for p in gw.provider.prompts("### task: select_memory") if "2:1 mux" in p]
    assert task2_selects and all("wide adder carry chain" in p for p in task2_selects)
    [task2] = run.outcomes["mux"]
    activated = {i for e in task2.trajectory.of_type(MemoryActivated) for i in e.node_ids}
    assert inserted.id in activated


# ----------------------------------------------------------- criterion 6

SIGNAL_TEXT = "carry bit dropped on vector 17"
DISTINCT = {"delay_ns": 0.777, "area_um2": 123.456, "power_w": 4.321e-05}


def feedback_run(enabled: bool):
    gw = writer_gateway(replies={"summarize_simulation": json.dumps([{"category": "arithmetic_logic_error", "description": SIGNAL_TEXT}])})
    scen = MockScenario(simulation=["mismatch:2", "pass", "pass", "pass"], synthesis=[DISTINCT, DISTINCT, DISTINCT])
    cfg = RunConfig(features=Features(memory_enabled=False, tool_feedback_enabled=enabled))
    out = run_task(TASK, MemoryBank(), cfg, gw, mock_backend(0, scen), runtime=Runtime.deterministic(2))
    return out, gw.provider.prompts("### task: generate_code")


@pytest.mark.acceptance(6)
def test_no_tool_feedback_hides_signals_and_metrics():
    on_out, on_prompts = feedback_run(True)
    assert any(SIGNAL_TEXT in p for p in on_prompts) and any("123.456" in p for p in on_prompts)

    out, prompts = feedback_run(False)
    assert out.trajectory.of_type(SimulationRun) and out.trajectory.of_type(SynthesisRun)
    for p in prompts:
        assert "## Tool feedback" not in p
        assert SIGNAL_TEXT not in p and "123.456" not in p and "0.777" not in p


@pytest.mark.acceptance(6)
def test_no_ppa_runs_no_synthesis():
    cfg = RunConfig(features=Features(ppa_agent_enabled=False))
    run = run_benchmark([TASK, SECOND], MemoryBank(), cfg, writer_gateway(), mock_backend(0, "fail-then-pass"), runtime=Runtime.deterministic(2))
    assert all(o.trajectory.of_type(SynthesisRun) == [] for runs in run.outcomes.values() for o in runs)


@pytest.mark.acceptance(6)
def test_no_memory_injects_nothing_and_keeps_bank():
    bank = MemoryBank([make_node("n1", guidance="Pipeline the adder behind a register.")])
    before = bank.copy()
    gw = writer_gateway(select="1", replies={"generate_memory": '[{"kind": "rule", "trigger": "t", "guidance": "g", "intents": ["area"], "roles": ["ppa"]}]', "decide_memory": '{"action": "insert"}'})
    cfg = RunConfig(features=Features(memory_enabled=False))
    run_benchmark([TASK, SECOND], bank, cfg, gw, mock_backend(0, "fail-then-pass"), runtime=Runtime.deterministic(2))
    assert bank == before
    assert gw.provider.prompts("### task: select_memory") == []
    assert gw.provider.prompts("### task: generate_memory") == []
    for p in gw.provider.prompts("### task: generate_code"):
        assert "Guidance from optimization memory" not in p and "Pipeline the adder" not in p


@pytest.mark.acceptance(6)
def test_no_memory_flag_keeps_bank_file(tmp_path):
    bank = tmp_path / "bank.json"
    save_bank(MemoryBank([make_node("n1")]), bank)
    before = bank.read_bytes()
    res = cli("bench", DEMO / "manifest.yaml", "--bank", bank, "--no-memory", "--out", tmp_path, "--mock-llm", DEMO / "mock_llm.json", "--mock-eda", "--fixed-clock")
    assert res.exit_code == 0, res.output
    assert bank.read_bytes() == before


# ----------------------------------------------------------- criterion 7

PARSERS = {"delay": parse_delay, "area": parse_area, "power": parse_power}


@pytest.mark.acceptance(7)
def test_golden_report_suite():
    expected = json.loads((REPORTS / "expected.json").read_text())
    assert len(expected) >= 12
    kinds = Counter(spec["kind"] for spec in expected.values())
    assert min(kinds.values()) >= 2 and any(spec.get("error") for spec in expected.values())
    for name, spec in expected.items():
        text = (REPORTS / name).read_text()
        parse = PARSERS[spec["kind"]]
        kwargs = {"clock_period_ns": spec["clock_ns"]} if spec["kind"] == "delay" and "clock_ns" in spec else {}
        if spec.get("error"):
            with pytest.raises(ParseError):
                parse(text, **kwargs)
        else:
            assert parse(text, **kwargs) == spec["value"], name


# ----------------------------------------------------------- criterion 8


@pytest.mark.acceptance(8)
def test_bench_is_deterministic(tmp_path):
    trees = []
    for name in ("a", "b"):
        root = tmp_path / name
        res = cli(
            "bench", DEMO / "manifest.yaml", "--bank", root / "bank.json", "--out", root / "runs", "--run-id", "r",
            "--samples", 2, "--k", "1,2", "--mock-llm", DEMO / "mock_llm.json", "--mock-eda", "--fixed-clock",
        )
        assert res.exit_code == 0, res.output
        trees.append({p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
    assert trees[0].keys() == trees[1].keys()
    assert any(p.name == "report.md" for p in trees[0]) and any(p.name == "bank.json" for p in trees[0])
    for path in trees[0]:
        assert trees[0][path] == trees[1][path], path


# ----------------------------------------------------------- criterion 9

REAL_TOOLS = all(shutil.which(t) for t in ("iverilog", "vvp", "yosys", "sta")) and bool(os.environ.get("LIBERTY"))


@pytest.mark.acceptance(9)
@pytest.mark.realtools
@pytest.mark.skipif(not REAL_TOOLS, reason="needs iverilog, yosys, sta and LIBERTY")
def test_real_toolchain_smoke(tmp_path):
    res = cli(
        "run", DEMO / "manifest.yaml", "--task", "adder8", "--config", DEMO.parent / "example.toml",
        "--mock-llm", DEMO / "mock_llm.json", "--no-memory", "--out", tmp_path, "--run-id", "smoke",
    )
    assert res.exit_code == 0, res.output
    traj = Trajectory.from_json((tmp_path / "smoke" / "adder8" / "trajectory.json").read_text())
    metrics = [e.result.metrics for e in traj.of_type(SynthesisRun) if e.result.synthesizable]
    assert metrics and all(isinstance(m, PpaMetrics) and min(m.as_tuple()) > 0 for m in metrics)
