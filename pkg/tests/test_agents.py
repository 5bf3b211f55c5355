from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FIXTURES, gateway_for, make_node
from rtlagent.agents import (
    AgentConfig,
    ExtractionError,
    build_programmer_prompt,
    classify_simulation,
    correctness_check,
    extract_code,
    ppa_check,
    programmer_generate,
)
from rtlagent.domain import (
    DesignTask,
    PpaMetrics,
    ReportKind,
    SemanticSignal,
    Severity,
    SignalCategory,
    SimStatus,
    VerilogSource,
)
from rtlagent.eda.tools import SpawnError, ToolRunRecord

REPORTS = FIXTURES / "reports"
CODE = VerilogSource("module top(); endmodule", 1)
TASK = DesignTask("adder_8bit", "adder", "8-bit adder", testbench_source="module tb; endmodule", clock_period_ns=1.0)
QUIET = AgentConfig(summarize_reports=False)


def record(stdout="", stderr="", exit_code=0, timed_out=False) -> ToolRunRecord:
    return ToolRunRecord(exit_code, stdout, stderr, 0.1, timed_out, "/tmp/w")


class FakeSim:
    def __init__(self, rec=None, exc=None):
        self.rec, self.exc, self.calls = rec, exc, 0

    def simulate(self, code, testbench, label="sim"):
        self.calls += 1
        if self.exc:
            raise self.exc
        return self.rec


class FakeSynth:
    def __init__(self, rec=None, reports=None, exc=None):
        self.rec, self.reports, self.exc = rec or record(), reports or {}, exc

    def synthesize(self, code, clock_ns, label="synth"):
        if self.exc:
            raise self.exc
        return self.rec, dict(self.reports)


def fixture_reports(timing="slack_only.rpt", area="yosys_stat.log", power="power_watts.rpt"):
    return {
        ReportKind.TIMING_REPORT: (REPORTS / timing).read_text(),
        ReportKind.SYNTHESIS_LOG: (REPORTS / area).read_text(),
        ReportKind.POWER_REPORT: (REPORTS / power).read_text(),
    }


# ------------------------------------------------------------- extraction


@pytest.mark.parametrize(
    "completion,code",
    [
        ("```verilog\nmodule top(); endmodule\n```", "module top(); endmodule"),
        ("```verilog\nX\n```", "X"),
        ("module a; endmodule", "module a; endmodule"),
        ("first\n```verilog\nmodule a; endmodule\n```\nthen\n```verilog\nmodule b; endmodule\n```", "module b; endmodule"),
        ("```\nmodule u; endmodule\n```\n```python\nprint(1)\n```", "module u; endmodule"),
        ("```systemverilog\nmodule s; endmodule\n```\n```\nmodule u; endmodule\n```", "module s; endmodule"),
        ("Sure! Here it is: module m(input a); assign b = a; endmodule Hope it helps.", "module m(input a); assign b = a; endmodule"),
    ],
)
def test_extract_code(completion, code):
    assert extract_code(completion) == code


@pytest.mark.parametrize("completion", ["no code here", "```python\nprint(1)\n```", "```verilog\n\n```"])
def test_extract_code_failures(completion):
    with pytest.raises(ExtractionError):
        extract_code(completion)


# ------------------------------------------------------------- programmer


def test_programmer_generate_first_version():
    gw = gateway_for(("generate_code", "```verilog\nmodule top(); endmodule\n```"))
    src = programmer_generate(TASK, [], [], None, gw)
    assert src == VerilogSource("module top(); endmodule", 1)
    assert gw.provider.calls[0].profile.tier == "main"


def test_guidance_injected_verbatim():
    nodes = [make_node("g1", guidance="Register the carry out to break the critical path."), make_node("g2", guidance="Share one adder.")]
    gw = gateway_for(("generate_code", "```verilog\nmodule top(); endmodule\n```"))
    programmer_generate(TASK, nodes, [], CODE, gw, purpose="ppa")
    prompt = gw.provider.calls[0].prompt
    assert all(n.guidance in prompt for n in nodes)


@given(st.lists(st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=60).filter(str.strip), max_size=4))
def test_guidance_never_dropped(texts):
    nodes = [make_node(f"n{i}", guidance=t) for i, t in enumerate(texts)]
    bundle = build_programmer_prompt(TASK, nodes, purpose="correctness_fix", previous_code=CODE)
    assert all(t in bundle.user for t in texts)
    assert bundle.injected_guidance == tuple((n.id, n.guidance) for n in nodes)


def test_prompt_carries_feedback_and_metrics():
    sig = SemanticSignal("negative_slack", "worst slack -0.12 ns")
    bundle = build_programmer_prompt(TASK, (), [sig], CODE, PpaMetrics(0.35, 51.072, 3.14e-05), "ppa")
    assert "worst slack -0.12 ns" in bundle.user and "51.072" in bundle.user
    assert CODE.code in bundle.user
    with pytest.raises(ValueError):
        build_programmer_prompt(TASK, purpose="polish")


def test_version_follows_previous():
    gw = gateway_for(("*", "```verilog\nmodule top(); endmodule\n```"))
    assert programmer_generate(TASK, [], [], VerilogSource("module a; endmodule", 4), gw).version == 5


# --------------------------------------------------------------- classify


@pytest.mark.parametrize(
    "rec,status,count",
    [
        (record("Mismatches: 0 in 100 samples"), SimStatus.PASS, 0),
        (record("Mismatches: 7 in 100 samples"), SimStatus.MISMATCH, 7),
        (record("", "top.v:3: syntax error\nI give up.", 1), SimStatus.COMPILE_ERROR, None),
        (record("", "", -1, True), SimStatus.TIMEOUT, None),
        (record("FATAL: assertion", "", 2), SimStatus.RUNTIME_ERROR, None),
        (record("all checks done"), SimStatus.PASS, None),
        (record("Test 3 FAILED"), SimStatus.MISMATCH, None),
        (record("Your design passed\nerror count printed above"), SimStatus.PASS, None),
    ],
)
def test_classify(rec, status, count):
    assert classify_simulation(rec) == (status, count)


def test_classify_uses_configured_markers():
    cfg = AgentConfig(pass_markers=[r"ALL OK"], failure_markers=[r"BAD"])
    assert classify_simulation(record("BAD then ALL OK"), cfg)[0] is SimStatus.PASS
    assert classify_simulation(record("BAD"), cfg)[0] is SimStatus.MISMATCH


# ------------------------------------------------------------ correctness


def test_correctness_pass_has_no_signals_and_skips_llm():
    gw = gateway_for()
    result = correctness_check(CODE, TASK, FakeSim(record("Mismatches: 0 in 100 samples")), gw)
    assert result.passed and result.signals == () and gw.provider.calls == []


def test_correctness_failure_gets_llm_signals():
    reply = '[{"category": "arithmetic_logic_error", "description": "carry ignored", "severity": "critical"}, {"category": "bogus", "description": "x"}]'
    result = correctness_check(CODE, TASK, FakeSim(record("Mismatches: 7 in 100 samples")), gateway_for(("summarize_simulation", reply)))
    assert result.status is SimStatus.MISMATCH and result.mismatch_count == 7
    assert [s.category for s in result.signals] == [SignalCategory.ARITHMETIC_LOGIC_ERROR]


def test_correctness_llm_failure_falls_back_to_log():
    result = correctness_check(CODE, TASK, FakeSim(record("Mismatches: 3 in 100 samples")), gateway_for())
    [sig] = result.signals
    assert sig.category is SignalCategory.OTHER and "Mismatches: 3" in sig.description


def test_correctness_generic_log_falls_back_to_rule_signal():
    result = correctness_check(CODE, TASK, FakeSim(record("", "error", 2)), gateway_for())
    assert result.status is SimStatus.RUNTIME_ERROR and len(result.signals) == 1


def test_correctness_unparseable_summary_uses_rule_signal():
    result = correctness_check(CODE, TASK, FakeSim(record("", "top.v:1: syntax error", 1)), gateway_for(("*", "looks broken")))
    [sig] = result.signals
    assert sig.category is SignalCategory.COMPILE_ERROR


def test_correctness_without_testbench():
    sim = FakeSim()
    task = DesignTask("t", "t", "spec")
    result = correctness_check(CODE, task, sim, gateway_for())
    assert result.passed and sim.calls == 0
    assert result.signals[0].severity is Severity.INFO


def test_correctness_spawn_error():
    result = correctness_check(CODE, TASK, FakeSim(exc=SpawnError("iverilog missing")), gateway_for())
    assert result.status is SimStatus.RUNTIME_ERROR and "iverilog missing" in result.raw_log


def test_correctness_is_pure_in_runner_output():
    rec = record("Mismatches: 2 in 100 samples")
    statuses = {correctness_check(CODE, TASK, FakeSim(rec), gateway_for(("*", reply))).status for reply in ("[]", "junk", '[{"category":"timeout","description":"slow"}]')}
    assert statuses == {SimStatus.MISMATCH}


# -------------------------------------------------------------------- ppa


def test_ppa_metrics_from_fixtures():
    result = ppa_check(CODE, TASK, FakeSynth(reports=fixture_reports()), gateway_for(), cfg=QUIET)
    assert result.synthesizable
    assert result.metrics == PpaMetrics(0.35, 51.072, 3.14e-05)
    assert result.signals == ()


def test_ppa_negative_slack_signal():
    result = ppa_check(CODE, TASK, FakeSynth(reports=fixture_reports(timing="slack_negative.rpt")), gateway_for(), cfg=QUIET)
    assert result.metrics.delay_ns == 1.12
    assert SignalCategory.NEGATIVE_SLACK in [s.category for s in result.signals]


def test_ppa_area_growth_signal():
    task = DesignTask("t", "t", "spec", baseline_metrics=PpaMetrics(0.3, 10.0, 1e-05), clock_period_ns=1.0)
    result = ppa_check(CODE, task, FakeSynth(reports=fixture_reports()), gateway_for(), cfg=QUIET)
    assert [s.category for s in result.signals] == [SignalCategory.ABNORMAL_AREA_GROWTH]
    loose = AgentConfig(summarize_reports=False, area_growth_factor=10.0)
    assert ppa_check(CODE, task, FakeSynth(reports=fixture_reports()), gateway_for(), cfg=loose).signals == ()


@pytest.mark.parametrize(
    "synth,category",
    [
        (FakeSynth(rec=record("", "ERROR: parser error", 1)), SignalCategory.COMPILE_ERROR),
        (FakeSynth(rec=record("", "", -1, True)), SignalCategory.TIMEOUT),
        (FakeSynth(exc=SpawnError("yosys missing")), SignalCategory.COMPILE_ERROR),
    ],
)
def test_ppa_tool_failures(synth, category):
    result = ppa_check(CODE, TASK, synth, gateway_for(), cfg=QUIET)
    assert not result.synthesizable and result.metrics is None
    assert result.signals[0].category is category


def test_ppa_missing_or_bad_report_names_it():
    reports = fixture_reports(power="power_malformed.rpt")
    del reports[ReportKind.SYNTHESIS_LOG]
    result = ppa_check(CODE, TASK, FakeSynth(reports=reports), gateway_for(), cfg=QUIET)
    assert not result.synthesizable
    text = " ".join(s.description for s in result.signals)
    assert "synthesis_log" in text and "power_report" in text
    assert all(s.category is SignalCategory.OTHER for s in result.signals)


def test_ppa_summary_signals_merged_and_failures_ignored():
    reply = '[{"category": "excessive_combinational_depth", "description": "8-level XOR chain", "severity": "warning"}]'
    ok = ppa_check(CODE, TASK, FakeSynth(reports=fixture_reports()), gateway_for(("summarize_synthesis", reply)))
    assert [s.category for s in ok.signals] == [SignalCategory.EXCESSIVE_COMBINATIONAL_DEPTH]
    silent = ppa_check(CODE, TASK, FakeSynth(reports=fixture_reports()), gateway_for())
    assert silent.synthesizable and silent.signals == ()
