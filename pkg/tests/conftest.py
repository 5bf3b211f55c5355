from __future__ import annotations

from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from rtlagent.domain import FIXED_INSTANT, MemoryNode, Runtime
from rtlagent.llm import Gateway, MockProvider, RetryPolicy, ScriptEntry

FIXTURES = Path(__file__).parent / "fixtures"
DEMO = Path(__file__).parents[1] / "configs" / "demo"

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)


def make_node(node_id: str = "n1", trigger: str = "wide adder", guidance: str = "use one carry chain", **kw) -> MemoryNode:
    defaults = dict(
        kind="rule",
        intents={"timing"},
        roles={"programmer", "correctness", "ppa"},
        created_at=T0,
        updated_at=T0 + timedelta(seconds=1),
    )
    defaults.update(kw)
    return MemoryNode(node_id, trigger=trigger, guidance=guidance, **defaults)


def gateway_for(*entries) -> Gateway:
    """A gateway over a scripted mock; entries are ScriptEntry or (match, text[, repeat]) tuples."""
    provider = MockProvider([e if isinstance(e, ScriptEntry) else ScriptEntry(*e) for e in entries])
    return Gateway(provider, retry=RetryPolicy(attempts=3, base_delay_s=0.0), sleep=lambda s: None)


@pytest.fixture
def runtime() -> Runtime:
    return Runtime.deterministic(7)


@pytest.fixture
def fixed_instant():
    return FIXED_INSTANT


# ------------------------------------------------------- acceptance summary

_acceptance: dict[int, list[tuple[str, str]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        state = "SKIP" if report.skipped else ("PASS" if report.passed else "FAIL")
        _acceptance.setdefault(number, []).append((item.name, state))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        results = _acceptance[number]
        states = {s for _, s in results}
        verdict = "FAIL" if "FAIL" in states else ("SKIP" if states == {"SKIP"} else "PASS")
        names = ", ".join(n for n, _ in results)
        terminalreporter.write_line(f"criterion {number}: {verdict}  ({names})")


class CodeWriter:
    """Test provider: every generation returns a distinct module; other prompts get scripted replies."""

    def __init__(self, replies: dict[str, str] | None = None, select: str = "none"):
        self.replies = {"select_memory": select, "summarize_": "[]", "generate_memory": "[]", "retrieve_memory": "none", "decide_memory": '{"action": "discard"}'}
        self.replies.update(replies or {})
        self.calls = []
        self.generated = 0

    def complete(self, profile, messages):
        from rtlagent.llm import CapturedCall, render_prompt

        prompt = render_prompt(messages)
        if "### task: generate_code" in prompt:
            self.generated += 1
            text = f"```verilog\nmodule top(input a, output b); // variant {self.generated}\n  assign b = a;\nendmodule\n```"
        else:
            keys = [k for k in self.replies if f"### task: {k}" in prompt]
            text = self.replies[max(keys, key=len)] if keys else ""
        self.calls.append(CapturedCall(profile, tuple(messages), text))
        return text

    def prompts(self, marker: str = "") -> list[str]:
        return [c.prompt for c in self.calls if marker in c.prompt]


def writer_gateway(**kw) -> Gateway:
    return Gateway(CodeWriter(**kw), retry=RetryPolicy(attempts=1, base_delay_s=0.0), sleep=lambda s: None)
