"""LLM-mediated memory triggering and evolution.

The LLM never sees node ids: candidates are shown as a numbered list and
replies are parsed back into indices. Any reply that does not parse degrades
safely (empty selection, or a ``discard`` verdict) so the bank is never
corrupted by a bad completion.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

from ..domain import (
    Action,
    CodeGenerated,
    ErrorRaised,
    EvolutionAction,
    Intent,
    MemoryActivated,
    MemoryKind,
    MemoryNode,
    Role,
    Runtime,
    SemanticSignal,
    SimulationRun,
    SynthesisRun,
    Trajectory,
)
from ..llm import ChatMessage, Gateway, ProviderProfile
from ..prompting import DEFAULT_PROMPTS, PromptLibrary, parse_indices, parse_json_block, truncate
from .bank import MemoryBank

log = logging.getLogger(__name__)

DEFAULT_RUNTIME = Runtime()


@dataclass(frozen=True)
class TaskContext:
    spec_text: str
    requesting_role: Role = Role.PROGRAMMER
    current_code: str | None = None
    latest_feedback: tuple[SemanticSignal, ...] = field(default=())

    def __post_init__(self):
        if not self.spec_text.strip():
            raise ValueError("context spec_text must be non-empty")
        object.__setattr__(self, "requesting_role", Role(self.requesting_role))
        object.__setattr__(self, "latest_feedback", tuple(self.latest_feedback))


def format_signals(signals: Sequence[SemanticSignal]) -> str:
    return "\n".join(f"- [{s.severity.value}] {s.category.value}: {s.description}" for s in signals)


def _ask(gateway: Gateway, profile: ProviderProfile | None, prompt: str, tier: str) -> str:
    profile = profile or (gateway.light if tier == "light" else gateway.main)
    return gateway.chat(profile, [ChatMessage("user", prompt)])


# ------------------------------------------------------------- triggering


def select_memory(
    context: TaskContext,
    bank: MemoryBank,
    k: int,
    gateway: Gateway,
    light_profile: ProviderProfile | None = None,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> list[str]:
    """Ask the light model which role-matching nodes fit the context; bump their counters."""
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = [n for n in bank.nodes if context.requesting_role in n.roles]
    if not candidates:
        return []
    prompt = prompts.render(
        "select_memory",
        spec=context.spec_text,
        code=truncate(context.current_code or "", 6000),
        feedback=format_signals(context.latest_feedback),
        role=context.requesting_role.value,
        triggers=[n.trigger for n in candidates],
        k=k,
    )
    reply = _ask(gateway, light_profile, prompt, "light")
    picked = parse_indices(reply, len(candidates), k)
    if picked is None:
        log.info("unparseable memory selection reply %r; continuing without guidance", reply[:80])
        return []
    ids = [candidates[i].id for i in picked]
    bank.bump_activation(ids)
    return ids


# -------------------------------------------------------------- evolution


def trajectory_digest(trajectory: Trajectory, code_limit: int = 4000, log_limit: int = 1500) -> str:
    lines = [f"task: {trajectory.task_id}"]
    for ev in trajectory.events:
        if isinstance(ev, CodeGenerated):
            lines.append(f"\n[code v{ev.source.version}, {ev.purpose}]\n```verilog\n{truncate(ev.source.code, code_limit)}\n```")
        elif isinstance(ev, SimulationRun):
            r = ev.result
            extra = f", {r.mismatch_count} mismatches" if r.mismatch_count else ""
            lines.append(f"[simulation of v{ev.code_version} ({ev.phase} round {ev.round_index}): {r.status.value}{extra}]")
            if r.signals:
                lines.append(format_signals(r.signals))
            elif not r.passed:
                lines.append(truncate(r.raw_log, log_limit))
        elif isinstance(ev, SynthesisRun):
            r = ev.result
            if r.metrics:
                m = r.metrics
                lines.append(f"[synthesis of v{ev.code_version}: delay {m.delay_ns} ns, area {m.area_um2} um^2, power {m.power_w} W]")
            else:
                lines.append(f"[synthesis of v{ev.code_version}: not synthesizable]")
            if r.signals:
                lines.append(format_signals(r.signals))
        elif isinstance(ev, MemoryActivated) and ev.node_ids:
            lines.append(f"[memory activated for {ev.role.value}: {len(ev.node_ids)} node(s)]")
        elif isinstance(ev, ErrorRaised):
            lines.append(f"[error during {ev.stage}: {ev.message}]")
    return "\n".join(lines)


def _node_from_entry(entry: Any, task_id: str, runtime: Runtime) -> MemoryNode | None:
    if not isinstance(entry, dict):
        return None
    try:
        kind = MemoryKind(entry["kind"])
        trigger, guidance = entry["trigger"], entry["guidance"]
        if not isinstance(trigger, str) or not isinstance(guidance, str):
            return None
        intents, roles = entry["intents"], entry["roles"]
        if not isinstance(intents, list) or not isinstance(roles, list):
            return None
        now = runtime.clock.now()
        return MemoryNode(
            id=runtime.ids.new_id(),
            kind=kind,
            trigger=trigger.strip(),
            guidance=guidance.strip(),
            intents=frozenset(Intent(i) for i in intents),
            roles=frozenset(Role(r) for r in roles),
            created_at=now,
            updated_at=now,
            provenance_task=task_id,
        )
    except (KeyError, ValueError, TypeError):
        return None


def generate_nodes(
    trajectory: Trajectory,
    gateway: Gateway,
    main_profile: ProviderProfile | None = None,
    runtime: Runtime = DEFAULT_RUNTIME,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> list[MemoryNode]:
    """Distil candidate nodes from a trajectory; malformed entries are dropped."""
    if not trajectory.of_type(CodeGenerated):
        raise ValueError("trajectory has no generated code to learn from")
    reply = _ask(gateway, main_profile, prompts.render("generate_memory", digest=trajectory_digest(trajectory)), "main")
    entries = parse_json_block(reply, list)
    if entries is None:
        return []
    nodes = [_node_from_entry(e, trajectory.task_id, runtime) for e in entries]
    return [n for n in nodes if n is not None]


def retrieve(
    bank: MemoryBank,
    trigger: str,
    K: int,
    gateway: Gateway,
    light_profile: ProviderProfile | None = None,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> list[MemoryNode]:
    """Up to ``K`` existing nodes whose triggers the light model judges most similar."""
    if K < 1:
        raise ValueError("K must be >= 1")
    nodes = bank.nodes
    if not nodes:
        return []
    prompt = prompts.render("retrieve_memory", trigger=trigger, triggers=[n.trigger for n in nodes], k=K)
    picked = parse_indices(_ask(gateway, light_profile, prompt, "light"), len(nodes), K)
    return [nodes[i] for i in picked or []]


def decide(
    candidate: MemoryNode,
    retrieved: Sequence[MemoryNode],
    gateway: Gateway,
    light_profile: ProviderProfile | None = None,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> EvolutionAction:
    """Insert, refine or discard; anything malformed becomes ``discard``."""
    prompt = prompts.render("decide_memory", candidate=candidate, retrieved=list(retrieved))
    verdict = parse_json_block(_ask(gateway, light_profile, prompt, "light"), dict)
    discard = EvolutionAction(Action.DISCARD, candidate)
    if verdict is None:
        return discard
    action = str(verdict.get("action", "")).strip().lower()
    if action == "insert":
        return EvolutionAction(Action.INSERT, candidate)
    if action != "refine":
        return discard
    index, trigger, guidance = verdict.get("target_index"), verdict.get("trigger"), verdict.get("guidance")
    if isinstance(index, bool) or not isinstance(index, int) or not 1 <= index <= len(retrieved):
        return discard
    if not isinstance(trigger, str) or not isinstance(guidance, str) or not trigger.strip() or not guidance.strip():
        return discard
    return EvolutionAction(Action.REFINE, candidate, retrieved[index - 1].id, (trigger.strip(), guidance.strip()))


def apply_action(bank: MemoryBank, action: EvolutionAction, runtime: Runtime = DEFAULT_RUNTIME) -> EvolutionAction:
    """Apply one verdict; returns the action actually applied."""
    now = runtime.clock.now()
    if action.action is Action.INSERT:
        node = replace(action.candidate, created_at=now, updated_at=now, version=1, activation_count=0)
        while node.id in bank:
            node = replace(node, id=runtime.ids.new_id())
        bank.add(node)
        return action
    if action.action is Action.REFINE:
        if action.target_id not in bank:
            # Evicted earlier in the same pass; nothing left to refine.
            return EvolutionAction(Action.DISCARD, action.candidate)
        target = bank.get(action.target_id)
        trigger, guidance = action.new_content
        bank.put(replace(target, trigger=trigger, guidance=guidance, version=target.version + 1, updated_at=max(now, target.created_at)))
    return action


def evolve(
    trajectory: Trajectory,
    bank: MemoryBank,
    K: int,
    gateway: Gateway,
    runtime: Runtime = DEFAULT_RUNTIME,
    prompts: PromptLibrary = DEFAULT_PROMPTS,
) -> list[EvolutionAction]:
    """Fold one trajectory into the bank: generate candidates, then retrieve/decide/apply each.

    Holds the bank's write lock for the whole pass. A gateway error stops the
    pass; actions applied before it stay applied.
    """
    with bank.write_lock():
        candidates = generate_nodes(trajectory, gateway, runtime=runtime, prompts=prompts)
        applied: list[EvolutionAction] = []
        for candidate in candidates:
            related = retrieve(bank, candidate.trigger, K, gateway, prompts=prompts)
            verdict = decide(candidate, related, gateway, prompts=prompts)
            applied.append(apply_action(bank, verdict, runtime))
        return applied


# ------------------------------------------------------------------ seeds


def seed_nodes(entries: Sequence[Any], runtime: Runtime = DEFAULT_RUNTIME) -> list[MemoryNode]:
    """Build hand-authored nodes (default kind ``rule``) from plain mappings."""
    nodes = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ValueError(f"seed entry {i} is not an object")
        unknown = set(entry) - {"kind", "trigger", "guidance", "intents", "roles", "always_on"}
        if unknown:
            raise ValueError(f"seed entry {i}: unknown fields {sorted(unknown)}")
        now = runtime.clock.now()
        try:
            nodes.append(
                MemoryNode(
                    id=runtime.ids.new_id(),
                    kind=MemoryKind(entry.get("kind", "rule")),
                    trigger=entry["trigger"],
                    guidance=entry["guidance"],
                    intents=frozenset(Intent(x) for x in entry.get("intents", ["correctness"])),
                    roles=frozenset(Role(x) for x in entry.get("roles", ["programmer"])),
                    created_at=now,
                    updated_at=now,
                    always_on=bool(entry.get("always_on", False)),
                )
            )
        except KeyError as exc:
            raise ValueError(f"seed entry {i}: missing field {exc.args[0]}") from None
    return nodes
