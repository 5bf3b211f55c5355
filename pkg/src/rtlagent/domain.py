"""Value types shared by the agents, tool runners, memory bank and scoring kit.

Every type is an immutable dataclass with a strict ``to_dict``/``from_dict``
pair; ``from_dict`` rejects unknown fields and bad enum values with a
:class:`SchemaError` that names the offending field path.
"""

from __future__ import annotations

import enum
import json
import math
import random
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping, Union


class SchemaError(ValueError):
    """Structured document does not match the expected schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# --------------------------------------------------------------------- enums


class SignalCategory(str, enum.Enum):
    INTERFACE_MISMATCH = "interface_mismatch"
    STATE_TRANSITION_ERROR = "state_transition_error"
    ARITHMETIC_LOGIC_ERROR = "arithmetic_logic_error"
    COMPILE_ERROR = "compile_error"
    TIMEOUT = "timeout"
    NEGATIVE_SLACK = "negative_slack"
    EXCESSIVE_COMBINATIONAL_DEPTH = "excessive_combinational_depth"
    ABNORMAL_AREA_GROWTH = "abnormal_area_growth"
    EXCESSIVE_POWER = "excessive_power"
    OTHER = "other"


class Severity(str, enum.Enum):
    INFO = "info"
    WARNING = "warning"
    CRITICAL = "critical"


class SimStatus(str, enum.Enum):
    PASS = "pass"
    COMPILE_ERROR = "compile_error"
    RUNTIME_ERROR = "runtime_error"
    MISMATCH = "mismatch"
    TIMEOUT = "timeout"


class ReportKind(str, enum.Enum):
    SYNTHESIS_LOG = "synthesis_log"
    TIMING_REPORT = "timing_report"
    POWER_REPORT = "power_report"


class MemoryKind(str, enum.Enum):
    RULE = "rule"
    STRUCTURE = "structure"
    EDA_SIGNAL = "eda_signal"


class Intent(str, enum.Enum):
    TIMING = "timing"
    AREA = "area"
    POWER = "power"
    CORRECTNESS = "correctness"


class Role(str, enum.Enum):
    PROGRAMMER = "programmer"
    CORRECTNESS = "correctness"
    PPA = "ppa"


class Action(str, enum.Enum):
    INSERT = "insert"
    REFINE = "refine"
    DISCARD = "discard"


# ------------------------------------------------------------ dict helpers


def _check_keys(d: Any, path: str, required: Iterable[str], optional: Iterable[str] = ()) -> dict:
    if not isinstance(d, Mapping):
        raise SchemaError(path, f"expected an object, got {type(d).__name__}")
    required = tuple(required)
    allowed = set(required) | set(optional)
    for key in d:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}" if path else str(key), "unknown field")
    for key in required:
        if key not in d:
            raise SchemaError(f"{path}.{key}" if path else key, "missing required field")
    return dict(d)


def _enum(cls: type[enum.Enum], value: Any, path: str):
    try:
        return cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise SchemaError(path, f"invalid value {value!r} (expected one of: {allowed})") from None


def _enum_set(cls: type[enum.Enum], values: Any, path: str) -> frozenset:
    if not isinstance(values, (list, tuple)):
        raise SchemaError(path, "expected a list")
    return frozenset(_enum(cls, v, f"{path}[{i}]") for i, v in enumerate(values))


def _ordered(members: Iterable[enum.Enum]) -> list[str]:
    members = set(members)
    if not members:
        return []
    cls = type(next(iter(members)))
    return [m.value for m in cls if m in members]


def _typed(value: Any, types: type | tuple, path: str):
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        raise SchemaError(path, "expected a number, got a boolean")
    if not isinstance(value, types):
        raise SchemaError(path, f"unexpected type {type(value).__name__}")
    return value


def _wrap(path: str, fn, *args):
    # Turn constructor ValueErrors into SchemaErrors that carry the field path.
    try:
        return fn(*args)
    except SchemaError:
        raise
    except (ValueError, TypeError) as exc:
        raise SchemaError(path, str(exc)) from None


def format_instant(t: datetime) -> str:
    return t.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def parse_instant(text: Any, path: str = "") -> datetime:
    if not isinstance(text, str):
        raise SchemaError(path, "expected an ISO-8601 timestamp string")
    try:
        t = datetime.fromisoformat(text[:-1] + "+00:00" if text.endswith("Z") else text)
    except ValueError:
        raise SchemaError(path, f"bad timestamp {text!r}") from None
    if t.tzinfo is None:
        raise SchemaError(path, "timestamp must carry a UTC offset")
    return t.astimezone(timezone.utc)


def dumps(data: Any) -> str:
    """Canonical JSON text used for every file the package writes."""
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


# ------------------------------------------------------------ clock and ids

FIXED_INSTANT = datetime(2000, 1, 1, tzinfo=timezone.utc)


class SystemClock:
    """Wall clock in UTC that never goes backwards."""

    def __init__(self):
        self._last: datetime | None = None
        self._lock = threading.Lock()

    def now(self) -> datetime:
        with self._lock:
            t = datetime.now(timezone.utc)
            if self._last is not None and t < self._last:
                t = self._last
            self._last = t
            return t


class FixedClock:
    def __init__(self, instant: datetime = FIXED_INSTANT):
        self.instant = instant

    def now(self) -> datetime:
        return self.instant


class IdFactory:
    """128-bit hex identifiers; seeded factories are reproducible."""

    def __init__(self, seed: int | None = None):
        self._rng = random.Random(seed) if seed is not None else None
        self._lock = threading.Lock()

    def new_id(self) -> str:
        if self._rng is None:
            return secrets.token_hex(16)
        with self._lock:
            return f"{self._rng.getrandbits(128):032x}"


@dataclass
class Runtime:
    clock: SystemClock | FixedClock = field(default_factory=SystemClock)
    ids: IdFactory = field(default_factory=IdFactory)

    @classmethod
    def deterministic(cls, seed: int = 0) -> "Runtime":
        return cls(FixedClock(), IdFactory(seed))


# ------------------------------------------------------------------ metrics


def _positive(name: str, value: float) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError(f"{name} must be a number")
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class PpaMetrics:
    delay_ns: float
    area_um2: float
    power_w: float

    def __post_init__(self):
        for name in ("delay_ns", "area_um2", "power_w"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.delay_ns, self.area_um2, self.power_w)

    def to_dict(self) -> dict:
        return {"delay_ns": self.delay_ns, "area_um2": self.area_um2, "power_w": self.power_w}

    @classmethod
    def from_dict(cls, d: Any, path: str = "metrics") -> "PpaMetrics":
        d = _check_keys(d, path, ("delay_ns", "area_um2", "power_w"))
        return _wrap(path, cls, d["delay_ns"], d["area_um2"], d["power_w"])


# ------------------------------------------------------------------ signals

_GENERIC_DESCRIPTIONS = {"other", "error", "errors", "unknown", "n/a", "na", "none", "issue", "problem", "failure", "failed"}


@dataclass(frozen=True)
class SemanticSignal:
    category: SignalCategory
    description: str
    severity: Severity = Severity.WARNING

    def __post_init__(self):
        object.__setattr__(self, "category", SignalCategory(self.category))
        object.__setattr__(self, "severity", Severity(self.severity))
        if not isinstance(self.description, str) or not self.description.strip():
            raise ValueError("signal description must be non-empty")
        if self.category is SignalCategory.OTHER and self.description.strip().strip(".").lower() in _GENERIC_DESCRIPTIONS:
            raise ValueError(f"category 'other' needs a specific description, got {self.description!r}")

    def to_dict(self) -> dict:
        return {"category": self.category.value, "description": self.description, "severity": self.severity.value}

    @classmethod
    def from_dict(cls, d: Any, path: str = "signal") -> "SemanticSignal":
        d = _check_keys(d, path, ("category", "description"), ("severity",))
        return _wrap(
            path,
            cls,
            _enum(SignalCategory, d["category"], f"{path}.category"),
            d["description"],
            _enum(Severity, d.get("severity", "warning"), f"{path}.severity"),
        )


def _signals_from(items: Any, path: str) -> tuple[SemanticSignal, ...]:
    if not isinstance(items, list):
        raise SchemaError(path, "expected a list")
    return tuple(SemanticSignal.from_dict(s, f"{path}[{i}]") for i, s in enumerate(items))


@dataclass(frozen=True)
class SimulationResult:
    status: SimStatus
    raw_log: str = ""
    mismatch_count: int | None = None
    signals: tuple[SemanticSignal, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "status", SimStatus(self.status))
        object.__setattr__(self, "signals", tuple(self.signals))
        if self.mismatch_count is not None and self.mismatch_count < 0:
            raise ValueError("mismatch_count must be non-negative")
        if self.status is SimStatus.PASS:
            if self.mismatch_count not in (None, 0):
                raise ValueError("a passing simulation cannot report mismatches")
            # Informational notes (e.g. "no testbench") are allowed on a pass.
            if any(s.severity is not Severity.INFO for s in self.signals):
                raise ValueError("a passing simulation carries only info-level signals")

    @property
    def passed(self) -> bool:
        return self.status is SimStatus.PASS

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "mismatch_count": self.mismatch_count,
            "raw_log": self.raw_log,
            "signals": [s.to_dict() for s in self.signals],
        }

    @classmethod
    def from_dict(cls, d: Any, path: str = "simulation") -> "SimulationResult":
        d = _check_keys(d, path, ("status",), ("mismatch_count", "raw_log", "signals"))
        count = d.get("mismatch_count")
        if count is not None:
            _typed(count, int, f"{path}.mismatch_count")
        return _wrap(
            path,
            cls,
            _enum(SimStatus, d["status"], f"{path}.status"),
            _typed(d.get("raw_log", ""), str, f"{path}.raw_log"),
            count,
            _signals_from(d.get("signals", []), f"{path}.signals"),
        )


@dataclass(frozen=True)
class SynthesisResult:
    synthesizable: bool
    metrics: PpaMetrics | None = None
    raw_reports: Mapping[ReportKind, str] = field(default_factory=dict)
    signals: tuple[SemanticSignal, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "raw_reports", {ReportKind(k): v for k, v in dict(self.raw_reports).items()})
        if self.synthesizable != (self.metrics is not None):
            raise ValueError("synthesizable must hold exactly when metrics are present")

    def to_dict(self) -> dict:
        return {
            "synthesizable": self.synthesizable,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "raw_reports": {k.value: v for k, v in self.raw_reports.items()},
            "signals": [s.to_dict() for s in self.signals],
        }

    @classmethod
    def from_dict(cls, d: Any, path: str = "synthesis") -> "SynthesisResult":
        d = _check_keys(d, path, ("synthesizable",), ("metrics", "raw_reports", "signals"))
        reports_in = d.get("raw_reports", {})
        if not isinstance(reports_in, Mapping):
            raise SchemaError(f"{path}.raw_reports", "expected an object")
        reports = {_enum(ReportKind, k, f"{path}.raw_reports.{k}"): _typed(v, str, f"{path}.raw_reports.{k}") for k, v in reports_in.items()}
        metrics = d.get("metrics")
        return _wrap(
            path,
            cls,
            _typed(d["synthesizable"], bool, f"{path}.synthesizable"),
            PpaMetrics.from_dict(metrics, f"{path}.metrics") if metrics is not None else None,
            reports,
            _signals_from(d.get("signals", []), f"{path}.signals"),
        )


# ------------------------------------------------------------- task & code


@dataclass(frozen=True)
class DesignTask:
    id: str
    name: str
    spec_text: str
    testbench_source: str | None = None
    baseline_metrics: PpaMetrics | None = None
    clock_period_ns: float | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id.strip():
            raise ValueError("task id must be non-empty")
        if not isinstance(self.spec_text, str) or not self.spec_text.strip():
            raise ValueError(f"task {self.id!r}: spec_text must be non-empty")
        if self.clock_period_ns is not None:
            object.__setattr__(self, "clock_period_ns", _positive("clock_period_ns", self.clock_period_ns))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "spec_text": self.spec_text,
            "testbench_source": self.testbench_source,
            "baseline_metrics": self.baseline_metrics.to_dict() if self.baseline_metrics else None,
            "clock_period_ns": self.clock_period_ns,
        }

    @classmethod
    def from_dict(cls, d: Any, path: str = "task") -> "DesignTask":
        d = _check_keys(d, path, ("id", "spec_text"), ("name", "testbench_source", "baseline_metrics", "clock_period_ns"))
        baseline = d.get("baseline_metrics")
        return _wrap(
            path,
            cls,
            d["id"],
            d.get("name") or d["id"],
            d["spec_text"],
            d.get("testbench_source"),
            PpaMetrics.from_dict(baseline, f"{path}.baseline_metrics") if baseline is not None else None,
            d.get("clock_period_ns"),
        )


@dataclass(frozen=True)
class VerilogSource:
    code: str
    version: int = 1

    def __post_init__(self):
        if not isinstance(self.code, str) or not self.code.strip():
            raise ValueError("Verilog source must be non-empty")
        if isinstance(self.version, bool) or not isinstance(self.version, int) or self.version < 1:
            raise ValueError("version must be an integer >= 1")

    def to_dict(self) -> dict:
        return {"code": self.code, "version": self.version}

    @classmethod
    def from_dict(cls, d: Any, path: str = "source") -> "VerilogSource":
        d = _check_keys(d, path, ("code", "version"))
        return _wrap(path, cls, d["code"], _typed(d["version"], int, f"{path}.version"))


# ------------------------------------------------------------------ memory


@dataclass(frozen=True)
class MemoryNode:
    id: str
    kind: MemoryKind
    trigger: str
    guidance: str
    intents: frozenset[Intent]
    roles: frozenset[Role]
    created_at: datetime
    updated_at: datetime
    version: int = 1
    activation_count: int = 0
    provenance_task: str | None = None
    always_on: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", MemoryKind(self.kind))
        object.__setattr__(self, "intents", frozenset(Intent(i) for i in self.intents))
        object.__setattr__(self, "roles", frozenset(Role(r) for r in self.roles))
        if not self.id:
            raise ValueError("node id must be non-empty")
        if not self.trigger.strip() or not self.guidance.strip():
            raise ValueError("trigger and guidance must be non-empty")
        if not self.intents:
            raise ValueError("intents must be a non-empty set")
        if not self.roles:
            raise ValueError("roles must be a non-empty set")
        if self.version < 1 or self.activation_count < 0:
            raise ValueError("version >= 1 and activation_count >= 0 required")
        if self.updated_at < self.created_at:
            raise ValueError("updated_at precedes created_at")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "trigger": self.trigger,
            "guidance": self.guidance,
            "intents": _ordered(self.intents),
            "roles": _ordered(self.roles),
            "version": self.version,
            "activation_count": self.activation_count,
            "created_at": format_instant(self.created_at),
            "updated_at": format_instant(self.updated_at),
            "provenance_task": self.provenance_task,
            "always_on": self.always_on,
        }

    @classmethod
    def from_dict(cls, d: Any, path: str = "node") -> "MemoryNode":
        keys = ("id", "kind", "trigger", "guidance", "intents", "roles", "version", "activation_count", "created_at", "updated_at")
        d = _check_keys(d, path, keys, ("provenance_task", "always_on"))
        for key in ("id", "trigger", "guidance"):
            _typed(d[key], str, f"{path}.{key}")
        for key in ("version", "activation_count"):
            _typed(d[key], int, f"{path}.{key}")
        prov = d.get("provenance_task")
        if prov is not None:
            _typed(prov, str, f"{path}.provenance_task")
        return _wrap(
            path,
            cls,
            d["id"],
            _enum(MemoryKind, d["kind"], f"{path}.kind"),
            d["trigger"],
            d["guidance"],
            _enum_set(Intent, d["intents"], f"{path}.intents"),
            _enum_set(Role, d["roles"], f"{path}.roles"),
            parse_instant(d["created_at"], f"{path}.created_at"),
            parse_instant(d["updated_at"], f"{path}.updated_at"),
            d["version"],
            d["activation_count"],
            prov,
            _typed(d.get("always_on", False), bool, f"{path}.always_on"),
        )


@dataclass(frozen=True)
class EvolutionAction:
    action: Action
    candidate: MemoryNode
    target_id: str | None = None
    new_content: tuple[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "action", Action(self.action))
        is_refine = self.action is Action.REFINE
        if is_refine != (self.target_id is not None) or is_refine != (self.new_content is not None):
            raise ValueError("target_id and new_content are required exactly for refine actions")
        if self.new_content is not None:
            trigger, guidance = self.new_content
            if not trigger.strip() or not guidance.strip():
                raise ValueError("refined trigger/guidance must be non-empty")
            object.__setattr__(self, "new_content", (trigger, guidance))

    def to_dict(self) -> dict:
        return {
            "action": self.action.value,
            "candidate": self.candidate.to_dict(),
            "target_id": self.target_id,
            "new_content": {"trigger": self.new_content[0], "guidance": self.new_content[1]} if self.new_content else None,
        }

    @classmethod
    def from_dict(cls, d: Any, path: str = "action") -> "EvolutionAction":
        d = _check_keys(d, path, ("action", "candidate"), ("target_id", "new_content"))
        content = d.get("new_content")
        if content is not None:
            content = _check_keys(content, f"{path}.new_content", ("trigger", "guidance"))
            content = (content["trigger"], content["guidance"])
        return _wrap(
            path,
            cls,
            _enum(Action, d["action"], f"{path}.action"),
            MemoryNode.from_dict(d["candidate"], f"{path}.candidate"),
            d.get("target_id"),
            content,
        )


# -------------------------------------------------------------- trajectory


@dataclass(frozen=True)
class SpecLoaded:
    timestamp: datetime
    task_id: str
    kind = "spec_loaded"

    def payload(self) -> dict:
        return {"task_id": self.task_id}


@dataclass(frozen=True)
class MemoryActivated:
    timestamp: datetime
    node_ids: tuple[str, ...]
    role: Role = Role.PROGRAMMER
    kind = "memory_activated"

    def payload(self) -> dict:
        return {"node_ids": list(self.node_ids), "role": Role(self.role).value}


@dataclass(frozen=True)
class CodeGenerated:
    timestamp: datetime
    source: VerilogSource
    purpose: str = "initial"  # initial | correctness_fix | ppa
    kind = "code_generated"

    def payload(self) -> dict:
        return {"source": self.source.to_dict(), "purpose": self.purpose}


@dataclass(frozen=True)
class SimulationRun:
    timestamp: datetime
    result: SimulationResult
    round_index: int
    code_version: int
    phase: str = "correctness"  # correctness | ppa
    kind = "simulation_run"

    def payload(self) -> dict:
        return {"result": self.result.to_dict(), "round_index": self.round_index, "code_version": self.code_version, "phase": self.phase}


@dataclass(frozen=True)
class SynthesisRun:
    timestamp: datetime
    result: SynthesisResult
    round_index: int
    code_version: int
    kind = "synthesis_run"

    def payload(self) -> dict:
        return {"result": self.result.to_dict(), "round_index": self.round_index, "code_version": self.code_version}


@dataclass(frozen=True)
class EvolutionApplied:
    timestamp: datetime
    actions: tuple[EvolutionAction, ...]
    kind = "evolution_applied"

    def payload(self) -> dict:
        return {"actions": [a.to_dict() for a in self.actions]}


@dataclass(frozen=True)
class ErrorRaised:
    timestamp: datetime
    stage: str
    message: str
    kind = "error_raised"

    def payload(self) -> dict:
        return {"stage": self.stage, "message": self.message}


TrajectoryEvent = Union[SpecLoaded, MemoryActivated, CodeGenerated, SimulationRun, SynthesisRun, EvolutionApplied, ErrorRaised]


def event_to_dict(event: TrajectoryEvent) -> dict:
    return {"type": event.kind, "timestamp": format_instant(event.timestamp), **event.payload()}


def event_from_dict(d: Any, path: str = "event") -> TrajectoryEvent:
    if not isinstance(d, Mapping) or "type" not in d:
        raise SchemaError(path, "event needs a 'type' field")
    kind = d["type"]
    fields = {
        "spec_loaded": (("task_id",), ()),
        "memory_activated": (("node_ids",), ("role",)),
        "code_generated": (("source",), ("purpose",)),
        "simulation_run": (("result", "round_index", "code_version"), ("phase",)),
        "synthesis_run": (("result", "round_index", "code_version"), ()),
        "evolution_applied": (("actions",), ()),
        "error_raised": (("stage", "message"), ()),
    }
    if kind not in fields:
        raise SchemaError(f"{path}.type", f"unknown event type {kind!r}")
    required, optional = fields[kind]
    d = _check_keys(d, path, ("type", "timestamp", *required), optional)
    ts = parse_instant(d["timestamp"], f"{path}.timestamp")
    if kind == "spec_loaded":
        return SpecLoaded(ts, _typed(d["task_id"], str, f"{path}.task_id"))
    if kind == "memory_activated":
        ids = d["node_ids"]
        if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids):
            raise SchemaError(f"{path}.node_ids", "expected a list of strings")
        return MemoryActivated(ts, tuple(ids), _enum(Role, d.get("role", "programmer"), f"{path}.role"))
    if kind == "code_generated":
        return CodeGenerated(ts, VerilogSource.from_dict(d["source"], f"{path}.source"), d.get("purpose", "initial"))
    if kind == "simulation_run":
        return SimulationRun(
            ts,
            SimulationResult.from_dict(d["result"], f"{path}.result"),
            _typed(d["round_index"], int, f"{path}.round_index"),
            _typed(d["code_version"], int, f"{path}.code_version"),
            d.get("phase", "correctness"),
        )
    if kind == "synthesis_run":
        return SynthesisRun(
            ts,
            SynthesisResult.from_dict(d["result"], f"{path}.result"),
            _typed(d["round_index"], int, f"{path}.round_index"),
            _typed(d["code_version"], int, f"{path}.code_version"),
        )
    if kind == "evolution_applied":
        actions = d["actions"]
        if not isinstance(actions, list):
            raise SchemaError(f"{path}.actions", "expected a list")
        return EvolutionApplied(ts, tuple(EvolutionAction.from_dict(a, f"{path}.actions[{i}]") for i, a in enumerate(actions)))
    return ErrorRaised(ts, _typed(d["stage"], str, f"{path}.stage"), _typed(d["message"], str, f"{path}.message"))


@dataclass(frozen=True)
class Trajectory:
    task_id: str
    events: tuple[TrajectoryEvent, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if not self.events or not isinstance(self.events[0], SpecLoaded):
            raise ValueError("a trajectory starts with a SpecLoaded event")
        last_ts = None
        last_version = 0
        for ev in self.events:
            if last_ts is not None and ev.timestamp < last_ts:
                raise ValueError("trajectory timestamps must be non-decreasing")
            last_ts = ev.timestamp
            if isinstance(ev, CodeGenerated):
                if ev.source.version != last_version + 1:
                    raise ValueError(f"code version {ev.source.version} does not follow {last_version}")
                last_version = ev.source.version

    def of_type(self, cls: type) -> list:
        return [e for e in self.events if isinstance(e, cls)]

    def code_versions(self) -> dict[int, VerilogSource]:
        return {e.source.version: e.source for e in self.of_type(CodeGenerated)}

    def appended(self, *events: TrajectoryEvent) -> "Trajectory":
        return Trajectory(self.task_id, self.events + tuple(events))

    def to_dict(self) -> dict:
        return {"task_id": self.task_id, "events": [event_to_dict(e) for e in self.events]}

    @classmethod
    def from_dict(cls, d: Any, path: str = "trajectory") -> "Trajectory":
        d = _check_keys(d, path, ("task_id", "events"))
        events = d["events"]
        if not isinstance(events, list):
            raise SchemaError(f"{path}.events", "expected a list")
        parsed = tuple(event_from_dict(e, f"{path}.events[{i}]") for i, e in enumerate(events))
        return _wrap(path, cls, _typed(d["task_id"], str, f"{path}.task_id"), parsed)

    def to_json(self) -> str:
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {exc.lineno}", exc.msg) from None
        return cls.from_dict(data)


class TrajectoryRecorder:
    """Append-only builder for a :class:`Trajectory`, stamping events from a clock."""

    def __init__(self, task_id: str, clock):
        self.task_id = task_id
        self.clock = clock
        self.events: list[TrajectoryEvent] = []

    def record(self, cls: type, *args, **kwargs) -> TrajectoryEvent:
        event = cls(self.clock.now(), *args, **kwargs)
        self.events.append(event)
        return event

    def freeze(self) -> Trajectory:
        return Trajectory(self.task_id, tuple(self.events))


# ----------------------------------------------------------------- outcome


@dataclass(frozen=True)
class TaskOutcome:
    task_id: str
    final_code: VerilogSource | None
    functional_pass: bool
    synthesizable: bool
    metrics: PpaMetrics | None
    correctness_rounds_used: int
    ppa_rounds_used: int
    trajectory: Trajectory

    def __post_init__(self):
        if self.synthesizable and not self.functional_pass:
            raise ValueError("an outcome cannot be synthesizable without passing verification")
        if self.synthesizable != (self.metrics is not None):
            raise ValueError("metrics must be present exactly when synthesizable")
        if self.correctness_rounds_used < 0 or self.ppa_rounds_used < 0:
            raise ValueError("round counters must be non-negative")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "final_code": self.final_code.to_dict() if self.final_code else None,
            "functional_pass": self.functional_pass,
            "synthesizable": self.synthesizable,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "correctness_rounds_used": self.correctness_rounds_used,
            "ppa_rounds_used": self.ppa_rounds_used,
            "trajectory": self.trajectory.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Any, path: str = "outcome") -> "TaskOutcome":
        keys = ("task_id", "functional_pass", "synthesizable", "correctness_rounds_used", "ppa_rounds_used", "trajectory")
        d = _check_keys(d, path, keys, ("final_code", "metrics"))
        code, metrics = d.get("final_code"), d.get("metrics")
        return _wrap(
            path,
            cls,
            d["task_id"],
            VerilogSource.from_dict(code, f"{path}.final_code") if code is not None else None,
            _typed(d["functional_pass"], bool, f"{path}.functional_pass"),
            _typed(d["synthesizable"], bool, f"{path}.synthesizable"),
            PpaMetrics.from_dict(metrics, f"{path}.metrics") if metrics is not None else None,
            d["correctness_rounds_used"],
            d["ppa_rounds_used"],
            Trajectory.from_dict(d["trajectory"], f"{path}.trajectory"),
        )
