"""Template-driven, sandboxed execution of simulators and synthesis flows."""

from __future__ import annotations

import os
import shutil
import signal
import string
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from ..domain import ReportKind

PLACEHOLDERS = frozenset({"src", "tb", "workdir", "clock_ns"})
SOURCE_NAME = "top.v"
TESTBENCH_NAME = "tb.v"


class ToolError(RuntimeError):
    pass


class SpawnError(ToolError):
    pass


@dataclass(frozen=True)
class ToolCommand:
    executable: str
    arg_template: tuple[str, ...] = ()
    timeout_s: float = 60.0
    expected_reports: tuple[tuple[ReportKind, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arg_template", tuple(self.arg_template))
        object.__setattr__(self, "expected_reports", tuple((ReportKind(k), str(p)) for k, p in self.expected_reports))
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be positive")
        for arg in self.arg_template:
            for _, name, _, _ in string.Formatter().parse(arg):
                if name is not None and name not in PLACEHOLDERS:
                    raise ValueError(f"unknown placeholder {{{name}}} in {arg!r}; allowed: {sorted(PLACEHOLDERS)}")

    def render(self, **values: str) -> list[str]:
        return [self.executable] + [arg.format(**values) for arg in self.arg_template]


@dataclass(frozen=True)
class ToolRunRecord:
    exit_code: int
    stdout: str
    stderr: str
    duration_s: float
    timed_out: bool
    workdir: str

    @property
    def log(self) -> str:
        return "\n".join(part for part in (self.stdout, self.stderr) if part)


@dataclass
class Workspace:
    """Allocates one private working directory per tool invocation.

    With a ``root`` the directories are kept as ``root/<label>/<n>`` and pruned
    to the newest ``keep`` per label; without one they are temporary and
    removed once the run has been read back.
    """

    root: Path | None = None
    keep: int = 5
    _counter: int = field(default=0, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def retains(self) -> bool:
        return self.root is not None

    def create(self, label: str) -> Path:
        if self.root is None:
            return Path(tempfile.mkdtemp(prefix="rtlagent-"))
        parent = Path(self.root) / _safe(label)
        parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            self._counter += 1
            prefix = f"{time.time_ns():020d}-{self._counter:06d}-"
        return Path(tempfile.mkdtemp(prefix=prefix, dir=parent))

    def release(self, workdir: Path) -> None:
        if self.root is None:
            shutil.rmtree(workdir, ignore_errors=True)
            return
        siblings = sorted(p for p in workdir.parent.iterdir() if p.is_dir())
        for old in siblings[: max(0, len(siblings) - self.keep)]:
            shutil.rmtree(old, ignore_errors=True)


def _safe(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label) or "run"


def _resolve(executable: str) -> str:
    found = shutil.which(executable)
    if found is None and os.sep in executable and os.access(executable, os.X_OK):
        found = executable
    if found is None:
        raise SpawnError(f"executable not found: {executable}")
    return found


def execute(argv: list[str], cwd: Path, timeout_s: float) -> ToolRunRecord:
    """Run ``argv`` in its own process group; the whole group is killed on timeout."""
    argv = [_resolve(argv[0]), *argv[1:]]
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            argv, cwd=cwd, stdout=subprocess.PIPE, stderr=subprocess.PIPE, stdin=subprocess.DEVNULL,
            text=True, errors="replace", start_new_session=True,
        )
    except OSError as exc:
        raise SpawnError(f"cannot start {argv[0]}: {exc}") from exc
    try:
        out, err = proc.communicate(timeout=timeout_s)
        timed_out = False
        code = proc.returncode
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        out, err = proc.communicate()
        timed_out = True
        code = -1
    duration = time.monotonic() - start
    if timed_out:
        duration = max(duration, timeout_s)
    return ToolRunRecord(code, out or "", err or "", duration, timed_out, str(cwd))


def _clock_arg(clock_ns: float | None) -> str:
    return "" if clock_ns is None else f"{clock_ns:g}"


def run_simulation(code: str, testbench: str, cmd: ToolCommand, workspace: Workspace | None = None, label: str = "sim") -> ToolRunRecord:
    workspace = workspace or Workspace()
    _resolve(cmd.executable)
    workdir = workspace.create(label)
    try:
        (workdir / SOURCE_NAME).write_text(code, encoding="utf-8")
        (workdir / TESTBENCH_NAME).write_text(testbench, encoding="utf-8")
        argv = cmd.render(src=str(workdir / SOURCE_NAME), tb=str(workdir / TESTBENCH_NAME), workdir=str(workdir), clock_ns="")
        return execute(argv, workdir, cmd.timeout_s)
    finally:
        workspace.release(workdir)


def run_synthesis(
    code: str, clock_ns: float | None, cmd: ToolCommand, workspace: Workspace | None = None, label: str = "synth"
) -> tuple[ToolRunRecord, dict[ReportKind, str]]:
    """Run the flow and read back whichever expected reports exist."""
    workspace = workspace or Workspace()
    _resolve(cmd.executable)
    workdir = workspace.create(label)
    try:
        (workdir / SOURCE_NAME).write_text(code, encoding="utf-8")
        argv = cmd.render(src=str(workdir / SOURCE_NAME), tb="", workdir=str(workdir), clock_ns=_clock_arg(clock_ns))
        record = execute(argv, workdir, cmd.timeout_s)
        reports = {}
        for kind, rel in cmd.expected_reports:
            path = workdir / rel
            if path.is_file():
                reports[kind] = path.read_text(encoding="utf-8", errors="replace")
        return record, reports
    finally:
        workspace.release(workdir)


# ------------------------------------------------------------ runner objects


class Simulator(Protocol):
    def simulate(self, code: str, testbench: str, label: str = "sim") -> ToolRunRecord: ...


class Synthesizer(Protocol):
    def synthesize(self, code: str, clock_ns: float | None, label: str = "synth") -> tuple[ToolRunRecord, dict[ReportKind, str]]: ...


@dataclass
class CommandSimulator:
    cmd: ToolCommand
    workspace: Workspace = field(default_factory=Workspace)

    def simulate(self, code: str, testbench: str, label: str = "sim") -> ToolRunRecord:
        return run_simulation(code, testbench, self.cmd, self.workspace, label)


@dataclass
class CommandSynthesizer:
    cmd: ToolCommand
    workspace: Workspace = field(default_factory=Workspace)
    default_clock_ns: float | None = None

    def synthesize(self, code: str, clock_ns: float | None, label: str = "synth"):
        return run_synthesis(code, clock_ns if clock_ns is not None else self.default_clock_ns, self.cmd, self.workspace, label)


@dataclass
class Toolchain:
    simulator: Simulator
    synthesizer: Synthesizer
