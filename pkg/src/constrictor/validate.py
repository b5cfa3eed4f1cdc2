"""Environment validation with commit-or-revert semantics.

A submission is first written to a staging directory outside the project
tree.  Only when the merged requirements install cleanly into a fresh
environment are the staged files moved into place; otherwise the staging
directory is discarded and a troubleshooting log is written.
"""

from __future__ import annotations

import datetime as _dt
import os
import platform
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AlreadyFinalized, DestinationEscape, NotAFailure, ResolverUnavailable
from .fsutil import atomic_write
from .reqspec import RequirementsSpec, serialize_requirements

CREATE_STEP = "create-environment"
INSTALL_STEP = "install-dependencies"
SECTION_ORDER = ("REQUIREMENTS", "SCRIPTS", "ERROR OUTPUT", "ENVIRONMENT")
TROUBLESHOOT_NAME = "troubleshoot.log"


@dataclass(frozen=True)
class StepLog:
    name: str
    exit_status: int
    output: str = ""
    command: str = ""


@dataclass
class ResolverOutcome:
    step_logs: list[StepLog] = field(default_factory=list)
    duration: float = 0.0

    @property
    def success(self) -> bool:
        return all(step.exit_status == 0 for step in self.step_logs)

    @property
    def failed_steps(self) -> list[StepLog]:
        return [step for step in self.step_logs if step.exit_status != 0]


@dataclass
class ValidationReport:
    status: str  # passed | failed | skipped
    outcome: ResolverOutcome
    troubleshoot_path: Path | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "troubleshoot_path": str(self.troubleshoot_path) if self.troubleshoot_path else None,
            "duration": round(self.outcome.duration, 3),
            "steps": [
                {"name": s.name, "exit_status": s.exit_status, "command": s.command}
                for s in self.outcome.step_logs
            ],
        }


def pip_requirements(spec: RequirementsSpec) -> str:
    return "".join(f"{dep}\n" for dep in spec.dependencies)


# -- resolvers ---------------------------------------------------------------

class Resolver:
    """Creates a fresh environment and installs pinned requirements into it."""

    def check_available(self) -> None:
        pass

    def commands(self, python_version: str, reqfile: Path) -> dict[str, str]:
        return {CREATE_STEP: "", INSTALL_STEP: ""}

    def run_step(self, step: str, command: str, workdir: Path) -> StepLog:
        raise NotImplementedError


class MockResolver(Resolver):
    """Replays scripted ``(exit_status, output)`` pairs, one per step, in order.

    Steps past the end of the script succeed with no output.
    """

    def __init__(self, script: Sequence[tuple[int, str]] = (), available: bool = True):
        self.script = list(script)
        self.available = available
        self.calls: list[tuple[str, str]] = []

    @classmethod
    def failing_at(cls, step: str, output: str = "scripted failure") -> "MockResolver":
        if step == CREATE_STEP:
            return cls([(1, output)])
        return cls([(0, "environment created"), (1, output)])

    def check_available(self) -> None:
        if not self.available:
            raise ResolverUnavailable("mock resolver marked unavailable")

    def commands(self, python_version: str, reqfile: Path) -> dict[str, str]:
        return {
            CREATE_STEP: f"mock create --python {python_version}",
            INSTALL_STEP: f"mock install -r {reqfile.name}",
        }

    def run_step(self, step: str, command: str, workdir: Path) -> StepLog:
        index = len(self.calls)
        self.calls.append((step, command))
        status, output = self.script[index] if index < len(self.script) else (0, "")
        return StepLog(step, status, output, command)


class CommandResolver(Resolver):
    """Shells out to configured commands with ``{python}``/``{reqfile}`` filled in."""

    def __init__(self, create_cmd: str, install_cmd: str, timeout: float | None = 3600):
        self.create_cmd = create_cmd
        self.install_cmd = install_cmd
        self.timeout = timeout

    def check_available(self) -> None:
        for template in (self.create_cmd, self.install_cmd):
            if not template.strip():
                raise ResolverUnavailable("resolver command not configured")
            program = shlex.split(template)[0]
            if shutil.which(program) is None:
                raise ResolverUnavailable(f"resolver program not found: {program}")

    def commands(self, python_version: str, reqfile: Path) -> dict[str, str]:
        fill = {"python": python_version, "reqfile": shlex.quote(str(reqfile))}
        return {
            CREATE_STEP: self.create_cmd.format(**fill),
            INSTALL_STEP: self.install_cmd.format(**fill),
        }

    def run_step(self, step: str, command: str, workdir: Path) -> StepLog:
        try:
            proc = subprocess.run(
                shlex.split(command), cwd=workdir, capture_output=True, text=True,
                timeout=self.timeout,
            )
        except FileNotFoundError as exc:
            return StepLog(step, 127, str(exc), command)
        except subprocess.TimeoutExpired as exc:
            return StepLog(step, 124, f"timed out after {exc.timeout}s", command)
        return StepLog(step, proc.returncode, proc.stdout + proc.stderr, command)


# -- troubleshooting log -----------------------------------------------------

def _section(name: str) -> str:
    return f"===== {name} ====="


def build_troubleshoot_log(
    merged: RequirementsSpec,
    scripts: Sequence[str],
    outcome: ResolverOutcome,
    now: _dt.datetime | None = None,
) -> str:
    """Self-contained failure report: requirements, scripts, error output, environment."""
    if outcome.success:
        raise NotAFailure("successful validations have no troubleshooting log")
    now = now or _dt.datetime.now(_dt.timezone.utc)
    parts = [_section("REQUIREMENTS"), serialize_requirements(merged).decode("utf-8")]
    parts.append(_section("SCRIPTS"))
    for i, script in enumerate(scripts, start=1):
        parts.append(f"--- script {i} ---")
        parts.append(script)
    parts.append(_section("ERROR OUTPUT"))
    for step in outcome.failed_steps:
        parts.append(f"--- step {step.name} (exit {step.exit_status}) ---")
        if step.command:
            parts.append(f"$ {step.command}\n")
        parts.append(step.output)
    parts.append(_section("ENVIRONMENT"))
    parts.append(
        f"platform: {platform.platform()}\n"
        f"python: {platform.python_version()}\n"
        f"timestamp: {now.isoformat(timespec='seconds')}\n"
    )
    return "".join(p if p.endswith("\n") else p + "\n" for p in parts)


def split_troubleshoot_log(text: str) -> dict[str, str]:
    """Section name -> body, for the fixed section headers."""
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines(keepends=True):
        stripped = line.rstrip("\n")
        if stripped.startswith("===== ") and stripped.endswith(" =====") and stripped[6:-6] in SECTION_ORDER:
            current = stripped[6:-6]
            sections[current] = []
        elif current is not None:
            sections[current].append(line)
    return {name: "".join(lines) for name, lines in sections.items()}


# -- validation run ----------------------------------------------------------

def run_validation(
    merged: RequirementsSpec,
    resolver: Resolver,
    log_dir: str | Path | None = None,
    extra_scripts: Sequence[str] = (),
    now: _dt.datetime | None = None,
) -> ValidationReport:
    """Create a fresh environment at the merged Python version and install the pins."""
    try:
        resolver.check_available()
    except ResolverUnavailable as exc:
        return ValidationReport("skipped", ResolverOutcome(), None, str(exc))

    started = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="constrictor-validate-") as tmp:
        workdir = Path(tmp)
        reqfile = workdir / "requirements.txt"
        reqfile.write_text(pip_requirements(merged), encoding="utf-8")
        commands = resolver.commands(merged.python_version, reqfile)
        logs = []
        for step in (CREATE_STEP, INSTALL_STEP):
            log = resolver.run_step(step, commands[step], workdir)
            logs.append(log)
            if log.exit_status != 0:
                break
        outcome = ResolverOutcome(logs, time.monotonic() - started)

    if outcome.success:
        return ValidationReport("passed", outcome)

    scripts = [f"# {step}\n{cmd}\n" for step, cmd in commands.items()]
    scripts.append("# requirements.txt\n" + pip_requirements(merged))
    scripts.extend(extra_scripts)
    text = build_troubleshoot_log(merged, scripts, outcome, now)
    log_root = Path(log_dir) if log_dir is not None else Path(tempfile.mkdtemp(prefix="constrictor-logs-"))
    path = log_root / TROUBLESHOOT_NAME
    atomic_write(path, text.encode("utf-8"))
    return ValidationReport("failed", outcome, path, "validation failed")


# -- staging -----------------------------------------------------------------

def _resolve_destination(root: Path, dest: str) -> Path:
    rel = Path(dest)
    if rel.is_absolute():
        raise DestinationEscape(f"absolute destination not allowed: {dest}")
    target = (root / rel).resolve()
    try:
        target.relative_to(root.resolve())
    except ValueError:
        raise DestinationEscape(f"destination escapes project root: {dest}") from None
    if target == root.resolve():
        raise DestinationEscape(f"destination is the project root itself: {dest}")
    return target


@dataclass
class StagedSubmission:
    root: Path
    staging_dir: Path
    files: list[tuple[str, Path]]  # (destination relative to root, staged copy)
    state: str = "staged"  # staged | applied | reverted

    @property
    def applied(self) -> bool:
        return self.state == "applied"

    @property
    def destinations(self) -> list[str]:
        return [dest for dest, _ in self.files]

    def apply(self) -> None:
        apply(self)

    def revert(self) -> None:
        revert(self)


def stage_submission(
    files: Iterable[tuple[str, bytes]],
    root: str | Path,
    staging_parent: str | Path | None = None,
) -> StagedSubmission:
    """Copy ``(destination, content)`` pairs into a fresh staging directory."""
    root = Path(root)
    entries = list(files)
    seen = set()
    for dest, _ in entries:
        target = _resolve_destination(root, dest)
        if target in seen:
            raise DestinationEscape(f"destination given twice: {dest}")
        seen.add(target)
    staging = Path(tempfile.mkdtemp(prefix="constrictor-stage-", dir=staging_parent))
    staged = []
    for i, (dest, content) in enumerate(entries):
        copy = staging / f"{i:05d}"
        copy.write_bytes(content)
        staged.append((Path(dest).as_posix(), copy))
    return StagedSubmission(root, staging, staged)


def _check_open(staged: StagedSubmission) -> None:
    if staged.state != "staged":
        raise AlreadyFinalized(f"submission already {staged.state}")


def apply(staged: StagedSubmission) -> None:
    """Move staged files into the project; all-or-nothing."""
    _check_open(staged)
    undo: list[tuple[Path, bytes | None]] = []
    created_dirs: list[Path] = []
    try:
        for dest, copy in staged.files:
            target = _resolve_destination(staged.root, dest)
            missing = []
            parent = target.parent
            while not parent.exists():
                missing.append(parent)
                parent = parent.parent
            for d in reversed(missing):
                d.mkdir()
                created_dirs.append(d)
            undo.append((target, target.read_bytes() if target.exists() else None))
            fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(copy.read_bytes())
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
    except BaseException:
        for target, previous in reversed(undo):
            if previous is None:
                if target.exists():
                    target.unlink()
            else:
                atomic_write(target, previous)
        for d in reversed(created_dirs):
            if d.exists() and not any(d.iterdir()):
                d.rmdir()
        shutil.rmtree(staged.staging_dir, ignore_errors=True)
        staged.state = "reverted"
        raise
    shutil.rmtree(staged.staging_dir, ignore_errors=True)
    staged.state = "applied"


def revert(staged: StagedSubmission) -> None:
    """Discard the staging directory; the project tree is never touched."""
    _check_open(staged)
    shutil.rmtree(staged.staging_dir, ignore_errors=True)
    staged.state = "reverted"
