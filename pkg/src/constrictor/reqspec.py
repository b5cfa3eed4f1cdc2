"""requirements.yaml: model, validation, canonical emission and generation.

File layout::

    description: "Segment nuclei with StarDist"
    python: "3.10"
    dependencies:
      - numpy==1.26.4
      # unpinned
      - torch
"""

from __future__ import annotations

import datetime as _dt
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Mapping, Sequence

import yaml

from ._stdlib import STDLIB_MODULES
from ._text import yaml_quote
from .depscan import (
    INSTALL_COMMAND,
    DependencyCandidate,
    dedup_candidates,
    normalize_name,
    scan_external_file,
    scan_notebook,
)
from .errors import (
    DuplicateDependency,
    EntryFormatError,
    RequirementsSyntaxError,
    SchemaError,
    VersionFormatError,
)
from .nbdoc import Notebook

PYTHON_VERSION_RE = re.compile(r"^(\d+)\.(\d+)(?:\.(\d+))?$")
_ENTRY_RE = re.compile(
    r"^(?P<name>[A-Za-z0-9](?:[A-Za-z0-9._-]*[A-Za-z0-9])?)(?:==(?P<version>[A-Za-z0-9.!+_-]+))?$"
)
TOP_LEVEL_KEYS = ("description", "python", "dependencies")
UNPINNED_MARKER = "# unpinned"


class MismatchWarning(UserWarning):
    """An install-command pin disagrees with the environment snapshot."""


@dataclass(frozen=True)
class PinnedDependency:
    name: str
    version: str = ""
    pinned: bool = True

    def __post_init__(self):
        object.__setattr__(self, "name", normalize_name(self.name))
        if self.pinned and not self.version:
            raise ValueError(f"pinned dependency {self.name!r} needs a version")

    def __str__(self) -> str:
        return f"{self.name}=={self.version}" if self.pinned else self.name


@dataclass(frozen=True)
class RequirementsSpec:
    description: str
    python_version: str
    dependencies: tuple[PinnedDependency, ...] = ()

    def __post_init__(self):
        parse_python_version(self.python_version)
        deps = sorted(self.dependencies, key=lambda d: d.name)
        for a, b in zip(deps, deps[1:]):
            if a.name == b.name:
                raise DuplicateDependency(a.name)
        object.__setattr__(self, "dependencies", tuple(deps))

    def get(self, name: str) -> PinnedDependency | None:
        name = normalize_name(name)
        return next((d for d in self.dependencies if d.name == name), None)


@dataclass(frozen=True)
class EnvironmentSnapshot:
    interpreter_version: str
    installed: Mapping[str, str]
    captured_at: str = ""
    source_label: str = ""

    def __post_init__(self):
        normalized = {}
        for name, version in self.installed.items():
            version = str(version).strip()
            if not version:
                raise SchemaError(f"snapshot: empty version for {name!r}")
            normalized[normalize_name(name)] = version
        object.__setattr__(self, "installed", dict(sorted(normalized.items())))


@dataclass(frozen=True)
class Unresolved:
    name: str
    origin: str
    location: str = ""


@dataclass
class GeneratedRequirements:
    spec: RequirementsSpec
    unresolved: list[Unresolved] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (spec, unresolved)
        return iter((self.spec, self.unresolved))


def parse_python_version(text: str) -> tuple[int, int, int | None]:
    match = PYTHON_VERSION_RE.match(str(text))
    if not match:
        raise VersionFormatError(f"python version must look like 3.10 or 3.10.12, got {text!r}")
    major, minor, patch = match.groups()
    return int(major), int(minor), int(patch) if patch is not None else None


def truncate_interpreter_version(text: str) -> str:
    """``3.10.12+`` / ``3.11.4 (main, ...)`` -> ``3.10.12`` / ``3.11.4``."""
    match = re.match(r"^\s*(\d+\.\d+(?:\.\d+)?)", str(text))
    if not match:
        raise VersionFormatError(f"cannot read an interpreter version from {text!r}")
    return match.group(1)


def parse_entry(entry: object) -> PinnedDependency:
    if not isinstance(entry, str):
        raise EntryFormatError(f"dependency entries must be strings, got {entry!r}")
    match = _ENTRY_RE.match(entry.strip())
    if not match:
        raise EntryFormatError(f"dependency entry must be 'name' or 'name==version': {entry!r}")
    version = match.group("version")
    if version:
        return PinnedDependency(match.group("name"), version, pinned=True)
    return PinnedDependency(match.group("name"), "", pinned=False)


def validate_requirements(raw: bytes | str) -> RequirementsSpec:
    """Parse and check a requirements file, returning the normalised spec."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise RequirementsSyntaxError("requirements file is not UTF-8") from None
    if not raw.strip():
        raise RequirementsSyntaxError("requirements file is empty")
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise RequirementsSyntaxError(f"not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("requirements file must be a mapping")
    missing = [k for k in TOP_LEVEL_KEYS if k not in data]
    extra = sorted(str(k) for k in data if k not in TOP_LEVEL_KEYS)
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"missing keys: {', '.join(missing)}")
        if extra:
            parts.append(f"unexpected keys: {', '.join(extra)}")
        raise SchemaError("; ".join(parts))
    description = data["description"]
    if not isinstance(description, str):
        raise SchemaError("'description' must be a string")
    python = data["python"]
    if not isinstance(python, str):
        # an unquoted 3.10 loads as the float 3.1
        raise VersionFormatError(f"'python' must be a quoted string, got {python!r}")
    parse_python_version(python)
    deps = data["dependencies"]
    if deps is None:
        deps = []
    if not isinstance(deps, list):
        raise SchemaError("'dependencies' must be a list")
    parsed = [parse_entry(entry) for entry in deps]
    seen = set()
    for dep in parsed:
        if dep.name in seen:
            raise DuplicateDependency(dep.name)
        seen.add(dep.name)
    return RequirementsSpec(description, python, tuple(parsed))


def _quote(text: str) -> str:
    return yaml_quote(text)


def _scalar(text: str) -> str:
    # bare unless YAML would read it back as something else (yes, 1e3, ...)
    try:
        if yaml.safe_load(text) == text:
            return text
    except yaml.YAMLError:
        pass
    return _quote(text)


def serialize_requirements(spec: RequirementsSpec) -> bytes:
    lines = [
        f"description: {_quote(spec.description)}",
        f"python: {_quote(spec.python_version)}",
    ]
    if not spec.dependencies:
        lines.append("dependencies: []")
    else:
        lines.append("dependencies:")
        for dep in sorted(spec.dependencies, key=lambda d: d.name):
            if not dep.pinned:
                lines.append(f"  {UNPINNED_MARKER}")
            lines.append(f"  - {_scalar(str(dep))}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_snapshot(raw: bytes | str, source_label: str = "") -> EnvironmentSnapshot:
    """Read the snapshot file format: ``interpreter`` plus a ``packages`` mapping."""
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise RequirementsSyntaxError(f"snapshot is not valid YAML: {exc}") from None
    if not isinstance(data, dict) or "interpreter" not in data:
        raise SchemaError("snapshot must be a mapping with an 'interpreter' key")
    packages = data.get("packages") or {}
    if not isinstance(packages, dict):
        raise SchemaError("snapshot 'packages' must be a mapping")
    captured = data.get("captured_at", "")
    return EnvironmentSnapshot(
        interpreter_version=str(data["interpreter"]),
        installed={str(k): str(v) for k, v in packages.items()},
        captured_at=str(captured) if captured else "",
        source_label=source_label,
    )


def dump_snapshot(snapshot: EnvironmentSnapshot) -> bytes:
    lines = [f"interpreter: {_quote(snapshot.interpreter_version)}"]
    if snapshot.captured_at:
        lines.append(f"captured_at: {_quote(snapshot.captured_at)}")
    if snapshot.installed:
        lines.append("packages:")
        lines.extend(f"  {name}: {_quote(ver)}" for name, ver in snapshot.installed.items())
    else:
        lines.append("packages: {}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def probe_current_environment() -> EnvironmentSnapshot:
    """Snapshot of the running interpreter's installed distributions."""
    import importlib.metadata
    import platform

    installed = {}
    for dist in importlib.metadata.distributions():
        name = dist.metadata["Name"]
        if name and dist.version:
            installed.setdefault(normalize_name(name), dist.version)
    return EnvironmentSnapshot(
        interpreter_version=platform.python_version(),
        installed=installed,
        captured_at=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        source_label="probe",
    )


def collect_candidates(
    nb: Notebook,
    externals: Sequence[tuple[str, str]] = (),
    alias_table: Mapping[str, str] | None = None,
    stdlib_set=STDLIB_MODULES,
    name: str = "<notebook>",
) -> tuple[list[DependencyCandidate], list[str]]:
    found = scan_notebook(nb, alias_table, stdlib_set, name=name)
    candidates = list(found)
    for path, text in externals:
        candidates.extend(scan_external_file(path, text, alias_table, stdlib_set))
    # the external files ship with the app, so importing them is not a dependency
    local = {PurePosixPath(str(path).replace("\\", "/")).stem for path, _ in externals}
    candidates = [
        c for c in candidates
        if c.origin == INSTALL_COMMAND or c.module_name.split(".")[0] not in local
    ]
    return dedup_candidates(candidates), list(found.warnings)


def generate_requirements(
    nb: Notebook,
    externals: Sequence[tuple[str, str]],
    snapshot: EnvironmentSnapshot,
    description: str,
    alias_table: Mapping[str, str] | None = None,
    stdlib_set=STDLIB_MODULES,
    name: str = "<notebook>",
) -> GeneratedRequirements:
    """Pin every detected dependency to the version found in ``snapshot``.

    Candidates missing from the snapshot come back as :class:`Unresolved`.
    When an install command pinned a different version than the snapshot
    holds, the snapshot wins and a :class:`MismatchWarning` is issued.
    """
    candidates, notes = collect_candidates(nb, externals, alias_table, stdlib_set, name)
    pinned: list[PinnedDependency] = []
    unresolved: list[Unresolved] = []
    for cand in candidates:
        version = snapshot.installed.get(cand.distribution_name)
        if version is None:
            unresolved.append(Unresolved(cand.distribution_name, cand.origin, str(cand.location or "")))
            continue
        if cand.version_hint and cand.version_hint != version:
            note = (f"{cand.distribution_name}: install command pins {cand.version_hint} "
                    f"but environment has {version}; using {version}")
            notes.append(note)
            warnings.warn(note, MismatchWarning, stacklevel=2)
        pinned.append(PinnedDependency(cand.distribution_name, version, pinned=True))
    spec = RequirementsSpec(
        description=description,
        python_version=truncate_interpreter_version(snapshot.interpreter_version),
        dependencies=tuple(pinned),
    )
    return GeneratedRequirements(spec, unresolved, notes)


def read_requirements(path: str | Path) -> RequirementsSpec:
    return validate_requirements(Path(path).read_bytes())
