"""Notebook version markers, the versions.yaml manifest and the changelog."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import yaml

from ._text import yaml_quote
from .depscan import logical_lines
from .errors import (
    AmbiguousVersion,
    DuplicateNotebookId,
    DuplicateVersionEntry,
    ManifestError,
    VersionNotFound,
)
from .merge import compare_versions
from .nbdoc import Notebook, code_cells

# Top-level only: the assignment must start in column 0.
_VERSION_ASSIGN_RE = re.compile(
    r"""^current_version\s*=\s*(?P<q>["'])(?P<value>[^"'\\]+)(?P=q)\s*(?:\#.*)?$"""
)
CHANGELOG_TITLE = "# Changelog"


@dataclass(frozen=True)
class VersionRecord:
    notebook_id: str
    version: str


@dataclass(frozen=True)
class VersionManifest:
    records: dict[str, str] = field(default_factory=dict)
    app_version: str = ""

    def __post_init__(self):
        object.__setattr__(self, "records", dict(sorted(self.records.items())))


@dataclass(frozen=True)
class UpdateNotice:
    notebook_id: str
    local_version: str
    latest_version: str
    update_available: bool
    new_notebook: bool = False

    @property
    def status(self) -> str:
        if self.new_notebook:
            return "new notebook"
        if not self.latest_version:
            return "local only"
        return "update available" if self.update_available else "up to date"


@dataclass(frozen=True)
class ChangelogEntry:
    version: str
    date: str
    lines: Sequence[str] = ()


def extract_version(nb: Notebook) -> str:
    """The literal assigned to ``current_version`` in the notebook's code cells."""
    found: dict[str, None] = {}
    for cell in code_cells(nb):
        physical = cell.text.splitlines()
        for number, _, in_string in logical_lines(cell.text):
            if in_string:
                continue
            match = _VERSION_ASSIGN_RE.match(physical[number - 1])
            if match:
                found.setdefault(match.group("value"), None)
    if not found:
        raise VersionNotFound('no `current_version = "..."` assignment in any code cell')
    if len(found) > 1:
        raise AmbiguousVersion(f"conflicting current_version values: {', '.join(found)}")
    return next(iter(found))


def _q(text: str) -> str:
    return yaml_quote(text)


def manifest_from_pairs(pairs: Iterable[tuple[str, str]], app_version: str) -> VersionManifest:
    records: dict[str, str] = {}
    for notebook_id, version in pairs:
        if notebook_id in records:
            raise DuplicateNotebookId(notebook_id)
        if not version:
            raise ManifestError(f"empty version for {notebook_id}")
        records[notebook_id] = version
    return VersionManifest(records, app_version)


def serialize_manifest(manifest: VersionManifest) -> bytes:
    lines = [f"app_version: {_q(manifest.app_version)}"]
    if manifest.records:
        lines.append("notebooks:")
        lines.extend(f"  {_q(nb_id)}: {_q(ver)}" for nb_id, ver in manifest.records.items())
    else:
        lines.append("notebooks: {}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def build_version_manifest(pairs: Iterable[tuple[str, str]], app_version: str) -> bytes:
    return serialize_manifest(manifest_from_pairs(pairs, app_version))


def parse_manifest(raw: bytes | str) -> VersionManifest:
    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ManifestError(f"versions manifest is not valid YAML: {exc}") from None
    if not isinstance(data, dict) or "app_version" not in data:
        raise ManifestError("versions manifest must be a mapping with 'app_version'")
    notebooks = data.get("notebooks") or {}
    if not isinstance(notebooks, dict):
        raise ManifestError("'notebooks' must be a mapping")
    for key, value in notebooks.items():
        if not isinstance(key, str) or not isinstance(value, str) or not value:
            raise ManifestError(f"bad manifest entry {key!r}: {value!r}")
    app = data["app_version"]
    if not isinstance(app, str):
        raise ManifestError("'app_version' must be a quoted string")
    return VersionManifest(dict(notebooks), app)


def check_updates(local: VersionManifest, remote: VersionManifest) -> list[UpdateNotice]:
    notices = []
    for nb_id in sorted(set(local.records) | set(remote.records)):
        mine = local.records.get(nb_id)
        theirs = remote.records.get(nb_id)
        if mine is None:
            notices.append(UpdateNotice(nb_id, "", theirs, True, new_notebook=True))
        elif theirs is None:
            notices.append(UpdateNotice(nb_id, mine, "", False))
        else:
            notices.append(UpdateNotice(nb_id, mine, theirs, compare_versions(theirs, mine) > 0))
    return notices


def app_update_available(local: VersionManifest, remote: VersionManifest) -> bool:
    if not local.app_version or not remote.app_version:
        return False
    return compare_versions(remote.app_version, local.app_version) > 0


def _heading(version: str) -> re.Pattern:
    return re.compile(rf"^## \[{re.escape(version)}\]", re.MULTILINE)


def update_changelog(existing: str, entry: ChangelogEntry) -> str:
    """Insert a ``## [version] - date`` section right below the title.

    Everything after the insertion point is kept byte for byte.
    """
    if _heading(entry.version).search(existing):
        raise DuplicateVersionEntry(f"changelog already has a section for {entry.version}")
    section = f"## [{entry.version}] - {entry.date}\n"
    section += "".join(f"- {line}\n" for line in entry.lines)
    if not existing.strip():
        return f"{CHANGELOG_TITLE}\n\n{section}"
    lines = existing.splitlines(keepends=True)
    if lines[0].startswith("# "):
        head = [lines[0] if lines[0].endswith("\n") else lines[0] + "\n"]
        rest = lines[1:]
        # keep the title's blurb (anything before the first version section)
        while rest and not rest[0].startswith("## "):
            head.append(rest.pop(0))
        prefix = "".join(head)
        if not prefix.endswith("\n\n"):
            prefix += "\n"
        body = "".join(rest)
        return prefix + section + ("\n" + body if body else "")
    return f"{CHANGELOG_TITLE}\n\n{section}\n{existing}"
