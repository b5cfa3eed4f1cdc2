"""Version ordering and merging of per-notebook requirements."""

from __future__ import annotations

import functools
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import PythonMismatch
from .reqspec import PinnedDependency, RequirementsSpec, parse_python_version

PRE_PHASES = {"a": 0, "b": 1, "rc": 2}

_VERSION_RE = re.compile(
    r"""
    ^v?
    (?:(?P<epoch>\d+)!)?
    (?P<release>\d+(?:\.\d+)*)
    (?:(?P<pre_l>a|b|rc)(?P<pre_n>\d+))?
    (?:\.post(?P<post>\d+))?
    (?:\.dev(?P<dev>\d+))?
    $
    """,
    re.VERBOSE | re.IGNORECASE,
)
_LEADING_RELEASE_RE = re.compile(r"^v?(\d+(?:\.\d+)*)", re.IGNORECASE)

_INF = float("inf")


class NonstandardVersionWarning(UserWarning):
    pass


def _trim(release: Sequence[int]) -> tuple[int, ...]:
    out = list(release)
    while out and out[-1] == 0:
        out.pop()
    return tuple(out)


@functools.total_ordering
@dataclass(frozen=True)
class ParsedVersion:
    epoch: int = 0
    release: tuple[int, ...] = ()
    pre: tuple[str, int] | None = None
    post: int | None = None
    dev: int | None = None
    nonstandard: str | None = None

    @property
    def is_standard(self) -> bool:
        return self.nonstandard is None

    def sort_key(self) -> tuple:
        # Nonstandard strings sit in tier 0, below any standard version that
        # shares the same leading release; tier 1 is the canonical ordering.
        if self.nonstandard is not None:
            segments = tuple(
                (0, int(seg), "") if seg.isdigit() else (1, 0, seg)
                for seg in self.nonstandard.split(".")
            )
            return (0, _trim(self.release), 0, segments)
        if self.pre is None and self.post is None and self.dev is not None:
            pre_key: tuple = (-_INF, 0)
        elif self.pre is None:
            pre_key = (_INF, 0)
        else:
            pre_key = (PRE_PHASES[self.pre[0]], self.pre[1])
        post_key = -_INF if self.post is None else self.post
        dev_key = _INF if self.dev is None else self.dev
        return (self.epoch, _trim(self.release), 1, (pre_key, post_key, dev_key))

    def __lt__(self, other: "ParsedVersion") -> bool:
        return self.sort_key() < other.sort_key()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParsedVersion):
            return NotImplemented
        return self.sort_key() == other.sort_key()

    def __hash__(self) -> int:
        return hash(self.sort_key())

    def __str__(self) -> str:
        if self.nonstandard is not None:
            return self.nonstandard
        text = ".".join(map(str, self.release))
        if self.epoch:
            text = f"{self.epoch}!{text}"
        if self.pre:
            text += f"{self.pre[0]}{self.pre[1]}"
        if self.post is not None:
            text += f".post{self.post}"
        if self.dev is not None:
            text += f".dev{self.dev}"
        return text


@functools.lru_cache(maxsize=4096)
def parse_version(s: str) -> ParsedVersion:
    """Parse ``[N!]X(.Y)*[{a|b|rc}N][.postN][.devN]``; anything else is nonstandard.

    Nonstandard versions keep their original text and any leading numeric
    release so they can still be ordered against standard ones.
    """
    text = s.strip()
    match = _VERSION_RE.match(text)
    if match is None:
        lead = _LEADING_RELEASE_RE.match(text)
        release = tuple(int(p) for p in lead.group(1).split(".")) if lead else ()
        return ParsedVersion(release=release, nonstandard=text)
    pre = None
    if match.group("pre_l"):
        pre = (match.group("pre_l").lower(), int(match.group("pre_n")))
    return ParsedVersion(
        epoch=int(match.group("epoch") or 0),
        release=tuple(int(p) for p in match.group("release").split(".")),
        pre=pre,
        post=int(match.group("post")) if match.group("post") is not None else None,
        dev=int(match.group("dev")) if match.group("dev") is not None else None,
    )


def compare_versions(a: ParsedVersion | str, b: ParsedVersion | str) -> int:
    """Three-way comparison: -1, 0 or 1."""
    ka = (parse_version(a) if isinstance(a, str) else a).sort_key()
    kb = (parse_version(b) if isinstance(b, str) else b).sort_key()
    return (ka > kb) - (ka < kb)


def latest(versions: Iterable[str]) -> str:
    """The greatest version string; equal-ranked strings tie-break on text."""
    return max(versions, key=lambda v: (parse_version(v).sort_key(), v))


def check_python_compat(specs: Sequence[RequirementsSpec], labels: Sequence[str] | None = None) -> str:
    """Combined interpreter version, or :class:`PythonMismatch` if minors differ."""
    if not specs:
        raise ValueError("no requirement specs given")
    labels = list(labels) if labels is not None else [f"spec{i}" for i in range(len(specs))]
    parsed = [parse_python_version(spec.python_version) for spec in specs]
    if len({(major, minor) for major, minor, _ in parsed}) != 1:
        raise PythonMismatch([(lbl, spec.python_version) for lbl, spec in zip(labels, specs)])
    major, minor, _ = parsed[0]
    patches = [patch for _, _, patch in parsed if patch is not None]
    if patches:
        return f"{major}.{minor}.{max(patches)}"
    return f"{major}.{minor}"


@dataclass(frozen=True)
class Conflict:
    name: str
    winner: str
    losers: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.name}: {self.winner} over {','.join(self.losers)}"


@dataclass
class MergeResult:
    spec: RequirementsSpec
    conflicts: list[Conflict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def conflict_report(self) -> str:
        return "".join(f"{c}\n" for c in self.conflicts)


def merge_requirements(specs: Sequence[RequirementsSpec], labels: Sequence[str] | None = None) -> MergeResult:
    """Union of all dependencies; conflicting pins resolve to the latest version."""
    python_version = check_python_compat(specs, labels)
    pins: dict[str, list[str]] = {}
    names: dict[str, None] = {}
    for spec in specs:
        for dep in spec.dependencies:
            names.setdefault(dep.name, None)
            if dep.pinned:
                pins.setdefault(dep.name, []).append(dep.version)

    notes: list[str] = []
    merged: list[PinnedDependency] = []
    conflicts: list[Conflict] = []
    for name in sorted(names):
        versions = pins.get(name)
        if not versions:
            merged.append(PinnedDependency(name, "", pinned=False))
            continue
        for version in dict.fromkeys(versions):
            if not parse_version(version).is_standard:
                note = f"{name}: nonstandard version {version!r} ordered by fallback rule"
                notes.append(note)
                warnings.warn(note, NonstandardVersionWarning, stacklevel=2)
        winner = latest(versions)
        losers = tuple(sorted({v for v in versions if v != winner},
                              key=lambda v: (parse_version(v).sort_key(), v)))
        if losers:
            conflicts.append(Conflict(name, winner, losers))
        merged.append(PinnedDependency(name, winner, pinned=True))

    description = "\n".join(spec.description for spec in specs if spec.description)
    return MergeResult(
        RequirementsSpec(description=description, python_version=python_version,
                         dependencies=tuple(merged)),
        conflicts,
        notes,
    )
