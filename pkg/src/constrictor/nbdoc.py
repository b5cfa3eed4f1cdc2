"""In-memory model of ``.ipynb`` documents with lossless JSON round-trip.

Only the keys this package interprets are modelled; everything else rides
along in ``extra`` dicts and is written back unchanged.  The single
normalisation applied is that a cell ``source`` given as one string is
re-emitted as a list of lines.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

from .errors import MalformedDocument, UnsupportedFormat

SUPPORTED_MAJOR = 4
CELL_KINDS = ("code", "markdown", "raw")

_NB_KEYS = {"nbformat", "nbformat_minor", "metadata", "cells"}
_CELL_KEYS = {"cell_type", "source", "metadata", "outputs", "execution_count"}


def split_source(text: str) -> tuple[str, ...]:
    """Split cell text into lines, keeping line endings (nbformat convention)."""
    return tuple(text.splitlines(keepends=True))


@dataclass(frozen=True)
class Cell:
    kind: str
    source: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)
    outputs: list | None = None
    execution_count: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def text(self) -> str:
        return "".join(self.source)

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(self.metadata.get("tags", ()))

    def with_tags(self, tags: Iterable[str]) -> "Cell":
        """Copy of this cell with ``metadata.tags`` replaced (duplicates dropped)."""
        unique = list(dict.fromkeys(tags))
        metadata = copy.deepcopy(self.metadata)
        metadata["tags"] = unique
        return replace(self, metadata=metadata)

    @classmethod
    def from_dict(cls, data: dict) -> "Cell":
        if not isinstance(data, dict):
            raise MalformedDocument("cell is not a JSON object")
        kind = data.get("cell_type")
        if kind not in CELL_KINDS:
            raise MalformedDocument(f"unknown cell_type: {kind!r}")
        source = data.get("source", "")
        if isinstance(source, str):
            lines = split_source(source)
        elif isinstance(source, list) and all(isinstance(s, str) for s in source):
            lines = tuple(source)
        else:
            raise MalformedDocument("cell source must be a string or list of strings")
        metadata = data.get("metadata", {})
        if not isinstance(metadata, dict):
            raise MalformedDocument("cell metadata must be an object")
        tags = metadata.get("tags")
        if tags is not None and not (
            isinstance(tags, list) and all(isinstance(t, str) for t in tags)
        ):
            raise MalformedDocument("cell metadata.tags must be a list of strings")
        extra = {k: v for k, v in data.items() if k not in _CELL_KEYS}
        outputs = None
        execution_count = None
        if kind == "code":
            outputs = data.get("outputs", [])
            execution_count = data.get("execution_count")
        else:
            for key in ("outputs", "execution_count"):
                if key in data:
                    extra[key] = data[key]
        return cls(
            kind=kind,
            source=lines,
            metadata=copy.deepcopy(metadata),
            outputs=copy.deepcopy(outputs),
            execution_count=execution_count,
            extra=copy.deepcopy(extra),
        )

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "cell_type": self.kind,
            "metadata": copy.deepcopy(self.metadata),
            "source": list(self.source),
        }
        if self.kind == "code":
            out["execution_count"] = self.execution_count
            out["outputs"] = copy.deepcopy(self.outputs if self.outputs is not None else [])
        out.update(copy.deepcopy(self.extra))
        return {k: out[k] for k in sorted(out)}


@dataclass(frozen=True)
class Notebook:
    format_major: int = SUPPORTED_MAJOR
    format_minor: int = 5
    metadata: dict = field(default_factory=dict)
    cells: tuple[Cell, ...] = ()
    unknown_fields: dict = field(default_factory=dict)

    def replace_cells(self, cells: Iterable[Cell]) -> "Notebook":
        return replace(self, cells=tuple(cells))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "nbformat": self.format_major,
            "nbformat_minor": self.format_minor,
            "metadata": copy.deepcopy(self.metadata),
            "cells": [cell.to_dict() for cell in self.cells],
        }
        out.update(copy.deepcopy(self.unknown_fields))
        return {k: out[k] for k in sorted(out)}


def notebook_from_dict(data: Any) -> Notebook:
    if not isinstance(data, dict):
        raise MalformedDocument("notebook root must be a JSON object")
    major = data.get("nbformat")
    if not isinstance(major, int) or isinstance(major, bool):
        raise MalformedDocument("missing or non-integer 'nbformat'")
    if major != SUPPORTED_MAJOR:
        raise UnsupportedFormat(f"notebook format {major} is not supported (need 4)")
    minor = data.get("nbformat_minor", 0)
    if not isinstance(minor, int) or isinstance(minor, bool):
        raise MalformedDocument("'nbformat_minor' must be an integer")
    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict):
        raise MalformedDocument("notebook metadata must be an object")
    cells = data.get("cells", [])
    if not isinstance(cells, list):
        raise MalformedDocument("'cells' must be a list")
    return Notebook(
        format_major=major,
        format_minor=minor,
        metadata=copy.deepcopy(metadata),
        cells=tuple(Cell.from_dict(c) for c in cells),
        unknown_fields={k: copy.deepcopy(v) for k, v in data.items() if k not in _NB_KEYS},
    )


def parse_notebook(raw: bytes | str) -> Notebook:
    """Parse ``.ipynb`` bytes into a :class:`Notebook`."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedDocument(f"notebook is not UTF-8: {exc}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"notebook is not valid JSON: {exc}") from None
    return notebook_from_dict(data)


def serialize_notebook(nb: Notebook) -> bytes:
    # Same layout as nbformat's writer: one-space indent, trailing newline.
    text = json.dumps(nb.to_dict(), indent=1, ensure_ascii=False, separators=(",", ": "))
    return (text + "\n").encode("utf-8")


def code_cells(nb: Notebook) -> list[Cell]:
    return [cell for cell in nb.cells if cell.kind == "code"]


def new_notebook(cells: Iterable[Cell] = (), metadata: dict | None = None) -> Notebook:
    return Notebook(metadata=dict(metadata or {}), cells=tuple(cells))


def code_cell(text: str, tags: Iterable[str] = ()) -> Cell:
    metadata = {"tags": list(dict.fromkeys(tags))} if tags else {}
    return Cell(kind="code", source=split_source(text), metadata=metadata, outputs=[])


def markdown_cell(text: str) -> Cell:
    return Cell(kind="markdown", source=split_source(text))
