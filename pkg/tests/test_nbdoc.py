import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NOTEBOOKS
from constrictor.errors import MalformedDocument, UnsupportedFormat
from constrictor.nbdoc import (
    Cell,
    code_cell,
    code_cells,
    markdown_cell,
    new_notebook,
    parse_notebook,
    serialize_notebook,
)


def _doc(cells, **extra):
    d = {"nbformat": 4, "nbformat_minor": 5, "metadata": {}, "cells": cells}
    d.update(extra)
    return json.dumps(d)


def test_minimal_notebook_with_one_empty_code_cell():
    nb = parse_notebook(_doc([{"cell_type": "code", "source": [], "metadata": {},
                              "outputs": [], "execution_count": None}]))
    assert len(nb.cells) == 1
    assert nb.cells[0].kind == "code"


def test_v3_is_rejected():
    with pytest.raises(UnsupportedFormat):
        parse_notebook(json.dumps({"nbformat": 3, "worksheets": []}))


@pytest.mark.parametrize("raw", [b"", b"{", b"[]", b'{"cells": []}', b'{"nbformat": "4"}',
                                 b"\xff\xfe", _doc([{"cell_type": "widget"}]),
                                 _doc([{"cell_type": "code", "source": 5}]),
                                 _doc([{"cell_type": "code", "source": "", "metadata": {"tags": "x"}}])])
def test_malformed_documents(raw):
    with pytest.raises(MalformedDocument):
        parse_notebook(raw)


def test_custom_top_level_key_survives():
    nb = parse_notebook(_doc([], x_custom=7))
    assert json.loads(serialize_notebook(nb))["x_custom"] == 7


@pytest.mark.parametrize("path", sorted(NOTEBOOKS.glob("*.ipynb")), ids=lambda p: p.name)
def test_fixture_round_trip(path):
    raw = path.read_bytes()
    nb = parse_notebook(raw)
    out = serialize_notebook(nb)
    assert parse_notebook(out) == nb
    assert serialize_notebook(nb) == out
    original = json.loads(raw)
    again = json.loads(out)
    # string sources become line lists; everything else is the same tree
    for cell in original["cells"]:
        if isinstance(cell["source"], str):
            cell["source"] = cell["source"].splitlines(keepends=True)
        if cell["cell_type"] == "code":
            cell.setdefault("outputs", [])
            cell.setdefault("execution_count", None)
    assert again == original


def test_canonical_output_is_a_fixed_point():
    raw = (NOTEBOOKS / "outputs.ipynb").read_bytes()
    once = serialize_notebook(parse_notebook(raw))
    assert serialize_notebook(parse_notebook(once)) == once


def test_tags_are_written_under_cell_metadata():
    nb = new_notebook([code_cell("x = 1", tags=["hide-code"])])
    tree = json.loads(serialize_notebook(nb))
    assert tree["cells"][0]["metadata"]["tags"] == ["hide-code"]


def test_code_cells_filters_by_kind():
    raw_cell = Cell("raw", ("import os\n",))
    nb = new_notebook([markdown_cell("# t"), code_cell("a"), code_cell("b"), raw_cell])
    assert [c.text for c in code_cells(nb)] == ["a", "b"]
    assert code_cells(new_notebook([markdown_cell("only")])) == []


def test_source_concatenation_is_exact():
    text = "a = 1\r\nb = 2\n\nc"
    nb = parse_notebook(_doc([{"cell_type": "code", "source": text, "metadata": {}}]))
    assert nb.cells[0].text == text


def test_with_tags_drops_duplicates_and_leaves_original():
    cell = code_cell("x", tags=["a"])
    tagged = cell.with_tags(["a", "b", "a"])
    assert tagged.tags == ("a", "b")
    assert cell.tags == ("a",)


_json = st.recursive(
    st.none() | st.booleans() | st.integers() | st.text(max_size=8),
    lambda children: st.lists(children, max_size=3) | st.dictionaries(st.text(max_size=5), children, max_size=3),
    max_leaves=8,
)


@settings(max_examples=60, deadline=None)
@given(
    sources=st.lists(st.text(max_size=30), max_size=4),
    extra=st.dictionaries(st.text(min_size=1, max_size=6).filter(lambda k: k not in {"nbformat", "nbformat_minor", "metadata", "cells"}), _json, max_size=3),
    meta=st.dictionaries(st.text(max_size=5), _json, max_size=3),
)
def test_round_trip_property(sources, extra, meta):
    cells = [{"cell_type": "code", "source": s.splitlines(keepends=True), "metadata": {},
              "outputs": [], "execution_count": None} for s in sources]
    raw = _doc(cells, **extra)
    tree = json.loads(raw)
    tree["metadata"] = meta
    nb = parse_notebook(json.dumps(tree))
    assert json.loads(serialize_notebook(nb)) == tree
