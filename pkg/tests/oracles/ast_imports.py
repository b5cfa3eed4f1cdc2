"""Reference import extractor built on the ``ast`` module.

Run offline to regenerate ``tests/fixtures/scan_corpus/expected.json``::

    python tests/oracles/ast_imports.py --write
"""

import ast
import json
import sys
from pathlib import Path

CORPUS = Path(__file__).resolve().parent.parent / "fixtures" / "scan_corpus"


def absolute_top_level_imports(source: str) -> set[str]:
    found = set()
    for node in ast.walk(ast.parse(source)):
        if isinstance(node, ast.Import):
            found.update(alias.name.split(".")[0] for alias in node.names)
        elif isinstance(node, ast.ImportFrom) and node.level == 0 and node.module:
            found.add(node.module.split(".")[0])
    return found


def corpus_expectations() -> dict[str, list[str]]:
    return {
        path.name: sorted(absolute_top_level_imports(path.read_text(encoding="utf-8")))
        for path in sorted(CORPUS.glob("*.py"))
    }


if __name__ == "__main__":
    expected = corpus_expectations()
    if "--write" in sys.argv:
        (CORPUS / "expected.json").write_text(json.dumps(expected, indent=1, sort_keys=True) + "\n")
    else:
        json.dump(expected, sys.stdout, indent=1, sort_keys=True)
