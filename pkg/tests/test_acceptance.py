"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""

import hashlib
import json
import random
import sys
import time
import warnings
from pathlib import Path


import constrictor.pipeline as pipeline
from conftest import ACCEPTANCE_RESULTS, DEMO_PROJECT, FIXTURES, NOTEBOOKS
from constrictor.cli import main
from constrictor.config import load_config
from constrictor.depscan import scan_imports
from constrictor.fsutil import tree_fingerprint
from constrictor.merge import compare_versions, merge_requirements
from constrictor.nbdoc import parse_notebook, serialize_notebook
from constrictor.package import inject_hide_tags
from constrictor.pipeline import MERGED_FILE, release
from constrictor.reqspec import PinnedDependency, RequirementsSpec, serialize_requirements, validate_requirements
from constrictor.validate import (
    CREATE_STEP,
    INSTALL_STEP,
    MockResolver,
    run_validation,
    split_troubleshoot_log,
    stage_submission,
)
from constrictor.versiontrack import VersionManifest, build_version_manifest, check_updates, extract_version, parse_manifest

sys.path.insert(0, str(Path(__file__).parent / "oracles"))
import ast_imports  # noqa: E402


def record(number, passed, detail):
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
    assert passed, detail


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_ac1_python_mismatch_fails_early(demo_project, monkeypatch, capsys):
    staged_calls = []
    real_stage = pipeline.stage_submission
    monkeypatch.setattr(pipeline, "stage_submission", lambda *a, **k: staged_calls.append(a) or real_stage(*a, **k))
    before = tree_fingerprint(demo_project)
    started = time.perf_counter()
    codes = [
        # 3.11 notebook against the project's existing 3.10 requirements
        main(["--root", str(demo_project), "submit", "incoming/legacy.ipynb", "incoming/legacy.yaml"]),
        # 3.10 and 3.11 submitted together
        main(["--root", str(demo_project), "submit", "incoming/analysis.ipynb", "incoming/analysis.yaml",
              "incoming/legacy.ipynb", "incoming/legacy.yaml"]),
    ]
    elapsed = time.perf_counter() - started
    capsys.readouterr()
    untouched = tree_fingerprint(demo_project) == before
    passed = codes == [3, 3] and not staged_calls and untouched and elapsed < 1.0
    record(1, passed, f"exit codes {codes}, staged {len(staged_calls)}, tree unchanged {untouched}, {elapsed:.3f}s")


def test_ac2_latest_pin_rule():
    golden = json.loads((FIXTURES / "version_golden.json").read_text())
    golden_bad = [g for g in golden if compare_versions(g["a"], g["b"]) != g["cmp"]]

    rng = random.Random(20260116)
    pool = sorted({g["a"] for g in golden} | {g["b"] for g in golden})
    names = [f"pkg{i}" for i in range(12)]
    merge_bad = 0
    conflicts = 0
    for _ in range(500):
        specs = []
        for _side in range(2):
            chosen = rng.sample(names, rng.randint(1, 6))
            specs.append(RequirementsSpec("r", "3.10", tuple(PinnedDependency(n, rng.choice(pool)) for n in chosen)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            merged = merge_requirements(specs).spec
        a = {d.name: d.version for d in specs[0].dependencies}
        b = {d.name: d.version for d in specs[1].dependencies}
        for name in set(a) & set(b):
            conflicts += 1
            expected = a[name] if compare_versions(a[name], b[name]) >= 0 else b[name]
            got = merged.get(name).version
            if compare_versions(got, expected) != 0 or compare_versions(got, a[name]) < 0 or compare_versions(got, b[name]) < 0:
                merge_bad += 1
    passed = len(golden) >= 200 and not golden_bad and merge_bad == 0 and conflicts > 0
    record(2, passed, f"golden {len(golden)} pairs / {len(golden_bad)} mismatches; "
                      f"500 random pairs / {conflicts} conflicts / {merge_bad} wrong pins")


def test_ac3_scanner_matches_ast_oracle():
    corpus = FIXTURES / "scan_corpus"
    frozen = json.loads((corpus / "expected.json").read_text())
    live = ast_imports.corpus_expectations()
    false_neg = false_pos = 0
    for name, expected in live.items():
        got = set(scan_imports((corpus / name).read_text(encoding="utf-8")))
        false_neg += len(set(expected) - got)
        false_pos += len(got - set(expected))
    passed = len(live) == 30 and live == frozen and false_neg == 0 and false_pos == 0
    record(3, passed, f"{len(live)} files, {false_neg} false negatives, {false_pos} false positives")


def _random_tree(rng, root):
    for i in range(rng.randint(1, 8)):
        depth = rng.randint(0, 2)
        rel = Path(*[f"d{rng.randint(0, 3)}" for _ in range(depth)], f"f{i}.txt")
        (root / rel).parent.mkdir(parents=True, exist_ok=True)
        (root / rel).write_bytes(rng.randbytes(rng.randint(0, 64)))


def _random_submission(rng, root):
    existing = [p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file()]
    files = {}
    for _ in range(rng.randint(1, 6)):
        if existing and rng.random() < 0.5:
            dest = rng.choice(existing)
        else:
            dest = "/".join([f"n{rng.randint(0, 3)}" for _ in range(rng.randint(0, 3))] + [f"new{rng.randint(0, 99)}.ipynb"])
        files[dest] = rng.randbytes(rng.randint(0, 64))
    return list(files.items())


def test_ac4_revert_completeness(tmp_path):
    rng = random.Random(4)
    merged = RequirementsSpec("m", "3.10", (PinnedDependency("numpy", "1.26.4"),))
    intact = 0
    for case in range(100):
        root = tmp_path / f"case{case}"
        root.mkdir()
        _random_tree(rng, root)
        before = tree_fingerprint(root)
        staged = stage_submission(_random_submission(rng, root), root)
        resolver = MockResolver.failing_at(rng.choice([CREATE_STEP, INSTALL_STEP]), f"failure {case}")
        report = run_validation(merged, resolver, log_dir=tmp_path / "logs" / str(case))
        assert report.status == "failed"
        staged.revert()
        intact += tree_fingerprint(root) == before and not staged.staging_dir.exists()

    # scripted success applies every staged file
    root = tmp_path / "success"
    root.mkdir()
    _random_tree(rng, root)
    files = _random_submission(rng, root)
    staged = stage_submission(files, root)
    assert run_validation(merged, MockResolver(), log_dir=tmp_path / "ok").status == "passed"
    staged.apply()
    applied = all((root / dest).read_bytes() == data for dest, data in files)
    record(4, intact == 100 and applied, f"{intact}/100 failed submissions left the tree unchanged; success applied all: {applied}")


def test_ac5_troubleshoot_log_contents(tmp_path):
    rng = random.Random(5)
    ok = 0
    for case in range(25):
        deps = tuple(PinnedDependency(f"lib{i}", f"{rng.randint(0, 9)}.{rng.randint(0, 30)}") for i in range(rng.randint(0, 5)))
        merged = RequirementsSpec(f"case {case}", "3.10.4", deps)
        error = f"ERROR: No matching distribution found for fakepkg=={case}.9\n  trailing   spaces  \n"
        scripts = [f"#!/bin/sh\necho step {case}\n", f"set -e\n\tpython -m pip install -r reqs{case}.txt"]
        resolver = MockResolver.failing_at(rng.choice([CREATE_STEP, INSTALL_STEP]), error)
        report = run_validation(merged, resolver, log_dir=tmp_path / str(case), extra_scripts=scripts)
        text = report.troubleshoot_path.read_text(encoding="utf-8")
        sections = split_troubleshoot_log(text)
        commands = [cmd for _, cmd in resolver.calls]
        checks = [
            validate_requirements(sections["REQUIREMENTS"]) == merged,
            sections["REQUIREMENTS"] == serialize_requirements(merged).decode(),
            all(s in sections["SCRIPTS"] for s in scripts),
            all(c in sections["SCRIPTS"] for c in commands),
            error in sections["ERROR OUTPUT"],
        ]
        ok += all(checks)
    record(5, ok == 25, f"{ok}/25 failure logs carry requirements, scripts and error output verbatim")


def _fixture_notebooks():
    return sorted(NOTEBOOKS.glob("*.ipynb")) + sorted(DEMO_PROJECT.rglob("*.ipynb"))


def test_ac6_tag_idempotence():
    paths = _fixture_notebooks()
    bad = []
    for path in paths:
        nb = parse_notebook(path.read_bytes())
        once = inject_hide_tags(nb)
        twice = inject_hide_tags(once)
        same_sources = all(json.dumps(a.source) == json.dumps(b.source) for a, b in zip(nb.cells, once.cells))
        same_outputs = all(json.dumps(a.outputs) == json.dumps(b.outputs) for a, b in zip(nb.cells, once.cells))
        if serialize_notebook(twice) != serialize_notebook(once) or not (same_sources and same_outputs):
            bad.append(path.name)
    record(6, len(paths) >= 5 and not bad, f"{len(paths)} fixture notebooks, failures: {bad or 'none'}")


def test_ac7_version_pipeline():
    nb = parse_notebook((DEMO_PROJECT / "notebooks" / "demo.ipynb").read_bytes())
    version = extract_version(nb)
    local = parse_manifest(build_version_manifest([("demo.ipynb", version)], "0.1.0"))
    remote = VersionManifest({"demo.ipynb": "0.0.2"}, "0.1.0")
    notice = check_updates(local, remote)[0]
    passed = local.records == {"demo.ipynb": "0.0.1"} and notice.update_available
    record(7, passed, f"manifest entry {local.records.get('demo.ipynb')!r}, update_available={notice.update_available}")


def test_ac8_release_determinism(demo_project, tmp_path):
    cfg = load_config(demo_project / "constrictor.yaml")
    first = release(cfg, tmp_path / "one")
    second = release(cfg, tmp_path / "two")
    one = {rel: _sha(tmp_path / "one" / rel) for rel in first.written}
    two = {rel: _sha(tmp_path / "two" / rel) for rel in second.written}
    required = ["construct.yaml", "post_install.sh", "post_install.bat", "Menu/demo-app.json",
                "Welcome.ipynb", "versions.yaml"]
    present = all(rel in one for rel in required)
    merged = validate_requirements((demo_project / MERGED_FILE).read_bytes())
    manifest = (tmp_path / "one" / "construct.yaml").read_text()
    pin_ok = f'"python={merged.python_version}"' in manifest
    passed = one == two and present and pin_ok
    record(8, passed, f"{len(one)} files byte-identical across runs: {one == two}; "
                      f"all artifact kinds present: {present}; pin python={merged.python_version}: {pin_ok}")
