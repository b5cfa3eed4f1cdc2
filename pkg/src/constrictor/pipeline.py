"""End-to-end flows behind ``submit`` and ``release``.

Project layout::

    constrictor.yaml
    notebooks/<name>.ipynb
    requirements/<name>.yaml
    requirements.merged.yaml
    external/*.py
    versions.yaml
    CHANGELOG.md
"""

from __future__ import annotations

import datetime as _dt
import logging
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path, PurePosixPath
from typing import Sequence

from .config import PipelineConfig
from .errors import ConstrictorError, DuplicateVersionEntry, InvalidMerged, MissingFile, NoNotebooks
from .fsutil import ProjectLock, atomic_write
from .merge import Conflict, check_python_compat, merge_requirements
from .nbdoc import parse_notebook, serialize_notebook
from .package import (
    ASSETS_DIR,
    BRANDING_KEYS,
    EXTERNAL_DIR,
    INSTALLER_MANIFEST,
    NOTEBOOK_DIR,
    VERSIONS_FILE,
    WELCOME_NOTEBOOK,
    build_external_package_descriptor,
    build_installer_plan,
    build_menu_entry,
    build_post_install_plan,
    build_welcome_notebook,
    inject_hide_tags,
    menu_entry_path,
    serialize_menu_entry,
)
from .reqspec import (
    RequirementsSpec,
    read_requirements,
    serialize_requirements,
    validate_requirements,
)
from .validate import (
    CommandResolver,
    MockResolver,
    Resolver,
    ValidationReport,
    run_validation,
    stage_submission,
)
from .versiontrack import (
    ChangelogEntry,
    VersionManifest,
    extract_version,
    parse_manifest,
    serialize_manifest,
    update_changelog,
)

log = logging.getLogger(__name__)

REQUIREMENTS_DIR = "requirements"
MERGED_FILE = "requirements.merged.yaml"
CHANGELOG_FILE = "CHANGELOG.md"


class InputError(ConstrictorError):
    """Bad command-line input (unpaired files, unreadable paths, ...)."""


@dataclass
class SubmitResult:
    report: ValidationReport | None
    applied: bool
    staged_files: list[str] = field(default_factory=list)
    conflicts: list[Conflict] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    merged: RequirementsSpec | None = None


def make_resolver(cfg: PipelineConfig, kind: str | None = None, mock_fail: str | None = None) -> Resolver | None:
    kind = kind or cfg.resolver_kind
    if kind == "none":
        return None
    if kind == "command":
        return CommandResolver(cfg.create_cmd, cfg.install_cmd)
    if mock_fail:
        return MockResolver.failing_at(mock_fail)
    return MockResolver(cfg.mock_script)


def pair_submissions(paths: Sequence[str | Path]) -> list[tuple[Path, Path]]:
    """Match each ``x.ipynb`` with ``x.yaml`` / ``x.requirements.yaml`` / ``x_requirements.yaml``."""
    notebooks = [Path(p) for p in paths if str(p).endswith(".ipynb")]
    reqs = [Path(p) for p in paths if str(p).endswith((".yaml", ".yml"))]
    other = [str(p) for p in paths if not str(p).endswith((".ipynb", ".yaml", ".yml"))]
    if other:
        raise InputError(f"expected .ipynb and .yaml files, got: {', '.join(other)}")
    if not notebooks:
        raise InputError("no notebooks given")
    pairs = []
    unused = list(reqs)
    for nb in notebooks:
        stem = nb.stem
        wanted = {f"{stem}.yaml", f"{stem}.yml", f"{stem}.requirements.yaml", f"{stem}_requirements.yaml"}
        match = [r for r in unused if r.name in wanted]
        if len(match) != 1:
            raise InputError(f"need exactly one requirements file for {nb.name}, found {len(match)}")
        unused.remove(match[0])
        pairs.append((nb, match[0]))
    if unused:
        raise InputError(f"requirements without a notebook: {', '.join(r.name for r in unused)}")
    return pairs


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None


def existing_requirements(root: Path, skip: set[str]) -> list[tuple[str, RequirementsSpec]]:
    req_dir = root / REQUIREMENTS_DIR
    if not req_dir.is_dir():
        return []
    out = []
    for path in sorted(req_dir.glob("*.yaml")):
        if path.stem not in skip:
            out.append((path.name, read_requirements(path)))
    return out


def submit(
    cfg: PipelineConfig,
    paths: Sequence[str | Path],
    resolver: Resolver | None,
    date: str | None = None,
    log_dir: str | Path | None = None,
    dry_run: bool = False,
) -> SubmitResult:
    """Version, tag, merge and validate a set of notebooks, then apply or revert."""
    root = cfg.root
    pairs = pair_submissions(paths)
    notebooks = {}
    specs = {}
    for nb_path, req_path in pairs:
        notebooks[nb_path.stem] = (nb_path, parse_notebook(_read(nb_path)))
        specs[nb_path.stem] = validate_requirements(_read(req_path))

    previous = existing_requirements(root, set(notebooks))
    labels = [f"{stem}.yaml" for stem in specs] + [name for name, _ in previous]
    all_specs = list(specs.values()) + [spec for _, spec in previous]
    # incompatible interpreters abort before anything else happens
    check_python_compat(all_specs, labels)

    notes: list[str] = []
    date = date or _dt.date.today().isoformat()

    # (i) version extraction and changelog
    versions_path = root / VERSIONS_FILE
    if versions_path.exists():
        manifest = parse_manifest(versions_path.read_bytes())
    else:
        manifest = VersionManifest({}, cfg.project.app_version)
    records = dict(manifest.records)
    changelog = (root / CHANGELOG_FILE).read_text(encoding="utf-8") if (root / CHANGELOG_FILE).exists() else ""
    for stem, (_, nb) in notebooks.items():
        version = extract_version(nb)
        nb_id = f"{stem}.ipynb"
        records[nb_id] = version
        spec = specs[stem]
        lines = [f"{nb_id}: version {version}"]
        lines += [f"requires {dep}" for dep in spec.dependencies]
        try:
            changelog = update_changelog(changelog, ChangelogEntry(f"{stem} {version}", date, lines))
        except DuplicateVersionEntry:
            notes.append(f"{nb_id} {version} already in changelog; entry not repeated")
    manifest = VersionManifest(records, cfg.project.app_version)

    # (ii) formatting
    formatted = {
        stem: inject_hide_tags(nb, cfg.project.hide_code_enabled)
        for stem, (_, nb) in notebooks.items()
    }

    # (iii) merge
    result = merge_requirements(all_specs, labels)
    merged = result.spec
    notes.extend(result.warnings)

    files: list[tuple[str, bytes]] = []
    for stem, nb in formatted.items():
        files.append((f"{NOTEBOOK_DIR}/{stem}.ipynb", serialize_notebook(nb)))
        files.append((f"{REQUIREMENTS_DIR}/{stem}.yaml", serialize_requirements(specs[stem])))
    files.append((MERGED_FILE, serialize_requirements(merged)))
    files.append((VERSIONS_FILE, serialize_manifest(manifest)))
    files.append((CHANGELOG_FILE, changelog.encode("utf-8")))

    with ProjectLock(root):
        staged = stage_submission(files, root)
        try:
            # (iv) validation
            if resolver is None:
                report = None
                notes.append("validation disabled (resolver: none)")
                passed = True
            else:
                report = run_validation(merged, resolver, log_dir)
                passed = report.status == "passed"
        except BaseException:
            staged.revert()
            raise
        if passed and not dry_run:
            staged.apply()
        else:
            staged.revert()
    return SubmitResult(report, passed and not dry_run, [d for d, _ in files], result.conflicts, notes, merged)


@dataclass
class ReleaseResult:
    output_dir: Path
    written: list[str]
    merged: RequirementsSpec


def _notebook_descriptions(root: Path) -> dict[str, str]:
    out = {}
    req_dir = root / REQUIREMENTS_DIR
    if req_dir.is_dir():
        for path in req_dir.glob("*.yaml"):
            out[f"{path.stem}.ipynb"] = read_requirements(path).description
    return out


def release(cfg: PipelineConfig, output_dir: str | Path | None = None, dry_run: bool = False) -> ReleaseResult:
    """Generate every installer input from the project's merged state."""
    root = cfg.root
    merged_path = root / MERGED_FILE
    if not merged_path.is_file():
        raise MissingFile(f"{MERGED_FILE} not found; run submit first")
    try:
        merged = read_requirements(merged_path)
    except ConstrictorError as exc:
        raise InvalidMerged(f"{MERGED_FILE}: {exc}") from None
    nb_paths = sorted((root / NOTEBOOK_DIR).glob("*.ipynb"))
    if not nb_paths:
        raise NoNotebooks(f"no notebooks under {root / NOTEBOOK_DIR}")
    ext_paths = sorted((root / EXTERNAL_DIR).glob("*.py"))
    ext_paths = [p for p in ext_paths if p.name != "setup.py"]

    if (root / VERSIONS_FILE).is_file():
        manifest = parse_manifest((root / VERSIONS_FILE).read_bytes())
        manifest = VersionManifest(manifest.records, cfg.project.app_version)
    else:
        manifest = VersionManifest(
            {p.name: extract_version(parse_notebook(p.read_bytes())) for p in nb_paths},
            cfg.project.app_version,
        )

    project = cfg.project
    outputs: dict[str, bytes] = {}
    for p in nb_paths:
        outputs[f"{NOTEBOOK_DIR}/{p.name}"] = p.read_bytes()
    branding = {}
    for key in BRANDING_KEYS:
        src = project.branding.get(key)
        if src:
            full = root / src
            if not full.is_file():
                raise MissingFile(f"branding image not found: {src}")
            dest = f"{ASSETS_DIR}/{PurePosixPath(src).name}"
            outputs[dest] = full.read_bytes()
            branding[key] = dest
    project = replace(project, branding=branding)

    if ext_paths:
        pkg = build_external_package_descriptor(project.project_name, [p.name for p in ext_paths], project.app_version)
        outputs.update(pkg.files)
        for p in ext_paths:
            outputs[f"{EXTERNAL_DIR}/{p.name}"] = p.read_bytes()

    outputs.update(build_post_install_plan(merged, bool(ext_paths), project.project_name).render())
    outputs[menu_entry_path(project)] = serialize_menu_entry(build_menu_entry(project))
    descriptions = _notebook_descriptions(root)
    listing = [(p.name, descriptions.get(p.name, ""), manifest.records.get(p.name, "")) for p in nb_paths]
    outputs[WELCOME_NOTEBOOK] = serialize_notebook(build_welcome_notebook(project, listing, manifest))
    outputs[VERSIONS_FILE] = serialize_manifest(manifest)

    out_dir = Path(output_dir) if output_dir is not None else root / project.output_dir
    with tempfile.TemporaryDirectory(prefix="constrictor-release-") as tmp:
        # lay out in a scratch dir first so the plan's existence checks see
        # exactly what will be shipped
        scratch = Path(tmp)
        for rel, data in outputs.items():
            target = scratch / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
        plan = build_installer_plan(
            project, merged,
            [f"{NOTEBOOK_DIR}/{p.name}" for p in nb_paths],
            [f"{EXTERNAL_DIR}/{p.name}" for p in ext_paths],
            base_dir=scratch,
        )
    outputs[INSTALLER_MANIFEST] = plan.to_yaml()

    written = sorted(outputs)
    if not dry_run:
        for rel in written:
            atomic_write(out_dir / rel, outputs[rel])
    return ReleaseResult(out_dir, written, merged)
