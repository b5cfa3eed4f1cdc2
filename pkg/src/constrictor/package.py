"""Notebook formatting and generation of the distributable artifacts.

Everything here is a pure function of its inputs and emits bytes with a
fixed layout, so repeated runs produce identical files.  The install
layout shared by all generated artifacts::

    <prefix>/Welcome.ipynb
    <prefix>/versions.yaml
    <prefix>/notebooks/<id>.ipynb
    <prefix>/external/setup.py, <module>.py ...
    <prefix>/assets/<branding images>
    <prefix>/Menu/<slug>.json
"""

from __future__ import annotations

import json
import keyword
import re
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Iterable, Mapping, Sequence

from ._text import yaml_quote
from .errors import (
    InconsistentInputs,
    InvalidMerged,
    InvalidModuleName,
    MissingFile,
    NoNotebooks,
    UnresolvedPlaceholder,
)
from .fsutil import atomic_write
from .nbdoc import Cell, Notebook, code_cell, markdown_cell, new_notebook
from .reqspec import RequirementsSpec, parse_python_version
from .versiontrack import VersionManifest

HIDE_TAG = "hide-code"
KEEP_VISIBLE_TAG = "keep-visible"

WELCOME_NOTEBOOK = "Welcome.ipynb"
VERSIONS_FILE = "versions.yaml"
NOTEBOOK_DIR = "notebooks"
EXTERNAL_DIR = "external"
ASSETS_DIR = "assets"
MENU_DIR = "Menu"
POST_INSTALL_SH = "post_install.sh"
POST_INSTALL_BAT = "post_install.bat"
INSTALLER_MANIFEST = "construct.yaml"

NOTEBOOK_COMPONENTS = ("jupyterlab", "ipywidgets", "jl-hide-code")
DEFAULT_CHANNELS = ("conda-forge",)
BRANDING_KEYS = ("logo", "header", "welcome_image")

# (platform, installer type, file suffix, post-install script)
INSTALLER_TARGETS = (
    ("Windows-x86_64", "exe", "exe", POST_INSTALL_BAT),
    ("MacOSX-x86_64", "pkg", "pkg", POST_INSTALL_SH),
    ("Linux-x86_64", "sh", "sh", POST_INSTALL_SH),
)

PLACEHOLDER_RE = re.compile(r"\{\{([A-Z][A-Z0-9_]*)\}\}")

# 1x1 transparent PNG used when a branding image is not supplied.
DEFAULT_IMAGE = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c4"
    "890000000b49444154789c6360000200000500017a5eab3f0000000049454e44"
    "ae426082"
)


def slugify(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")


@dataclass(frozen=True)
class ProjectConfig:
    project_name: str
    app_version: str
    branding: Mapping[str, str] = field(default_factory=dict)
    hide_code_enabled: bool = True
    channels: tuple[str, ...] = DEFAULT_CHANNELS
    output_dir: str = "dist"
    manifest_source: str = ""
    allow_default_images: bool = True

    def __post_init__(self):
        if not self.project_name.strip() or not slugify(self.project_name):
            raise ValueError(f"project name {self.project_name!r} has no filesystem-safe form")
        unknown = set(self.branding) - set(BRANDING_KEYS)
        if unknown:
            raise ValueError(f"unknown branding keys: {', '.join(sorted(unknown))}")
        object.__setattr__(self, "branding", {k: v for k, v in self.branding.items() if v})
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def slug(self) -> str:
        return slugify(self.project_name)


# -- tag injection -----------------------------------------------------------

def inject_hide_tags(nb: Notebook, enabled: bool = True, tag: str = HIDE_TAG) -> Notebook:
    """Tag every code cell for hiding unless it opted out with ``keep-visible``."""
    if not enabled:
        return nb
    cells = []
    for cell in nb.cells:
        if cell.kind == "code" and KEEP_VISIBLE_TAG not in cell.tags:
            tags = cell.tags
            if tag not in tags or len(set(tags)) != len(tags):
                cell = cell.with_tags((*tags, tag))
        cells.append(cell)
    return nb.replace_cells(cells)


# -- YAML emission helpers ---------------------------------------------------

def _q(text: str) -> str:
    return yaml_quote(text)


# -- post-install ------------------------------------------------------------

@dataclass(frozen=True)
class InstallStep:
    title: str
    packages: tuple[str, ...] = ()
    local_dir: str | None = None  # relative to the install prefix


@dataclass(frozen=True)
class PostInstallPlan:
    steps: tuple[InstallStep, ...]
    project_name: str = ""

    def referenced_files(self) -> list[str]:
        return [f"{step.local_dir}/setup.py" for step in self.steps if step.local_dir]

    def render_sh(self) -> bytes:
        total = len(self.steps)
        out = [
            "#!/bin/bash",
            f"# Post-install steps for {self.project_name or 'the application'}.",
            "# Generated file; every step is safe to re-run.",
            "set -euo pipefail",
            'PY="${PREFIX}/bin/python"',
            'PIP_FLAGS="--no-input --disable-pip-version-check"',
        ]
        for i, step in enumerate(self.steps, start=1):
            out += ["", f'echo "[{i}/{total}] {step.title}"']
            if step.local_dir:
                target = f'"${{PREFIX}}/{step.local_dir}"'
            else:
                target = " ".join(_q(p) for p in step.packages)
            out.append(f'"$PY" -m pip install $PIP_FLAGS {target}')
        return ("\n".join(out) + "\n").encode("utf-8")

    def render_bat(self) -> bytes:
        total = len(self.steps)
        out = [
            "@echo off",
            f"rem Post-install steps for {self.project_name or 'the application'}.",
            "rem Generated file; every step is safe to re-run.",
            'set "PY=%PREFIX%\\python.exe"',
            'set "PIP_FLAGS=--no-input --disable-pip-version-check"',
        ]
        for i, step in enumerate(self.steps, start=1):
            out += ["", f"echo [{i}/{total}] {step.title}"]
            if step.local_dir:
                target = '"%PREFIX%\\' + step.local_dir.replace("/", "\\") + '"'
            else:
                target = " ".join(_q(p) for p in step.packages)
            out += [f'"%PY%" -m pip install %PIP_FLAGS% {target}', "if errorlevel 1 exit /b 1"]
        return ("\r\n".join(out) + "\r\n").encode("utf-8")

    def render(self) -> dict[str, bytes]:
        return {POST_INSTALL_SH: self.render_sh(), POST_INSTALL_BAT: self.render_bat()}


def build_post_install_plan(
    merged: RequirementsSpec, has_external: bool, project_name: str = ""
) -> PostInstallPlan:
    steps = []
    pinned = tuple(str(dep) for dep in merged.dependencies if dep.pinned)
    loose = tuple(dep.name for dep in merged.dependencies if not dep.pinned)
    if pinned or loose:
        steps.append(InstallStep("Installing pinned notebook dependencies", pinned + loose))
    steps.append(InstallStep("Installing the notebook environment", NOTEBOOK_COMPONENTS))
    if has_external:
        steps.append(InstallStep("Installing bundled helper code", local_dir=EXTERNAL_DIR))
    return PostInstallPlan(tuple(steps), project_name)


# -- menu entry --------------------------------------------------------------

def build_menu_entry(cfg: ProjectConfig) -> dict:
    item = {
        "name": cfg.project_name,
        "description": f"Open {cfg.project_name} in JupyterLab",
        "command": [
            "{{ PYTHON }}",
            "-m",
            "jupyterlab",
            "--ServerApp.root_dir={{ PREFIX }}",
            "{{ PREFIX }}/" + WELCOME_NOTEBOOK,
        ],
        "activate": True,
        "terminal": False,
        "platforms": {"linux": {}, "osx": {}, "win": {}},
    }
    logo = cfg.branding.get("logo")
    if logo:
        item["icon"] = "{{ PREFIX }}/" + f"{ASSETS_DIR}/{PurePosixPath(logo).name}"
    return {
        "$schema": "https://json-schema.org/draft-07/schema",
        "$id": "https://schemas.conda.io/menuinst-1.schema.json",
        "menu_name": cfg.project_name,
        "menu_items": [item],
    }


def menu_entry_path(cfg: ProjectConfig) -> str:
    return f"{MENU_DIR}/{cfg.slug}.json"


def serialize_menu_entry(entry: dict) -> bytes:
    return (json.dumps(entry, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# -- welcome notebook --------------------------------------------------------

_CHECK_CODE = '''\
import re
from pathlib import Path


def _read_manifest(text):
    app, notebooks = None, {}
    for line in text.splitlines():
        m = re.match(r'^app_version:\\s*"(.*)"\\s*$', line)
        if m:
            app = m.group(1)
            continue
        m = re.match(r'^\\s+"(.+)":\\s*"(.*)"\\s*$', line)
        if m:
            notebooks[m.group(1)] = m.group(2)
    return app, notebooks


def _fetch(source):
    if source.startswith(("http://", "https://")):
        from urllib.request import urlopen
        with urlopen(source, timeout=5) as resp:
            return resp.read().decode("utf-8")
    return Path(source).read_text(encoding="utf-8")


def _newer(candidate, current):
    try:
        from packaging.version import Version
        return Version(candidate) > Version(current)
    except Exception:
        return candidate != current


local_app, local_versions = _read_manifest(Path(LOCAL_MANIFEST).read_text(encoding="utf-8"))
print(f"Installed application version: {local_app}")
if not MANIFEST_SOURCE:
    print("No update source configured; skipping the update check.")
else:
    try:
        remote_app, remote_versions = _read_manifest(_fetch(MANIFEST_SOURCE))
    except Exception as exc:
        print(f"Could not read {MANIFEST_SOURCE}: {exc}")
    else:
        if remote_app and local_app and _newer(remote_app, local_app):
            print(f"A new application release is available: {remote_app}")
        for name in sorted(set(local_versions) | set(remote_versions)):
            mine, latest = local_versions.get(name), remote_versions.get(name)
            if mine is None:
                print(f"{name}: new notebook available ({latest})")
            elif latest is not None and _newer(latest, mine):
                print(f"{name}: update available {mine} -> {latest}")
            else:
                print(f"{name}: up to date ({mine})")
'''


def build_welcome_notebook(
    cfg: ProjectConfig,
    notebooks: Sequence[tuple[str, str, str]],
    manifest: VersionManifest,
) -> Notebook:
    """Landing notebook: header, index of notebooks and a version-check cell.

    ``notebooks`` holds ``(notebook_id, description, version)`` triples.
    """
    if not notebooks:
        raise InconsistentInputs("welcome notebook needs at least one notebook")
    missing = [nb_id for nb_id, _, _ in notebooks if nb_id not in manifest.records]
    if missing:
        raise InconsistentInputs(f"not in versions manifest: {', '.join(missing)}")

    header = [f"# {cfg.project_name}", "", f"Version {cfg.app_version}"]
    if cfg.branding.get("header"):
        header = [f"![header]({ASSETS_DIR}/{PurePosixPath(cfg.branding['header']).name})", ""] + header
    if cfg.branding.get("welcome_image"):
        header += ["", f"![welcome]({ASSETS_DIR}/{PurePosixPath(cfg.branding['welcome_image']).name})"]
    header += [
        "",
        "Open a notebook from the list below. Code cells are hidden; use the "
        "run buttons to execute them.",
    ]

    index = ["## Notebooks", ""]
    for nb_id, description, version in sorted(notebooks):
        summary = " ".join(description.split()) or "No description."
        index.append(f"- [{nb_id}]({NOTEBOOK_DIR}/{nb_id}) (v{version}): {summary}")

    config = "\n".join([
        "# Latest versions.yaml to compare against: a URL, a file path, or \"\" to skip.",
        f"MANIFEST_SOURCE = {_q(cfg.manifest_source)}",
        f"LOCAL_MANIFEST = {_q(VERSIONS_FILE)}",
    ])
    cells: list[Cell] = [
        markdown_cell("\n".join(header)),
        markdown_cell("\n".join(index)),
        markdown_cell("## Version check"),
        code_cell(config),
        code_cell(_CHECK_CODE.rstrip("\n")),
    ]
    nb = new_notebook(cells, metadata={
        "kernelspec": {"display_name": "Python 3", "language": "python", "name": "python3"},
        "language_info": {"name": "python"},
    })
    return inject_hide_tags(nb, cfg.hide_code_enabled)


# -- external code -----------------------------------------------------------

@dataclass(frozen=True)
class ExternalPackage:
    files: dict[str, bytes]
    modules: dict[str, str]  # module name -> install-relative file


def build_external_package_descriptor(
    project_name: str, external_files: Sequence[str], version: str = "0.0.0"
) -> ExternalPackage:
    """setup.py plus a module placement map for the helper modules."""
    if not external_files:
        raise ValueError("no external files; skip descriptor generation")
    modules: dict[str, str] = {}
    for path in external_files:
        p = PurePosixPath(str(path).replace("\\", "/"))
        if p.suffix != ".py" or not p.stem.isidentifier() or keyword.iskeyword(p.stem):
            raise InvalidModuleName(f"{p.name!r} is not an importable module file name")
        if p.stem in modules:
            raise InvalidModuleName(f"module {p.stem!r} given twice")
        modules[p.stem] = f"{EXTERNAL_DIR}/{p.name}"
    modules = dict(sorted(modules.items()))
    names = ", ".join(_q(m) for m in modules)
    setup_py = (
        "from setuptools import setup\n"
        "\n"
        "setup(\n"
        f"    name={_q(slugify(project_name) + '-external')},\n"
        f"    version={_q(version)},\n"
        f"    py_modules=[{names}],\n"
        ")\n"
    )
    return ExternalPackage({f"{EXTERNAL_DIR}/setup.py": setup_py.encode("utf-8")}, modules)


# -- installer plan ----------------------------------------------------------

@dataclass(frozen=True)
class InstallerTarget:
    platform: str
    installer_type: str
    output_name: str
    post_install: str


@dataclass(frozen=True)
class InstallerPlan:
    name: str
    version: str
    channels: tuple[str, ...]
    base_specs: tuple[str, ...]
    bundled_files: tuple[tuple[str, str], ...]
    targets: tuple[InstallerTarget, ...]

    @property
    def post_install_ref(self) -> dict[str, str]:
        return {"unix": POST_INSTALL_SH, "win": POST_INSTALL_BAT}

    def to_yaml(self) -> bytes:
        out = ["# Installer manifest. Targets:"]
        out += [f"#   {t.platform}: {t.output_name} (post-install {t.post_install})"
                for t in self.targets]
        out += [
            f"name: {_q(self.name)}",
            f"version: {_q(self.version)}",
            "channels:",
            *(f"  - {_q(c)}" for c in self.channels),
            "specs:",
            *(f"  - {_q(s)}" for s in self.base_specs),
            "extra_files:",
            *(f"  - {_q(src)}: {_q(dst)}" for src, dst in self.bundled_files),
            f"post_install: {_q(POST_INSTALL_SH)}  # [unix]",
            f"post_install: {_q(POST_INSTALL_BAT)}  # [win]",
            'installer_type: "sh"  # [linux]',
            'installer_type: "pkg"  # [osx]',
            'installer_type: "exe"  # [win]',
        ]
        return ("\n".join(out) + "\n").encode("utf-8")


def installer_targets(cfg: ProjectConfig) -> tuple[InstallerTarget, ...]:
    return tuple(
        InstallerTarget(plat, kind, f"{cfg.slug}-{cfg.app_version}-{plat}.{suffix}", script)
        for plat, kind, suffix, script in INSTALLER_TARGETS
    )


def build_installer_plan(
    cfg: ProjectConfig,
    merged: RequirementsSpec,
    notebooks: Sequence[str],
    externals: Sequence[str] = (),
    base_dir: str | Path = ".",
) -> InstallerPlan:
    """Assemble the installer manifest from files already laid out under ``base_dir``.

    ``notebooks`` and ``externals`` are paths relative to ``base_dir``; the
    generated artifacts (welcome notebook, versions.yaml, post-install
    scripts, menu entry, branding) must already be there too.
    """
    if not isinstance(merged, RequirementsSpec):
        raise InvalidMerged("merged requirements are not a RequirementsSpec")
    try:
        parse_python_version(merged.python_version)
    except Exception as exc:
        raise InvalidMerged(str(exc)) from None
    if not notebooks:
        raise NoNotebooks("no notebooks to package")
    base = Path(base_dir)

    bundled: list[tuple[str, str]] = []
    for nb in sorted(notebooks):
        bundled.append((nb, f"{NOTEBOOK_DIR}/{PurePosixPath(nb).name}"))
    bundled.append((WELCOME_NOTEBOOK, WELCOME_NOTEBOOK))
    bundled.append((VERSIONS_FILE, VERSIONS_FILE))
    bundled.append((menu_entry_path(cfg), menu_entry_path(cfg)))
    if externals:
        bundled.append((f"{EXTERNAL_DIR}/setup.py", f"{EXTERNAL_DIR}/setup.py"))
        for ext in sorted(externals):
            bundled.append((ext, f"{EXTERNAL_DIR}/{PurePosixPath(ext).name}"))
    bundled.append((POST_INSTALL_SH, POST_INSTALL_SH))
    bundled.append((POST_INSTALL_BAT, POST_INSTALL_BAT))
    for key in BRANDING_KEYS:
        if key in cfg.branding:
            src = cfg.branding[key]
            bundled.append((src, f"{ASSETS_DIR}/{PurePosixPath(src).name}"))

    missing = [src for src, _ in bundled if not (base / src).is_file()]
    if missing:
        raise MissingFile(f"files missing under {base}: {', '.join(missing)}")

    return InstallerPlan(
        name=cfg.project_name,
        version=cfg.app_version,
        channels=cfg.channels,
        base_specs=(f"python={merged.python_version}", "pip"),
        bundled_files=tuple(bundled),
        targets=installer_targets(cfg),
    )


# -- branding ----------------------------------------------------------------

_TEXT_SUFFIXES = {
    ".md", ".txt", ".rst", ".yaml", ".yml", ".json", ".ipynb", ".py", ".toml",
    ".cfg", ".ini", ".html", ".sh", ".bat", ".svg", ".css", "",
}


def _template_files(root: Path) -> Iterable[Path]:
    for path in sorted(root.rglob("*")):
        rel = path.relative_to(root)
        if any(part.startswith(".") for part in rel.parts):
            continue
        if path.is_file() and path.suffix.lower() in _TEXT_SUFFIXES:
            yield path


def branding_values(cfg: ProjectConfig) -> tuple[dict[str, str], dict[str, Path | None]]:
    """Token values plus the image files (``None`` = default) that back them."""
    values = {"PROJECT_NAME": cfg.project_name, "APP_VERSION": cfg.app_version}
    images: dict[str, Path | None] = {}
    for key in BRANDING_KEYS:
        token = key.upper()
        src = cfg.branding.get(key)
        if src:
            name = PurePosixPath(str(src).replace("\\", "/")).name
            images[f"{ASSETS_DIR}/{name}"] = Path(src)
            values[token] = f"{ASSETS_DIR}/{name}"
        elif cfg.allow_default_images:
            dest = f"{ASSETS_DIR}/default_{key}.png"
            images[dest] = None
            values[token] = dest
    return values, images


def apply_branding(
    cfg: ProjectConfig,
    template_root: str | Path,
    dry_run: bool = False,
    source_root: str | Path | None = None,
) -> list[str]:
    """Replace ``{{TOKEN}}`` placeholders under ``template_root``.

    Nothing is written unless every token in every file can be resolved.
    Returns the changed (or, with ``dry_run``, to-be-changed) paths relative
    to the template root.
    """
    root = Path(template_root)
    src_root = Path(source_root) if source_root is not None else root
    values, images = branding_values(cfg)

    rewrites: dict[str, bytes] = {}
    unresolved: dict[str, list[str]] = {}
    seen: set[str] = set()
    for path in _template_files(root):
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError:
            continue
        tokens = PLACEHOLDER_RE.findall(text)
        if not tokens:
            continue
        seen.update(tokens)
        bad = sorted({t for t in tokens if t not in values})
        rel = path.relative_to(root).as_posix()
        if bad:
            unresolved[rel] = bad
            continue
        rewrites[rel] = PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], text).encode("utf-8")
    if unresolved:
        first = next(iter(unresolved))
        tokens = sorted({t for ts in unresolved.values() for t in ts})
        raise UnresolvedPlaceholder(tokens, first if len(unresolved) == 1 else f"{len(unresolved)} files")

    used_defaults = {values[t] for t in seen if t.lower() in BRANDING_KEYS}
    assets: dict[str, bytes] = {}
    for dest, src in images.items():
        if src is None:
            # defaults are only materialised when a template refers to them
            if dest in used_defaults and not (root / dest).exists():
                assets[dest] = DEFAULT_IMAGE
            continue
        full = src if src.is_absolute() else src_root / src
        if not full.is_file():
            raise MissingFile(f"branding image not found: {src}")
        data = full.read_bytes()
        target = root / dest
        if not target.is_file() or target.read_bytes() != data:
            assets[dest] = data

    changed = sorted(set(rewrites) | set(assets))
    if not dry_run:
        for rel in changed:
            atomic_write(root / rel, rewrites.get(rel, assets.get(rel)))
    return changed

