"""Command-line entry point.

Exit codes: 0 success, 1 validation/content failure, 2 input error,
3 incompatible Python versions across notebooks.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import CONFIG_NAME, load_config
from .depscan import load_alias_table
from .errors import (
    ConstrictorError,
    PythonMismatch,
    RequirementsError,
    RequirementsSyntaxError,
    UnresolvedPlaceholder,
)
from .fsutil import atomic_write
from .merge import merge_requirements
from .nbdoc import parse_notebook, serialize_notebook
from .package import apply_branding, inject_hide_tags
from .pipeline import make_resolver, release, submit
from .reqspec import (
    generate_requirements,
    load_snapshot,
    probe_current_environment,
    serialize_requirements,
    validate_requirements,
)
from .validate import CREATE_STEP, INSTALL_STEP
from .versiontrack import build_version_manifest, check_updates, extract_version, parse_manifest

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_PYTHON_MISMATCH = 3

log = logging.getLogger("constrictor")


class Output:
    """Collects a command's report and prints it as text or JSON."""

    def __init__(self, as_json: bool):
        self.as_json = as_json
        self.data: dict = {}
        self.color = (
            not as_json
            and sys.stdout.isatty()
            and "CONSTRICTOR_NO_COLOR" not in os.environ
            and "NO_COLOR" not in os.environ
        )

    def line(self, text: str = "") -> None:
        if not self.as_json:
            print(text)

    def status(self, ok: bool, text: str) -> None:
        label = "ok" if ok else "FAIL"
        if self.color:
            label = f"\033[{32 if ok else 31}m{label}\033[0m"
        self.line(f"[{label}] {text}")

    def warn(self, text: str) -> None:
        self.data.setdefault("warnings", []).append(text)
        if not self.as_json:
            print(f"warning: {text}", file=sys.stderr)

    def finish(self, code: int) -> int:
        if self.as_json:
            self.data["exit_code"] = code
            print(json.dumps(self.data, indent=2, sort_keys=True, default=str))
        return code


def _root(args) -> Path:
    return Path(args.root).resolve()


def _config(args):
    path = Path(args.config) if args.config else _root(args) / CONFIG_NAME
    if not path.is_absolute():
        path = _root(args) / path
    return load_config(path, _root(args))


def _path(args, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else _root(args) / p


# -- commands ----------------------------------------------------------------

def cmd_init(args, out: Output) -> int:
    cfg = _config(args)
    try:
        changed = apply_branding(cfg.project, cfg.root, dry_run=args.dry_run)
    except UnresolvedPlaceholder as exc:
        out.data["error"] = str(exc)
        out.line(f"error: {exc}")
        return EXIT_INPUT
    out.data["changed"] = changed
    out.data["dry_run"] = args.dry_run
    for rel in changed:
        out.line(rel)
    return EXIT_OK


def cmd_gen_reqs(args, out: Output) -> int:
    nb_path = _path(args, args.notebook)
    nb = parse_notebook(nb_path.read_bytes())
    cfg = None
    if args.config or (_root(args) / CONFIG_NAME).exists():
        cfg = _config(args)
    if args.probe:
        snapshot = probe_current_environment()
    else:
        snap = args.snapshot or (cfg.snapshot_path if cfg else None)
        if not snap:
            raise ConstrictorError("no environment snapshot: pass --snapshot or --probe")
        snap_path = _path(args, str(snap))
        snapshot = load_snapshot(snap_path.read_bytes(), str(snap_path))
    alias_file = args.aliases or (cfg.alias_path if cfg else None)
    aliases = load_alias_table(_path(args, str(alias_file)) if alias_file else None)
    externals = [(e, _path(args, e).read_text(encoding="utf-8")) for e in args.external]
    description = args.description if args.description is not None else nb_path.stem

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = generate_requirements(nb, externals, snapshot, description, aliases, name=nb_path.name)
    for note in result.warnings:
        out.warn(note)
    for item in result.unresolved:
        out.warn(f"unresolved: {item.name} ({item.origin}, {item.location}) not in the environment")
    out.data["unresolved"] = [u.name for u in result.unresolved]
    out.data["dependencies"] = [str(d) for d in result.spec.dependencies]
    if args.strict and result.unresolved:
        out.line(f"{len(result.unresolved)} unresolved dependencies (--strict)")
        return EXIT_FAILED
    target = _path(args, args.output) if args.output else _root(args) / "requirements" / f"{nb_path.stem}.yaml"
    out.data["output"] = str(target)
    if not args.dry_run:
        atomic_write(target, serialize_requirements(result.spec))
    out.line(f"wrote {target}" if not args.dry_run else f"would write {target}")
    return EXIT_OK


def cmd_validate_reqs(args, out: Output) -> int:
    code = EXIT_OK
    results = {}
    for name in args.files:
        try:
            spec = validate_requirements(_path(args, name).read_bytes())
        except (OSError, RequirementsSyntaxError) as exc:
            results[name] = f"error: {exc}"
            out.status(False, f"{name}: {exc}")
            code = max(code, EXIT_INPUT)
        except RequirementsError as exc:
            results[name] = f"invalid: {exc}"
            out.status(False, f"{name}: {type(exc).__name__}: {exc}")
            code = max(code, EXIT_FAILED)
        else:
            results[name] = "valid"
            out.status(True, f"{name}: python {spec.python_version}, {len(spec.dependencies)} dependencies")
    out.data["files"] = results
    return code


def cmd_merge(args, out: Output) -> int:
    specs = [validate_requirements(_path(args, f).read_bytes()) for f in args.files]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = merge_requirements(specs, args.files)
    for note in result.warnings:
        out.warn(note)
    out.data["conflicts"] = [str(c) for c in result.conflicts]
    out.data["python"] = result.spec.python_version
    data = serialize_requirements(result.spec)
    if args.output:
        if not args.dry_run:
            atomic_write(_path(args, args.output), data)
        for conflict in result.conflicts:
            out.line(str(conflict))
        out.line(f"merged {len(specs)} files -> {args.output}")
    elif not out.as_json:
        for conflict in result.conflicts:
            print(conflict, file=sys.stderr)
        sys.stdout.write(data.decode("utf-8"))
    else:
        out.data["merged"] = data.decode("utf-8")
    return EXIT_OK


def cmd_tag(args, out: Output) -> int:
    changed = []
    for name in args.notebooks:
        path = _path(args, name)
        raw = path.read_bytes()
        tagged = serialize_notebook(inject_hide_tags(parse_notebook(raw), not args.disable))
        if tagged != raw:
            changed.append(name)
            if not args.dry_run:
                atomic_write(path, tagged)
    out.data["changed"] = changed
    for name in changed:
        out.line(name)
    return EXIT_OK


def cmd_version(args, out: Output) -> int:
    if args.version_cmd == "extract":
        found = {}
        for name in args.notebooks:
            found[Path(name).name] = extract_version(parse_notebook(_path(args, name).read_bytes()))
            out.line(f"{Path(name).name}: {found[Path(name).name]}")
        out.data["versions"] = found
        return EXIT_OK
    if args.version_cmd == "manifest":
        pairs = [
            (Path(n).name, extract_version(parse_notebook(_path(args, n).read_bytes())))
            for n in args.notebooks
        ]
        data = build_version_manifest(pairs, args.app_version)
        if args.output and not args.dry_run:
            atomic_write(_path(args, args.output), data)
        if args.output:
            out.line(f"wrote {args.output}")
        elif out.as_json:
            out.data["manifest"] = data.decode("utf-8")
        else:
            sys.stdout.write(data.decode("utf-8"))
        return EXIT_OK
    return cmd_check_updates(args, out)


def cmd_check_updates(args, out: Output) -> int:
    local = parse_manifest(_path(args, args.local).read_bytes())
    remote = parse_manifest(_path(args, args.remote).read_bytes())
    notices = check_updates(local, remote)
    out.data["notices"] = [
        {"notebook": n.notebook_id, "local": n.local_version, "latest": n.latest_version,
         "update_available": n.update_available, "status": n.status}
        for n in notices
    ]
    if not any(n.update_available for n in notices):
        out.line("up to date")
        return EXIT_OK
    width = max(len(n.notebook_id) for n in notices)
    out.line(f"{'notebook'.ljust(width)}  {'local':<10}  {'latest':<10}  status")
    for n in notices:
        out.line(f"{n.notebook_id.ljust(width)}  {n.local_version or '-':<10}  "
                 f"{n.latest_version or '-':<10}  {n.status}")
    return EXIT_OK


def cmd_submit(args, out: Output) -> int:
    cfg = _config(args)
    resolver = make_resolver(cfg, args.resolver, args.mock_fail)
    paths = [_path(args, p) for p in args.paths]
    log_dir = _path(args, args.log_dir) if args.log_dir else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = submit(cfg, paths, resolver, date=args.date, log_dir=log_dir, dry_run=args.dry_run)
    for note in result.notes:
        out.warn(note)
    for conflict in result.conflicts:
        out.line(f"conflict {conflict}")
    out.data.update({
        "applied": result.applied,
        "files": result.staged_files,
        "conflicts": [str(c) for c in result.conflicts],
        "validation": result.report.to_dict() if result.report else None,
    })
    report = result.report
    if report is not None and report.status != "passed":
        out.status(False, f"validation {report.status}: {report.reason}; submission reverted")
        if report.troubleshoot_path:
            out.line(f"troubleshoot log: {report.troubleshoot_path}")
        return EXIT_FAILED
    verb = "applied" if result.applied else "validated (dry run, nothing applied)"
    out.status(True, f"{verb}: {len(result.staged_files)} files")
    for rel in result.staged_files:
        out.line(f"  {rel}")
    return EXIT_OK


def cmd_release(args, out: Output) -> int:
    cfg = _config(args)
    output = _path(args, args.output) if args.output else None
    result = release(cfg, output, dry_run=args.dry_run)
    out.data["output_dir"] = str(result.output_dir)
    out.data["files"] = result.written
    for rel in result.written:
        out.line(str(result.output_dir / rel))
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _add_globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--root", default=default if suppress else ".", help="project root")
    parser.add_argument("--config", default=default, help=f"config file (default: <root>/{CONFIG_NAME})")
    parser.add_argument("--json", action="store_true", default=default if suppress else False,
                        help="machine-readable output")
    parser.add_argument("--dry-run", action="store_true", default=default if suppress else False,
                        help="report what would change without writing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="constrictor", description="Package Jupyter notebooks as an installable desktop app.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        _add_globals(p, suppress=True)
        p.set_defaults(func=func)
        return p

    command("init", cmd_init, "fill template placeholders from the config")

    p = command("gen-reqs", cmd_gen_reqs, "generate requirements for a notebook")
    p.add_argument("notebook")
    p.add_argument("--snapshot", help="environment snapshot YAML")
    p.add_argument("--probe", action="store_true", help="snapshot the running interpreter instead")
    p.add_argument("--external", action="append", default=[], metavar="FILE",
                   help="helper .py file to scan (repeatable)")
    p.add_argument("--aliases", help="YAML module -> distribution overrides")
    p.add_argument("--description")
    p.add_argument("-o", "--output")
    p.add_argument("--strict", action="store_true", help="fail on unresolved dependencies")

    p = command("validate-reqs", cmd_validate_reqs, "check requirements files")
    p.add_argument("files", nargs="+")

    p = command("merge", cmd_merge, "merge requirements files")
    p.add_argument("files", nargs="+")
    p.add_argument("-o", "--output")

    p = command("tag", cmd_tag, "add code-hiding tags to notebooks in place")
    p.add_argument("notebooks", nargs="+")
    p.add_argument("--disable", action="store_true", help="leave notebooks untagged")

    p = command("version", cmd_version, "notebook version markers")
    vsub = p.add_subparsers(dest="version_cmd", required=True)
    v = vsub.add_parser("extract")
    v.add_argument("notebooks", nargs="+")
    v = vsub.add_parser("manifest")
    v.add_argument("notebooks", nargs="+")
    v.add_argument("--app-version", required=True)
    v.add_argument("-o", "--output")
    v = vsub.add_parser("check")
    v.add_argument("local")
    v.add_argument("remote")

    p = command("submit", cmd_submit, "version, tag, merge and validate notebooks")
    p.add_argument("paths", nargs="+", help="notebooks and their requirements files")
    p.add_argument("--resolver", choices=("mock", "command", "none"))
    p.add_argument("--mock-fail", choices=(CREATE_STEP, INSTALL_STEP),
                   help="make the mock resolver fail at this step")
    p.add_argument("--date", help="changelog date (default: today)")
    p.add_argument("--log-dir", help="where to write troubleshooting logs")

    p = command("release", cmd_release, "generate installer, launcher and welcome artifacts")
    p.add_argument("--output", help="output directory (default: config output_dir)")

    p = command("check-updates", cmd_check_updates, "compare two versions.yaml files")
    p.add_argument("local")
    p.add_argument("remote")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    out = Output(args.json)
    try:
        code = args.func(args, out)
    except PythonMismatch as exc:
        out.data["error"] = str(exc)
        out.line(f"error: {exc}")
        code = EXIT_PYTHON_MISMATCH
    except (ConstrictorError, OSError, ValueError) as exc:
        out.data["error"] = str(exc)
        if not out.as_json:
            print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    return out.finish(code)


if __name__ == "__main__":
    sys.exit(main())
