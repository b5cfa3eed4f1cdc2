"""Static dependency discovery for notebook cells and helper modules.

Scanning is line oriented: a small state machine masks string literals and
comments so that only real statements are matched.  Nothing here ever
raises on odd input; text that cannot be understood is skipped, and
install-command oddities are reported as warnings on the result.
"""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import yaml

from ._stdlib import STDLIB_MODULES
from .nbdoc import Notebook, code_cells

IMPORT_STATEMENT = "import_statement"
INSTALL_COMMAND = "install_command"
EXTERNAL_FILE = "external_file"

# Import name -> install name for packages where the two differ.  Every
# entry was checked against the RECORD of the published distribution.
BUILTIN_ALIASES: dict[str, str] = {
    "Bio": "biopython",
    "Crypto": "pycryptodome",
    "OpenSSL": "pyopenssl",
    "PIL": "pillow",
    "attr": "attrs",
    "bs4": "beautifulsoup4",
    "cv2": "opencv-python",
    "dateutil": "python-dateutil",
    "docx": "python-docx",
    "dotenv": "python-dotenv",
    "fitz": "pymupdf",
    "git": "gitpython",
    "jwt": "pyjwt",
    "magic": "python-magic",
    "mpl_toolkits": "matplotlib",
    "pkg_resources": "setuptools",
    "serial": "pyserial",
    "skimage": "scikit-image",
    "sklearn": "scikit-learn",
    "usb": "pyusb",
    "wx": "wxpython",
    "yaml": "pyyaml",
    "zmq": "pyzmq",
}

_NORMALIZE_RE = re.compile(r"[-_.]+")


def normalize_name(name: str) -> str:
    """Canonical distribution name: lowercase, separator runs collapsed to ``-``."""
    return _NORMALIZE_RE.sub("-", name).lower().strip("-")


@dataclass(frozen=True)
class SourceLocation:
    path: str
    cell: int | None
    line: int

    def __str__(self) -> str:
        if self.cell is None:
            return f"{self.path}:{self.line}"
        return f"{self.path}[cell {self.cell}]:{self.line}"


@dataclass(frozen=True)
class DependencyCandidate:
    module_name: str
    distribution_name: str
    origin: str
    version_hint: str | None = None
    location: SourceLocation | None = None
    reference: str | None = None


@dataclass(frozen=True)
class InstallRequirement:
    name: str
    version: str | None
    kind: str  # exact | range | bare | direct
    reference: str | None = None
    line: int = 0


class ScanResult(list):
    """A list of findings that also carries non-fatal warnings."""

    def __init__(self, items: Iterable = (), warnings: Iterable[str] = ()):
        super().__init__(items)
        self.warnings: list[str] = list(warnings)


# -- line scanning -----------------------------------------------------------

def _mask_line(line: str, in_triple: str | None) -> tuple[str, str | None]:
    """Return the code part of ``line`` with strings blanked and comments cut.

    ``in_triple`` is the open triple-quote delimiter carried from the
    previous line, if any.  String bodies become ``_`` so that statement
    separators and keywords inside them are never seen.
    """
    out: list[str] = []
    i = 0
    n = len(line)
    if in_triple:
        end = line.find(in_triple)
        while end != -1 and _escaped(line, end):
            end = line.find(in_triple, end + 1)
        if end == -1:
            return "", in_triple
        out.append("_")
        i = end + 3
        in_triple = None
    while i < n:
        ch = line[i]
        if ch == "#":
            break
        if ch in "'\"":
            if line.startswith(ch * 3, i):
                delim = ch * 3
                end = line.find(delim, i + 3)
                while end != -1 and _escaped(line, end):
                    end = line.find(delim, end + 1)
                if end == -1:
                    out.append("_")
                    return "".join(out), delim
                out.append("_")
                i = end + 3
                continue
            j = i + 1
            while j < n and line[j] != ch:
                j += 2 if line[j] == "\\" else 1
            out.append("_")
            i = j + 1
            continue
        out.append(ch)
        i += 1
    return "".join(out), in_triple


def _escaped(text: str, pos: int) -> bool:
    backslashes = 0
    pos -= 1
    while pos >= 0 and text[pos] == "\\":
        backslashes += 1
        pos -= 1
    return backslashes % 2 == 1


def logical_lines(source: str) -> Iterator[tuple[int, str, bool]]:
    """Yield ``(line_number, masked_code, starts_in_string)`` per logical line.

    Backslash continuations are joined; line numbers are 1-based and refer to
    the first physical line.
    """
    in_triple: str | None = None
    pending: list[str] = []
    pending_start = 0
    pending_in_string = False
    for number, line in enumerate(source.splitlines(), start=1):
        starts_in_string = in_triple is not None
        code, in_triple = _mask_line(line, in_triple)
        if not pending:
            pending_start = number
            pending_in_string = starts_in_string
        stripped = code.rstrip()
        if stripped.endswith("\\") and in_triple is None:
            pending.append(stripped[:-1])
            continue
        pending.append(code)
        yield pending_start, " ".join(pending), pending_in_string
        pending = []
    if pending:
        yield pending_start, " ".join(pending), pending_in_string


_IMPORT_RE = re.compile(r"^import\s+(.+)$")
_FROM_RE = re.compile(r"^from(?:\s+|(?=\.))(\.*)\s*(?:([A-Za-z_][\w.]*)\s+)?import\b")
_BLOCK_PREFIX_RE = re.compile(
    r"^(?:try|else|finally|except.*|(?:if|elif|with|while|for|def|class|async)\s.*)\s*:\s*(.*)$"
)
_IDENT_RE = re.compile(r"^[A-Za-z_]\w*(?:\s*\.\s*[A-Za-z_]\w*)*")


def _statements(code: str) -> Iterator[str]:
    for part in code.split(";"):
        stmt = part.strip()
        if not stmt:
            continue
        # one-line compound statements: ``try: import x``
        match = _BLOCK_PREFIX_RE.match(stmt)
        if match and match.group(1):
            stmt = match.group(1).strip()
        yield stmt


def _imports_in_statement(stmt: str) -> list[str]:
    match = _FROM_RE.match(stmt)
    if match:
        dots, module = match.groups()
        if dots or not module:
            return []
        return [module.split(".")[0]]
    match = _IMPORT_RE.match(stmt)
    if not match:
        return []
    names = []
    for item in match.group(1).split(","):
        ident = _IDENT_RE.match(item.strip())
        if ident:
            names.append(ident.group(0).split(".")[0].strip())
    return names


def _scan_import_lines(source: str) -> Iterator[tuple[int, str]]:
    for number, code, _ in logical_lines(source):
        stripped = code.lstrip()
        if stripped[:1] in ("!", "%"):
            continue
        for stmt in _statements(stripped):
            for name in _imports_in_statement(stmt):
                yield number, name


def scan_imports(source: str) -> list[str]:
    """Top-level modules imported by ``source``, first occurrence order."""
    seen: dict[str, None] = {}
    for _, name in _scan_import_lines(source):
        seen.setdefault(name, None)
    return list(seen)


# -- install commands --------------------------------------------------------

_PIP_RE = re.compile(
    r"^\s*(?:[!%]\s*)?(?:python3?\s+-m\s+)?pip3?\s+install\b(?P<args>.*)$"
)
_CONDA_RE = re.compile(r"^\s*(?:[!%]\s*)?(?:conda|mamba|micromamba)\s+install\b")
_VALUE_FLAGS = {
    "-i", "--index-url", "--extra-index-url", "-f", "--find-links",
    "--trusted-host", "-t", "--target", "--prefix", "--root", "--platform",
    "--python-version", "--implementation", "--abi", "--src", "--upgrade-strategy",
    "--progress-bar", "--cache-dir", "--log", "--proxy", "--timeout", "--retries",
    "--global-option", "--config-settings", "-C",
}
_FILE_FLAGS = {"-r", "--requirement", "-c", "--constraint"}
_SHELL_STOP = {"&&", "||", ";", "|", ">", ">>", "2>&1", "&"}
_REQ_RE = re.compile(
    r"^(?P<name>[A-Za-z0-9](?:[A-Za-z0-9._-]*[A-Za-z0-9])?)"
    r"(?:\[[A-Za-z0-9._,\s-]*\])?\s*(?P<spec>.*)$"
)
_EXACT_RE = re.compile(r"^==\s*(?P<version>[A-Za-z0-9.!+_-]+)$")
_RANGE_RE = re.compile(r"^(?:(?:===|==|!=|~=|>=|<=|>|<)\s*[A-Za-z0-9.!+*_-]+\s*,?\s*)+$")
_DIRECT_AT_RE = re.compile(r"^(?P<name>[A-Za-z0-9][A-Za-z0-9._-]*)\s*@\s*(?P<ref>\S+)$")
_WHEEL_RE = re.compile(r"^(?P<name>[A-Za-z0-9][A-Za-z0-9._]*?)-\d")


def _name_from_reference(ref: str) -> str | None:
    egg = re.search(r"#egg=([A-Za-z0-9._-]+)", ref)
    if egg:
        return egg.group(1)
    path = ref.split("#", 1)[0].split("?", 1)[0].rstrip("/")
    last = path.rsplit("/", 1)[-1]
    if "@" in last:
        last = last.split("@", 1)[0]
    if last.endswith(".git"):
        last = last[:-4]
    for suffix in (".whl", ".tar.gz", ".zip", ".tar.bz2"):
        if last.endswith(suffix):
            wheel = _WHEEL_RE.match(last)
            return wheel.group("name") if wheel else None
    if re.fullmatch(r"[A-Za-z0-9][A-Za-z0-9._-]*", last):
        return last
    return None


def _is_reference(token: str) -> bool:
    return (
        "://" in token
        or token.startswith(("git+", "hg+", "svn+", "bzr+", "./", "../", "/", "file:"))
        or token.endswith((".whl", ".tar.gz", ".zip"))
    )


def _classify_token(token: str, line: int, warnings: list[str]) -> InstallRequirement | None:
    direct = _DIRECT_AT_RE.match(token)
    if direct:
        return InstallRequirement(
            normalize_name(direct.group("name")), None, "direct", direct.group("ref"), line
        )
    if _is_reference(token):
        name = _name_from_reference(token)
        if name is None:
            warnings.append(f"line {line}: cannot infer a package name from {token!r}")
            return None
        return InstallRequirement(normalize_name(name), None, "direct", token, line)
    match = _REQ_RE.match(token)
    if not match:
        warnings.append(f"line {line}: unrecognised install token {token!r}")
        return None
    name = normalize_name(match.group("name"))
    spec = match.group("spec").split(";", 1)[0].strip()
    if not spec:
        return InstallRequirement(name, None, "bare", None, line)
    exact = _EXACT_RE.match(spec)
    if exact and "*" not in spec:
        return InstallRequirement(name, exact.group("version"), "exact", None, line)
    if _RANGE_RE.match(spec):
        return InstallRequirement(name, None, "range", None, line)
    warnings.append(f"line {line}: unrecognised version specifier in {token!r}")
    return None


def _split_args(args: str, line: int, warnings: list[str]) -> list[str]:
    try:
        return shlex.split(args, comments=True)
    except ValueError:
        warnings.append(f"line {line}: unbalanced quoting in install command")
        return args.split("#", 1)[0].split()


def scan_install_commands(source: str) -> ScanResult:
    """Packages named on ``pip install`` lines (``!pip``, ``%pip`` or bare)."""
    found: list[InstallRequirement] = []
    warnings: list[str] = []
    for number, line in enumerate(source.splitlines(), start=1):
        if _CONDA_RE.match(line):
            warnings.append(f"line {number}: conda install is not pinned, ignored: {line.strip()}")
            continue
        match = _PIP_RE.match(line)
        if not match:
            continue
        tokens = _split_args(match.group("args"), number, warnings)
        i = 0
        while i < len(tokens):
            token = tokens[i]
            i += 1
            if token in _SHELL_STOP:
                break
            if token in _FILE_FLAGS:
                if i < len(tokens):
                    warnings.append(f"line {number}: requirements file {tokens[i]!r} not followed")
                i += 1
                continue
            if token in ("-e", "--editable"):
                if i < len(tokens):
                    req = _classify_token(tokens[i], number, warnings)
                    if req is not None:
                        found.append(req)
                i += 1
                continue
            if token in _VALUE_FLAGS:
                i += 1
                continue
            if token.startswith("-"):
                continue
            if token.startswith(("$", "{")):
                warnings.append(f"line {number}: variable expansion {token!r} skipped")
                continue
            req = _classify_token(token, number, warnings)
            if req is not None:
                found.append(req)
    return ScanResult(found, warnings)


# -- name mapping ------------------------------------------------------------

def load_alias_table(path: str | Path | None = None) -> dict[str, str]:
    """Built-in aliases overlaid with an optional YAML ``module: distribution`` file."""
    table = dict(BUILTIN_ALIASES)
    if path is None:
        return table
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in data.items()
    ):
        raise ValueError(f"{path}: alias file must map module names to distribution names")
    table.update(data)
    return table


def map_module_to_distribution(module: str, alias_table: Mapping[str, str] | None = None) -> str:
    table = BUILTIN_ALIASES if alias_table is None else alias_table
    if module in table:
        return normalize_name(table[module])
    return normalize_name(module)


def filter_stdlib(modules: Iterable[str], stdlib_set: frozenset[str] | set[str] = STDLIB_MODULES) -> list[str]:
    return [m for m in modules if m not in stdlib_set]


# -- composite scans ---------------------------------------------------------

def _import_candidates(
    source: str,
    path: str,
    cell: int | None,
    origin: str,
    alias_table: Mapping[str, str] | None,
    stdlib_set,
) -> list[DependencyCandidate]:
    out = []
    seen = set()
    for number, module in _scan_import_lines(source):
        if module in seen or module in stdlib_set:
            continue
        seen.add(module)
        out.append(DependencyCandidate(
            module_name=module,
            distribution_name=map_module_to_distribution(module, alias_table),
            origin=origin,
            location=SourceLocation(path, cell, number),
        ))
    return out


def scan_external_file(
    path: str | Path,
    content: str,
    alias_table: Mapping[str, str] | None = None,
    stdlib_set=frozenset(),
) -> list[DependencyCandidate]:
    """Import candidates from a helper module shipped next to the notebooks.

    No stdlib filtering by default; pass ``stdlib_set`` or run
    :func:`filter_stdlib` on the module names afterwards.
    """
    return _import_candidates(content, str(path), None, EXTERNAL_FILE, alias_table, stdlib_set)


def _rank(candidate: DependencyCandidate) -> int:
    if candidate.origin == INSTALL_COMMAND:
        return 2 if candidate.version_hint else 1
    return 0


def dedup_candidates(candidates: Iterable[DependencyCandidate]) -> list[DependencyCandidate]:
    """One candidate per distribution, first-seen order, install hints winning."""
    best: dict[str, DependencyCandidate] = {}
    for cand in candidates:
        current = best.get(cand.distribution_name)
        if current is None or _rank(cand) > _rank(current):
            best[cand.distribution_name] = cand
    return list(best.values())


def scan_notebook(
    nb: Notebook,
    alias_table: Mapping[str, str] | None = None,
    stdlib_set=STDLIB_MODULES,
    name: str = "<notebook>",
) -> ScanResult:
    candidates: list[DependencyCandidate] = []
    warnings: list[str] = []
    for index, cell in enumerate(nb.cells):
        if cell.kind != "code":
            continue
        text = cell.text
        candidates.extend(
            _import_candidates(text, name, index, IMPORT_STATEMENT, alias_table, stdlib_set)
        )
        installs = scan_install_commands(text)
        warnings.extend(f"{name}[cell {index}] {w}" for w in installs.warnings)
        for req in installs:
            candidates.append(DependencyCandidate(
                module_name=req.name,
                distribution_name=req.name,
                origin=INSTALL_COMMAND,
                version_hint=req.version if req.kind == "exact" else None,
                location=SourceLocation(name, index, req.line),
                reference=req.reference,
            ))
    return ScanResult(dedup_candidates(candidates), warnings)


def notebook_imports(nb: Notebook) -> list[str]:
    """Raw top-level imports across all code cells (no mapping or filtering)."""
    seen: dict[str, None] = {}
    for cell in code_cells(nb):
        for module in scan_imports(cell.text):
            seen.setdefault(module, None)
    return list(seen)
