"""Filesystem helpers: atomic writes, the project lock and tree fingerprints."""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

from .errors import LockHeld

LOCK_NAME = ".constrictor.lock"


def atomic_write(path: str | Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def tree_fingerprint(root: str | Path, exclude: tuple[str, ...] = ()) -> dict[str, str]:
    """Map of relative POSIX path -> sha256 for every file (and empty dir) under ``root``."""
    root = Path(root)
    out: dict[str, str] = {}
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        rel_dir = Path(dirpath).relative_to(root)
        if any(part in exclude for part in rel_dir.parts):
            continue
        if not dirnames and not filenames and rel_dir.parts:
            out[rel_dir.as_posix() + "/"] = ""
        for name in sorted(filenames):
            if name in exclude:
                continue
            full = Path(dirpath) / name
            out[(rel_dir / name).as_posix()] = hashlib.sha256(full.read_bytes()).hexdigest()
    return out


class ProjectLock:
    """Exclusive per-project lock backed by an ``O_EXCL`` lock file."""

    def __init__(self, root: str | Path):
        self.path = Path(root) / LOCK_NAME
        self._held = False

    def acquire(self) -> None:
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except FileExistsError:
            raise LockHeld(f"{self.path} exists; another run owns this project") from None
        with os.fdopen(fd, "w") as fh:
            fh.write(str(os.getpid()))
        self._held = True

    def release(self) -> None:
        if self._held:
            try:
                self.path.unlink()
            except FileNotFoundError:
                pass
            self._held = False

    def __enter__(self) -> "ProjectLock":
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()
