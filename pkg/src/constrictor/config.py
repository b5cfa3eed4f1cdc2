"""``constrictor.yaml``: project settings that drive every command.

Example::

    project_name: DemoApp
    app_version: "0.1.0"
    hide_code: true
    channels: [conda-forge]
    output_dir: dist
    manifest_source: ""
    branding:
      logo: branding/logo.png
    aliases: aliases.yaml
    snapshot: snapshot.yaml
    resolver:
      kind: command            # mock | command | none
      create_cmd: conda create -y -p ./env python={python} pip
      install_cmd: conda run -p ./env pip install -r {reqfile}
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .package import BRANDING_KEYS, DEFAULT_CHANNELS, ProjectConfig

CONFIG_NAME = "constrictor.yaml"
RESOLVER_KINDS = ("mock", "command", "none")
_KNOWN_KEYS = {
    "project_name", "app_version", "hide_code", "channels", "output_dir",
    "manifest_source", "branding", "allow_default_images", "aliases", "snapshot",
    "resolver",
}


@dataclass
class PipelineConfig:
    root: Path
    project: ProjectConfig
    alias_path: Path | None = None
    snapshot_path: Path | None = None
    resolver_kind: str = "mock"
    create_cmd: str = ""
    install_cmd: str = ""
    mock_script: list[tuple[int, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        def rel(p: Path | None) -> str | None:
            if p is None:
                return None
            try:
                return p.relative_to(self.root).as_posix()
            except ValueError:
                return str(p)

        out = {
            "project_name": self.project.project_name,
            "app_version": self.project.app_version,
            "hide_code": self.project.hide_code_enabled,
            "channels": list(self.project.channels),
            "output_dir": self.project.output_dir,
            "manifest_source": self.project.manifest_source,
            "allow_default_images": self.project.allow_default_images,
            "branding": dict(self.project.branding),
            "resolver": {"kind": self.resolver_kind},
        }
        if self.alias_path:
            out["aliases"] = rel(self.alias_path)
        if self.snapshot_path:
            out["snapshot"] = rel(self.snapshot_path)
        if self.create_cmd:
            out["resolver"]["create_cmd"] = self.create_cmd
        if self.install_cmd:
            out["resolver"]["install_cmd"] = self.install_cmd
        if self.mock_script:
            out["resolver"]["mock_script"] = [list(s) for s in self.mock_script]
        return out

    def dump(self) -> bytes:
        return yaml.safe_dump(self.to_dict(), sort_keys=False).encode("utf-8")


def parse_config(data: object, root: str | Path) -> PipelineConfig:
    root = Path(root)
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(data) - _KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("project_name", "app_version"):
        if not isinstance(data.get(key), str) or not data[key].strip():
            raise ConfigError(f"'{key}' is required and must be a string")
    branding = data.get("branding") or {}
    if not isinstance(branding, dict) or set(branding) - set(BRANDING_KEYS):
        raise ConfigError(f"'branding' may only contain {', '.join(BRANDING_KEYS)}")
    resolver = data.get("resolver") or {}
    if not isinstance(resolver, dict):
        raise ConfigError("'resolver' must be a mapping")
    kind = resolver.get("kind", "mock")
    if kind not in RESOLVER_KINDS:
        raise ConfigError(f"resolver.kind must be one of {', '.join(RESOLVER_KINDS)}")
    script = []
    for item in resolver.get("mock_script") or []:
        if not (isinstance(item, (list, tuple)) and len(item) == 2 and isinstance(item[0], int)):
            raise ConfigError("resolver.mock_script entries must be [exit_status, output]")
        script.append((int(item[0]), str(item[1])))
    try:
        project = ProjectConfig(
            project_name=data["project_name"],
            app_version=data["app_version"],
            branding={k: str(v) for k, v in branding.items() if v},
            hide_code_enabled=bool(data.get("hide_code", True)),
            channels=tuple(data.get("channels") or DEFAULT_CHANNELS),
            output_dir=str(data.get("output_dir", "dist")),
            manifest_source=str(data.get("manifest_source") or ""),
            allow_default_images=bool(data.get("allow_default_images", True)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    def path(key: str) -> Path | None:
        value = data.get(key)
        return root / value if value else None

    return PipelineConfig(
        root=root,
        project=project,
        alias_path=path("aliases"),
        snapshot_path=path("snapshot"),
        resolver_kind=kind,
        create_cmd=str(resolver.get("create_cmd") or ""),
        install_cmd=str(resolver.get("install_cmd") or ""),
        mock_script=script,
    )


def load_config(path: str | Path, root: str | Path | None = None) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(data, root if root is not None else path.parent)
