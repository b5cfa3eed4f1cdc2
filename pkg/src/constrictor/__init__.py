"""Turn a collection of Jupyter notebooks into an installable desktop app.

Scans notebooks for their third-party imports, pins them against a working
environment, merges per-notebook requirements, validates the result in a
fresh environment and emits the inputs an installer builder needs.
"""

__version__ = "0.1.0"

from .depscan import scan_imports, scan_install_commands, scan_notebook
from .errors import ConstrictorError, PythonMismatch
from .merge import compare_versions, merge_requirements, parse_version
from .nbdoc import Cell, Notebook, parse_notebook, serialize_notebook
from .package import build_installer_plan, inject_hide_tags
from .reqspec import (
    PinnedDependency,
    RequirementsSpec,
    generate_requirements,
    serialize_requirements,
    validate_requirements,
)
from .validate import MockResolver, run_validation, stage_submission
from .versiontrack import build_version_manifest, check_updates, extract_version

__all__ = [
    "Cell",
    "ConstrictorError",
    "MockResolver",
    "Notebook",
    "PinnedDependency",
    "PythonMismatch",
    "RequirementsSpec",
    "build_installer_plan",
    "build_version_manifest",
    "check_updates",
    "compare_versions",
    "extract_version",
    "generate_requirements",
    "inject_hide_tags",
    "merge_requirements",
    "parse_notebook",
    "parse_version",
    "run_validation",
    "scan_imports",
    "scan_install_commands",
    "scan_notebook",
    "serialize_notebook",
    "serialize_requirements",
    "stage_submission",
    "validate_requirements",
]
