"""Exception hierarchy shared across the pipeline."""


class ConstrictorError(Exception):
    """Base class for every error raised by this package."""


# notebooks
class MalformedDocument(ConstrictorError):
    pass


class UnsupportedFormat(ConstrictorError):
    pass


# requirements files
class RequirementsError(ConstrictorError):
    pass


class RequirementsSyntaxError(RequirementsError):
    """The file is empty or not a YAML document at all."""


class SchemaError(RequirementsError):
    pass


class VersionFormatError(RequirementsError):
    pass


class DuplicateDependency(RequirementsError):
    def __init__(self, name: str):
        super().__init__(f"duplicate dependency: {name}")
        self.name = name


class EntryFormatError(RequirementsError):
    pass


class PythonMismatch(ConstrictorError):
    def __init__(self, versions: list[tuple[str, str]]):
        listing = ", ".join(f"{label}={version}" for label, version in versions)
        super().__init__(f"incompatible Python versions: {listing}")
        self.versions = versions


# version tracking
class VersionNotFound(ConstrictorError):
    pass


class AmbiguousVersion(ConstrictorError):
    pass


class DuplicateNotebookId(ConstrictorError):
    pass


class DuplicateVersionEntry(ConstrictorError):
    pass


class ManifestError(ConstrictorError):
    pass


# packaging
class MissingFile(ConstrictorError):
    pass


class NoNotebooks(MissingFile):
    pass


class InvalidMerged(ConstrictorError):
    pass


class InconsistentInputs(ConstrictorError):
    pass


class InvalidModuleName(ConstrictorError):
    pass


class UnresolvedPlaceholder(ConstrictorError):
    def __init__(self, tokens: list[str], where: str = ""):
        detail = f" in {where}" if where else ""
        super().__init__(f"unresolved placeholder(s){detail}: {', '.join(tokens)}")
        self.tokens = tokens


# validation
class ResolverUnavailable(ConstrictorError):
    pass


class DestinationEscape(ConstrictorError):
    pass


class AlreadyFinalized(ConstrictorError):
    pass


class NotAFailure(ConstrictorError):
    pass


class LockHeld(ConstrictorError):
    pass


class ConfigError(ConstrictorError):
    pass
