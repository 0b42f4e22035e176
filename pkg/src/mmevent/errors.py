"""Exception hierarchy shared across the package.

ConfigError maps to CLI exit code 2, everything else to 1.
"""


class MmeventError(Exception):
    """Base class for package errors."""


class ConfigError(MmeventError):
    """Invalid or incomplete run configuration."""


class LoadError(MmeventError):
    """Dataset file violates the record schema."""


class OntologyError(MmeventError):
    """Record references types/roles not present in the ontology."""


class MappingError(MmeventError):
    """Activity verb not resolvable through the verb map in strict mode."""


class ContractError(MmeventError):
    """An operation precondition was violated by the caller."""


class GenerationError(MmeventError):
    """Image generation failed after retries."""


class CaptioningError(MmeventError):
    """Caption generation failed after retries."""


class AssemblyError(MmeventError):
    """Training batch assembly could not find required generated data."""


class DetectionError(MmeventError):
    """Object detector client failure."""


class EvaluationError(MmeventError):
    """Scoring or coreference merging failed."""
