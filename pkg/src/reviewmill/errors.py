"""Exception hierarchy shared by the pipeline stages and the CLI.

Every error that should terminate a CLI run maps to a stable exit code so
that wrapper scripts can branch on failures without scraping stderr text.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_STAGE_ORDER = 3
EXIT_DATA = 4
EXIT_ENDPOINT = 5


class PipelineError(Exception):
    """Base class for all toolchain errors."""

    exit_code = EXIT_ERROR


class ConfigError(PipelineError):
    """Bad or missing configuration (unknown keys, absent paths, bad types)."""

    exit_code = EXIT_CONFIG


class StageOrderError(PipelineError):
    """A stage was invoked before the stage that produces its input."""

    exit_code = EXIT_STAGE_ORDER


class DataValidationError(PipelineError):
    """An input or output file violates its documented contract."""

    exit_code = EXIT_DATA

    def __init__(self, message: str, line_numbers: list[int] | None = None):
        super().__init__(message)
        self.line_numbers = line_numbers or []


class EndpointError(PipelineError):
    """A completion endpoint failed (transport error, cassette miss, ...)."""

    exit_code = EXIT_ENDPOINT

    def __init__(self, message: str, transient: bool = False):
        super().__init__(message)
        self.transient = transient


class DiffParseError(DataValidationError):
    """A unified diff could not be parsed under the strict grammar."""

    def __init__(self, message: str, byte_offset: int = -1):
        super().__init__(message)
        self.byte_offset = byte_offset


class CommitNotFound(DataValidationError):
    """The referenced commit does not exist in the local clone."""


class FileNotFoundAtCommit(DataValidationError):
    """The commented file does not exist in the pre-change tree."""


class StateMismatch(DataValidationError):
    """The diff's old-side lines cannot be anchored in the recovered file."""


class ParseFailed(DataValidationError):
    """Structured text (source file or model output) failed to parse."""


class SpanOutOfRange(DataValidationError):
    """A requested line span lies outside the file it refers to."""


class UnsupportedLanguage(DataValidationError):
    """The commented file's language has no syntactic-unit scanner."""


class DocumentationFile(DataValidationError):
    """The commented file is documentation, not source code."""


class TemplateError(ConfigError):
    """A prompt template is malformed or was rendered with bad variables."""


class BudgetTooSmall(DataValidationError):
    """The token budget cannot fit even the mandatory diff window."""


class AnnotationImportError(DataValidationError):
    """A human-annotation file is malformed or self-contradictory."""


class EmptyLabel(DataValidationError):
    """A ground-truth line set is empty where a non-empty one is required."""


class IncompleteGroup(PipelineError):
    """A query could not collect its full complement of answer variants."""


class GenerationFailed(EndpointError):
    """A completion could not be obtained for one sample after retries."""

