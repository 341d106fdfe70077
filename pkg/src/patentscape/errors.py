"""Exception types shared across the package."""


class PatentscapeError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(PatentscapeError):
    """Malformed input file (bad JSON line, missing TSV header, ragged row)."""


class RecordValidationError(PatentscapeError):
    """A record violates the schema in a way ingestion cannot represent."""


class UnknownIdError(PatentscapeError):
    """An operation referenced a patent id that does not resolve."""

    def __init__(self, patent_id: str, message: str | None = None):
        self.patent_id = patent_id
        super().__init__(message or f"unknown patent id: {patent_id!r}")


class LabelConflictError(PatentscapeError):
    """A label submission clashed with an existing label for the same patent.

    Carries the existing label so callers (and annotators) can see what they
    disagreed with.
    """

    def __init__(self, patent_id: str, existing):
        self.patent_id = patent_id
        self.existing = existing
        super().__init__(
            f"patent {patent_id!r} already labeled {existing.label!r} "
            f"by {existing.annotator_id or 'unknown'}"
        )


class TrainingError(PatentscapeError):
    """Training preconditions violated (e.g. single-class data)."""


class ConvergenceError(PatentscapeError):
    """An iterative solver hit its iteration cap before converging."""

    def __init__(self, message: str, iterations: int, max_violation: float):
        self.iterations = iterations
        self.max_violation = max_violation
        super().__init__(message)


class ConfigError(PatentscapeError):
    """Invalid or unknown configuration keys/values."""
