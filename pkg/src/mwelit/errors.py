"""Exception types shared across the pipeline."""


class MwelitError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(MwelitError):
    """An argument violates a precondition (empty text, empty gold set, ...)."""


class EmptyResult(MwelitError):
    """No corpus sentence matched the MWE surface form."""


class BackendError(MwelitError):
    """A masked-language-model backend call failed.

    ``record_id`` is attached when the failure happened while embedding a
    specific occurrence record.
    """

    def __init__(self, message: str, record_id: int | None = None):
        super().__init__(message if record_id is None else f"record {record_id}: {message}")
        self.record_id = record_id


class DimensionMismatch(BackendError):
    """A vector's length does not match the backend hidden size."""

    def __init__(self, message: str):
        super().__init__(message)


class DegenerateInput(MwelitError):
    """An embedding row has zero norm; cosine distance is undefined."""


class NoClusters(MwelitError):
    """A cluster model has no non-outlier cluster, even after fallback."""


class SpanMismatch(MwelitError):
    """The target sentence does not contain the artifact's MWE at the given span."""


class MissingArtifact(MwelitError):
    """Some gold MWEs have no prebuilt paraphrase artifact."""

    def __init__(self, missing: list[str]):
        super().__init__("no artifact for: " + ", ".join(sorted(missing)))
        self.missing = sorted(missing)
