"""Exception types shared across the package."""


class RecourseError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(RecourseError):
    """Invalid schema, row, or encoded vector."""


class IngestError(RecourseError):
    """CSV ingestion failure; message carries row/column location."""


class TrainingError(RecourseError):
    """Neural-network training failed (divergence, bad inputs)."""


class FitError(RecourseError):
    """Linear surrogate fitting failed."""


class ExplainRequestError(RecourseError):
    """An explanation request violates its invariants."""


class ExplainFailure(RecourseError):
    """Explanation could not be computed for structural reasons
    (distinct from a well-formed search that found no counterfactual)."""


class ArtifactError(RecourseError):
    """Artifact persistence / binding failure."""
