"""Exception hierarchy shared by all pipeline stages.

Every fault raised by this package carries a stable machine-readable
``code`` string so the CLI and the HTTP service can surface the same
identifiers the engine uses internally.
"""

from __future__ import annotations


class FieldForgeError(Exception):
    """Base class for all engine faults; subclasses set ``code``."""

    code = "ERROR"

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self) -> str:
        if self.context:
            extras = ", ".join(f"{k}={v!r}" for k, v in self.context.items())
            return f"[{self.code}] {self.message} ({extras})"
        return f"[{self.code}] {self.message}"


class ParseError(FieldForgeError):
    code = "PARSE_ERROR"


class MissingSize(FieldForgeError):
    code = "MISSING_SIZE"


class DanglingImageId(FieldForgeError):
    code = "DANGLING_IMAGE_ID"


class ClassOutOfRange(FieldForgeError):
    code = "CLASS_OUT_OF_RANGE"


class NormalizedOutOfRange(FieldForgeError):
    code = "NORMALIZED_OUT_OF_RANGE"


class MissingDims(FieldForgeError):
    code = "MISSING_DIMS"


class EmptyDataset(FieldForgeError):
    code = "EMPTY_DATASET"


class DuplicateClass(FieldForgeError):
    code = "DUPLICATE_CLASS"


class UnsupportedExport(FieldForgeError):
    code = "UNSUPPORTED_EXPORT"


class InvalidRate(FieldForgeError):
    code = "INVALID_RATE"


class NoFeasibleModel(FieldForgeError):
    code = "NO_FEASIBLE_MODEL"


class ClassCapacityExceeded(FieldForgeError):
    code = "CLASS_CAPACITY_EXCEEDED"


class MissingSplit(FieldForgeError):
    code = "MISSING_SPLIT"


class TrainerUnavailable(FieldForgeError):
    code = "TRAINER_UNAVAILABLE"


class OutOfOrderStep(FieldForgeError):
    code = "OUT_OF_ORDER_STEP"


class RunNotActive(FieldForgeError):
    code = "RUN_NOT_ACTIVE"


class RunNotFinished(FieldForgeError):
    code = "RUN_NOT_FINISHED"


class ArtifactMissing(FieldForgeError):
    code = "ARTIFACT_MISSING"


class TaskMismatch(FieldForgeError):
    code = "TASK_MISMATCH"


class UnsupportedCustomization(FieldForgeError):
    code = "UNSUPPORTED_CUSTOMIZATION"


class MissingModel(FieldForgeError):
    code = "MISSING_MODEL"


class ExpertModeUnsupported(FieldForgeError):
    code = "EXPERT_MODE_UNSUPPORTED"


class InvalidCustomization(FieldForgeError):
    code = "INVALID_CUSTOMIZATION"


class PlatformNotTargeted(FieldForgeError):
    code = "PLATFORM_NOT_TARGETED"


class EmailTaken(FieldForgeError):
    code = "EMAIL_TAKEN"


class WeakCredential(FieldForgeError):
    code = "WEAK_CREDENTIAL"


class Unauthenticated(FieldForgeError):
    code = "UNAUTHENTICATED"


class Forbidden(FieldForgeError):
    code = "FORBIDDEN"


class UnknownProject(FieldForgeError):
    code = "UNKNOWN_PROJECT"


class UnknownObservation(FieldForgeError):
    code = "UNKNOWN_OBSERVATION"


class ValidationFailed(FieldForgeError):
    code = "VALIDATION_FAILED"


class PayloadTooLarge(FieldForgeError):
    code = "PAYLOAD_TOO_LARGE"
