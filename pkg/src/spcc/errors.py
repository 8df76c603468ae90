"""Exception hierarchy shared across the control center."""

from __future__ import annotations


class SpccError(Exception):
    """Base class for all control-center errors."""


class EmptyField(SpccError):
    pass


class UncoveredMetric(SpccError):
    def __init__(self, metric_ids: list[str]):
        self.metric_ids = list(metric_ids)
        super().__init__(f"metrics mapped to no process step: {', '.join(self.metric_ids)}")


class UnitMismatch(SpccError):
    pass


class InsufficientData(SpccError):
    pass


class UnknownStep(SpccError):
    pass


class DuplicateTechnique(SpccError):
    pass


class CycleError(SpccError):
    pass


class TechniqueError(SpccError):
    def __init__(self, instance_id: str, cause: Exception | str):
        self.instance_id = instance_id
        self.cause = cause
        super().__init__(f"technique failed in instance {instance_id!r}: {cause}")


class UnknownInstance(SpccError):
    pass


class SchemaViolation(SpccError):
    def __init__(self, param: str, reason: str):
        self.param = param
        self.reason = reason
        super().__init__(f"parameter {param!r}: {reason}")


class UnknownView(SpccError):
    pass


class EncodingError(SpccError):
    pass


class UnknownProject(SpccError):
    pass


class UnknownSource(SpccError):
    pass


class StorageError(SpccError):
    pass


class NoResults(SpccError):
    pass


class CorruptPackage(SpccError):
    pass


class InvalidToken(SpccError):
    pass


class AccessDenied(SpccError):
    pass


class DuplicateProject(SpccError):
    pass


class DuplicateBatch(SpccError):
    pass


class ValidationFailed(SpccError):
    """Raised at project registration when documents do not cross-validate."""

    def __init__(self, message: str, report=None, coverage=None):
        self.report = report
        self.coverage = coverage
        super().__init__(message)
