"""Exception hierarchy shared across the package.

Every error carries enough structure (row ids, column names, subprocess
diagnostics) to be actionable without re-running the failing step.
"""

from __future__ import annotations


class FairgenError(Exception):
    """Base class for all package errors."""


class NotFittedError(FairgenError):
    """An estimator method requiring a fitted state was called before fit()."""


# -- ingestion / schema ----------------------------------------------------

class SchemaError(FairgenError):
    """Schema definition violates its own invariants."""


class MissingColumn(FairgenError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} missing from CSV header")
        self.column = column


class UnknownCategory(FairgenError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(
            f"row {row}: value {value!r} not among declared categories of column {column!r}"
        )
        self.row = row
        self.column = column
        self.value = value


class NonNumericCell(FairgenError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}: cell {value!r} in numeric column {column!r}")
        self.row = row
        self.column = column
        self.value = value


class EmptyFile(FairgenError):
    pass


class DegenerateSplit(FairgenError):
    pass


class SchemaMismatch(FairgenError):
    pass


# -- debiasing -------------------------------------------------------------

class EmptyGroup(FairgenError):
    def __init__(self, group: str):
        super().__init__(f"group {group!r} has zero rows")
        self.group = group


class ZeroVector(FairgenError):
    pass


class NegativeK(FairgenError):
    pass


class TooFewPoints(FairgenError):
    pass


class MissingCellModel(FairgenError):
    def __init__(self, protected_value: str, label_value: str):
        super().__init__(
            f"no cluster model fitted for cell (S={protected_value!r}, Y={label_value!r})"
        )
        self.protected_value = protected_value
        self.label_value = label_value


# -- synthesis -------------------------------------------------------------

class TooFewRows(FairgenError):
    pass


class CommandFailed(FairgenError):
    def __init__(self, exit_code: int, diagnostics: str):
        super().__init__(f"external synthesizer exited with code {exit_code}")
        self.exit_code = exit_code
        self.diagnostics = diagnostics


class ProtocolViolation(FairgenError):
    pass


# -- classifier ------------------------------------------------------------

class SingleClassTraining(FairgenError):
    pass


# -- fairness --------------------------------------------------------------

class SingleClassTruth(FairgenError):
    pass


class TooFewSubgroups(FairgenError):
    pass


class UndefinedRate(FairgenError):
    def __init__(self, subgroup, label_value: str):
        super().__init__(
            f"subgroup {subgroup!r} has no rows with true label {label_value!r}"
        )
        self.subgroup = subgroup
        self.label_value = label_value


# -- pipeline --------------------------------------------------------------

class PipelineStageError(FairgenError):
    """Wraps a module error with the pipeline stage where it happened."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class ConfigError(FairgenError):
    pass
