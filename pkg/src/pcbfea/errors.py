"""Exception and warning types raised across pcbfea."""
from __future__ import annotations

from dataclasses import dataclass


class PcbFeaError(Exception):
    """Base class for every error raised by pcbfea."""


@dataclass(frozen=True)
class Issue:
    """One violated model invariant.

    ``code`` is one of OverlappingComponents, ComponentOffBoard, NoSupports,
    NonPhysicalMaterial, InvalidShape, InvalidSupport, InvalidLoad,
    InvalidThermalCase; ``path`` points at the offending field, e.g.
    ``components[3].shape.diameter``.
    """

    code: str
    path: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.code} at {self.path}: {self.message}"


class ValidationError(PcbFeaError):
    def __init__(self, issues: list[Issue]):
        self.issues = list(issues)
        lines = "\n  ".join(str(i) for i in self.issues)
        super().__init__(f"model has {len(self.issues)} invalid field(s):\n  {lines}")

    @property
    def codes(self) -> set[str]:
        return {i.code for i in self.issues}


class NonPhysicalMaterialWarning(UserWarning):
    """Material constants that pass validation but look like a unit slip."""


class ParseError(PcbFeaError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


# mesher
class ElementSizeTooCoarse(PcbFeaError):
    pass


class DegenerateElement(PcbFeaError):
    pass


# assembly / solvers
class NoConstraints(PcbFeaError):
    pass


class SingularAfterConstraints(PcbFeaError):
    pass


class SolverDiverged(PcbFeaError):
    pass


class MaxIterationsExceeded(PcbFeaError):
    """Newton iteration limit hit; the partial history is attached."""

    def __init__(self, message: str, history=None, displacement=None):
        super().__init__(message)
        self.history = history
        self.displacement = displacement


class ConvergenceFailure(PcbFeaError):
    pass


class IndefiniteMass(PcbFeaError):
    pass


class DegenerateFrequencies(PcbFeaError):
    pass


class StepFailure(PcbFeaError):
    pass


class NonPositiveDt(PcbFeaError):
    pass


# post-processing
class NonOrthonormalModes(PcbFeaError):
    pass


class CountMismatch(PcbFeaError):
    pass


# thermal
class SingularThermalSystem(PcbFeaError):
    pass


class NegativeFilmCoefficient(PcbFeaError):
    pass


# io
class FieldSizeMismatch(PcbFeaError):
    pass
