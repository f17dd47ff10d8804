"""Exception hierarchy shared by every sparsechoice module.

Each error carries a ``module`` attribute so the CLI can report where in the
pipeline a failure originated.
"""
from __future__ import annotations


class SparseChoiceError(Exception):
    module = "sparsechoice"


class ExprError(SparseChoiceError, ValueError):
    module = "exprlib"


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownFunctionError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown function {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class ExprValidationError(ExprError):
    pass


class EvaluationError(SparseChoiceError):
    module = "exprlib"

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class DomainError(EvaluationError):
    pass


class DivisionByZeroError(EvaluationError):
    pass


class NaNProducedError(EvaluationError):
    pass


class GenerationError(SparseChoiceError):
    module = "synthgen"


class AggregationError(SparseChoiceError, ValueError):
    module = "synthgen"


class LibraryError(SparseChoiceError):
    module = "featlib"

    def __init__(self, message: str, label: str | None = None, row: int | None = None):
        super().__init__(message)
        self.label = label
        self.row = row


class SolverError(SparseChoiceError):
    module = "sparsesolve"

    def __init__(self, message: str, alternative: int | None = None):
        self.detail = message
        if alternative is not None:
            message = f"alternative {alternative}: {message}"
        super().__init__(message)
        self.alternative = alternative

    def attributed(self, alternative: int) -> SolverError:
        return SolverError(self.detail, alternative)


class InfeasibleError(SolverError):
    def __init__(self, pi: float, min_pi: float, alternative: int | None = None):
        super().__init__(
            f"infeasible: pi={pi:.6g} is below the minimal feasible pi={min_pi:.6g}",
            alternative,
        )
        self.pi = pi
        self.min_pi = min_pi

    def attributed(self, alternative: int) -> InfeasibleError:
        return InfeasibleError(self.pi, self.min_pi, alternative)


class NonFiniteColumnError(SolverError):
    def __init__(self, label: str, alternative: int | None = None):
        super().__init__(f"library column {label!r} contains non-finite values", alternative)
        self.label = label

    def attributed(self, alternative: int) -> NonFiniteColumnError:
        return NonFiniteColumnError(self.label, alternative)


class StatisticsError(SparseChoiceError, ValueError):
    module = "sigstats"


class EnsembleError(SparseChoiceError):
    module = "sigstats"


class StoreError(SparseChoiceError):
    module = "cli"


class RunFailedError(SparseChoiceError):
    """A pipeline run that stopped in ``module``."""

    def __init__(self, message: str, module: str):
        super().__init__(message)
        self.module = module
