"""Exception hierarchy shared across the package."""


class MflowError(Exception):
    """Base class for every error raised by mflow."""


class DomainError(MflowError, ValueError):
    """An argument lies outside the range its operation accepts."""


class DataError(MflowError, ValueError):
    """Input data is malformed: non-monotone, unnormalized, mismatched lengths."""


class NormalizationError(DataError):
    """A probability table does not sum to one."""

    def __init__(self, total: float, tol: float):
        self.total = total
        self.deficit = 1.0 - total
        super().__init__(
            f"probabilities sum to {total!r} (deficit {self.deficit:.3e}, tolerance {tol:g})"
        )


class RegimeMismatchError(MflowError):
    """A monotone regime was requested while experience and information disagree."""


class NumericError(MflowError, ArithmeticError):
    """A numerical routine failed to converge."""


class InsufficientDataError(DataError):
    """Too few samples for the requested analysis."""

    def __init__(self, got: int, required: int, what: str = "samples"):
        self.got = got
        self.required = required
        super().__init__(f"need at least {required} {what}, got {got}")


class ExtrapolationError(DomainError):
    """Query point outside the tabulated range."""


class GraphError(MflowError):
    """A workflow graph failed validation."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


class TrialAbort(MflowError):
    """A trial could not be completed; carries the node and trial index."""

    def __init__(self, message: str, node_id: str | None = None, trial_index: int | None = None):
        self.node_id = node_id
        self.trial_index = trial_index
        super().__init__(message)


class ScenarioError(MflowError):
    """A scenario file failed to parse or validate. ``path`` is the offending key path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnknownNodeError(MflowError, KeyError):
    """A node id that is not part of the workflow or report."""

    def __str__(self):
        return f"unknown node id {self.args[0]!r}"
