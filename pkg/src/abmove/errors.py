"""Exception hierarchy, grouped by the exit code the CLI maps them to."""


class AbmoveError(Exception):
    """Base class for all package errors."""


class InputError(AbmoveError):
    """Malformed input: files, program text, graphs, configs (exit code 3)."""


class ParseError(InputError):
    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "")
            where = f" ({where})"
        super().__init__(f"{message}{where}")


class ProgramError(InputError):
    """Program-level validation failure (arity, domains, annotations)."""


class GraphError(InputError):
    """Graph file or structure violation."""


class SnapError(InputError):
    """Trajectory point cannot be matched to the graph."""


class ObservationError(AbmoveError):
    """Observations are mutually inconsistent (exit code 2)."""


class InfeasibleLegError(AbmoveError):
    """No trajectory can satisfy a leg's deadline (exit code 2)."""


class BudgetExceededError(AbmoveError):
    """A search exceeded its wall-clock budget."""

    def __init__(self, message, expansions=0, elapsed=0.0):
        self.expansions = expansions
        self.elapsed = elapsed
        super().__init__(message)


class VerificationError(AbmoveError):
    """An emitted explanation failed its consistency/entailment gate; engine bug (exit code 4)."""
