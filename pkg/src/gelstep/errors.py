"""Exception types shared across the package.

Everything numerical that can fail in a *meaningful* way gets its own class so
callers can distinguish "your state is degenerate" from "the solver gave up".
Plain ValueError/OSError are used for ordinary argument and file errors.
"""


class GelstepError(Exception):
    """Base class for all package-specific errors."""


class SingularMatrix(GelstepError):
    """A deformation-gradient-sized matrix has |det| below the floor (1e-14)."""


class NonpositiveDeterminant(GelstepError):
    """An elastic energy was evaluated at det(A) <= 0 (inadmissible state)."""


class NotMeanFree(GelstepError):
    """Right-hand side handed to the mean-free Poisson solver has a mean."""


class SolverStagnation(GelstepError):
    """Iterative linear solver failed to reach tolerance within its budget."""


class MassMismatch(GelstepError):
    """A phase field violates the conserved-mean constraint beyond 1e-10."""


class InfiniteEnergy(GelstepError):
    """A derivative was requested at a state whose energy is +inf."""


class LineSearchFailure(GelstepError):
    """No admissible decrease step above the minimal step size exists."""


class IterationBudgetExceeded(GelstepError):
    """Minimizer ran out of iterations without the descent guarantee."""


class ParseError(GelstepError):
    """Config or snapshot text could not be parsed; carries line context."""


class ValidationError(GelstepError):
    """Parsed input violates a model constraint; message cites it."""


class FormatError(GelstepError):
    """A snapshot/CSV file is structurally broken (truncated, bad header)."""
