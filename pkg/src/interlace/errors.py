"""Exception types shared across the package."""


class InterlaceError(Exception):
    """Base class for all package-specific errors."""

    code = "error"


class GraphFormatError(InterlaceError):
    """Base class for edge-list parsing failures."""

    code = "graph_format"


class MalformedLineError(GraphFormatError):
    code = "malformed_line"


class UnknownDirectiveError(GraphFormatError):
    code = "unknown_directive"


class InvalidVertexError(GraphFormatError):
    code = "invalid_vertex"


class NonpositiveWeightError(GraphFormatError):
    code = "nonpositive_weight"


class ConflictingEdgeError(GraphFormatError):
    """Same vertex pair listed twice with different weights."""

    code = "conflicting_edge"


class DisconnectedGraphError(InterlaceError):
    code = "disconnected"


class GraphValidationError(InterlaceError):
    code = "invalid_graph"


class SolverError(InterlaceError):
    """Linear solve failed or exceeded its iteration budget."""

    code = "solver"


class ConvergenceError(InterlaceError):
    """Fixed-point or iterative routine ran out of iterations."""

    code = "convergence"


class WalkBudgetError(InterlaceError):
    """A walk exceeded the hard step budget without terminating."""

    code = "walk_budget"


class UnsupportedOperationError(InterlaceError):
    """Requested computation is not defined for this window configuration."""

    code = "unsupported"


class BracketFailureError(InterlaceError):
    """Critical-level search could not certify a bracket."""

    code = "bracket_failure"


class ConflictingSourcesError(InterlaceError):
    """More than one graph source supplied on the command line."""

    code = "conflicting_sources"
