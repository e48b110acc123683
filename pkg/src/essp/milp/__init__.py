"""Integer linear programming: model builder, builtin solver, file exchange."""

from essp.milp.backends import (
    BuiltinBackend,
    ExternalBackend,
    ExternalSolvePending,
    SOLVER_ENV,
    HighsBackend,
    ModelTooLargeError,
    make_backend,
)
from essp.milp.bnb import Limits, NodeRecord, UnboundedRelaxationError, solve_builtin
from essp.milp.lpformat import (
    LpParseError,
    SolutionImportError,
    export_lp,
    format_solution,
    import_solution,
    parse_lp,
)
from essp.milp.model import BINARY, INTEGER, MalformedModelError, MilpModel, MilpSolution, Status

__all__ = [
    "BINARY", "INTEGER", "BuiltinBackend", "ExternalBackend", "ExternalSolvePending",
    "HighsBackend", "Limits", "LpParseError", "MalformedModelError", "MilpModel",
    "MilpSolution", "ModelTooLargeError", "NodeRecord", "SolutionImportError", "Status",
    "UnboundedRelaxationError", "export_lp", "format_solution", "import_solution",
    "make_backend", "parse_lp", "solve_builtin", "SOLVER_ENV",
]
