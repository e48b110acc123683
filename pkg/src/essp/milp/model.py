"""Backend-neutral 0-1 / bounded-integer linear programs."""

from dataclasses import dataclass, field
from enum import Enum
import math
import re

import numpy as np

BINARY = "binary"
INTEGER = "integer"

SENSES = ("<=", "=", ">=")
_SENSE_CODE = {"<=": -1, "=": 0, ">=": 1}

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")

INTEGRALITY_TOL = 1e-6
FEASIBILITY_TOL = 1e-6


class MalformedModelError(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str = BINARY
    lower: float = 0.0
    upper: float = 1.0


@dataclass(frozen=True)
class Constraint:
    name: str
    index: np.ndarray
    coef: np.ndarray
    sense: str
    rhs: float

    def activity(self, x):
        return float(self.coef @ x[self.index]) if self.index.size else 0.0

    def violation(self, x):
        lhs = self.activity(x)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


class MilpModel:
    """A minimisation problem over binary and bounded-integer variables.

    Build it with :meth:`add_var`, :meth:`add_constraint` and
    :meth:`set_objective`; once handed to a solver it is treated as frozen.
    Linear expressions are given as ``{variable index: coefficient}`` mappings
    or as iterables of ``(index, coefficient)`` pairs.
    """

    def __init__(self, name="model"):
        self.name = name
        self.variables: list[Variable] = []
        self.constraints: list[Constraint] = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self._index: dict[str, int] = {}
        self._constraint_names: set[str] = set()

    def __len__(self):
        return len(self.variables)

    @property
    def num_vars(self):
        return len(self.variables)

    @property
    def num_constraints(self):
        return len(self.constraints)

    def add_var(self, name, kind=BINARY, lower=0.0, upper=1.0):
        if name in self._index:
            raise MalformedModelError(f"duplicate variable name {name!r}")
        if not _NAME_RE.match(name):
            raise MalformedModelError(f"invalid variable name {name!r}")
        if kind == BINARY:
            if not (0.0 <= lower <= upper <= 1.0) or lower not in (0, 1) or upper not in (0, 1):
                raise MalformedModelError(f"binary variable {name!r} needs bounds within {{0, 1}}")
        elif kind == INTEGER:
            if not math.isfinite(lower) or lower > upper:
                raise MalformedModelError(f"integer variable {name!r} has bounds [{lower}, {upper}]")
        else:
            raise MalformedModelError(f"unknown variable kind {kind!r}")
        idx = len(self.variables)
        self.variables.append(Variable(name, kind, float(lower), float(upper)))
        self._index[name] = idx
        return idx

    def index(self, name):
        return self._index[name]

    def has_var(self, name):
        return name in self._index

    def _linear(self, expr):
        items = expr.items() if isinstance(expr, dict) else expr
        merged: dict[int, float] = {}
        for i, a in items:
            i = int(i)
            if not 0 <= i < len(self.variables):
                raise MalformedModelError(f"expression references undeclared variable {i}")
            merged[i] = merged.get(i, 0.0) + float(a)
        return {i: a for i, a in merged.items() if a != 0.0}

    def add_constraint(self, expr, sense, rhs, name=None):
        if sense not in SENSES:
            raise MalformedModelError(f"unknown sense {sense!r}")
        name = name or f"c{len(self.constraints)}"
        if name in self._constraint_names:
            raise MalformedModelError(f"duplicate constraint name {name!r}")
        terms = self._linear(expr)
        keys = sorted(terms)
        self.constraints.append(Constraint(
            name,
            np.array(keys, dtype=np.int64),
            np.array([terms[k] for k in keys], dtype=np.float64),
            sense,
            float(rhs),
        ))
        self._constraint_names.add(name)
        return len(self.constraints) - 1

    def set_objective(self, expr, constant=0.0):
        self.objective = self._linear(expr)
        self.objective_constant = float(constant)

    # ---- array views --------------------------------------------------

    def objective_vector(self):
        c = np.zeros(len(self.variables))
        for i, a in self.objective.items():
            c[i] = a
        return c

    def bounds(self):
        lb = np.array([v.lower for v in self.variables], dtype=np.float64)
        ub = np.array([v.upper for v in self.variables], dtype=np.float64)
        return lb, ub

    def dense_constraints(self):
        n = len(self.variables)
        A = np.zeros((len(self.constraints), n))
        senses = np.empty(len(self.constraints), dtype=np.int64)
        b = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            A[r, con.index] = con.coef
            senses[r] = _SENSE_CODE[con.sense]
            b[r] = con.rhs
        return A, senses, b

    def sparse_constraints(self):
        from scipy.sparse import csr_matrix

        rows, cols, vals = [], [], []
        for r, con in enumerate(self.constraints):
            rows.extend([r] * con.index.size)
            cols.extend(con.index.tolist())
            vals.extend(con.coef.tolist())
        return csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), len(self.variables)))

    def evaluate(self, x):
        x = np.asarray(x, dtype=np.float64)
        return float(self.objective_vector() @ x) + self.objective_constant

    def check(self, x, tol=FEASIBILITY_TOL):
        """Return a list of human-readable violations of ``x`` (empty if feasible)."""
        x = np.asarray(x, dtype=np.float64)
        problems = []
        for v, val in zip(self.variables, x):
            if val < v.lower - tol or val > v.upper + tol:
                problems.append(f"variable {v.name}={val:g} outside [{v.lower:g}, {v.upper:g}]")
            elif abs(val - round(val)) > INTEGRALITY_TOL:
                problems.append(f"variable {v.name}={val:g} is not integral")
        for con in self.constraints:
            viol = con.violation(x)
            if viol > tol:
                problems.append(f"constraint {con.name} violated by {viol:g}")
        return problems

    def values_by_name(self, x):
        return {v.name: float(val) for v, val in zip(self.variables, x)}


class Status(str, Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIMED_OUT = "timed_out"


@dataclass
class MilpSolution:
    status: Status
    x: np.ndarray | None
    objective: float
    bound: float
    nodes: int = 0
    lp_iterations: int = 0
    wall_time: float = 0.0
    values_may_differ: bool = False
    trace: list = field(default_factory=list)

    @property
    def has_solution(self):
        return self.x is not None

    @property
    def gap(self):
        if self.x is None or not math.isfinite(self.bound):
            return math.inf
        return max(0.0, self.objective - self.bound) / max(1.0, abs(self.objective))

    def value(self, model: MilpModel, name: str) -> float:
        return float(self.x[model.index(name)])

    def values(self, model: MilpModel) -> dict[str, float]:
        return model.values_by_name(self.x)
