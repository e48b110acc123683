"""Ways to get a :class:`MilpSolution` for a :class:`MilpModel`.

``BuiltinBackend`` runs the in-process branch and bound, ``HighsBackend``
hands the model to HiGHS through :func:`scipy.optimize.milp`, and
``ExternalBackend`` exchanges files with any solver that reads CPLEX LP and
writes ``name value`` lines.
"""

from dataclasses import dataclass, field
import math
import os
from pathlib import Path
import shlex
import subprocess
import time

import numpy as np

from essp.milp import _kernels
from essp.milp.bnb import Limits, solve_builtin
from essp.milp.lpformat import export_lp, import_solution
from essp.milp.model import MilpModel, MilpSolution, Status

SOLVER_ENV = "ESSP_SOLVER_COMMAND"


class ModelTooLargeError(RuntimeError):
    """The builtin solver refuses models above its size threshold."""


class ExternalSolvePending(RuntimeError):
    """An LP file was written; its solution has to be produced out of process."""

    def __init__(self, lp_path, sol_path):
        super().__init__(f"solve {lp_path} and write the solution to {sol_path}")
        self.lp_path = Path(lp_path)
        self.sol_path = Path(sol_path)


@dataclass
class BuiltinBackend:
    time_limit: float = math.inf
    node_limit: int = 10_000_000
    max_vars: int = 6000
    rule: int = _kernels.RULE_BLAND
    name: str = "builtin"

    def solve(self, model: MilpModel) -> MilpSolution:
        if model.num_vars > self.max_vars:
            raise ModelTooLargeError(
                f"{model.name}: {model.num_vars} variables exceed the builtin limit of "
                f"{self.max_vars}; use an external backend")
        return solve_builtin(model, Limits(self.time_limit, self.node_limit), rule=self.rule)


@dataclass
class HighsBackend:
    time_limit: float | None = None
    mip_rel_gap: float = 1e-9
    name: str = "highs"

    def solve(self, model: MilpModel) -> MilpSolution:
        from scipy.optimize import Bounds, LinearConstraint, milp

        start = time.perf_counter()
        c = model.objective_vector()
        lb, ub = model.bounds()
        A = model.sparse_constraints()
        lo = np.full(model.num_constraints, -np.inf)
        hi = np.full(model.num_constraints, np.inf)
        for r, con in enumerate(model.constraints):
            if con.sense in ("<=", "="):
                hi[r] = con.rhs
            if con.sense in (">=", "="):
                lo[r] = con.rhs
        options = {"mip_rel_gap": self.mip_rel_gap, "presolve": True}
        if self.time_limit is not None:
            options["time_limit"] = self.time_limit
        res = milp(c, integrality=np.ones(model.num_vars), bounds=Bounds(lb, ub),
                   constraints=[LinearConstraint(A, lo, hi)] if model.num_constraints else None,
                   options=options)
        elapsed = time.perf_counter() - start
        bound = getattr(res, "mip_dual_bound", None)
        bound = -math.inf if bound is None or not np.isfinite(bound) else float(bound)
        if res.x is None:
            status = Status.INFEASIBLE if res.status == 2 else Status.TIMED_OUT
            return MilpSolution(status, None, math.inf, bound, wall_time=elapsed)
        x = np.round(res.x)
        obj = model.evaluate(x)
        status = Status.OPTIMAL if res.status == 0 else Status.TIMED_OUT
        if status == Status.OPTIMAL:
            bound = max(bound, obj - abs(obj) * self.mip_rel_gap) if math.isfinite(bound) else obj
        return MilpSolution(status, x, obj, min(bound, obj), wall_time=elapsed,
                            nodes=int(getattr(res, "mip_node_count", 0) or 0))


@dataclass
class ExternalBackend:
    """File exchange with an out-of-process solver.

    ``command`` is a template with ``{lp}`` and ``{sol}`` placeholders (the
    ``ESSP_SOLVER_COMMAND`` environment variable is the default). Without a
    command, the backend looks for ``<solutions_dir>/<model>.sol`` and, when
    it is missing, writes the LP file and raises :class:`ExternalSolvePending`.
    """

    workdir: Path
    command: str | None = None
    solutions_dir: Path | None = None
    name: str = "external"
    written: list = field(default_factory=list)

    def __post_init__(self):
        self.workdir = Path(self.workdir)
        if self.command is None:
            self.command = os.environ.get(SOLVER_ENV) or None
        if self.solutions_dir is not None:
            self.solutions_dir = Path(self.solutions_dir)

    def lp_path(self, model):
        return self.workdir / f"{model.name}.lp"

    def sol_path(self, model):
        base = self.solutions_dir if self.solutions_dir is not None else self.workdir
        return base / f"{model.name}.sol"

    def solve(self, model: MilpModel) -> MilpSolution:
        start = time.perf_counter()
        sol_path = self.sol_path(model)
        if not (self.solutions_dir is not None and sol_path.exists()):
            self.workdir.mkdir(parents=True, exist_ok=True)
            lp_path = self.lp_path(model)
            lp_path.write_text(export_lp(model), encoding="utf-8")
            self.written.append(lp_path)
            if self.command is None:
                raise ExternalSolvePending(lp_path, sol_path)
            sol_path.parent.mkdir(parents=True, exist_ok=True)
            sol_path.unlink(missing_ok=True)
            cmd = self.command.format(lp=shlex.quote(str(lp_path)), sol=shlex.quote(str(sol_path)))
            proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
            if proc.returncode != 0:
                raise RuntimeError(f"solver command failed ({proc.returncode}): {proc.stderr.strip()}")
            if not sol_path.exists():
                # an infeasible model leaves no solution behind
                return MilpSolution(Status.INFEASIBLE, None, math.inf, math.inf,
                                    wall_time=time.perf_counter() - start)
        sol = import_solution(model, sol_path.read_text(encoding="utf-8"))
        sol.wall_time = time.perf_counter() - start
        return sol


def make_backend(kind: str, **kwargs):
    if kind == "builtin":
        return BuiltinBackend(**kwargs)
    if kind == "highs":
        return HighsBackend(**kwargs)
    if kind == "external":
        return ExternalBackend(**kwargs)
    raise ValueError(f"unknown backend {kind!r}")


__all__ = [
    "BuiltinBackend", "HighsBackend", "ExternalBackend", "ExternalSolvePending",
    "ModelTooLargeError", "make_backend",
]
