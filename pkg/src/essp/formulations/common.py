from dataclasses import asdict, dataclass, field, replace
import math
import time

from essp.costs import CostParams, evaluate_schedule
from essp.milp import BuiltinBackend, MilpModel, MilpSolution, Status
from essp.io import schedule_to_dict
from essp.model import CostBreakdown, Instance, Schedule, merge_schedules


class SolveFailedError(RuntimeError):
    """A ward sub-problem came back without a usable solution."""


@dataclass
class WardSolve:
    ward: int
    status: str
    objective: float | None = None
    bound: float | None = None
    nodes: int = 0
    wall_time: float = 0.0
    models: int = 0
    num_vars: int = 0


@dataclass
class MethodResult:
    method: str
    schedule: Schedule
    costs: CostBreakdown
    wards: list[WardSolve] = field(default_factory=list)
    wall_time: float = 0.0
    # summed MILP objectives and the cost components they account for
    solver_objective: float | None = None
    solver_terms: tuple[str, ...] = ()
    backend: str = "builtin"

    @property
    def statuses(self):
        return {w.ward: w.status for w in self.wards}

    @property
    def all_optimal(self):
        return all(w.status == Status.OPTIMAL.value for w in self.wards)

    @property
    def nodes(self):
        return sum(w.nodes for w in self.wards)

    @property
    def gap(self):
        obj = sum(w.objective or 0.0 for w in self.wards)
        bound = sum(w.bound if w.bound is not None else -math.inf for w in self.wards)
        if not math.isfinite(bound):
            return math.inf
        return max(0.0, obj - bound) / max(1.0, abs(obj))

    def solver_mismatch(self):
        """Relative gap between the solver objective and the evaluated costs of
        the components it covers; ``None`` when no MILP objective applies."""
        if self.solver_objective is None:
            return None
        parts = self.costs.as_dict()
        evaluated = sum(parts[f"{term}_cost"] for term in self.solver_terms)
        return abs(evaluated - self.solver_objective) / max(1.0, abs(evaluated))

    def as_dict(self):
        return {
            "method": self.method,
            "backend": self.backend,
            "costs": self.costs.as_dict(),
            "wall_time": self.wall_time,
            "nodes": self.nodes,
            "solver_objective": self.solver_objective,
            "solver_terms": list(self.solver_terms),
            "wards": [asdict(w) for w in self.wards],
            "schedule": schedule_to_dict(self.schedule),
        }


def default_backend(backend):
    return backend if backend is not None else BuiltinBackend()


def solve_checked(backend, model: MilpModel, what: str) -> MilpSolution:
    sol = backend.solve(model)
    if sol.x is None:
        raise SolveFailedError(f"{what}: {sol.status.value} ({model.name})")
    return sol


def record(ward_id, sol: MilpSolution, model: MilpModel) -> WardSolve:
    return WardSolve(ward_id, sol.status.value, sol.objective, sol.bound, sol.nodes,
                     sol.wall_time, 1, model.num_vars)


ALL_TERMS = ("evacuation", "relocation", "operation")


def finish(method, instance: Instance, params: CostParams, parts, wards, start, backend,
           solver_objective=None, solver_terms=()) -> MethodResult:
    schedule = merge_schedules(parts)
    costs = evaluate_schedule(instance, schedule, params)
    return MethodResult(method, schedule, costs, wards, time.perf_counter() - start,
                        solver_objective, tuple(solver_terms),
                        getattr(backend, "name", type(backend).__name__))


def model_name(instance: Instance, ward_id: int, method: str) -> str:
    return f"{instance.name}_{ward_id}_{method}"


def op_costs(instance: Instance, ward):
    return {s.id: instance.objective_op_cost(s) for s in ward.shelters}


def split_wards(instance: Instance):
    """One single-ward instance per ward that has evacuees."""
    return [replace(instance, wards=(w,)) for w in instance.wards if w.evacuees]


def merge_results(instance: Instance, params: CostParams, results) -> MethodResult:
    """Combine per-ward results of one method into a city-level result."""
    results = list(results)
    if not results:
        return MethodResult("none", Schedule({}), evaluate_schedule(instance, Schedule({}), params))
    first = results[0]
    schedule = merge_schedules([r.schedule for r in results])
    costs = evaluate_schedule(instance, schedule, params)
    solver = None
    if all(r.solver_objective is not None for r in results):
        solver = sum(r.solver_objective for r in results)
    return MethodResult(first.method, schedule, costs, [w for r in results for w in r.wards],
                        sum(r.wall_time for r in results), solver, first.solver_terms,
                        first.backend)
