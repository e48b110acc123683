"""Exact branch-and-bound over the integer variables of a :class:`MilpModel`."""

from dataclasses import dataclass
import heapq
import itertools
import math
import time

import numpy as np

from essp.milp import _kernels
from essp.milp.model import INTEGRALITY_TOL, MalformedModelError, MilpModel, MilpSolution, Status
from essp.milp.simplex import solve_lp


class UnboundedRelaxationError(RuntimeError):
    """The LP relaxation of a model is unbounded below."""


@dataclass(frozen=True)
class Limits:
    time: float = math.inf
    nodes: int = 10_000_000


@dataclass(frozen=True)
class NodeRecord:
    node: int
    depth: int
    lp_value: float
    global_bound: float
    incumbent: float


def _most_fractional(x):
    frac = np.abs(x - np.round(x))
    j = int(np.argmax(frac))  # argmax returns the smallest index among ties
    if frac[j] <= INTEGRALITY_TOL:
        return -1
    return j


def solve_builtin(model: MilpModel, limits: Limits | None = None, *, rule=_kernels.RULE_BLAND,
                  trace=False, kernel=None) -> MilpSolution:
    """Solve ``model`` to proven optimality (or until ``limits`` run out).

    Nodes are explored depth first, always continuing with the child on the
    rounding side of the branching variable; when a dive ends the open node
    with the best LP bound is resumed. Branching is on the most fractional
    variable, ties going to the smallest index. With ``trace=True`` every
    evaluated node is recorded as a :class:`NodeRecord`.
    """
    limits = limits or Limits()
    start = time.perf_counter()
    if not model.variables:
        raise MalformedModelError("model has no variables")
    c = model.objective_vector()
    A, senses, b = model.dense_constraints()
    lb0, ub0 = model.bounds()
    const = model.objective_constant

    incumbent_x = None
    incumbent = math.inf
    records = []
    seq = itertools.count()
    heap: list = []  # (bound, seq, depth, lb, ub)
    nodes = 0
    lp_iters = 0
    timed_out = False

    def global_bound(current):
        best = current
        if heap:
            best = min(best, heap[0][0])
        return min(best, incumbent)

    pending = (-math.inf, 0, lb0, ub0)
    while pending is not None or heap:
        if pending is None:
            bound, _, depth, lb, ub = heapq.heappop(heap)
            if bound >= incumbent - _prune_tol(incumbent):
                continue
        else:
            bound, depth, lb, ub = pending
            pending = None
        if nodes >= limits.nodes or time.perf_counter() - start > limits.time:
            heapq.heappush(heap, (bound, next(seq), depth, lb, ub))
            timed_out = True
            break
        nodes += 1
        res = solve_lp(c, A, senses, b, lb, ub, rule=rule, kernel=kernel)
        lp_iters += res.iterations
        if res.status == "unbounded":
            raise UnboundedRelaxationError(f"LP relaxation of {model.name!r} is unbounded")
        if res.status == "iteration_limit":
            raise RuntimeError(f"simplex iteration limit reached on {model.name!r}")
        if res.status == "infeasible":
            if trace:
                records.append(NodeRecord(nodes, depth, math.inf, global_bound(math.inf), incumbent))
            continue
        value = res.objective
        if trace:
            records.append(NodeRecord(nodes, depth, value, global_bound(value), incumbent))
        if value >= incumbent - _prune_tol(incumbent):
            continue
        x = res.x
        j = _most_fractional(x)
        if j == -1:
            xi = np.round(x)
            if not model.check(xi):
                incumbent_x = xi
                incumbent = float(c @ xi)
                continue
            # rounding broke a constraint: keep the LP point's worst-off variable open
            j = int(np.argmax(np.abs(x - xi)))
            if lb[j] == ub[j]:
                continue
        down_ub = ub.copy()
        down_ub[j] = math.floor(x[j])
        up_lb = lb.copy()
        up_lb[j] = math.ceil(x[j])
        if up_lb[j] == lb[j]:
            up_lb[j] = lb[j] + 1
            down_ub[j] = lb[j]
        frac = x[j] - math.floor(x[j])
        down = (value, depth + 1, lb, down_ub)
        up = (value, depth + 1, up_lb, ub)
        first, second = (up, down) if frac >= 0.5 else (down, up)
        heapq.heappush(heap, (second[0], next(seq), second[1], second[2], second[3]))
        pending = first

    elapsed = time.perf_counter() - start
    if timed_out:
        bound = min([h[0] for h in heap] + [incumbent])
        status = Status.TIMED_OUT
    elif incumbent_x is None:
        return MilpSolution(Status.INFEASIBLE, None, math.inf, math.inf, nodes, lp_iters, elapsed,
                            trace=records)
    else:
        bound = incumbent
        status = Status.OPTIMAL
    obj = incumbent + const if incumbent_x is not None else math.inf
    return MilpSolution(status, incumbent_x, obj, bound + const, nodes, lp_iters, elapsed,
                        trace=records)


def _prune_tol(incumbent):
    if not math.isfinite(incumbent):
        return 0.0
    return 1e-9 * max(1.0, abs(incumbent))
