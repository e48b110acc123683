"""Single-step facility location and the sequential (myopic) procedure."""

from dataclasses import dataclass
import time

from essp.costs import CostParams, distance_matrix
from essp.milp import MilpModel
from essp.model import Instance, Location, Schedule, WardInstance
from essp.formulations.common import (
    SolveFailedError,
    WardSolve,
    default_backend,
    finish,
    model_name,
    op_costs,
)


class InfeasibleFlpError(SolveFailedError):
    pass


@dataclass(frozen=True)
class FlpSnapshot:
    """One step of the sequential procedure.

    ``evacuees[i]`` stands at ``current[i]`` (origin at ``t = 0``) and has to
    be placed in one of ``shelters`` for step ``t + 1``.
    """
    t: int
    evacuees: tuple[int, ...]
    current: tuple[Location, ...]
    shelters: tuple[Location, ...]
    params: CostParams
    op_cost: dict

    def __post_init__(self):
        if len(self.evacuees) != len(self.current):
            raise ValueError("evacuees and current locations differ in length")
        wards = {loc.ward for loc in self.current} | {s.ward for s in self.shelters}
        if len(wards) > 1:
            raise ValueError(f"snapshot spans wards {sorted(wards)}")

    @property
    def capacity(self):
        return sum(s.capacity for s in self.shelters)


def build_flp(snap: FlpSnapshot, name=None) -> MilpModel:
    """Capacitated facility location with ``x_m_n`` and ``y_m`` binaries."""
    if snap.capacity < len(snap.evacuees):
        raise InfeasibleFlpError(
            f"t={snap.t}: {len(snap.evacuees)} evacuees but only {snap.capacity} places "
            f"in {len(snap.shelters)} shelters")
    model = MilpModel(name or f"flp_{snap.t}")
    d = distance_matrix(snap.current, snap.shelters)
    rate = snap.params.rate(snap.t)
    obj = {}
    x = {}
    for i, n in enumerate(snap.evacuees):
        for j, s in enumerate(snap.shelters):
            x[s.id, n] = idx = model.add_var(f"x_{s.id}_{n}")
            if d[i, j]:
                obj[idx] = rate * d[i, j]
    for s in snap.shelters:
        y = model.add_var(f"y_{s.id}")
        if snap.op_cost[s.id]:
            obj[y] = snap.op_cost[s.id]
        terms = {x[s.id, n]: 1.0 for n in snap.evacuees}
        terms[y] = -float(s.capacity)
        model.add_constraint(terms, "<=", 0.0, f"cap_{s.id}")
    for n in snap.evacuees:
        model.add_constraint({x[s.id, n]: 1.0 for s in snap.shelters}, "=", 1.0, f"assign_{n}")
    model.set_objective(obj)
    return model


def seqflp_ward(instance: Instance, ward: WardInstance, params: CostParams, backend):
    """Sequential FLPs for one ward; returns (schedule, WardSolve)."""
    costs = op_costs(instance, ward)
    locs = ward.location_by_id
    current = {e.id: locs[e.origin] for e in ward.evacuees}
    return_time = {e.id: e.return_time for e in ward.evacuees}
    available = tuple(ward.shelters)
    paths = {e.id: [] for e in ward.evacuees}
    last_open = {}
    info = WardSolve(ward.id, "optimal", 0.0, 0.0)
    t = 0
    while True:
        active = tuple(sorted(n for n, tau in return_time.items() if tau > t))
        if not active:
            break
        snap = FlpSnapshot(t, active, tuple(current[n] for n in active), available, params, costs)
        try:
            model = build_flp(snap, name=f"{model_name(instance, ward.id, 'seqflp')}_{t}")
        except InfeasibleFlpError as exc:
            raise InfeasibleFlpError(f"ward {ward.id}, {exc}") from None
        sol = backend.solve(model)
        if sol.x is None:
            raise SolveFailedError(f"ward {ward.id}, t={t}: FLP {sol.status.value}")
        if sol.status.value != "optimal":
            info.status = sol.status.value
        info.objective += sol.objective
        info.bound += sol.bound
        info.nodes += sol.nodes
        info.wall_time += sol.wall_time
        info.models += 1
        info.num_vars = max(info.num_vars, model.num_vars)
        opened = []
        for s in available:
            if sol.value(model, f"y_{s.id}") > 0.5:
                opened.append(s)
                last_open[s.id] = t + 1
        for n in active:
            m = next(s for s in available if sol.value(model, f"x_{s.id}_{n}") > 0.5)
            paths[n].append(m.id)
            current[n] = m
        available = tuple(opened)
        t += 1
    schedule = Schedule.from_open_until({n: tuple(p) for n, p in paths.items()}, last_open)
    return schedule, info


def run_seqflp(instance: Instance, params: CostParams, backend=None):
    """Myopic procedure: one FLP per step, closed shelters never come back."""
    backend = default_backend(backend)
    start = time.perf_counter()
    parts, wards = [], []
    for ward in instance.wards:
        if not ward.evacuees:
            continue
        schedule, info = seqflp_ward(instance, ward, params, backend)
        parts.append(schedule)
        wards.append(info)
    return finish("seqflp", instance, params, parts, wards, start, backend)
