"""Reference procedures: stay where you are first sent, and pack shelters first."""

import time

from essp.costs import CostParams, distance_matrix
from essp.milp import MilpModel
from essp.model import Instance, Schedule, WardInstance
from essp.formulations.common import (
    SolveFailedError,
    WardSolve,
    default_backend,
    finish,
    model_name,
    op_costs,
    record,
    solve_checked,
)
from essp.formulations.opt import FORMULATIONS, pick_formulation

# relative slack on the evacuation optimum in the lexicographic NoMove pass
LEX_TOL = 1e-9


def _check_capacity(ward: WardInstance, what):
    peak = len(ward.present(1))
    if ward.total_capacity < peak:
        raise SolveFailedError(f"ward {ward.id} {what}: {peak} evacuees exceed capacity "
                               f"{ward.total_capacity}")


def build_nomove(ward: WardInstance, params: CostParams, op_cost=None, evac_limit=None,
                 name=None) -> MilpModel:
    """One assignment ``x_m_n`` for the whole stay, minimising evacuation cost.

    With ``op_cost`` and ``evac_limit`` the model instead minimises operation
    cost (``y_t_m`` monotone, ``t = 0..T-1``) among assignments whose
    evacuation cost is at most ``evac_limit``.
    """
    shelters = list(ward.shelters)
    evacuees = sorted(ward.evacuees, key=lambda e: e.id)
    d0 = distance_matrix([ward.location_by_id[e.origin] for e in evacuees], shelters)
    rate = params.rate(0)
    model = MilpModel(name or f"nomove_{ward.id}")
    x = {}
    evac = {}
    for i, e in enumerate(evacuees):
        for j, s in enumerate(shelters):
            x[s.id, e.id] = idx = model.add_var(f"x_{s.id}_{e.id}")
            if d0[i, j]:
                evac[idx] = rate * d0[i, j]
        model.add_constraint({x[s.id, e.id]: 1.0 for s in shelters}, "=", 1.0, f"assign_{e.id}")
    if evac_limit is None:
        for s in shelters:
            model.add_constraint({x[s.id, e.id]: 1.0 for e in evacuees}, "<=",
                                 float(s.capacity), f"cap_{s.id}")
        model.set_objective(evac)
        return model

    T = ward.max_return_time + 1
    obj = {}
    y = {}
    for t in range(T):
        for s in shelters:
            y[t, s.id] = idx = model.add_var(f"y_{t}_{s.id}")
            if op_cost[s.id]:
                obj[idx] = op_cost[s.id]
    for t in range(T - 1):
        for s in shelters:
            model.add_constraint({y[t + 1, s.id]: 1.0, y[t, s.id]: -1.0}, "<=", 0.0,
                                 f"noreopen_{t}_{s.id}")
    for t in range(1, T):
        for s in shelters:
            terms = {x[s.id, e.id]: 1.0 for e in evacuees if e.return_time >= t}
            terms[y[t, s.id]] = -float(s.capacity)
            model.add_constraint(terms, "<=", 0.0, f"cap_{t}_{s.id}")
    model.add_constraint(evac, "<=", evac_limit, "evac_limit")
    model.set_objective(obj)
    return model


def _nomove_schedule(model, sol, ward):
    paths = {}
    last = {}
    for e in sorted(ward.evacuees, key=lambda e: e.id):
        m = next(s.id for s in ward.shelters if sol.value(model, f"x_{s.id}_{e.id}") > 0.5)
        paths[e.id] = (m,) * e.return_time
        last[m] = max(last.get(m, 0), e.return_time)
    return Schedule.from_open_until(paths, last)


def run_nomove(instance: Instance, params: CostParams, backend=None, lexicographic=False):
    """Everyone stays in the shelter they are first assigned to.

    Shelters close after their last occupant leaves. ``lexicographic`` adds a
    second solve that picks, among evacuation-cost optima, one with the
    least operation cost.
    """
    backend = default_backend(backend)
    start = time.perf_counter()
    parts, wards = [], []
    total = 0.0
    for ward in instance.wards:
        if not ward.evacuees:
            continue
        _check_capacity(ward, "nomove")
        name = model_name(instance, ward.id, "nomove")
        model = build_nomove(ward, params, name=name)
        sol = solve_checked(backend, model, f"ward {ward.id} nomove")
        info = record(ward.id, sol, model)
        if lexicographic:
            limit = sol.objective + LEX_TOL * max(1.0, abs(sol.objective))
            lex = build_nomove(ward, params, op_costs(instance, ward), limit, name=f"{name}_lex")
            lex_sol = solve_checked(backend, lex, f"ward {ward.id} nomove second pass")
            if lex_sol.status.value != "optimal":
                info.status = lex_sol.status.value
            info.nodes += lex_sol.nodes
            info.wall_time += lex_sol.wall_time
            info.models += 1
            model, sol = lex, lex_sol
        parts.append(_nomove_schedule(model, sol, ward))
        wards.append(info)
        total += info.objective
    solver_total = None if lexicographic else total
    return finish("nomove", instance, params, parts, wards, start, backend, solver_total,
                  ("evacuation",))


def build_binpack_y(ward: WardInstance, T: int, op_cost, name=None) -> MilpModel:
    """Cheapest monotone operating plan whose capacity covers every step."""
    shelters = list(ward.shelters)
    model = MilpModel(name or f"binpack_y_{ward.id}")
    obj = {}
    y = {}
    for t in range(T):
        for s in shelters:
            y[t, s.id] = idx = model.add_var(f"y_{t}_{s.id}")
            if op_cost[s.id]:
                obj[idx] = op_cost[s.id]
    for t in range(T - 1):
        for s in shelters:
            model.add_constraint({y[t + 1, s.id]: 1.0, y[t, s.id]: -1.0}, "<=", 0.0,
                                 f"noreopen_{t}_{s.id}")
    for t in range(1, T):
        need = len(ward.present(t))
        if need:
            model.add_constraint({y[t, s.id]: float(s.capacity) for s in shelters}, ">=",
                                 float(need), f"cover_{t}")
    model.set_objective(obj)
    return model


def run_binpack(instance: Instance, params: CostParams, backend=None, phase2_backend=None,
                formulation="auto"):
    """Fix the operating plan by bin packing, then route evacuees through it.

    Phase 1 ignores movement; phase 2 minimises movement cost with the
    operating plan fixed. ``phase2_backend`` defaults to ``backend``.
    """
    backend = default_backend(backend)
    phase2_backend = phase2_backend if phase2_backend is not None else backend
    start = time.perf_counter()
    T = instance.horizon
    parts, wards = [], []
    total = 0.0
    for ward in instance.wards:
        if not ward.evacuees:
            continue
        _check_capacity(ward, "binpack")
        name = model_name(instance, ward.id, "binpack")
        ymodel = build_binpack_y(ward, T, op_costs(instance, ward), name=f"{name}_y")
        ysol = solve_checked(backend, ymodel, f"ward {ward.id} binpack phase 1")
        fixed = {(t, s.id) for t in range(T) for s in ward.shelters
                 if ysol.value(ymodel, f"y_{t}_{s.id}") > 0.5}
        build, decode = FORMULATIONS[pick_formulation(ward, T, formulation)]
        xmodel = build(ward, T, params, op_costs(instance, ward), fixed_open=fixed, name=name)
        xsol = solve_checked(phase2_backend, xmodel, f"ward {ward.id} binpack phase 2")
        parts.append(decode(xmodel, xsol, ward, T, fixed_open=fixed))
        statuses = {ysol.status.value, xsol.status.value}
        wards.append(WardSolve(
            ward.id, "optimal" if statuses == {"optimal"} else (statuses - {"optimal"}).pop(),
            ysol.objective + xsol.objective, ysol.bound + xsol.bound, ysol.nodes + xsol.nodes,
            ysol.wall_time + xsol.wall_time, 2, xmodel.num_vars))
        total += xsol.objective
    return finish("binpack", instance, params, parts, wards, start, phase2_backend, total,
                  ("evacuation", "relocation"))
