"""The time-expanded shelter model, per evacuee and per return-time cohort."""

import time

from essp.costs import CostParams, distance_matrix
from essp.milp import INTEGER, MilpModel
from essp.model import Instance, Schedule, WardInstance
from essp.formulations.common import (
    ALL_TERMS,
    default_backend,
    finish,
    model_name,
    op_costs,
    record,
    solve_checked,
)

# per-evacuee models above this many variables are solved in cohort form
DISAGGREGATED_LIMIT = 200


def disaggregated_size(ward: WardInstance, T: int) -> int:
    S = len(ward.shelters)
    per_evacuee = sum(e.return_time * S + S + (e.return_time - 1) * S * (S - 1)
                      for e in ward.evacuees)
    return per_evacuee + T * S


def _y_block(model, shelters, T, costs, obj, fixed_open):
    """Operating indicators and no-reopen rows; returns (t, m) -> index."""
    y = {}
    if fixed_open is not None:
        return y
    for t in range(T):
        for s in shelters:
            y[t, s.id] = model.add_var(f"y_{t}_{s.id}")
            if costs[s.id]:
                obj[y[t, s.id]] = costs[s.id]
    for t in range(T - 1):
        for s in shelters:
            model.add_constraint({y[t + 1, s.id]: 1.0, y[t, s.id]: -1.0}, "<=", 0.0,
                                 f"noreopen_{t}_{s.id}")
    return y


def _capacity_rows(model, shelters, T, occupancy, y, fixed_open):
    for t in range(1, T):
        for s in shelters:
            terms = dict(occupancy.get((t, s.id), {}))
            if fixed_open is None:
                terms[y[t, s.id]] = -float(s.capacity)
                rhs = 0.0
            else:
                rhs = float(s.capacity) if (t, s.id) in fixed_open else 0.0
                if not terms:
                    continue
            model.add_constraint(terms, "<=", rhs, f"cap_{t}_{s.id}")


def build_opt(ward: WardInstance, T: int, params: CostParams, op_cost, fixed_open=None,
              name=None) -> MilpModel:
    """Linearised 0-1 model of one ward.

    Variables ``x_t_m_n`` (position at step t), ``y_t_m`` (shelter operated at
    step t) and ``z_t_m_mp_n`` (move m -> mp between steps t and t+1). Moves
    that stay put cost nothing and get no ``z``. ``op_cost`` maps shelter id
    to its per-step objective cost. With ``fixed_open`` (a set of operated
    ``(t, m)`` pairs) the operating decisions are constants and the objective
    is movement cost only.
    """
    shelters = list(ward.shelters)
    sid = [s.id for s in shelters]
    evacuees = sorted(ward.evacuees, key=lambda e: e.id)
    origins = [ward.location_by_id[e.origin] for e in evacuees]
    d0 = distance_matrix(origins, shelters)
    ds = distance_matrix(shelters, shelters)
    model = MilpModel(name or f"opt_{ward.id}")
    obj = {}

    x = {}
    for e in evacuees:
        for t in range(1, e.return_time + 1):
            for m in sid:
                x[t, m, e.id] = model.add_var(f"x_{t}_{m}_{e.id}")
    y = _y_block(model, shelters, T, op_cost, obj, fixed_open)

    evac_rate = params.rate(0)
    for i, e in enumerate(evacuees):
        o = e.origin
        n = e.id
        for j, m in enumerate(sid):
            if m == o:
                continue
            z = model.add_var(f"z_0_{o}_{m}_{n}")
            if d0[i, j]:
                obj[z] = evac_rate * d0[i, j]
            # x_0 is fixed at the origin, so z >= x_0 + x_1 - 1 reads z >= x_1
            model.add_constraint({z: 1.0, x[1, m, n]: -1.0}, ">=", 0.0, f"zlo_0_{m}_{n}")
            model.add_constraint({z: 1.0, x[1, m, n]: -1.0}, "<=", 0.0, f"zhi1_0_{m}_{n}")
        for t in range(1, e.return_time):
            rate = params.rate(t)
            for j, m in enumerate(sid):
                for k, mp in enumerate(sid):
                    if m == mp:
                        continue
                    z = model.add_var(f"z_{t}_{m}_{mp}_{n}")
                    if ds[j, k]:
                        obj[z] = rate * ds[j, k]
                    a, b = x[t, m, n], x[t + 1, mp, n]
                    model.add_constraint({z: 1.0, a: -1.0, b: -1.0}, ">=", -1.0,
                                         f"zlo_{t}_{m}_{mp}_{n}")
                    model.add_constraint({z: 1.0, a: -1.0}, "<=", 0.0, f"zhi0_{t}_{m}_{mp}_{n}")
                    model.add_constraint({z: 1.0, b: -1.0}, "<=", 0.0, f"zhi1_{t}_{m}_{mp}_{n}")
        for t in range(1, e.return_time + 1):
            model.add_constraint({x[t, m, n]: 1.0 for m in sid}, "=", 1.0, f"assign_{t}_{n}")

    occupancy = {}
    for (t, m, n), idx in x.items():
        occupancy.setdefault((t, m), {})[idx] = 1.0
    _capacity_rows(model, shelters, T, occupancy, y, fixed_open)
    model.set_objective(obj)
    return model


def decode_opt(model, sol, ward: WardInstance, T: int, fixed_open=None) -> Schedule:
    sid = [s.id for s in ward.shelters]
    paths = {}
    for e in sorted(ward.evacuees, key=lambda e: e.id):
        path = []
        for t in range(1, e.return_time + 1):
            path.append(next(m for m in sid if sol.value(model, f"x_{t}_{m}_{e.id}") > 0.5))
        paths[e.id] = tuple(path)
    return Schedule(paths, _open_steps(model, sol, sid, T, fixed_open))


def _open_steps(model, sol, sid, T, fixed_open):
    steps = {}
    for m in sid:
        if fixed_open is not None:
            on = [t for t in range(T) if (t, m) in fixed_open]
        else:
            on = [t for t in range(T) if sol.value(model, f"y_{t}_{m}") > 0.5]
        if on:
            steps[m] = tuple(on)
    return steps


def cohorts(ward: WardInstance):
    """Return time -> evacuee ids (sorted) for every non-empty cohort."""
    out: dict[int, list[int]] = {}
    for e in sorted(ward.evacuees, key=lambda e: e.id):
        out.setdefault(e.return_time, []).append(e.id)
    return dict(sorted(out.items()))


def build_opt_aggregated(ward: WardInstance, T: int, params: CostParams, op_cost,
                         fixed_open=None, name=None) -> MilpModel:
    """Cohort-flow form of :func:`build_opt` with the same optimal value.

    Evacuees sharing a return time and a location are interchangeable, so
    after the first move only cohort head-counts matter. ``x_1_m_n`` keeps the
    individual first move (origins differ); ``w_t_m_mp_tau`` counts members of
    cohort ``tau`` moving from ``m`` at step ``t`` to ``mp`` at ``t + 1``.
    """
    shelters = list(ward.shelters)
    sid = [s.id for s in shelters]
    evacuees = sorted(ward.evacuees, key=lambda e: e.id)
    origins = [ward.location_by_id[e.origin] for e in evacuees]
    d0 = distance_matrix(origins, shelters)
    ds = distance_matrix(shelters, shelters)
    model = MilpModel(name or f"opt_agg_{ward.id}")
    obj = {}

    x1 = {}
    evac_rate = params.rate(0)
    for i, e in enumerate(evacuees):
        for j, m in enumerate(sid):
            x1[m, e.id] = idx = model.add_var(f"x_1_{m}_{e.id}")
            if d0[i, j]:
                obj[idx] = evac_rate * d0[i, j]
        model.add_constraint({x1[m, e.id]: 1.0 for m in sid}, "=", 1.0, f"assign_1_{e.id}")
    y = _y_block(model, shelters, T, op_cost, obj, fixed_open)

    occupancy = {}
    for tau, members in cohorts(ward).items():
        size = len(members)
        inflow = {m: {x1[m, n]: 1.0 for n in members} for m in sid}
        for m in sid:
            occupancy.setdefault((1, m), {}).update(inflow[m])
        for t in range(1, tau):
            rate = params.rate(t)
            w = {}
            for j, m in enumerate(sid):
                for k, mp in enumerate(sid):
                    w[m, mp] = idx = model.add_var(f"w_{t}_{m}_{mp}_{tau}", INTEGER, 0, size)
                    if ds[j, k]:
                        obj[idx] = rate * ds[j, k]
            for m in sid:
                terms = {w[m, mp]: 1.0 for mp in sid}
                for idx, a in inflow[m].items():
                    terms[idx] = terms.get(idx, 0.0) - a
                model.add_constraint(terms, "=", 0.0, f"flow_{t}_{m}_{tau}")
            inflow = {mp: {w[m, mp]: 1.0 for m in sid} for mp in sid}
            for mp in sid:
                occupancy.setdefault((t + 1, mp), {}).update(inflow[mp])
    _capacity_rows(model, shelters, T, occupancy, y, fixed_open)
    model.set_objective(obj)
    return model


def decode_opt_aggregated(model, sol, ward: WardInstance, T: int, fixed_open=None) -> Schedule:
    sid = [s.id for s in ward.shelters]
    paths: dict[int, list[int]] = {}
    for tau, members in cohorts(ward).items():
        groups = {m: [] for m in sid}
        for n in members:
            m = next(m for m in sid if sol.value(model, f"x_1_{m}_{n}") > 0.5)
            groups[m].append(n)
            paths[n] = [m]
        for t in range(1, tau):
            nxt = {m: [] for m in sid}
            for m in sid:
                queue = list(groups[m])
                for mp in sid:
                    k = int(round(sol.value(model, f"w_{t}_{m}_{mp}_{tau}")))
                    moved, queue = queue[:k], queue[k:]
                    nxt[mp].extend(moved)
                    for n in moved:
                        paths[n].append(mp)
                if queue:
                    raise ValueError(f"cohort {tau} flow out of shelter {m} at t={t} is unbalanced")
            groups = {m: sorted(v) for m, v in nxt.items()}
    return Schedule({n: tuple(p) for n, p in sorted(paths.items())},
                    _open_steps(model, sol, sid, T, fixed_open))


FORMULATIONS = {
    "disaggregated": (build_opt, decode_opt),
    "aggregated": (build_opt_aggregated, decode_opt_aggregated),
}


def pick_formulation(ward, T, formulation="auto", limit=DISAGGREGATED_LIMIT):
    if formulation == "auto":
        return "disaggregated" if disaggregated_size(ward, T) <= limit else "aggregated"
    if formulation not in FORMULATIONS:
        raise ValueError(f"unknown formulation {formulation!r}")
    return formulation


def run_opt(instance: Instance, params: CostParams, backend=None, formulation="auto"):
    """Optimal schedule, ward by ward."""
    backend = default_backend(backend)
    start = time.perf_counter()
    T = instance.horizon
    parts, wards = [], []
    total = 0.0
    for ward in instance.wards:
        if not ward.evacuees:
            continue
        form = pick_formulation(ward, T, formulation)
        build, decode = FORMULATIONS[form]
        model = build(ward, T, params, op_costs(instance, ward),
                      name=model_name(instance, ward.id, "opt"))
        sol = solve_checked(backend, model, f"ward {ward.id} opt")
        parts.append(decode(model, sol, ward, T))
        wards.append(record(ward.id, sol, model))
        total += sol.objective
    return finish("opt", instance, params, parts, wards, start, backend, total, ALL_TERMS)
