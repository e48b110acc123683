"""Exhaustive reference solvers for tiny instances."""

import itertools

import numpy as np

from essp.costs import distance_matrix
from essp.model import Schedule


def _states(k, S):
    return np.array(list(itertools.product(range(S), repeat=k)), dtype=np.int64).reshape(-1, k)


def ward_optimum(instance, ward, params, op_cost=None, fixed_open=None):
    """Minimum objective of one ward over every operating plan and every path.

    For each ``open_until`` vector the paths are optimised by dynamic
    programming over the joint positions of the evacuees present at each step,
    which is exact because the cost of a step only depends on consecutive
    joint positions.
    """
    T = instance.horizon
    shelters = list(ward.shelters)
    S = len(shelters)
    evacuees = sorted(ward.evacuees, key=lambda e: e.id)
    if op_cost is None:
        op_cost = {s.id: instance.objective_op_cost(s) for s in shelters}
    cap = np.array([s.capacity for s in shelters])
    f = np.array([op_cost[s.id] for s in shelters])
    d0 = distance_matrix([ward.location_by_id[e.origin] for e in evacuees], shelters)
    ds = distance_matrix(shelters, shelters)
    present = [[i for i, e in enumerate(evacuees) if e.return_time >= t] for t in range(T + 1)]
    states = {t: _states(len(present[t]), S) for t in range(1, T) if present[t]}

    first = states[1]
    evac = params.rate(0) * d0[present[1], :][np.arange(len(present[1]))[None, :], first].sum(axis=1) \
        if len(present[1]) else np.zeros(1)
    trans = {}
    for t in range(1, T - 1):
        if not present[t + 1]:
            break
        keep = [present[t].index(i) for i in present[t + 1]]
        a = states[t][:, keep]
        b = states[t + 1]
        trans[t] = params.rate(t) * ds[a[:, None, :], b[None, :, :]].sum(axis=2)

    counts = {t: np.stack([(st == j).sum(axis=1) for j in range(S)], axis=1) for t, st in states.items()}
    best = np.inf
    plans = itertools.product(range(-1, T), repeat=S)
    if fixed_open is not None:
        last = tuple(max([t for t in range(T) if (t, s.id) in fixed_open], default=-1) for s in shelters)
        plans = [last]
    for last in plans:
        last = np.array(last)
        op = float((f * (last + 1)).sum()) if fixed_open is None else 0.0
        if op >= best:
            continue
        V = None
        for t in sorted(states):
            limit = np.where(last >= min(t, T - 1), cap, 0)
            ok = (counts[t] <= limit).all(axis=1)
            if t == 1:
                V = np.where(ok, evac, np.inf)
            else:
                V = np.where(ok, (V[:, None] + trans[t - 1]).min(axis=0), np.inf)
        best = min(best, op + float(V.min()))
    return best


def instance_optimum(instance, params):
    return sum(ward_optimum(instance, w, params) for w in instance.wards if w.evacuees)


def enumerate_schedules(instance, ward):
    """Every (paths, open_until) pair of one ward, feasible or not (tiny cases only)."""
    T = instance.horizon
    sid = [s.id for s in ward.shelters]
    evacuees = sorted(ward.evacuees, key=lambda e: e.id)
    path_sets = [list(itertools.product(sid, repeat=e.return_time)) for e in evacuees]
    for last in itertools.product(range(-1, T), repeat=len(sid)):
        open_until = {m: l for m, l in zip(sid, last) if l >= 0}
        for paths in itertools.product(*path_sets):
            yield Schedule.from_open_until({e.id: p for e, p in zip(evacuees, paths)}, open_until)
