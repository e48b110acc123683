from dataclasses import replace
import itertools

import numpy as np
import pytest

from builders import make_instance
from oracles import ward_optimum
from essp.costs import CostParams, evaluate_schedule
from essp.datagen import SyntheticParams, generate_hanshin, generate_synthetic, load_config
from essp.formulations import (FlpSnapshot, merge_results, InfeasibleFlpError, build_binpack_y, build_flp,
                               build_opt, build_opt_aggregated, disaggregated_size, run_binpack,
                               run_method, run_nomove, run_opt, run_seqflp, split_wards,
                               SolveFailedError)
from essp.formulations.common import op_costs
from essp.formulations.opt import pick_formulation
from essp.io import schedule_to_dict
from essp.milp import BuiltinBackend, Status, solve_builtin
from essp.model import Location, Schedule, validate_schedule


def snapshot(current, shelters, t=0, lam=1.0, alpha=1.0):
    locs = [Location(100 + i, 1, c) for i, c in enumerate(current)]
    sh = [Location(i, 1, c, cap) for i, (c, cap, _) in enumerate(shelters)]
    costs = {i: f for i, (_, _, f) in enumerate(shelters)}
    return FlpSnapshot(t, tuple(range(len(locs))), tuple(locs), tuple(sh), CostParams(lam, alpha), costs)


def flp_values(snap):
    model = build_flp(snap)
    sol = solve_builtin(model)
    assert sol.status == Status.OPTIMAL
    return model, sol, {k: round(v) for k, v in sol.values(model).items()}


def test_flp_nearest_assignment():
    # evacuee 0 next to shelter 1, evacuee 1 next to shelter 0
    snap = snapshot([(9, 0), (1, 0)], [((0, 0), 1, 1.0), ((10, 0), 1, 1.0)])
    model, sol, v = flp_values(snap)
    assert v["x_1_0"] == 1 and v["x_0_1"] == 1
    assignments = [(a, b) for a, b in itertools.permutations((0, 1))]
    costs = [abs(9 - 10 * a) + abs(1 - 10 * b) + 2 for a, b in assignments]
    assert sol.objective == pytest.approx(min(costs))


def test_flp_single_forced():
    model, sol, v = flp_values(snapshot([(1, 1)], [((0, 0), 1, 5.0)]))
    assert v == {"x_0_0": 1, "y_0": 1}


def test_flp_consolidates_when_operation_dominates():
    snap = snapshot([(0, 0), (4, 0)], [((0, 0), 2, 1000.0), ((4, 0), 2, 1000.0)])
    model, sol, v = flp_values(snap)
    assert v["y_0"] + v["y_1"] == 1
    assert sol.objective == pytest.approx(1000 + 4)


def test_flp_capacity_checked_before_solving():
    with pytest.raises(InfeasibleFlpError, match="2 evacuees but only 1"):
        build_flp(snapshot([(0, 0), (1, 1)], [((0, 0), 1, 1.0)]))


def test_flp_snapshot_rejects_mixed_wards():
    with pytest.raises(ValueError):
        FlpSnapshot(0, (0,), (Location(9, 2, (0, 0)),), (Location(0, 1, (0, 0), 1),),
                    CostParams(1.0), {0: 1.0})


def test_seqflp_single_shelter():
    inst = make_instance([(0, 0, 5, 1.0)], [(1, 1, 1), (2, 2, 3), (3, 1, 2)])
    res = run_seqflp(inst, CostParams.for_instance(inst))
    assert set(m for p in res.schedule.paths.values() for m in p) == {0}
    assert res.schedule.open_until == {0: 3}
    assert validate_schedule(inst, res.schedule) == []


def myopia_instance():
    # greedy sends evacuee 2 to the nearer shelter 0 at t=0 and has to move it
    # once evacuee 1 leaves and shelter 1 can take everyone
    return make_instance([(3, 0, 2, 5.8), (1, 2, 2, 2.3)],
                         [(0, 3, 3), (1, 3, 2), (0, 0, 3)], lam=1.0, alpha=1.0)


def test_myopia_witness():
    inst = myopia_instance()
    params = CostParams.for_instance(inst)
    seq = run_seqflp(inst, params)
    opt = run_opt(inst, params)
    assert seq.costs.relocation_count == 1 and opt.costs.relocation_count == 0
    assert opt.costs.objective < seq.costs.objective - 0.5
    assert opt.costs.objective == pytest.approx(ward_optimum(inst, inst.wards[0], params))


def test_myopia_strict_gap_exists():
    # across random tiny instances the sequential procedure is sometimes strictly worse
    gaps = []
    for seed in range(40):
        try:
            inst = generate_synthetic(SyntheticParams(shelters=3, evacuees=4, horizon=4, lam=1.0), seed)
        except Exception:
            continue
        params = CostParams.for_instance(inst)
        gaps.append(run_seqflp(inst, params).costs.objective - run_opt(inst, params).costs.objective)
    assert min(gaps) >= -1e-9 and max(gaps) > 1e-6


def test_opt_single_evacuee_path_enumeration():
    inst = make_instance([(0, 0, 1, 5.0), (3, 0, 1, 1.0)], [(0, 0, 2)], lam=1.0, alpha=2.0)
    params = CostParams.for_instance(inst)
    best = np.inf
    for path in itertools.product((0, 1), repeat=2):
        last = {m: max([k + 1 for k, p in enumerate(path) if p == m], default=-1) for m in (0, 1)}
        # each shelter stays open through its last use
        s = Schedule.from_open_until({0: path}, {m: l for m, l in last.items() if l >= 0})
        if not validate_schedule(inst, s):
            best = min(best, evaluate_schedule(inst, s, params).objective)
    res = run_opt(inst, params)
    assert res.costs.objective == pytest.approx(best)
    assert res.solver_objective == pytest.approx(best)


def small_instances(n, seed0=0, **kw):
    out = []
    seed = seed0
    while len(out) < n:
        try:
            out.append(generate_synthetic(SyntheticParams(**kw), seed))
        except Exception:
            pass
        seed += 1
    return out


def test_small_lambda_matches_binpack_operation():
    for inst in small_instances(5, shelters=3, evacuees=5, horizon=4, op_cost=(1.0, 5.0)):
        params = CostParams(1e-6, inst.alpha)
        opt = run_opt(inst, params)
        ward = inst.wards[0]
        ysol = solve_builtin(build_binpack_y(ward, inst.horizon, op_costs(inst, ward)))
        assert opt.costs.operation_cost == pytest.approx(ysol.objective, rel=1e-6)
        assert run_binpack(inst, params).costs.operation_cost == pytest.approx(ysol.objective)


def test_zero_operation_cost_equals_nomove_movement():
    for inst in small_instances(5, shelters=3, evacuees=5, horizon=4, op_cost=(0.0, 0.0)):
        params = CostParams.for_instance(inst)
        opt = run_opt(inst, params)
        nomove = run_nomove(inst, params)
        assert opt.costs.objective == pytest.approx(nomove.costs.evacuation_cost)
        assert opt.costs.objective == pytest.approx(ward_optimum(inst, inst.wards[0], params))


def test_nomove_never_relocates():
    inst = generate_hanshin(load_config().scaled(0.2), 1)
    res = run_nomove(inst, CostParams.for_instance(inst, 2500))
    assert res.costs.relocation_count == 0 and res.costs.relocation_cost == 0
    for path in res.schedule.paths.values():
        assert len(set(path)) == 1
    for m, last in res.schedule.open_until.items():
        assert last == max(len(p) for p in res.schedule.paths.values() if p[0] == m)


def test_single_shelter_ward_methods_coincide():
    inst = make_instance([(0, 0, 4, 0.0)], [(1, 1, 1), (2, 2, 3), (3, 1, 2)])
    params = CostParams.for_instance(inst)
    docs = {m: schedule_to_dict(run_method(m, inst, params).schedule) for m in
            ("opt", "nomove", "binpack", "seqflp")}
    assert docs["opt"] == docs["nomove"] == docs["binpack"] == docs["seqflp"]
    assert docs["binpack"]["open_until"] == [{"location": 0, "last_open_t": 3}]


def test_binpack_operation_minimal():
    for inst in small_instances(20, seed0=300, shelters=3, evacuees=5, horizon=4):
        params = CostParams.for_instance(inst)
        ops = {m: run_method(m, inst, params).costs.operation_cost
               for m in ("opt", "seqflp", "nomove", "binpack")}
        assert ops["binpack"] <= min(ops.values()) + 1e-9


def test_nomove_lexicographic_second_pass():
    # two equidistant shelters; only the second pass prefers the cheap one
    inst = make_instance([(0, 0, 2, 9.0), (2, 0, 2, 1.0)], [(1, 0, 1), (1, 0, 2)])
    params = CostParams.for_instance(inst)
    plain = run_nomove(inst, params)
    lex = run_nomove(inst, params, lexicographic=True)
    assert lex.costs.evacuation_cost == pytest.approx(plain.costs.evacuation_cost)
    assert lex.costs.operation_cost <= plain.costs.operation_cost
    assert set(lex.schedule.open_until) == {1}
    assert lex.solver_objective is None


def test_aggregated_equals_disaggregated():
    for inst in small_instances(10, seed0=500, shelters=3, evacuees=7, horizon=5):
        params = CostParams.for_instance(inst)
        a = run_opt(inst, params, formulation="aggregated")
        d = run_opt(inst, params, formulation="disaggregated")
        assert a.solver_objective == pytest.approx(d.solver_objective, rel=1e-9)
        assert a.costs.objective == pytest.approx(d.costs.objective, rel=1e-9)
        assert validate_schedule(inst, a.schedule) == []


def test_aggregated_single_cohort_hand_computation():
    inst = make_instance([(0, 0, 3, 2.0)], [(0, 1, 2), (0, 2, 2)], lam=1.0, alpha=10.0)
    ward = inst.wards[0]
    model = build_opt_aggregated(ward, inst.horizon, CostParams.for_instance(inst), op_costs(inst, ward))
    sol = solve_builtin(model)
    assert sol.objective == pytest.approx(10 * (1 + 2) + 2.0 * 3)


def test_aggregated_never_larger_on_hanshin_wards():
    inst = generate_hanshin(load_config(), 0)
    params = CostParams.for_instance(inst, 2500)
    for ward in inst.wards:
        if not ward.evacuees:
            continue
        agg = build_opt_aggregated(ward, inst.horizon, params, op_costs(inst, ward))
        assert agg.num_vars <= disaggregated_size(ward, inst.horizon)
    ward = inst.ward_by_id[4]
    dis = build_opt(ward, inst.horizon, params, op_costs(inst, ward))
    assert dis.num_vars == disaggregated_size(ward, inst.horizon)


def test_auto_formulation_threshold():
    inst = generate_hanshin(load_config(), 0)
    assert pick_formulation(inst.ward_by_id[1], inst.horizon) == "aggregated"
    tiny = make_instance([(0, 0, 2, 1.0)], [(0, 1, 1)])
    assert pick_formulation(tiny.wards[0], tiny.horizon) == "disaggregated"
    with pytest.raises(ValueError):
        pick_formulation(tiny.wards[0], tiny.horizon, "quadratic")


def test_alpha_monotone():
    for inst in small_instances(5, seed0=700, shelters=3, evacuees=4, horizon=4):
        values = [run_opt(inst, CostParams(inst.lam, a)).costs.objective for a in (1, 2, 5, 10, 20)]
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))


def test_dominance_on_small_instances():
    for inst in small_instances(10, seed0=900, wards=2, shelters=3, evacuees=4, horizon=4):
        params = CostParams.for_instance(inst)
        results = {m: run_method(m, inst, params) for m in ("opt", "seqflp", "nomove", "binpack")}
        opt = results["opt"].costs.objective
        for r in results.values():
            assert validate_schedule(inst, r.schedule) == []
            assert opt <= r.costs.objective + 1e-9
            if r.solver_mismatch() is not None:
                assert r.solver_mismatch() < 1e-9
        ev = min(r.costs.evacuation_cost for r in results.values())
        assert results["nomove"].costs.evacuation_cost == pytest.approx(ev)


def test_split_wards_and_merge():
    inst = small_instances(1, seed0=40, wards=3, shelters=2, evacuees=3, horizon=3)[0]
    params = CostParams.for_instance(inst)
    whole = run_opt(inst, params)
    parts = [run_opt(w, params) for w in split_wards(inst)]
    merged = merge_results(inst, params, parts)
    assert merged.costs.objective == pytest.approx(whole.costs.objective)
    assert merged.solver_objective == pytest.approx(whole.solver_objective)


def test_node_limit_reports_gap_or_fails_loudly():
    inst = generate_hanshin(load_config().scaled(0.2), 2)
    one = replace(inst, wards=(inst.ward_by_id[2],))
    params = CostParams.for_instance(one, 2500)
    res = run_opt(one, params, BuiltinBackend(node_limit=20))
    assert not res.all_optimal and res.statuses == {2: "timed_out"}
    assert 0 < res.gap < 1
    assert validate_schedule(one, res.schedule) == []
    with pytest.raises(SolveFailedError, match="timed_out"):
        run_opt(one, params, BuiltinBackend(node_limit=2))
