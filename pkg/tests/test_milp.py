import itertools
import math

import numpy as np
import pytest

from builders import make_instance
from essp.costs import CostParams
from essp.formulations import build_opt
from essp.formulations.common import op_costs
from essp.milp import (BINARY, INTEGER, BuiltinBackend, ExternalBackend, ExternalSolvePending,
                       Limits, LpParseError, MalformedModelError, MilpModel, ModelTooLargeError,
                       SolutionImportError, Status, UnboundedRelaxationError, export_lp,
                       format_solution, import_solution, make_backend, parse_lp, solve_builtin)
from essp.milp import _kernels
from essp.milp.simplex import solve_lp


def one_var(lo_rhs=1.0):
    m = MilpModel("one")
    x = m.add_var("x")
    m.set_objective({x: 1.0})
    m.add_constraint({x: 1.0}, ">=", lo_rhs, name="low")
    return m


def test_trivial_optimum():
    sol = solve_builtin(one_var())
    assert sol.status == Status.OPTIMAL and sol.objective == 1 and sol.x.tolist() == [1.0]


def test_infeasible_binary():
    m = one_var()
    m.add_constraint({0: 1.0}, "<=", 0.0, name="high")
    assert solve_builtin(m).status == Status.INFEASIBLE


def test_unbounded_relaxation_reported():
    m = MilpModel("unb")
    x = m.add_var("x", INTEGER, 0.0, math.inf)
    m.set_objective({x: -1.0})
    with pytest.raises(UnboundedRelaxationError):
        solve_builtin(m)


def test_malformed_models_rejected():
    m = MilpModel()
    with pytest.raises(MalformedModelError):
        solve_builtin(m)
    m.add_var("x")
    with pytest.raises(MalformedModelError):
        m.add_var("x")
    with pytest.raises(MalformedModelError):
        m.add_var("bad name")
    with pytest.raises(MalformedModelError):
        m.add_var("b", BINARY, 0.0, 2.0)
    with pytest.raises(MalformedModelError):
        m.add_constraint({5: 1.0}, "<=", 1.0)
    with pytest.raises(MalformedModelError):
        m.add_constraint({0: 1.0}, "<>", 1.0)


def random_model(seed, k=None, integer=False):
    rng = np.random.default_rng(seed)
    k = k or int(rng.integers(1, 11))
    m = MilpModel(f"r{seed}")
    for i in range(k):
        if integer and i % 2:
            m.add_var(f"g{i}", INTEGER, 0.0, 3.0)
        else:
            m.add_var(f"b{i}")
    m.set_objective({i: float(rng.integers(-9, 10)) for i in range(k)})
    for r in range(int(rng.integers(1, 7))):
        m.add_constraint({i: float(rng.integers(-3, 4)) for i in range(k)},
                         ("<=", ">=", "=")[int(rng.integers(0, 3)) if r == 0 else int(rng.integers(0, 2))],
                         float(rng.integers(-2, 5)), name=f"c{r}")
    return m


def brute_force(m):
    ranges = [range(int(v.lower), int(v.upper) + 1) for v in m.variables]
    best = None
    for combo in itertools.product(*ranges):
        x = np.array(combo, dtype=float)
        if not m.check(x):
            val = m.evaluate(x)
            best = val if best is None else min(best, val)
    return best


@pytest.mark.parametrize("seed", range(60))
def test_matches_enumeration_with_general_integers(seed):
    m = random_model(seed, integer=True)
    sol = solve_builtin(m, trace=True)
    best = brute_force(m)
    if best is None:
        assert sol.status == Status.INFEASIBLE
        return
    assert sol.status == Status.OPTIMAL and sol.objective == pytest.approx(best, abs=1e-6)
    assert m.check(sol.x) == []
    assert m.evaluate(sol.x) == pytest.approx(sol.objective, abs=1e-6)
    for rec in sol.trace:
        assert rec.global_bound <= best + 1e-6 <= rec.incumbent + 2e-6


def test_deterministic():
    m = random_model(11, k=10)
    a, b = solve_builtin(m), solve_builtin(m)
    assert a.status == b.status and a.objective == b.objective and np.array_equal(a.x, b.x)
    assert a.nodes == b.nodes


def test_fixed_integers_reduce_to_evaluation():
    m = random_model(3, k=6)
    x = np.zeros(6)
    for v in m.variables:
        v_idx = m.index(v.name)
        m.variables[v_idx] = type(v)(v.name, v.kind, 0.0, 0.0)
    sol = solve_builtin(m)
    if m.check(x):
        assert sol.status == Status.INFEASIBLE
    else:
        assert sol.objective == m.evaluate(x) and sol.nodes == 1


def test_node_limit_keeps_bound_below_incumbent():
    inst = make_instance([(0, 0, 2, 3.0), (4, 0, 2, 1.0), (2, 3, 3, 2.0)],
                         [(1, 1, 1), (3, 1, 2), (2, 2, 2), (0, 3, 3)], lam=0.5)
    ward = inst.wards[0]
    model = build_opt(ward, inst.horizon, CostParams.for_instance(inst), op_costs(inst, ward))
    full = solve_builtin(model)
    for nodes in (1, 3, 8):
        sol = solve_builtin(model, Limits(nodes=nodes))
        if sol.status == Status.TIMED_OUT:
            assert sol.bound <= full.objective + 1e-6
            if sol.x is not None:
                assert sol.bound <= sol.objective and sol.gap >= 0
        else:
            assert sol.objective == pytest.approx(full.objective)


def test_numpy_and_jit_kernels_agree():
    for seed in range(30):
        m = random_model(seed, k=8)
        c = m.objective_vector()
        A, senses, b = m.dense_constraints()
        lb, ub = m.bounds()
        r1 = solve_lp(c, A, senses, b, lb, ub, kernel=_kernels.iterate_numpy)
        r2 = solve_lp(c, A, senses, b, lb, ub, kernel=_kernels.iterate_jit)
        assert r1.status == r2.status
        if r1.status == "optimal":
            assert r1.objective == pytest.approx(r2.objective, abs=1e-9)
        a = solve_builtin(m, kernel=_kernels.iterate_numpy)
        z = solve_builtin(m, kernel=_kernels.iterate_jit)
        assert a.status == z.status and a.objective == pytest.approx(z.objective)


def test_dantzig_rule_same_optimum():
    for seed in range(20):
        m = random_model(seed)
        a = solve_builtin(m)
        z = solve_builtin(m, rule=_kernels.RULE_DANTZIG)
        assert a.status == z.status and a.objective == pytest.approx(z.objective)


def test_lp_relaxation_values():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6  -> (1.6, 1.2), value 2.8
    res = solve_lp([-1.0, -1.0], [[1, 2], [3, 1]], [-1, -1], [4, 6], [0, 0], [np.inf, np.inf])
    assert res.status == "optimal" and res.objective == pytest.approx(-2.8)
    assert res.x == pytest.approx([1.6, 1.2])


def tiny_opt_model():
    inst = make_instance([(0, 0, 2, 3.0), (4, 0, 2, 1.0)], [(1, 1, 1), (3, 1, 2)], lam=0.5)
    ward = inst.wards[0]
    return build_opt(ward, inst.horizon, CostParams.for_instance(inst), op_costs(inst, ward),
                     name="tiny_1_opt")


def test_export_contains_sections_and_is_deterministic():
    m = one_var()
    text = export_lp(m)
    assert "Binaries\nx\n" in text and text.startswith("\\ Model one")
    big = tiny_opt_model()
    assert export_lp(big) == export_lp(tiny_opt_model())
    for section in ("Minimize", "Subject To", "Binaries", "End"):
        assert section in export_lp(big)


def test_export_general_bounds():
    m = MilpModel("g")
    m.add_var("w_1_0_1_2", INTEGER, 0.0, 4.0)
    m.add_var("u", INTEGER, 1.0, math.inf)
    m.set_objective({0: 1.0, 1: 2.0}, constant=3.0)
    text = export_lp(m)
    assert " 0 <= w_1_0_1_2 <= 4" in text and " u >= 1" in text and "Generals" in text
    back = parse_lp(text)
    assert [(v.name, v.kind, v.lower, v.upper) for v in back.variables] == \
        [(v.name, v.kind, v.lower, v.upper) for v in m.variables]
    assert back.objective_constant == 3.0


def canonical(m):
    """Model contents keyed by names, independent of declaration order."""
    names = [v.name for v in m.variables]
    variables = sorted((v.name, v.kind, v.lower, v.upper) for v in m.variables)
    objective = sorted((names[i], a) for i, a in m.objective.items())
    rows = sorted((c.name, c.sense, c.rhs, tuple(sorted(zip((names[i] for i in c.index), c.coef))))
                  for c in m.constraints)
    return variables, objective, rows, m.objective_constant


def test_round_trip_through_parser():
    m = tiny_opt_model()
    back = parse_lp(export_lp(m), name=m.name)
    assert canonical(back) == canonical(m)
    assert solve_builtin(back).objective == pytest.approx(solve_builtin(m).objective)


def test_parse_errors():
    with pytest.raises(LpParseError):
        parse_lp("Minimize\n obj: x\nSubject To\n c1: x >=\nEnd\n")


def test_highs_reads_exported_model(tmp_path):
    highspy = pytest.importorskip("highspy")
    m = tiny_opt_model()
    path = tmp_path / "tiny.lp"
    path.write_text(export_lp(m))
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    h.run()
    assert h.getInfo().objective_function_value == pytest.approx(solve_builtin(m).objective)


def test_import_own_solution():
    m = tiny_opt_model()
    sol = solve_builtin(m)
    back = import_solution(m, format_solution(m, sol.x))
    assert back.status == Status.FEASIBLE and back.objective == pytest.approx(sol.objective)


def test_import_omitted_zero_variable():
    m = tiny_opt_model()
    sol = solve_builtin(m)
    text = "".join(f"{v.name} {int(x)}\n" for v, x in zip(m.variables, sol.x) if x != 0)
    assert import_solution(m, text).objective == pytest.approx(sol.objective)


def test_import_rejects_violation_and_unknown_names():
    m = one_var()
    with pytest.raises(SolutionImportError, match="low"):
        import_solution(m, "x 0\n")
    with pytest.raises(SolutionImportError, match="line 2: unknown variable 'y'"):
        import_solution(m, "x 1\ny 1\n")
    with pytest.raises(SolutionImportError, match="line 1"):
        import_solution(m, "x one\n")


def test_builtin_size_guard():
    with pytest.raises(ModelTooLargeError):
        BuiltinBackend(max_vars=3).solve(tiny_opt_model())


def test_external_manual_mode(tmp_path):
    m = tiny_opt_model()
    backend = ExternalBackend(tmp_path / "lp", solutions_dir=tmp_path / "sol")
    with pytest.raises(ExternalSolvePending) as exc:
        backend.solve(m)
    assert exc.value.lp_path.read_text() == export_lp(m)
    sol = solve_builtin(m)
    (tmp_path / "sol").mkdir()
    (tmp_path / "sol" / "tiny_1_opt.sol").write_text(format_solution(m, sol.x))
    got = backend.solve(m)
    assert got.status == Status.FEASIBLE and got.objective == pytest.approx(sol.objective)


def test_external_command_mode(tmp_path):
    pytest.importorskip("highspy")
    import sys
    from pathlib import Path
    script = Path(__file__).resolve().parents[1] / "scripts" / "highs_solve.py"
    m = tiny_opt_model()
    backend = make_backend("external", workdir=tmp_path, command=f"{sys.executable} {script} {{lp}} {{sol}}")
    got = backend.solve(m)
    assert got.objective == pytest.approx(solve_builtin(m).objective)
    infeasible = one_var()
    infeasible.add_constraint({0: 1.0}, "<=", 0.0, name="high")
    assert backend.solve(infeasible).status == Status.INFEASIBLE
