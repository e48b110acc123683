#!/usr/bin/env python3
"""Simplex kernel timing: numba-compiled loop vs vectorised numpy.

Solves the LP relaxations of a few shelter models and the full branch and
bound of a reduced benchmark ward with each kernel, checks that the results
agree, and prints the timings.

Usage:
    python3 benchmarks/bench_simplex.py [--repeat N] [--seed S]

Set ESSP_DISABLE_JIT=1 to make the library itself use the numpy kernel.
"""

import argparse
import time

import numpy as np

from essp.costs import CostParams
from essp.datagen import generate_hanshin, load_config
from essp.formulations.common import op_costs
from essp.formulations.opt import build_opt, build_opt_aggregated
from essp.milp import _kernels
from essp.milp.bnb import solve_builtin
from essp.milp.simplex import solve_lp


def relaxation(model):
    A, senses, b = model.dense_constraints()
    lb, ub = model.bounds()
    return model.objective_vector(), A, senses, b, lb, ub


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    inst = generate_hanshin(load_config().scaled(0.2), args.seed)
    params = CostParams.for_instance(inst, 2500.0)
    ward = max(inst.wards, key=lambda w: len(w.evacuees))
    models = {
        "opt lp (per evacuee)": build_opt(ward, inst.horizon, params, op_costs(inst, ward)),
        "opt lp (cohorts)": build_opt_aggregated(ward, inst.horizon, params, op_costs(inst, ward)),
    }
    kernels = {"numba": _kernels.iterate_jit, "numpy": _kernels.iterate_numpy}
    if not _kernels.NUMBA_AVAILABLE:
        print("numba is not installed; both rows use the numpy kernel")

    # compile outside the timed region
    solve_lp(*relaxation(models["opt lp (cohorts)"]), kernel=kernels["numba"])

    print(f"ward {ward.id}: {len(ward.evacuees)} evacuees, {len(ward.shelters)} shelters")
    print(f"{'case':28s} {'vars':>6s} {'rows':>6s} {'numba s':>9s} {'numpy s':>9s} {'speedup':>8s}")
    for label, model in models.items():
        data = relaxation(model)
        t_jit, r_jit = best_of(lambda: solve_lp(*data, kernel=kernels["numba"]), args.repeat)
        t_np, r_np = best_of(lambda: solve_lp(*data, kernel=kernels["numpy"]), args.repeat)
        assert np.isclose(r_jit.objective, r_np.objective, rtol=1e-9), (r_jit.objective, r_np.objective)
        print(f"{label:28s} {model.num_vars:6d} {model.num_constraints:6d} "
              f"{t_jit:9.3f} {t_np:9.3f} {t_np / t_jit:8.1f}x")

    model = models["opt lp (cohorts)"]
    t_jit, s_jit = best_of(lambda: solve_builtin(model, kernel=kernels["numba"]), 1)
    t_np, s_np = best_of(lambda: solve_builtin(model, kernel=kernels["numpy"]), 1)
    assert np.isclose(s_jit.objective, s_np.objective, rtol=1e-9)
    print(f"{'branch and bound (cohorts)':28s} {model.num_vars:6d} {model.num_constraints:6d} "
          f"{t_jit:9.3f} {t_np:9.3f} {t_np / t_jit:8.1f}x   ({s_jit.nodes} nodes)")


if __name__ == "__main__":
    main()
