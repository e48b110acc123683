"""Solve a CPLEX LP file with HiGHS and write ``name value`` lines.

Usage: highs_solve.py MODEL.lp SOLUTION.sol [--time-limit S]

Meant as the external solver command, e.g.
    ESSP_SOLVER_COMMAND="python3 scripts/highs_solve.py {lp} {sol}"
Nothing is written when the model is infeasible or no solution was found.
"""

import argparse
import sys

import highspy


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("lp")
    ap.add_argument("sol")
    ap.add_argument("--time-limit", type=float, default=None)
    ap.add_argument("--gap", type=float, default=1e-9)
    args = ap.parse_args(argv)

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", args.gap)
    if args.time_limit is not None:
        h.setOptionValue("time_limit", args.time_limit)
    if h.readModel(args.lp) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.lp}", file=sys.stderr)
        return 2
    h.run()
    status = h.getModelStatus()
    info = h.getInfo()
    if info.primal_solution_status == 0:
        print(f"no solution: {h.modelStatusToString(status)}", file=sys.stderr)
        return 0
    values = h.getSolution().col_value
    lp = h.getLp()
    with open(args.sol, "w", encoding="utf-8") as fh:
        fh.write(f"# {h.modelStatusToString(status)} objective {info.objective_function_value!r}\n")
        for name, v in zip(lp.col_names_, values):
            v = round(v)
            if v:
                fh.write(f"{name} {v}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
