from essp.formulations.common import (
    ALL_TERMS,
    MethodResult,
    SolveFailedError,
    WardSolve,
    merge_results,
    split_wards,
)
from essp.formulations.flp import FlpSnapshot, InfeasibleFlpError, build_flp, run_seqflp
from essp.formulations.opt import (
    DISAGGREGATED_LIMIT,
    build_opt,
    build_opt_aggregated,
    decode_opt,
    decode_opt_aggregated,
    disaggregated_size,
    run_opt,
)
from essp.formulations.baselines import build_binpack_y, build_nomove, run_binpack, run_nomove

METHODS = {
    "opt": run_opt,
    "seqflp": run_seqflp,
    "nomove": run_nomove,
    "binpack": run_binpack,
}


def run_method(name, instance, params, backend=None, **kwargs):
    try:
        fn = METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None
    return fn(instance, params, backend, **kwargs)


__all__ = [
    "ALL_TERMS", "DISAGGREGATED_LIMIT", "METHODS", "FlpSnapshot", "InfeasibleFlpError",
    "MethodResult", "SolveFailedError", "WardSolve", "build_binpack_y", "build_flp",
    "build_nomove", "build_opt", "build_opt_aggregated", "decode_opt", "decode_opt_aggregated",
    "disaggregated_size", "merge_results", "run_binpack", "run_method", "run_nomove", "run_opt",
    "run_seqflp", "split_wards",
]
