"""Command line front end.

    essp generate  --hanshin --seeds 0..9 --out train/
    essp solve     inst.json --method opt --lambda 2500 --out opt.json
    essp estimate  train/ --out est/
    essp compare   test/ --lambda 2500 --out table.csv
    essp report    --instance inst.json --results opt.json seqflp.json --out figs/

Exit codes: 0 when every requested solve reached its requested status, 1 when
a solve failed or fell short of it, 2 for usage and input errors, 3 when LP
files were written for an external solver and solutions are still missing.
CSV numbers are written with 6 significant digits.
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, replace
import math
from pathlib import Path
import sys

from essp import datagen, io
from essp.costs import CostParams, scaled_operation_cost
from essp.estimation import DEFAULT_GRID, EstimationConfig, estimate_lambda
from essp.formulations import METHODS, SolveFailedError, merge_results, run_method, split_wards
from essp.milp import (
    SOLVER_ENV,
    ExternalSolvePending,
    ModelTooLargeError,
    make_backend,
)
from essp.model import validate_instance, validate_schedule

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_PENDING = 0, 1, 2, 3
COMPARE_COLUMNS = ["method", "objective_k", "evac_k", "reloc_k", "reloc_count", "op_k",
                   "op_eq13_musd", "time_s"]
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


def parse_seeds(text):
    """``"0..9"``, ``"1,4,7"`` or a mix such as ``"0..3,10"``."""
    seeds = []
    for part in filter(None, (p.strip() for p in (text or "").split(","))):
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise UsageError(f"empty seed range {part!r}")
            seeds.extend(range(lo, hi + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("no seeds given")
    if len(set(seeds)) != len(seeds):
        raise UsageError(f"duplicate seeds in {text!r}")
    return seeds


def parse_grid(text):
    """``"250:5000:250"`` (inclusive) or a comma list."""
    if text is None:
        return DEFAULT_GRID
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        if step <= 0 or hi < lo:
            raise UsageError(f"bad grid {text!r}")
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return tuple(lo + k * step for k in range(n))
    return tuple(float(v) for v in text.split(",") if v.strip())


def load_instances(paths):
    out = []
    for p in map(Path, paths):
        files = sorted(f for f in p.glob("*.json") if f.name != MANIFEST) if p.is_dir() else [p]
        for f in files:
            try:
                out.append((f, io.load_instance(f)))
            except (OSError, ValueError, KeyError) as exc:
                raise UsageError(f"{f}: {exc}") from None
    if not out:
        raise UsageError(f"no instance files in {', '.join(map(str, paths))}")
    return out


def instance_hash(inst):
    return io.content_hash(io.instance_to_dict(inst))


# ---------------------------------------------------------------- backends

def add_backend_args(p):
    p.add_argument("--backend", choices=["builtin", "highs", "external"], default="builtin")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per MILP")
    p.add_argument("--node-limit", type=int, default=None, help="builtin only")
    p.add_argument("--builtin-max-vars", type=int, default=6000)
    p.add_argument("--workdir", type=Path, default=None, help="where LP files go (external)")
    p.add_argument("--solver-cmd", default=None,
                   help=f"command template with {{lp}} and {{sol}}; default ${SOLVER_ENV}")
    p.add_argument("--solutions", type=Path, default=None,
                   help="directory of <model>.sol files produced out of process")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def backend_from_args(args, default_workdir):
    if args.backend == "builtin":
        kw = {"max_vars": args.builtin_max_vars}
        if args.time_limit is not None:
            kw["time_limit"] = args.time_limit
        if args.node_limit is not None:
            kw["node_limit"] = args.node_limit
        return make_backend("builtin", **kw)
    if args.backend == "highs":
        return make_backend("highs", time_limit=args.time_limit)
    return make_backend("external", workdir=args.workdir or default_workdir,
                        command=args.solver_cmd, solutions_dir=args.solutions)


def status_ok(status, args):
    if status == "optimal":
        return True
    if status == "feasible" and args.backend == "external":
        # imported solutions carry no optimality proof; the solver is trusted
        return True
    return args.time_limit is not None and status in ("feasible", "timed_out")


# ---------------------------------------------------------------- solving

def _solve_ward(task):
    sub, method, params, backend, kwargs = task
    try:
        return "ok", run_method(method, sub, params, backend, **kwargs)
    except ExternalSolvePending as exc:
        return "pending", str(exc.lp_path)
    except (SolveFailedError, ModelTooLargeError) as exc:
        return "failed", f"ward {sub.wards[0].id}: {exc}"


def solve_instance(inst, method, params, backend, jobs=1, **kwargs):
    """Run one method ward by ward; returns (result | None, pending, failures)."""
    tasks = [(sub, method, params, backend, kwargs) for sub in split_wards(inst)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            outcomes = list(pool.map(_solve_ward, tasks))
    else:
        outcomes = [_solve_ward(t) for t in tasks]
    pending = [v for kind, v in outcomes if kind == "pending"]
    failures = [v for kind, v in outcomes if kind == "failed"]
    if pending or failures:
        return None, pending, failures
    result = merge_results(inst, params, [v for _, v in outcomes])
    result.method = method
    return result, [], []


def result_document(inst, params, result, ok):
    doc = {"instance": inst.name, "instance_hash": instance_hash(inst), "lambda": params.lam,
           "alpha": params.alpha, "ok": ok}
    doc.update(result.as_dict())
    problems = validate_schedule(inst, result.schedule)
    doc["violations"] = problems
    return doc


def resolve_lambda(args, inst=None):
    if args.lam is not None:
        return args.lam
    if getattr(args, "report", None) is not None:
        sel = io.load_json(args.report).get("selected")
        if sel is None:
            raise UsageError(f"{args.report}: no lambda was selected")
        return float(sel)
    if inst is not None and inst.lam is not None:
        return inst.lam
    raise UsageError("lambda is required: pass --lambda or --report")


def method_kwargs(args, method):
    kw = {}
    if method in ("opt", "binpack") and args.formulation != "auto":
        kw["formulation"] = args.formulation
    if method == "nomove" and args.lexicographic:
        kw["lexicographic"] = True
    return kw


def cmd_solve(args):
    inst = io.load_instance(args.instance)
    problems = validate_instance(inst)
    if problems:
        raise UsageError(f"{args.instance}: {problems[0]}")
    lam = resolve_lambda(args, inst)
    params = CostParams(lam, args.alpha if args.alpha is not None else inst.alpha, inst.step_days)
    out = args.out or Path(f"{inst.name}_{args.method}.json")
    backend = backend_from_args(args, Path(out).parent / "lp")
    result, pending, failures = solve_instance(inst, args.method, params, backend, args.jobs,
                                               **method_kwargs(args, args.method))
    if pending:
        print(f"wrote {len(pending)} LP file(s); solve them and rerun with --solutions DIR:")
        for p in pending:
            print(f"  {p}")
        return EXIT_PENDING
    if failures:
        for f in failures:
            print(f"error: {f}", file=sys.stderr)
        return EXIT_FAILED
    ok = all(status_ok(w.status, args) for w in result.wards)
    io.save_json(result_document(inst, params, result, ok), out)
    c = result.costs
    print(f"{args.method}: objective {c.objective:.6g} (evacuation {c.evacuation_cost:.6g}, "
          f"relocation {c.relocation_cost:.6g} x{c.relocation_count}, operation "
          f"{c.operation_cost:.6g}) -> {out}")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------- generate

def cmd_generate(args):
    seeds = parse_seeds(args.seeds)
    if args.synthetic:
        params = datagen.SyntheticParams(args.wards, args.shelters, args.evacuees, args.horizon,
                                         tuple(args.capacity), tuple(args.op_cost), args.area,
                                         lam=args.lam)
        config_doc = {"kind": "synthetic", **asdict(params)}

        def make(seed):
            return datagen.generate_synthetic(params, seed, name=f"{args.name or 'synthetic'}_s{seed}")
    else:
        config = datagen.load_config(args.config, args.op_cost_weight)
        if args.scale != 1.0:
            config = config.scaled(args.scale)
        if args.name:
            config = replace(config, name=args.name)
        config_doc = {"kind": "hanshin", **datagen.config_dict(config)}

        def make(seed):
            inst = datagen.generate_hanshin(config, seed)
            return inst if args.lam is None else inst.with_lambda(args.lam)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc}") from None
    files = {}
    for seed in seeds:
        inst = make(seed)
        doc = io.instance_to_dict(inst)
        name = f"{inst.name}.json"
        io.save_json(doc, out / name)
        files[name] = io.content_hash(doc)
    manifest = {"config_hash": io.content_hash(config_doc), "seeds": seeds, "config": config_doc,
                "files": files}
    io.save_json(manifest, out / MANIFEST)
    print(f"wrote {len(files)} instance(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- estimate

def parse_observed(text):
    if text is None:
        return datagen.observed_occupancy(datagen.load_config())
    p = Path(text)
    raw = p.read_text(encoding="utf-8") if p.exists() else text
    return [float(v) for v in raw.replace("\n", ",").split(",") if v.strip()]


def cmd_estimate(args):
    train = [inst for _, inst in load_instances(args.train)]
    cfg = EstimationConfig(parse_grid(args.grid), in_days=not args.steps,
                           diagnostics=args.diagnostics, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    backend = backend_from_args(args, out / "lp")
    report = estimate_lambda(train, parse_observed(args.observed), cfg, backend)
    io.save_json(report.as_dict(), out / "estimation.json")
    report.write_csv(out / "lambda_curve.csv")
    if report.selected is None:
        print("error: every grid point failed", file=sys.stderr)
        return EXIT_FAILED
    print(f"selected lambda {report.selected:g} -> {out / 'estimation.json'}")
    return EXIT_FAILED if any(p.errors for p in report.points) else EXIT_OK


# ---------------------------------------------------------------- compare

def compare_means(results, inst_of):
    """Mean table entries (thousands, counts, millions, seconds) over ``(path, result)``."""
    cols = [[] for _ in range(len(COMPARE_COLUMNS) - 1)]
    for path, r in results:
        c = r.costs
        vals = (c.objective / 1e3, c.evacuation_cost / 1e3, c.relocation_cost / 1e3,
                c.relocation_count, c.operation_cost / 1e3,
                scaled_operation_cost(r.schedule, inst_of[str(path)]) / 1e6, r.wall_time)
        for col, v in zip(cols, vals):
            col.append(v)
    return [sum(col) / len(col) for col in cols]


def _compare_task(task):
    path, inst, method, lam, alpha, args = task
    params = CostParams(lam, alpha if alpha is not None else inst.alpha, inst.step_days)
    backend = backend_from_args(args, Path(args.out).parent / "lp")
    result, pending, failures = solve_instance(inst, method, params, backend, 1,
                                               **method_kwargs(args, method))
    if result is None:
        return path, method, None, (pending or failures)[0], None
    ok = all(status_ok(w.status, args) for w in result.wards)
    return path, method, result, None if ok else "not optimal", result_document(inst, params, result, ok)


def cmd_compare(args):
    instances = load_instances(args.instances)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    tasks = [(path, inst, m, resolve_lambda(args, inst), args.alpha, args)
             for m in methods for path, inst in instances]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            outcomes = list(pool.map(_compare_task, tasks))
    else:
        outcomes = [_compare_task(t) for t in tasks]

    rows = []
    failed = False
    for m in methods:
        mine = [o for o in outcomes if o[1] == m]
        bad = [o for o in mine if o[3] is not None]
        for path, _, _, err, _ in bad:
            print(f"error: {m} on {path}: {err}", file=sys.stderr)
        failed |= bool(bad)
        good = [(path, r) for path, _, r, err, _ in mine if r is not None]
        if args.results_dir:
            Path(args.results_dir).mkdir(parents=True, exist_ok=True)
            for path, _, _, _, doc in mine:
                if doc is not None:
                    io.save_json(doc, Path(args.results_dir) / f"{Path(path).stem}_{m}.json")
        if bad or not good:
            rows.append([m] + ["failed"] * (len(COMPARE_COLUMNS) - 1))
            continue
        inst_of = {str(p): i for p, i in instances}
        rows.append([m] + [io.fmt(v) for v in compare_means(good, inst_of)])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        w.writerows(rows)
    print(f"wrote {args.out}")
    return EXIT_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------- report

def history_rows(inst, doc):
    schedule = io.schedule_from_dict(doc["schedule"])
    for t in range(inst.horizon + 1):
        sheltered = sum(1 for p in schedule.paths.values() if 1 <= t <= len(p))
        yield [t, doc["method"], schedule.open_count(t), sheltered]


def trajectory_rows(inst, doc):
    schedule = io.schedule_from_dict(doc["schedule"])
    locs = inst.location_by_id
    moves = {}
    for n, path in schedule.paths.items():
        origin = inst.evacuee_by_id[n].origin
        key = (0, origin, path[0], "evacuation")
        moves[key] = moves.get(key, 0) + 1
        for k in range(len(path) - 1):
            if path[k] != path[k + 1]:
                key = (k + 1, path[k], path[k + 1], "relocation")
                moves[key] = moves.get(key, 0) + 1
    for (t, a, b, kind), persons in sorted(moves.items()):
        pa, pb = locs[a].coord, locs[b].coord
        yield [doc["method"], locs[a].ward, t, io.fmt(pa[0]), io.fmt(pa[1]), io.fmt(pb[0]),
               io.fmt(pb[1]), persons, kind]


def cmd_report(args):
    inst = io.load_instance(args.instance)
    h = instance_hash(inst)
    docs = []
    for path in args.results:
        doc = io.load_json(path)
        if doc.get("instance_hash") != h:
            raise UsageError(f"{path} was not produced from {args.instance} (instance hash mismatch)")
        docs.append(doc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "history.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "method", "open_shelters", "evacuees"])
        for doc in docs:
            w.writerows(history_rows(inst, doc))
    with open(out / "trajectories.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "ward", "t", "from_x", "from_y", "to_x", "to_y", "persons", "kind"])
        for doc in docs:
            w.writerows(trajectory_rows(inst, doc))
    print(f"wrote {out / 'history.csv'} and {out / 'trajectories.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    parser = argparse.ArgumentParser(prog="essp", description="Evacuation shelter scheduling")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write benchmark instances")
    kind = g.add_mutually_exclusive_group()
    kind.add_argument("--hanshin", action="store_true", help="Kobe benchmark (default)")
    kind.add_argument("--synthetic", action="store_true")
    g.add_argument("--seeds", required=True, help="e.g. 0..9 or 1,2,5")
    g.add_argument("--out", required=True)
    g.add_argument("--name", default=None)
    g.add_argument("--lambda", dest="lam", type=float, default=None, help="store lambda in files")
    g.add_argument("--config", default=None, help="catalogue JSON (default: bundled)")
    g.add_argument("--scale", type=float, default=1.0, help="shrink the benchmark, e.g. 0.2")
    g.add_argument("--op-cost-weight", type=float, default=None)
    g.add_argument("--wards", type=int, default=1)
    g.add_argument("--shelters", type=int, default=3)
    g.add_argument("--evacuees", type=int, default=5)
    g.add_argument("--horizon", type=int, default=4)
    g.add_argument("--capacity", type=int, nargs=2, default=(1, 4), metavar=("LO", "HI"))
    g.add_argument("--op-cost", type=float, nargs=2, default=(0.5, 5.0), metavar=("LO", "HI"))
    g.add_argument("--area", type=float, default=4.0)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run one method on one instance")
    s.add_argument("instance", type=Path)
    s.add_argument("--method", choices=sorted(METHODS), required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    s.add_argument("--report", type=Path, default=None, help="take lambda from an estimation report")
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--formulation", choices=["auto", "disaggregated", "aggregated"], default="auto")
    s.add_argument("--lexicographic", action="store_true",
                   help="nomove: least operation cost among evacuation optima")
    s.add_argument("--out", type=Path, default=None)
    add_backend_args(s)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("estimate", help="grid search for lambda")
    e.add_argument("train", nargs="+")
    e.add_argument("--grid", default=None, help="lo:hi:step or comma list (default 250:5000:250)")
    e.add_argument("--observed", default=None, help="occupied days per facility type")
    e.add_argument("--steps", action="store_true", help="compare occupancy in steps, not days")
    e.add_argument("--diagnostics", action="store_true")
    e.add_argument("--out", required=True)
    add_backend_args(e)
    e.set_defaults(func=cmd_estimate)

    c = sub.add_parser("compare", help="mean costs of several methods over an instance set")
    c.add_argument("instances", nargs="+")
    c.add_argument("--methods", default="seqflp,nomove,binpack,opt")
    c.add_argument("--lambda", dest="lam", type=float, default=None)
    c.add_argument("--report", type=Path, default=None)
    c.add_argument("--alpha", type=float, default=None)
    c.add_argument("--formulation", choices=["auto", "disaggregated", "aggregated"], default="auto")
    c.add_argument("--lexicographic", action="store_true")
    c.add_argument("--results-dir", default=None)
    c.add_argument("--out", required=True)
    add_backend_args(c)
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("report", help="plot data: history.csv and trajectories.csv")
    r.add_argument("--instance", type=Path, required=True)
    r.add_argument("--results", nargs="+", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"essp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (datagen.ConfigError, io.SchemaError) as exc:
        print(f"essp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
