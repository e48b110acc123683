"""Grid search for the movement-cost scale.

For every candidate ``lambda`` the sequential procedure is rolled out on each
training instance, the operated shelter-steps are turned into an occupancy
estimate per facility type, and the squared error against the observed
occupancy is averaged. The error is computed per instance and then averaged
over instances.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import math

import numpy as np

from essp.costs import CostParams, mse, occupancy_estimate, scaled_operation_cost
from essp.io import fmt
from essp.formulations import run_nomove, run_binpack, run_seqflp
from essp.milp import BuiltinBackend

DEFAULT_GRID = tuple(float(v) for v in range(250, 5001, 250))


@dataclass
class EstimationConfig:
    grid: tuple[float, ...] = DEFAULT_GRID
    # compare occupancy in days (step count times step_days) rather than steps
    in_days: bool = True
    diagnostics: bool = False
    jobs: int = 1
    seeds: tuple[int, ...] = ()

    def __post_init__(self):
        self.grid = tuple(float(v) for v in self.grid)
        if not self.grid:
            raise ValueError("empty lambda grid")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError(f"lambda grid must be strictly increasing: {self.grid}")
        if any(not v > 0 for v in self.grid):
            raise ValueError("lambda grid values must be positive")


@dataclass
class GridPoint:
    lam: float
    mse: float
    op_cost_musd: float
    per_instance_mse: list[float] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def valid(self):
        return math.isfinite(self.mse)


@dataclass
class EstimationReport:
    points: list[GridPoint]
    selected: float | None
    config: EstimationConfig
    instances: list[str]
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self):
        return [p.lam for p in self.points]

    @property
    def mse(self):
        return [p.mse for p in self.points]

    def as_dict(self):
        return {
            "selected": self.selected,
            "averaging": "per-instance mse, then mean over instances",
            "config": asdict(self.config),
            "instances": self.instances,
            "points": [
                {"lambda": p.lam, "mse": p.mse if p.valid else None,
                 "op_cost_musd": p.op_cost_musd if math.isfinite(p.op_cost_musd) else None,
                 "per_instance_mse": p.per_instance_mse, "errors": p.errors}
                for p in self.points
            ],
            "diagnostics": self.diagnostics,
        }

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "mse", "op_cost_musd"])
            for p in self.points:
                w.writerow([fmt(p.lam), fmt(p.mse), fmt(p.op_cost_musd)])


def _rollout(args):
    inst, lam, observed, in_days, backend = args
    try:
        res = run_seqflp(inst, CostParams.for_instance(inst, lam), backend)
    except Exception as exc:  # recorded per grid point, never fatal
        return None, None, f"{inst.name} lambda={lam:g}: {exc}"
    est = occupancy_estimate(res.schedule, inst, in_days=in_days)
    return mse(est, observed), scaled_operation_cost(res.schedule, inst) / 1e6, None


def select(points):
    """Smallest mean error; ties go to the smallest lambda."""
    valid = [p for p in points if p.valid]
    if not valid:
        return None
    return min(valid, key=lambda p: (p.mse, p.lam)).lam


def estimate_lambda(train, observed, config=None, backend=None) -> EstimationReport:
    config = config or EstimationConfig()
    if not train:
        raise ValueError("no training instances")
    observed = np.asarray(observed, dtype=np.float64)
    for inst in train:
        if len(inst.facility_types) != observed.size:
            raise ValueError(f"{inst.name}: {len(inst.facility_types)} facility types but "
                             f"{observed.size} observations")
    backend = backend if backend is not None else BuiltinBackend()
    tasks = [(inst, lam, observed, config.in_days, backend) for lam in config.grid for inst in train]
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            outcomes = list(pool.map(_rollout, tasks))
    else:
        outcomes = [_rollout(t) for t in tasks]

    points = []
    k = len(train)
    for i, lam in enumerate(config.grid):
        chunk = outcomes[i * k:(i + 1) * k]
        errs = [e for _, _, e in chunk if e is not None]
        good = [(m, c) for m, c, e in chunk if e is None]
        if good:
            mean_mse = float(np.mean([m for m, _ in good]))
            mean_op = float(np.mean([c for _, c in good]))
        else:
            mean_mse = mean_op = math.nan
        points.append(GridPoint(lam, mean_mse, mean_op, [m for m, _ in good], errs))

    report = EstimationReport(points, select(points), config, [inst.name for inst in train])
    if config.diagnostics:
        report.diagnostics = diagnostics(train, observed, report.selected or config.grid[0],
                                         config.in_days, backend)
    return report


def diagnostics(train, observed, lam, in_days, backend):
    """Occupancy fit and scaled operation cost of the two reference procedures."""
    out = {}
    for label, fn in (("nomove", run_nomove), ("binpack", run_binpack)):
        errs, costs = [], []
        for inst in train:
            res = fn(inst, CostParams.for_instance(inst, lam), backend)
            errs.append(mse(occupancy_estimate(res.schedule, inst, in_days=in_days), observed))
            costs.append(scaled_operation_cost(res.schedule, inst) / 1e6)
        out[label] = {"lambda": lam, "mse": float(np.mean(errs)),
                      "op_cost_musd": float(np.mean(costs))}
    return out
