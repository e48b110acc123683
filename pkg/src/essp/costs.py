"""Movement and operation costs, schedule evaluation, and the occupancy fit."""

from dataclasses import dataclass
import math

import numpy as np

from essp.model import CostBreakdown, Instance, Location, Schedule, WardInstance, validate_schedule


class InfeasibleScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class CostParams:
    lam: float
    alpha: float = 10.0
    step_days: float = 30.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.alpha >= 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if not self.step_days > 0:
            raise ValueError(f"step_days must be positive, got {self.step_days}")

    @classmethod
    def for_instance(cls, instance: Instance, lam=None):
        lam = instance.lam if lam is None else lam
        if lam is None:
            raise ValueError("no lambda given and the instance does not carry one")
        return cls(float(lam), instance.alpha, instance.step_days)

    def rate(self, t):
        """Cost per km of one move made at step ``t``."""
        return self.alpha * self.lam if t == 0 else self.lam


def distance(a: Location, b: Location) -> float:
    if a.ward != b.ward:
        raise ValueError(f"locations {a.id} and {b.id} lie in different wards")
    return math.hypot(a.coord[0] - b.coord[0], a.coord[1] - b.coord[1])


def movement_cost(t: int, a: Location, b: Location, params: CostParams) -> float:
    if t < 0:
        raise ValueError(f"step must be non-negative, got {t}")
    return params.rate(t) * distance(a, b)


def distance_matrix(sources, targets) -> np.ndarray:
    p = np.array([loc.coord for loc in sources], dtype=np.float64).reshape(-1, 2)
    q = np.array([loc.coord for loc in targets], dtype=np.float64).reshape(-1, 2)
    return np.hypot(p[:, None, 0] - q[None, :, 0], p[:, None, 1] - q[None, :, 1])


def evaluate_schedule(instance: Instance, schedule: Schedule, params: CostParams,
                      check=True) -> CostBreakdown:
    """Cost components of a feasible schedule.

    The operation term charges ``op_cost_weight * f_m`` for every step in
    ``0..T-1`` at which shelter ``m`` is operated.
    """
    if check:
        problems = validate_schedule(instance, schedule)
        if problems:
            raise InfeasibleScheduleError(problems[0])
    locs = instance.location_by_id
    evac = 0.0
    reloc = 0.0
    count = 0
    for n, path in schedule.paths.items():
        if not path:
            continue
        origin = locs[instance.evacuee_by_id[n].origin]
        evac += movement_cost(0, origin, locs[path[0]], params)
        for k in range(len(path) - 1):
            if path[k] != path[k + 1]:
                reloc += movement_cost(k + 1, locs[path[k]], locs[path[k + 1]], params)
                count += 1
    T = instance.horizon
    op = 0.0
    for m, steps in schedule.open_steps.items():
        n_steps = sum(1 for t in set(steps) if 0 <= t <= T - 1)
        op += instance.objective_op_cost(locs[m]) * n_steps
    return CostBreakdown(evac, reloc, op, count)


def _open_step_counts(schedule: Schedule, instance: Instance):
    T = instance.horizon
    for m, steps in schedule.open_steps.items():
        yield instance.location_by_id[m], sum(1 for t in set(steps) if 0 <= t <= T - 1)


def occupancy_estimate(schedule: Schedule, instance: Instance, in_days=False) -> np.ndarray:
    """Estimated real-world occupancy per facility type.

    ``r_m`` times the number of operated shelter-steps of each type; with
    ``in_days`` the result is multiplied by ``step_days`` so it can be compared
    with day-denominated observations.
    """
    est = np.zeros(len(instance.facility_types))
    for loc, k in _open_step_counts(schedule, instance):
        est[loc.facility_type] += k
    est *= instance.ratio_shelters
    if in_days:
        est *= instance.step_days
    return est


def mse(estimated, observed) -> float:
    estimated = np.asarray(estimated, dtype=np.float64)
    observed = np.asarray(observed, dtype=np.float64)
    if estimated.shape != observed.shape or estimated.ndim != 1 or estimated.size == 0:
        raise ValueError(f"need two equal-length non-empty vectors, got {estimated.shape} "
                         f"and {observed.shape}")
    return float(np.mean((observed - estimated) ** 2))


def scaled_operation_cost(schedule: Schedule, instance: Instance) -> float:
    """Real-world operation cost estimate: ``r_m`` times the catalogue cost of
    every operated shelter-step (the objective weight is not applied)."""
    total = sum(instance.op_cost(loc) * k for loc, k in _open_step_counts(schedule, instance))
    return instance.ratio_shelters * total


def per_real_person_cost(cost: float, instance: Instance) -> float:
    """Convert a model cost to a per-real-person figure by dividing by ``r_n``."""
    return cost / instance.ratio_evacuees


def ward_arrays(instance: Instance, ward: WardInstance):
    """Shelters, evacuees and the distance matrices a formulation needs."""
    shelters = list(ward.shelters)
    evacuees = sorted(ward.evacuees, key=lambda e: e.id)
    origins = [ward.location_by_id[e.origin] for e in evacuees]
    return {
        "shelters": shelters,
        "evacuees": evacuees,
        "origin_dist": distance_matrix(origins, shelters),
        "shelter_dist": distance_matrix(shelters, shelters),
        "capacity": np.array([s.capacity for s in shelters], dtype=np.int64),
        "op_cost": np.array([instance.objective_op_cost(s) for s in shelters]),
        "return_time": np.array([e.return_time for e in evacuees], dtype=np.int64),
    }
