"""Instances, schedules and their feasibility checks.

Time runs over steps ``0..T``. Everyone is at their origin at ``t = 0``;
evacuee ``n`` occupies a shelter at every step ``1..tau_n`` and is home
afterwards. Shelters are operated from ``t = 0`` up to some last step and are
never reopened, so a schedule is a path per evacuee plus a set of open steps
per shelter.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

COORD_TOL = 1e-9


class MalformedScheduleError(ValueError):
    """A schedule references evacuees or locations the instance does not have."""


@dataclass(frozen=True)
class FacilityType:
    id: int
    name: str
    op_cost: float
    capacity: int
    real_occupied_days: float = 0.0


@dataclass(frozen=True)
class Location:
    id: int
    ward: int
    coord: tuple[float, float]
    capacity: int = 0
    facility_type: int | None = None

    @property
    def is_shelter(self):
        return self.capacity > 0


@dataclass(frozen=True)
class Evacuee:
    id: int
    origin: int
    return_time: int


@dataclass(frozen=True)
class WardInstance:
    id: int
    side_km: float
    locations: tuple[Location, ...]
    evacuees: tuple[Evacuee, ...]

    @cached_property
    def location_by_id(self) -> dict[int, Location]:
        return {loc.id: loc for loc in self.locations}

    @cached_property
    def shelters(self) -> tuple[Location, ...]:
        return tuple(loc for loc in self.locations if loc.is_shelter)

    @property
    def total_capacity(self):
        return sum(loc.capacity for loc in self.shelters)

    def present(self, t):
        """Evacuees occupying a shelter at step ``t`` (``t >= 1``)."""
        return [e for e in self.evacuees if e.return_time >= t]

    @property
    def max_return_time(self):
        return max((e.return_time for e in self.evacuees), default=0)


@dataclass(frozen=True)
class Instance:
    wards: tuple[WardInstance, ...]
    horizon: int
    alpha: float
    facility_types: tuple[FacilityType, ...]
    lam: float | None = None
    ratio_shelters: float = 1.0
    ratio_evacuees: float = 1.0
    step_days: float = 30.0
    op_cost_weight: float = 1.0
    name: str = "instance"

    @cached_property
    def ward_by_id(self) -> dict[int, WardInstance]:
        return {w.id: w for w in self.wards}

    @cached_property
    def location_by_id(self) -> dict[int, Location]:
        return {loc.id: loc for w in self.wards for loc in w.locations}

    @cached_property
    def evacuee_by_id(self) -> dict[int, Evacuee]:
        return {e.id: e for w in self.wards for e in w.evacuees}

    @cached_property
    def ward_of_evacuee(self) -> dict[int, int]:
        return {e.id: w.id for w in self.wards for e in w.evacuees}

    @property
    def num_evacuees(self):
        return sum(len(w.evacuees) for w in self.wards)

    @property
    def num_shelters(self):
        return sum(len(w.shelters) for w in self.wards)

    def op_cost(self, location: Location) -> float:
        """Per-step catalogue cost ``f_m`` of a shelter."""
        return self.facility_types[location.facility_type].op_cost

    def objective_op_cost(self, location: Location) -> float:
        """Per-step operation cost as charged in the objective."""
        return self.op_cost_weight * self.op_cost(location)

    def with_lambda(self, lam):
        from dataclasses import replace

        return replace(self, lam=lam)


@dataclass(frozen=True)
class Schedule:
    """Evacuee paths and shelter operating steps.

    ``paths[n][k]`` is the location of evacuee ``n`` at step ``k + 1``.
    ``open_steps[m]`` lists the steps at which shelter ``m`` is operated;
    shelters that never open are absent.
    """

    paths: Mapping[int, tuple[int, ...]]
    open_steps: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def from_open_until(cls, paths, open_until: Mapping[int, int | None]):
        steps = {m: tuple(range(last + 1)) for m, last in open_until.items()
                 if last is not None and last >= 0}
        return cls({n: tuple(p) for n, p in paths.items()}, steps)

    @property
    def open_until(self) -> dict[int, int]:
        return {m: max(steps) for m, steps in self.open_steps.items() if steps}

    def position(self, t, n):
        """Location of evacuee ``n`` at step ``t >= 1``, or ``None`` once home."""
        path = self.paths[n]
        return path[t - 1] if 1 <= t <= len(path) else None

    def positions(self):
        for n in sorted(self.paths):
            for k, m in enumerate(self.paths[n]):
                yield k + 1, n, m

    def is_open(self, t, m):
        return t in self.open_steps.get(m, ())

    def occupancy(self, t) -> dict[int, int]:
        occ: dict[int, int] = {}
        for path in self.paths.values():
            if 1 <= t <= len(path):
                occ[path[t - 1]] = occ.get(path[t - 1], 0) + 1
        return occ

    def moves(self):
        """Yield ``(t, n, from, to)`` for every step ``t -> t + 1`` with ``t >= 1``."""
        for n in sorted(self.paths):
            path = self.paths[n]
            for k in range(len(path) - 1):
                yield k + 1, n, path[k], path[k + 1]

    def open_count(self, t):
        return sum(1 for steps in self.open_steps.values() if t in steps)


@dataclass(frozen=True)
class CostBreakdown:
    evacuation_cost: float
    relocation_cost: float
    operation_cost: float
    relocation_count: int

    @property
    def objective(self):
        return self.evacuation_cost + self.relocation_cost + self.operation_cost

    def as_dict(self):
        return {
            "evacuation_cost": self.evacuation_cost,
            "relocation_cost": self.relocation_cost,
            "operation_cost": self.operation_cost,
            "objective": self.objective,
            "relocation_count": self.relocation_count,
        }

    def __add__(self, other):
        return CostBreakdown(
            self.evacuation_cost + other.evacuation_cost,
            self.relocation_cost + other.relocation_cost,
            self.operation_cost + other.operation_cost,
            self.relocation_count + other.relocation_count,
        )


ZERO_COST = CostBreakdown(0.0, 0.0, 0.0, 0)


def validate_instance(instance: Instance) -> list[str]:
    """Every broken instance invariant, one message each."""
    out = []
    T = instance.horizon
    if T < 1:
        out.append(f"instance: horizon {T} < 1")
    if not instance.alpha >= 1:
        out.append(f"instance: alpha {instance.alpha} < 1")
    if instance.lam is not None and not instance.lam > 0:
        out.append(f"instance: lambda {instance.lam} must be positive")
    for label, val in (("ratio_shelters", instance.ratio_shelters),
                       ("ratio_evacuees", instance.ratio_evacuees),
                       ("step_days", instance.step_days),
                       ("op_cost_weight", instance.op_cost_weight)):
        if not val > 0:
            out.append(f"instance: {label} {val} must be positive")

    for k, ft in enumerate(instance.facility_types):
        if ft.id != k:
            out.append(f"facility type {ft.id}: ids must be dense, expected {k}")
        if ft.op_cost < 0 or ft.capacity < 0 or ft.real_occupied_days < 0:
            out.append(f"facility type {ft.id}: negative cost, capacity or occupied days")

    seen_loc: set[int] = set()
    seen_evac: set[int] = set()
    all_locations = instance.location_by_id
    for ward in instance.wards:
        side = ward.side_km
        for loc in ward.locations:
            if loc.id in seen_loc:
                out.append(f"location {loc.id}: duplicate id")
            seen_loc.add(loc.id)
            if loc.ward != ward.id:
                out.append(f"location {loc.id}: listed in ward {ward.id} but tagged ward {loc.ward}")
            if loc.capacity < 0:
                out.append(f"location {loc.id}: negative capacity")
            if (loc.capacity > 0) != (loc.facility_type is not None):
                out.append(f"location {loc.id}: capacity {loc.capacity} and facility type "
                           f"{loc.facility_type} disagree")
            if loc.facility_type is not None and not 0 <= loc.facility_type < len(instance.facility_types):
                out.append(f"location {loc.id}: unknown facility type {loc.facility_type}")
            x, y = loc.coord
            if not (-COORD_TOL <= x <= side + COORD_TOL and -COORD_TOL <= y <= side + COORD_TOL):
                out.append(f"location {loc.id}: coordinate {loc.coord} outside ward {ward.id} square")
        for e in ward.evacuees:
            if e.id in seen_evac:
                out.append(f"evacuee {e.id}: duplicate id")
            seen_evac.add(e.id)
            if e.origin not in ward.location_by_id:
                where = "another ward" if e.origin in all_locations else "nowhere"
                out.append(f"evacuee {e.id}: origin {e.origin} lies in {where}, not ward {ward.id}")
            if not 1 <= e.return_time <= T - 1:
                out.append(f"evacuee {e.id}: return time {e.return_time} outside 1..{T - 1}")
        peak = len(ward.present(1))
        if ward.total_capacity < peak:
            out.append(f"ward {ward.id}: shelter capacity {ward.total_capacity} < {peak} evacuees")
    return out


def validate_schedule(instance: Instance, schedule: Schedule) -> list[str]:
    """Every violated feasibility condition of ``schedule``; empty when feasible.

    Raises :class:`MalformedScheduleError` for ids unknown to the instance.
    """
    evacuees = instance.evacuee_by_id
    locations = instance.location_by_id
    for n in schedule.paths:
        if n not in evacuees:
            raise MalformedScheduleError(f"unknown evacuee {n}")
        for m in schedule.paths[n]:
            if m not in locations:
                raise MalformedScheduleError(f"evacuee {n}: unknown location {m}")
    for m in schedule.open_steps:
        if m not in locations:
            raise MalformedScheduleError(f"unknown shelter {m} in open steps")

    out = []
    T = instance.horizon
    for n, e in evacuees.items():
        path = schedule.paths.get(n)
        if path is None:
            out.append(f"evacuee {n}: no path (must be sheltered for steps 1..{e.return_time})")
            continue
        if len(path) != e.return_time:
            out.append(f"evacuee {n}: sheltered for {len(path)} steps, return time is {e.return_time}")
        ward = instance.ward_of_evacuee[n]
        for k, m in enumerate(path):
            loc = locations[m]
            if not loc.is_shelter:
                out.append(f"evacuee {n}: location {m} at t={k + 1} is not a shelter")
            elif loc.ward != ward:
                out.append(f"evacuee {n}: shelter {m} at t={k + 1} is outside ward {ward}")

    for m, steps in schedule.open_steps.items():
        loc = locations[m]
        if not loc.is_shelter:
            out.append(f"location {m}: operated but is not a shelter")
        bad = [t for t in steps if not 0 <= t <= T - 1]
        if bad:
            out.append(f"shelter {m}: operated at steps {bad} outside 0..{T - 1}")
        ordered = sorted(set(steps))
        if ordered and ordered != list(range(ordered[-1] + 1)):
            gap = next(t for t in range(ordered[-1] + 1) if t not in ordered)
            out.append(f"shelter {m}: closed at t={gap} but operated later (reopening)")

    for t in range(1, T + 1):
        step = min(t, T - 1)
        for m, count in sorted(schedule.occupancy(t).items()):
            loc = locations[m]
            cap = loc.capacity if schedule.is_open(step, m) else 0
            if count > cap:
                state = "open" if schedule.is_open(step, m) else "closed"
                out.append(f"shelter {m}: {count} evacuees at t={t} exceed capacity {cap} ({state})")
    return out


def ward_view(instance: Instance, ward: WardInstance, schedule: Schedule) -> Schedule:
    """The part of ``schedule`` that concerns one ward."""
    ids = {e.id for e in ward.evacuees}
    locs = {loc.id for loc in ward.locations}
    return Schedule({n: p for n, p in schedule.paths.items() if n in ids},
                    {m: s for m, s in schedule.open_steps.items() if m in locs})


def merge_schedules(parts) -> Schedule:
    paths: dict[int, tuple[int, ...]] = {}
    steps: dict[int, tuple[int, ...]] = {}
    for part in parts:
        paths.update(part.paths)
        steps.update(part.open_steps)
    return Schedule(dict(sorted(paths.items())), dict(sorted(steps.items())))

