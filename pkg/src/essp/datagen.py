"""Instance generators.

``generate_hanshin`` builds the nine-ward Kobe benchmark from the checked-in
catalogue (``data/hanshin.json``): shelter counts per type and ward, present
evacuee counts per step, ward areas and the scaling ratios. Coordinates are
uniform in a square of the ward's area. ``generate_synthetic`` builds small
random instances for the oracle tests.

Every random draw comes from its own stream keyed by (seed, ward, purpose),
so adding a ward or a purpose never shifts the others.
"""

from dataclasses import dataclass, replace
from importlib import resources
import json
import math

import numpy as np

from essp.model import Evacuee, FacilityType, Instance, Location, WardInstance, validate_instance

PURPOSES = {"shelters": 0, "origins": 1, "return_times": 2, "capacity": 3, "op_cost": 4}


class ConfigError(ValueError):
    pass


def stream(seed: int, ward: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ward, PURPOSES[purpose])))


@dataclass(frozen=True)
class HanshinConfig:
    facility_types: tuple[FacilityType, ...]
    # shelters[l][w]: number of shelters of type l in ward w
    shelters: tuple[tuple[int, ...], ...]
    areas_km2: tuple[float, ...]
    # present[t][w]: evacuees still sheltered at step t (row 0 is the pre-evacuation population)
    present: tuple[tuple[int, ...], ...]
    horizon: int = 8
    alpha: float = 10.0
    ratio_shelters: float = 6.93
    ratio_evacuees: float = 202.0
    step_days: float = 30.0
    op_cost_weight: float = 1.0
    name: str = "hanshin"
    total_evacuees: int | None = None

    @property
    def num_wards(self):
        return len(self.areas_km2)

    def ward_shelters(self, w):
        return [self.shelters[k][w] for k in range(len(self.facility_types))]

    def ward_capacity(self, w):
        return sum(n * ft.capacity for n, ft in zip(self.ward_shelters(w), self.facility_types))

    def return_time_counts(self, w):
        """``counts[tau]`` for ``tau = 1..T-1``: evacuees whose last sheltered step is ``tau``."""
        col = [row[w] for row in self.present]
        counts = {}
        for tau in range(1, len(col)):
            nxt = col[tau + 1] if tau + 1 < len(col) else 0
            counts[tau] = col[tau] - nxt
        return counts

    def problems(self):
        out = []
        W = self.num_wards
        L = len(self.facility_types)
        if len(self.shelters) != L:
            out.append(f"{len(self.shelters)} shelter rows for {L} facility types")
        for k, row in enumerate(self.shelters):
            if len(row) != W or any(c < 0 for c in row):
                out.append(f"shelter row {k}: need {W} non-negative counts")
        if len(self.present) != self.horizon:
            out.append(f"{len(self.present)} present rows but horizon {self.horizon} needs "
                       f"rows t = 0..{self.horizon - 1}")
        for t, row in enumerate(self.present):
            if len(row) != W or any(c < 0 for c in row):
                out.append(f"present row t={t}: need {W} non-negative counts")
        if out:
            return out
        for w in range(W):
            col = [row[w] for row in self.present]
            if any(b > a for a, b in zip(col, col[1:])):
                out.append(f"ward {w + 1}: present counts increase over time {col}")
            peak = col[1] if len(col) > 1 else 0
            if self.ward_capacity(w) < peak:
                out.append(f"ward {w + 1}: capacity {self.ward_capacity(w)} < {peak} evacuees")
            if not self.areas_km2[w] > 0:
                out.append(f"ward {w + 1}: area must be positive")
        if self.total_evacuees is not None and sum(self.present[0]) != self.total_evacuees:
            out.append(f"t=0 counts sum to {sum(self.present[0])}, expected {self.total_evacuees}")
        return out

    def scaled(self, factor: float, name=None):
        """A smaller benchmark with the same shape.

        Present counts are rounded per cell (which keeps them non-increasing),
        each ward's shelter budget is its count times ``factor`` rounded, split
        over types by largest remainder, and topped up with the largest
        remaining type until capacity covers the ward's peak.
        """
        if not 0 < factor <= 1:
            raise ConfigError(f"scale factor must lie in (0, 1], got {factor}")
        present = tuple(tuple(int(math.floor(c * factor + 0.5)) for c in row) for row in self.present)
        L = len(self.facility_types)
        cols = []
        for w in range(self.num_wards):
            counts = self.ward_shelters(w)
            budget = int(math.floor(sum(counts) * factor + 0.5))
            quota = [c * factor for c in counts]
            take = [int(math.floor(q)) for q in quota]
            order = sorted(range(L), key=lambda k: (-(quota[k] - take[k]), k))
            for k in order[:max(0, budget - sum(take))]:
                take[k] += 1
            peak = present[1][w] if len(present) > 1 else 0
            while sum(n * self.facility_types[k].capacity for k, n in enumerate(take)) < peak:
                spare = [k for k in range(L) if take[k] < counts[k]]
                if not spare:
                    raise ConfigError(f"ward {w + 1}: cannot cover {peak} evacuees at scale {factor}")
                k = max(spare, key=lambda k: (self.facility_types[k].capacity, -k))
                take[k] += 1
            cols.append(take)
        shelters = tuple(tuple(cols[w][k] for w in range(self.num_wards)) for k in range(L))
        total = sum(present[0])
        return replace(self, shelters=shelters, present=present, total_evacuees=total,
                       name=name or f"{self.name}_x{factor:g}")


def _read_config(d, op_cost_weight=None):
    types = tuple(FacilityType(k, ft["name"], float(ft["op_cost"]), int(ft["capacity"]),
                               float(ft["real_occupied_days"]))
                  for k, ft in enumerate(d["facility_types"]))
    return HanshinConfig(
        facility_types=types,
        shelters=tuple(tuple(int(c) for c in ft["wards"]) for ft in d["facility_types"]),
        areas_km2=tuple(float(a) for a in d["ward_areas_km2"]),
        present=tuple(tuple(int(c) for c in row) for row in d["present"]),
        horizon=int(d["horizon"]),
        alpha=float(d["alpha"]),
        ratio_shelters=float(d["ratio_shelters"]),
        ratio_evacuees=float(d["ratio_evacuees"]),
        step_days=float(d["step_days"]),
        op_cost_weight=float(d["op_cost_weight"] if op_cost_weight is None else op_cost_weight),
        name=str(d.get("name", "hanshin")),
        total_evacuees=d.get("total_evacuees"),
    )


def config_dict(config: HanshinConfig) -> dict:
    return {
        "name": config.name,
        "horizon": config.horizon,
        "alpha": config.alpha,
        "ratio_shelters": config.ratio_shelters,
        "ratio_evacuees": config.ratio_evacuees,
        "step_days": config.step_days,
        "op_cost_weight": config.op_cost_weight,
        "total_evacuees": config.total_evacuees,
        "facility_types": [
            {"name": ft.name, "op_cost": ft.op_cost, "capacity": ft.capacity,
             "real_occupied_days": ft.real_occupied_days, "wards": list(config.shelters[k])}
            for k, ft in enumerate(config.facility_types)
        ],
        "ward_areas_km2": list(config.areas_km2),
        "present": [list(row) for row in config.present],
    }


def load_config(path=None, op_cost_weight=None) -> HanshinConfig:
    """The bundled catalogue, or a JSON file with the same layout."""
    if path is None:
        text = resources.files("essp.data").joinpath("hanshin.json").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        config = _read_config(json.loads(text), op_cost_weight)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    problems = config.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    return config


def observed_occupancy(config: HanshinConfig) -> np.ndarray:
    """Real occupied shelter-days per facility type."""
    return np.array([ft.real_occupied_days for ft in config.facility_types])


def generate_hanshin(config: HanshinConfig, seed: int, name=None) -> Instance:
    problems = config.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    wards = []
    next_id = 0
    next_evacuee = 0
    for w in range(config.num_wards):
        ward_id = w + 1
        side = math.sqrt(config.areas_km2[w])
        types = [k for k, n in enumerate(config.ward_shelters(w)) for _ in range(n)]
        pts = stream(seed, ward_id, "shelters").uniform(0.0, side, size=(len(types), 2))
        locs = []
        for k, p in zip(types, pts):
            ft = config.facility_types[k]
            locs.append(Location(next_id, ward_id, (float(p[0]), float(p[1])), ft.capacity, k))
            next_id += 1
        taus = [tau for tau, c in config.return_time_counts(w).items() for _ in range(c)]
        taus = stream(seed, ward_id, "return_times").permutation(np.array(taus, dtype=np.int64))
        origins = stream(seed, ward_id, "origins").uniform(0.0, side, size=(len(taus), 2))
        evacuees = []
        for tau, p in zip(taus, origins):
            locs.append(Location(next_id, ward_id, (float(p[0]), float(p[1]))))
            evacuees.append(Evacuee(next_evacuee, next_id, int(tau)))
            next_id += 1
            next_evacuee += 1
        wards.append(WardInstance(ward_id, side, tuple(locs), tuple(evacuees)))
    return Instance(
        wards=tuple(wards),
        horizon=config.horizon,
        alpha=config.alpha,
        facility_types=config.facility_types,
        ratio_shelters=config.ratio_shelters,
        ratio_evacuees=config.ratio_evacuees,
        step_days=config.step_days,
        op_cost_weight=config.op_cost_weight,
        name=name or f"{config.name}_s{seed}",
    )


@dataclass(frozen=True)
class SyntheticParams:
    wards: int = 1
    shelters: int = 3
    evacuees: int = 5
    horizon: int = 4
    capacity: tuple[int, int] = (1, 4)
    op_cost: tuple[float, float] = (0.5, 5.0)
    area: float = 4.0
    alpha: float = 10.0
    lam: float | None = 1.0
    max_tries: int = 100
    integer_coords: bool = False

    def problems(self):
        out = []
        for label in ("wards", "shelters", "evacuees", "max_tries"):
            if getattr(self, label) < 1:
                out.append(f"{label} must be >= 1")
        if self.horizon < 2:
            out.append("horizon must be >= 2 so that return times 1..T-1 exist")
        lo, hi = self.capacity
        if not 0 <= lo <= hi or hi < 1:
            out.append(f"capacity range {self.capacity} invalid")
        lo, hi = self.op_cost
        if not 0 <= lo <= hi:
            out.append(f"op cost range {self.op_cost} invalid")
        if not self.area > 0:
            out.append("area must be positive")
        return out


def generate_synthetic(params: SyntheticParams, seed: int, name=None) -> Instance:
    """Small random instance; capacities are redrawn until every ward fits."""
    problems = params.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    side = math.sqrt(params.area)
    types = []
    wards = []
    next_id = 0
    next_evacuee = 0
    for w in range(params.wards):
        ward_id = w + 1
        taus = stream(seed, ward_id, "return_times").integers(1, params.horizon, size=params.evacuees)
        peak = params.evacuees
        cap_rng = stream(seed, ward_id, "capacity")
        for _ in range(params.max_tries):
            caps = cap_rng.integers(params.capacity[0], params.capacity[1] + 1, size=params.shelters)
            if caps.sum() >= peak:
                break
        else:
            raise ConfigError(
                f"ward {ward_id}: {params.max_tries} capacity draws from {params.capacity} over "
                f"{params.shelters} shelters never reached {peak} evacuees "
                f"(maximum possible {params.shelters * params.capacity[1]})")
        costs = stream(seed, ward_id, "op_cost").uniform(*params.op_cost, size=params.shelters)
        pts = stream(seed, ward_id, "shelters").uniform(0.0, side, size=(params.shelters, 2))
        origins = stream(seed, ward_id, "origins").uniform(0.0, side, size=(params.evacuees, 2))
        if params.integer_coords:
            pts, origins = np.floor(pts), np.floor(origins)
        locs = []
        for cap, f, p in zip(caps, costs, pts):
            types.append(FacilityType(len(types), f"type{len(types)}", float(f), int(cap)))
            locs.append(Location(next_id, ward_id, (float(p[0]), float(p[1])), int(cap), len(types) - 1))
            next_id += 1
        evacuees = []
        for tau, p in zip(taus, origins):
            locs.append(Location(next_id, ward_id, (float(p[0]), float(p[1]))))
            evacuees.append(Evacuee(next_evacuee, next_id, int(tau)))
            next_id += 1
            next_evacuee += 1
        wards.append(WardInstance(ward_id, side, tuple(locs), tuple(evacuees)))
    inst = Instance(tuple(wards), params.horizon, params.alpha, tuple(types), lam=params.lam,
                    name=name or f"synthetic_s{seed}")
    problems = validate_instance(inst)
    if problems:
        raise ConfigError("; ".join(problems))
    return inst
