"""JSON files for instances, schedules, costs and method results.

Instance document::

    {"name": str, "horizon": int, "alpha": float, "lambda": float | null,
     "ratio_shelters": float, "ratio_evacuees": float, "step_days": float,
     "op_cost_weight": float,
     "facility_types": [{"id", "name", "op_cost", "capacity", "real_occupied_days"}],
     "wards": [{"id", "side_km",
                "locations": [{"id", "ward", "coord": [x, y], "capacity", "facility_type"}],
                "evacuees": [{"id", "origin", "return_time"}]}]}

Schedule document::

    {"positions": [{"t", "evacuee", "location"}],
     "open_until": [{"location", "last_open_t"}]}

Unknown keys are rejected everywhere.
"""

import hashlib
import json
from pathlib import Path

from essp.model import (
    CostBreakdown,
    Evacuee,
    FacilityType,
    Instance,
    Location,
    Schedule,
    WardInstance,
)


class SchemaError(ValueError):
    pass


_INSTANCE_KEYS = {"name", "horizon", "alpha", "lambda", "ratio_shelters", "ratio_evacuees",
                  "step_days", "op_cost_weight", "facility_types", "wards"}
_INSTANCE_REQUIRED = {"horizon", "alpha", "facility_types", "wards"}
_FACILITY_KEYS = {"id", "name", "op_cost", "capacity", "real_occupied_days"}
_WARD_KEYS = {"id", "side_km", "locations", "evacuees"}
_LOCATION_KEYS = {"id", "ward", "coord", "capacity", "facility_type"}
_EVACUEE_KEYS = {"id", "origin", "return_time"}
_SCHEDULE_KEYS = {"positions", "open_until"}
_COST_KEYS = {"evacuation_cost", "relocation_cost", "operation_cost", "objective", "relocation_count"}


def _check(obj, allowed, where, required=None):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise SchemaError(f"{where}: unknown keys {sorted(extra)}")
    missing = (allowed if required is None else required) - set(obj)
    if missing:
        raise SchemaError(f"{where}: missing keys {sorted(missing)}")


def instance_to_dict(inst: Instance) -> dict:
    return {
        "name": inst.name,
        "horizon": inst.horizon,
        "alpha": inst.alpha,
        "lambda": inst.lam,
        "ratio_shelters": inst.ratio_shelters,
        "ratio_evacuees": inst.ratio_evacuees,
        "step_days": inst.step_days,
        "op_cost_weight": inst.op_cost_weight,
        "facility_types": [
            {"id": f.id, "name": f.name, "op_cost": f.op_cost, "capacity": f.capacity,
             "real_occupied_days": f.real_occupied_days}
            for f in inst.facility_types
        ],
        "wards": [
            {
                "id": w.id,
                "side_km": w.side_km,
                "locations": [
                    {"id": loc.id, "ward": loc.ward, "coord": list(loc.coord),
                     "capacity": loc.capacity, "facility_type": loc.facility_type}
                    for loc in w.locations
                ],
                "evacuees": [{"id": e.id, "origin": e.origin, "return_time": e.return_time}
                             for e in w.evacuees],
            }
            for w in inst.wards
        ],
    }


def instance_from_dict(d: dict) -> Instance:
    _check(d, _INSTANCE_KEYS, "instance", _INSTANCE_REQUIRED)
    types = []
    for i, f in enumerate(d["facility_types"]):
        _check(f, _FACILITY_KEYS, f"facility_types[{i}]")
        types.append(FacilityType(int(f["id"]), str(f["name"]), float(f["op_cost"]),
                                  int(f["capacity"]), float(f["real_occupied_days"])))
    wards = []
    for i, w in enumerate(d["wards"]):
        _check(w, _WARD_KEYS, f"wards[{i}]")
        locs = []
        for j, loc in enumerate(w["locations"]):
            _check(loc, _LOCATION_KEYS, f"wards[{i}].locations[{j}]")
            x, y = loc["coord"]
            ft = loc["facility_type"]
            locs.append(Location(int(loc["id"]), int(loc["ward"]), (float(x), float(y)),
                                 int(loc["capacity"]), None if ft is None else int(ft)))
        evs = []
        for j, e in enumerate(w["evacuees"]):
            _check(e, _EVACUEE_KEYS, f"wards[{i}].evacuees[{j}]")
            evs.append(Evacuee(int(e["id"]), int(e["origin"]), int(e["return_time"])))
        wards.append(WardInstance(int(w["id"]), float(w["side_km"]), tuple(locs), tuple(evs)))
    lam = d.get("lambda")
    return Instance(
        wards=tuple(wards),
        horizon=int(d["horizon"]),
        alpha=float(d["alpha"]),
        facility_types=tuple(types),
        lam=None if lam is None else float(lam),
        ratio_shelters=float(d.get("ratio_shelters", 1.0)),
        ratio_evacuees=float(d.get("ratio_evacuees", 1.0)),
        step_days=float(d.get("step_days", 30.0)),
        op_cost_weight=float(d.get("op_cost_weight", 1.0)),
        name=str(d.get("name", "instance")),
    )


def schedule_to_dict(s: Schedule) -> dict:
    open_until = []
    for m in sorted(s.open_steps):
        steps = sorted(set(s.open_steps[m]))
        if steps != list(range(steps[-1] + 1)):
            raise ValueError(f"shelter {m} is not operated on a prefix of steps; "
                             "cannot encode as open_until")
        open_until.append({"location": m, "last_open_t": steps[-1]})
    return {
        "positions": [{"t": t, "evacuee": n, "location": m} for t, n, m in s.positions()],
        "open_until": open_until,
    }


def schedule_from_dict(d: dict) -> Schedule:
    _check(d, _SCHEDULE_KEYS, "schedule")
    by_evacuee: dict[int, dict[int, int]] = {}
    for i, p in enumerate(d["positions"]):
        _check(p, {"t", "evacuee", "location"}, f"positions[{i}]")
        steps = by_evacuee.setdefault(int(p["evacuee"]), {})
        t = int(p["t"])
        if t in steps:
            raise SchemaError(f"positions[{i}]: evacuee {p['evacuee']} placed twice at t={t}")
        steps[t] = int(p["location"])
    paths = {}
    for n, steps in sorted(by_evacuee.items()):
        if sorted(steps) != list(range(1, len(steps) + 1)):
            raise SchemaError(f"evacuee {n}: positions must cover steps 1..k without gaps")
        paths[n] = tuple(steps[t] for t in range(1, len(steps) + 1))
    open_until = {}
    for i, o in enumerate(d["open_until"]):
        _check(o, {"location", "last_open_t"}, f"open_until[{i}]")
        open_until[int(o["location"])] = None if o["last_open_t"] is None else int(o["last_open_t"])
    return Schedule.from_open_until(paths, open_until)


def cost_to_dict(c: CostBreakdown) -> dict:
    return c.as_dict()


def cost_from_dict(d: dict) -> CostBreakdown:
    _check(d, _COST_KEYS, "costs")
    c = CostBreakdown(float(d["evacuation_cost"]), float(d["relocation_cost"]),
                      float(d["operation_cost"]), int(d["relocation_count"]))
    if abs(c.objective - float(d["objective"])) > 1e-6 * max(1.0, abs(c.objective)):
        raise SchemaError("costs: objective is not the sum of its components")
    return c


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False) + "\n"


def save_json(obj, path):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_instance(inst: Instance, path):
    save_json(instance_to_dict(inst), path)


def load_instance(path) -> Instance:
    return instance_from_dict(load_json(path))


def fmt(value) -> str:
    """CSV number format: 6 significant digits, ``nan`` for missing values."""
    if value is None:
        return "nan"
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return f"{float(value):.6g}"


def content_hash(obj) -> str:
    """Stable short hash of a JSON-serialisable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
