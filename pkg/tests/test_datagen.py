import json
from dataclasses import replace

import numpy as np
import pytest

from essp import io
from essp.datagen import (ConfigError, SyntheticParams, config_dict, generate_hanshin,
                          generate_synthetic, load_config, observed_occupancy, stream)
from essp.model import validate_instance

TABLE3_TOTALS = [526, 310, 210, 155, 108, 85, 43]


@pytest.fixture(scope="module")
def config():
    return load_config()


def test_bundled_catalogue(config):
    assert len(config.facility_types) == 11
    assert sum(map(sum, config.shelters)) == 100
    assert sum(config.present[0]) == 1000
    assert config.areas_km2 == (34, 33, 29, 15, 11, 29, 28, 138, 240)
    assert (config.horizon, config.alpha, config.ratio_shelters, config.ratio_evacuees) == (8, 10, 6.93, 202.0)
    assert observed_occupancy(config).shape == (11,)
    assert config.problems() == []


def test_ward_one(config):
    inst = generate_hanshin(config, 0)
    w1 = inst.ward_by_id[1]
    assert len(w1.shelters) == 15
    assert len(w1.evacuees) == 155
    assert sum(e.return_time == 7 for e in w1.evacuees) == 12
    assert w1.total_capacity == 167 >= 155


def test_totals_and_per_type_counts(config):
    inst = generate_hanshin(config, 1)
    assert inst.num_shelters == 100 and inst.num_evacuees == 526
    per_type = np.bincount([s.facility_type for w in inst.wards for s in w.shelters], minlength=11)
    assert per_type.tolist() == [sum(row) for row in config.shelters]
    for t, total in enumerate(TABLE3_TOTALS, start=1):
        assert sum(len(w.present(t)) for w in inst.wards) == total


def test_present_counts_match_every_cell(config):
    inst = generate_hanshin(config, 2)
    for w, ward in enumerate(inst.wards):
        for t in range(1, 8):
            assert len(ward.present(t)) == config.present[t][w]
        assert ward.total_capacity >= len(ward.present(1))


def test_coordinates_in_square(config):
    inst = generate_hanshin(config, 3)
    for ward in inst.wards:
        assert ward.side_km == pytest.approx(config.areas_km2[ward.id - 1] ** 0.5)
        pts = np.array([loc.coord for loc in ward.locations])
        assert (pts >= 0).all() and (pts <= ward.side_km).all()
    assert validate_instance(inst) == []


def test_byte_identical(config, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    io.save_instance(generate_hanshin(config, 7), a)
    io.save_instance(generate_hanshin(config, 7), b)
    assert a.read_bytes() == b.read_bytes()


def test_distinct_seeds_same_counts(config):
    a, b = generate_hanshin(config, 10), generate_hanshin(config, 11)
    assert a != b
    for wa, wb in zip(a.wards, b.wards):
        assert sorted(e.return_time for e in wa.evacuees) == sorted(e.return_time for e in wb.evacuees)
        assert [s.facility_type for s in wa.shelters] == [s.facility_type for s in wb.shelters]
        assert [s.coord for s in wa.shelters] != [s.coord for s in wb.shelters]


def test_streams_are_independent():
    a = stream(5, 1, "origins").uniform(size=3)
    assert np.array_equal(a, stream(5, 1, "origins").uniform(size=3))
    assert not np.array_equal(a, stream(5, 2, "origins").uniform(size=3))
    assert not np.array_equal(a, stream(5, 1, "shelters").uniform(size=3))


def test_invalid_config_rejected(config, tmp_path):
    d = config_dict(config)
    d["present"][3][0] = d["present"][2][0] + 5
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ConfigError, match="increase"):
        load_config(path)
    broken = replace(config, present=config.present[:5])
    with pytest.raises(ConfigError):
        generate_hanshin(broken, 0)


def test_config_round_trip(config, tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(config_dict(config)))
    assert load_config(path) == config
    assert load_config(path, op_cost_weight=1.0).op_cost_weight == 1.0


def test_scaled_config(config):
    small = config.scaled(0.2)
    assert small.problems() == []
    assert [sum(r) for r in small.present] == [199, 106, 62, 42, 32, 21, 16, 8]
    assert 15 <= sum(map(sum, small.shelters)) <= 25
    inst = generate_hanshin(small, 0)
    assert validate_instance(inst) == []
    with pytest.raises(ConfigError):
        config.scaled(1.5)


def test_synthetic_default_shape():
    inst = generate_synthetic(SyntheticParams(wards=1, shelters=3, evacuees=5, horizon=4), 0)
    assert validate_instance(inst) == []
    assert inst.num_shelters == 3 and inst.num_evacuees == 5 and inst.horizon == 4


def test_synthetic_200_validate():
    made = 0
    for seed in range(200):
        inst = generate_synthetic(SyntheticParams(wards=2, shelters=3, evacuees=5, capacity=(2, 4)), seed)
        assert validate_instance(inst) == []
        made += 1
    assert made == 200


def test_synthetic_deterministic():
    p = SyntheticParams(wards=2, shelters=4, evacuees=6, horizon=5)
    assert generate_synthetic(p, 9) == generate_synthetic(p, 9)


def test_synthetic_rejection_diagnostic():
    with pytest.raises(ConfigError, match=r"never reached 5 evacuees \(maximum possible 3\)"):
        generate_synthetic(SyntheticParams(shelters=3, evacuees=5, capacity=(1, 1)), 0)
    with pytest.raises(ConfigError, match="horizon"):
        generate_synthetic(SyntheticParams(horizon=1), 0)
