import json
from pathlib import Path

import pytest

from spreadnet.errors import InvalidParameterError
from spreadnet.mission import (
    get_preset,
    load_mission,
    mission_from_dict,
    mission_to_dict,
    preset_encounter,
    preset_intelligence,
    save_mission,
)
from spreadnet.optimizer import Thresholds

DATA = Path(__file__).parent / "data"


def test_intelligence_parameters():
    m = preset_intelligence()
    assert m.power_price == 40
    assert m.path_loss == 4
    assert m.weights == (0.8, 0.2)
    assert m.range_bounds[1] == pytest.approx((0.010, 0.500))
    assert m.range_bounds[0] == pytest.approx((0.1, 1.0))
    assert m.density_bounds == ((0.1, 10.0), (1.0, 40.0))
    t = m.thresholds
    assert (t.intra, t.inter[0][1], t.inter[1][0], t.global_) == ((0.0, 0.7), 0.8, 0.0, 0.7)


def test_encounter_parameters():
    m = preset_encounter()
    assert m.power_price == 8
    assert m.density_bounds[0] == (5.0, 5.0)
    t = m.thresholds
    assert (t.intra, t.inter[0][1], t.inter[1][0], t.global_) == ((0.6, 0.0), 0.0, 0.7, 0.7)


@pytest.mark.parametrize("name", ["intelligence", "encounter"])
def test_presets_match_golden_files(name):
    assert load_mission(DATA / f"{name}.json") == get_preset(name)
    assert json.loads((DATA / f"{name}.json").read_text()) == mission_to_dict(get_preset(name))


@pytest.mark.parametrize("unit", ["km", "m"])
def test_round_trip(tmp_path, unit):
    for spec in (preset_intelligence(), preset_encounter()):
        path = tmp_path / f"{spec.name}.json"
        save_mission(spec, path, range_unit=unit)
        loaded = load_mission(path)
        assert loaded.name == spec.name
        for a, b in zip(loaded.range_bounds, spec.range_bounds):
            assert a == pytest.approx(b, rel=1e-15)
        if unit == "km":
            assert loaded == spec


def test_metre_ranges_are_converted():
    m = load_mission(DATA / "intelligence_metres.json")
    assert m.range_bounds == ((0.1, 1.0), (0.01, 0.5))
    assert m.thresholds == preset_intelligence().thresholds


def test_original_thresholds_round_trip(tmp_path):
    from dataclasses import replace

    spec = replace(preset_intelligence(), original=Thresholds((0.0, 0.8), ((0.0, 0.9), (0.0, 0.0)), 0.8))
    save_mission(spec, tmp_path / "m.json")
    assert load_mission(tmp_path / "m.json") == spec


def _base():
    return mission_to_dict(preset_intelligence())


def test_weights_must_sum_to_one():
    data = _base()
    data["weights"] = [0.5, 0.6]
    with pytest.raises(InvalidParameterError, match="weights"):
        mission_from_dict(data)


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.pop("p"), "'p'"),
        (lambda d: d["layers"][1].update(r_unit="ft"), "layers\\[1\\].r_unit"),
        (lambda d: d["layers"][0].pop("lambda_max"), "lambda_max"),
        (lambda d: d["layers"][0].update(lambda_unit="per_m2"), "lambda_unit"),
        (lambda d: d["thresholds"].update(intra=[0.1]), "intra"),
        (lambda d: d["thresholds"].update(inter=[[0, 1.2], [0, 0]]), "thresholds"),
        (lambda d: d.update(eta="four"), "eta"),
        (lambda d: d["layers"].pop(), "layers"),
    ],
)
def test_schema_errors_name_the_field(mutate, field):
    data = _base()
    mutate(data)
    with pytest.raises(InvalidParameterError, match=field):
        mission_from_dict(data)


def test_bad_files(tmp_path):
    with pytest.raises(InvalidParameterError):
        load_mission(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InvalidParameterError):
        load_mission(tmp_path / "bad.json")


def test_unknown_preset():
    with pytest.raises(InvalidParameterError):
        get_preset("reconnaissance")
