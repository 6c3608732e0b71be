"""Bundled mission presets and JSON mission files.

File layout (ranges may be given in metres or km, densities in km^-2)::

    {
      "name": "intelligence", "gamma": 1.0, "delta": 0.0, "p": 40, "eta": 4,
      "weights": [0.8, 0.2],
      "layers": [{"lambda_min": 0.1, "lambda_max": 10, "lambda_unit": "per_km2",
                  "r_min": 100, "r_max": 1000, "r_unit": "m"}, ...],
      "thresholds": {"intra": [0, 0.7], "inter": [[0, 0.8], [0, 0]], "global": 0.7}
    }

An optional ``"original_thresholds"`` block with the same shape holds the
targets used for the exact post-hoc check; without it the surrogate targets
double as the original ones.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidParameterError
from .optimizer import MissionSpec, Thresholds

RANGE_UNITS = {"m": 1e-3, "km": 1.0}
DENSITY_UNITS = {"per_km2": 1.0}

_WEIGHTS = (0.8, 0.2)
_LAMBDA_BOUNDS = ((0.1, 10.0), (1.0, 40.0))
_RANGE_BOUNDS_M = ((100.0, 1000.0), (10.0, 500.0))


@dataclass(frozen=True)
class MissionPreset:
    name: str
    spec: MissionSpec


def _range_bounds_km():
    return tuple((lo / 1000.0, hi / 1000.0) for lo, hi in _RANGE_BOUNDS_M)


def preset_intelligence() -> MissionSpec:
    """Followers report to commanders; expensive power (p = 40)."""
    return MissionSpec(
        name="intelligence",
        weights=_WEIGHTS,
        power_price=40.0,
        path_loss=4.0,
        density_bounds=_LAMBDA_BOUNDS,
        range_bounds=_range_bounds_km(),
        thresholds=Thresholds(intra=(0.0, 0.7), inter=((0.0, 0.8), (0.0, 0.0)), global_=0.7),
    )


def preset_encounter() -> MissionSpec:
    """Commanders push orders to followers; cheap power (p = 8), commander density fixed at 5."""
    return MissionSpec(
        name="encounter",
        weights=_WEIGHTS,
        power_price=8.0,
        path_loss=4.0,
        density_bounds=((5.0, 5.0), _LAMBDA_BOUNDS[1]),
        range_bounds=_range_bounds_km(),
        thresholds=Thresholds(intra=(0.6, 0.0), inter=((0.0, 0.0), (0.7, 0.0)), global_=0.7),
    )


PRESETS = {
    "intelligence": preset_intelligence,
    "encounter": preset_encounter,
}


def get_preset(name: str) -> MissionSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise InvalidParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _thresholds_to_dict(t: Thresholds) -> dict:
    return {"intra": list(t.intra), "inter": [list(row) for row in t.inter], "global": t.global_}


def mission_to_dict(spec: MissionSpec, range_unit: str = "km") -> dict:
    """Serialisable form of a mission; ranges written in ``range_unit``."""
    if range_unit not in RANGE_UNITS:
        raise InvalidParameterError(f"range unit must be one of {sorted(RANGE_UNITS)}")
    factor = RANGE_UNITS[range_unit]
    layers = []
    for (lam_lo, lam_hi), (r_lo, r_hi) in zip(spec.density_bounds, spec.range_bounds):
        layers.append({
            "lambda_min": lam_lo,
            "lambda_max": lam_hi,
            "lambda_unit": "per_km2",
            "r_min": r_lo / factor,
            "r_max": r_hi / factor,
            "r_unit": range_unit,
        })
    out = {
        "name": spec.name,
        "gamma": spec.gamma,
        "delta": spec.delta,
        "p": spec.power_price,
        "eta": spec.path_loss,
        "area_km2": spec.area_km2,
        "weights": list(spec.weights),
        "layers": layers,
        "thresholds": _thresholds_to_dict(spec.thresholds),
    }
    if spec.original != spec.thresholds:
        out["original_thresholds"] = _thresholds_to_dict(spec.original)
    return out


def _field(data: dict, key: str, where: str):
    if not isinstance(data, dict) or key not in data:
        raise InvalidParameterError(f"mission field {where}{key!r} is missing")
    return data[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidParameterError(f"mission field {where} must be a number, got {value!r}")
    return float(value)


def _thresholds_from_dict(data, where: str, num_layers: int) -> Thresholds:
    intra = _field(data, "intra", where)
    inter = _field(data, "inter", where)
    if not isinstance(intra, list) or len(intra) != num_layers:
        raise InvalidParameterError(f"mission field {where}'intra' must list {num_layers} values")
    if not isinstance(inter, list) or len(inter) != num_layers or any(
        not isinstance(row, list) or len(row) != num_layers for row in inter
    ):
        raise InvalidParameterError(f"mission field {where}'inter' must be a {num_layers}x{num_layers} matrix")
    try:
        return Thresholds(
            intra=[_number(x, f"{where}intra") for x in intra],
            inter=[[_number(x, f"{where}inter") for x in row] for row in inter],
            global_=_number(data.get("global", 0.0), f"{where}global"),
        )
    except InvalidParameterError as exc:
        raise InvalidParameterError(f"mission field {where}: {exc}") from None


def mission_from_dict(data: dict) -> MissionSpec:
    """Validate a parsed mission file and normalise units to km / km^-2.

    Raises:
        InvalidParameterError: naming the offending field.
    """
    if not isinstance(data, dict):
        raise InvalidParameterError("mission file must hold a JSON object")
    weights = _field(data, "weights", "")
    if not isinstance(weights, list) or not weights:
        raise InvalidParameterError("mission field 'weights' must be a non-empty list")
    weights = [_number(w, "'weights'") for w in weights]
    if abs(sum(weights) - 1.0) > 1e-9:
        raise InvalidParameterError(f"mission field 'weights' must sum to 1, got {sum(weights):.6g}")
    layers = _field(data, "layers", "")
    if not isinstance(layers, list) or len(layers) != len(weights):
        raise InvalidParameterError(f"mission field 'layers' must list {len(weights)} layers")
    density_bounds, range_bounds = [], []
    for i, layer in enumerate(layers):
        where = f"layers[{i}]."
        lam_unit = layer.get("lambda_unit", "per_km2") if isinstance(layer, dict) else None
        if lam_unit not in DENSITY_UNITS:
            raise InvalidParameterError(f"mission field {where}lambda_unit must be 'per_km2', got {lam_unit!r}")
        r_unit = _field(layer, "r_unit", where)
        if r_unit not in RANGE_UNITS:
            raise InvalidParameterError(f"mission field {where}r_unit must be 'm' or 'km', got {r_unit!r}")
        scale = RANGE_UNITS[r_unit]
        density_bounds.append((
            _number(_field(layer, "lambda_min", where), where + "lambda_min"),
            _number(_field(layer, "lambda_max", where), where + "lambda_max"),
        ))
        range_bounds.append((
            _number(_field(layer, "r_min", where), where + "r_min") * scale,
            _number(_field(layer, "r_max", where), where + "r_max") * scale,
        ))
    thresholds = _thresholds_from_dict(_field(data, "thresholds", ""), "thresholds.", len(weights))
    original = None
    if "original_thresholds" in data:
        original = _thresholds_from_dict(data["original_thresholds"], "original_thresholds.", len(weights))
    return MissionSpec(
        name=str(data.get("name", "custom")),
        weights=weights,
        power_price=_number(_field(data, "p", ""), "'p'"),
        path_loss=_number(_field(data, "eta", ""), "'eta'"),
        density_bounds=density_bounds,
        range_bounds=range_bounds,
        thresholds=thresholds,
        original=original,
        gamma=_number(data.get("gamma", 1.0), "'gamma'"),
        delta=_number(data.get("delta", 0.0), "'delta'"),
        area_km2=_number(data.get("area_km2", 1.0), "'area_km2'"),
    )


def save_mission(spec: MissionSpec, path, range_unit: str = "km") -> None:
    text = json.dumps(mission_to_dict(spec, range_unit), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8", newline="\n")


def load_mission(path) -> MissionSpec:
    """Read and validate a JSON mission file.

    Raises:
        InvalidParameterError: unreadable file, bad JSON, or a schema violation.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidParameterError(f"cannot read mission file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"mission file {path} is not valid JSON: {exc}") from None
    return mission_from_dict(data)
