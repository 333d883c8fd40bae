"""YAML scene and experiment files.

Scene file
----------
::

    room:
      dimensions: [6.0, 5.0, 3.0]
      t60: 0.4              # or ``reflection: 0.85``; omitted means anechoic
      sound_speed: 343.0    # optional
      max_order: 12         # optional image-source order
    source: [1.3, 1.1, 1.0]
    region: {shape: ball, center: [3.2, 2.4, 1.4], radius: 0.5}
    array: {kind: dual_sphere, radii: [0.5, 0.49], counts: [21, 20]}
    snr_db: 40              # optional, .inf or null for noiseless
    seed: 0                 # optional
    frequencies: [500]      # optional, used by simulate / estimate / export
    grid: {points_per_axis: 9, shrink: 0.98}   # optional evaluation grid

Array parameters are those of :func:`soundfield.acoustics.make_array`; the
array ``center`` (and for ``random_in_region`` the radius or half extents)
default to the region's.

Experiment file
---------------
::

    scene: scene.yaml       # path relative to this file, or an inline mapping
    frequencies: {start: 200, stop: 900, step: 100}   # or a list
    estimators:
      - name: uniform_kernel
      - name: pinn
        label: pinn_fast    # optional, defaults to the name
        params: {iterations: 1000}
    grid: {points_per_axis: 9, shrink: 0.98}
    heatmap: {axis: z, offset: 0.0, points_per_axis: 21}   # optional
    seed: 0
    output: results
    figures: true
    timing: false           # write wall-clock fit times to timing.csv

Unknown keys are rejected everywhere; errors carry ``file:key.path``.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..acoustics import RegionSpec, RoomSpec, Scene, make_array, t60_to_reflection
from ..errors import ConfigError, DomainError
from .estimators import ESTIMATORS, validate_params
from .export import PlaneSpec

DEFAULT_GRID = {"points_per_axis": 9, "shrink": 0.98}


@dataclass(frozen=True)
class GridSpec:
    points_per_axis: int = 9
    shrink: float = 0.98


@dataclass
class SceneFile:
    scene: Scene
    frequencies: list = field(default_factory=list)
    grid: GridSpec = field(default_factory=GridSpec)
    path: str = "<inline>"


@dataclass
class EstimatorEntry:
    name: str
    label: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    scene: SceneFile
    estimators: list
    frequencies: list
    grid: GridSpec = field(default_factory=GridSpec)
    heatmap: PlaneSpec = None
    seed: int = 0
    output: str = "results"
    figures: bool = True
    timing: bool = False
    path: str = "<inline>"


def read_yaml(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError("file not found", str(path))
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML ({exc})", str(path)) from None
    return data


def _mapping(value, loc):
    if not isinstance(value, dict):
        raise ConfigError("expected a mapping", loc)
    return value


def _keys(mapping, loc, required=(), optional=()):
    _mapping(mapping, loc)
    unknown = sorted(set(mapping) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(map(str, unknown))}", loc)
    missing = [k for k in required if k not in mapping]
    if missing:
        raise ConfigError(f"missing key(s) {', '.join(missing)}", loc)


def _number(value, loc, positive=False, integer=False, allow_inf=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", loc)
    if integer and (not float(value).is_integer()):
        raise ConfigError(f"expected an integer, got {value!r}", loc)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ConfigError(f"expected a finite number, got {value!r}", loc)
    if positive and value <= 0:
        raise ConfigError(f"expected a positive number, got {value!r}", loc)
    return int(value) if integer else float(value)


def _vector(value, loc, n=3):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise ConfigError(f"expected a list of {n} numbers", loc)
    return [_number(v, f"{loc}[{i}]") for i, v in enumerate(value)]


def _seed(value, loc):
    seed = _number(value, loc, integer=True)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer", loc)
    return seed


def _grid(value, loc):
    _keys(value, loc, optional=("points_per_axis", "shrink"))
    n = _number(value.get("points_per_axis", DEFAULT_GRID["points_per_axis"]), f"{loc}.points_per_axis",
                positive=True, integer=True)
    shrink = _number(value.get("shrink", DEFAULT_GRID["shrink"]), f"{loc}.shrink", positive=True)
    if n < 2 or shrink > 1:
        raise ConfigError("need points_per_axis >= 2 and 0 < shrink <= 1", loc)
    return GridSpec(n, shrink)


def _frequencies(value, loc):
    if isinstance(value, dict):
        _keys(value, loc, required=("start", "stop", "step"))
        start = _number(value["start"], f"{loc}.start", positive=True)
        stop = _number(value["stop"], f"{loc}.stop", positive=True)
        step = _number(value["step"], f"{loc}.step", positive=True)
        if stop < start:
            raise ConfigError("stop must not precede start", loc)
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        freqs = [start + i * step for i in range(n)]
    elif isinstance(value, (list, tuple)):
        freqs = [_number(v, f"{loc}[{i}]", positive=True) for i, v in enumerate(value)]
    else:
        freqs = [_number(value, loc, positive=True)]
    if not freqs:
        raise ConfigError("at least one frequency is required", loc)
    return freqs


def _room(value, loc):
    _keys(value, loc, required=("dimensions",), optional=("t60", "reflection", "sound_speed", "max_order"))
    dims = _vector(value["dimensions"], f"{loc}.dimensions")
    if "t60" in value and "reflection" in value:
        raise ConfigError("give either t60 or reflection, not both", loc)
    c = _number(value.get("sound_speed", 343.0), f"{loc}.sound_speed", positive=True)
    try:
        if "t60" in value:
            rho = t60_to_reflection(dims, _number(value["t60"], f"{loc}.t60", positive=True))
        else:
            rho = _number(value.get("reflection", 0.0), f"{loc}.reflection")
        room = RoomSpec(tuple(dims), rho, c)
    except DomainError as exc:
        raise ConfigError(str(exc), loc) from None
    max_order = None
    if value.get("max_order") is not None:
        max_order = _number(value["max_order"], f"{loc}.max_order", integer=True)
        if max_order < 0:
            raise ConfigError("max_order must be nonnegative", f"{loc}.max_order")
    return room, max_order


def _region(value, loc):
    _keys(value, loc, required=("shape", "center"), optional=("radius", "half_extents"))
    center = _vector(value["center"], f"{loc}.center")
    shape = value["shape"]
    try:
        if shape == "ball":
            _keys(value, loc, required=("shape", "center", "radius"))
            return RegionSpec("ball", center, radius=_number(value["radius"], f"{loc}.radius", positive=True))
        if shape == "box":
            _keys(value, loc, required=("shape", "center", "half_extents"))
            return RegionSpec("box", center, half_extents=tuple(_vector(value["half_extents"], f"{loc}.half_extents")))
    except DomainError as exc:
        raise ConfigError(str(exc), loc) from None
    raise ConfigError(f"unknown region shape {shape!r}", f"{loc}.shape")


_ARRAY_KEYS = {
    "dual_sphere": (("radii", "counts"), ("center",)),
    "grid": (("shape", "lower", "upper"), ()),
    "random_in_region": (("count",), ("center", "radius", "half_extents")),
}


def _array(value, loc, region, seed):
    _mapping(value, loc)
    kind = value.get("kind")
    if kind not in _ARRAY_KEYS:
        raise ConfigError(f"unknown array kind {kind!r}", f"{loc}.kind")
    required, optional = _ARRAY_KEYS[kind]
    _keys(value, loc, required=("kind",) + required, optional=optional)
    params = {k: v for k, v in value.items() if k != "kind"}
    if kind != "grid":
        params.setdefault("center", list(region.center))
    if kind == "random_in_region" and "radius" not in params and "half_extents" not in params:
        if region.shape == "ball":
            params["radius"] = region.radius
        else:
            params["half_extents"] = list(region.half_extents)
    try:
        return make_array(kind, params, seed=seed)
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), loc) from None


def parse_scene(data, location="<inline>"):
    """Build a :class:`SceneFile` from a parsed mapping."""
    _keys(data, location, required=("room", "source", "region", "array"),
          optional=("snr_db", "seed", "frequencies", "grid"))
    room, max_order = _room(data["room"], f"{location}:room")
    source = _vector(data["source"], f"{location}:source")
    region = _region(data["region"], f"{location}:region")
    seed = _seed(data.get("seed", 0), f"{location}:seed")
    mics = _array(data["array"], f"{location}:array", region, seed)
    snr = data.get("snr_db")
    snr = float("inf") if snr is None else _number(snr, f"{location}:snr_db", allow_inf=True)
    if not room.contains(source)[0]:
        raise ConfigError("source must lie inside the room", f"{location}:source")
    if not np.all(room.contains(mics)):
        raise ConfigError("every microphone must lie inside the room", f"{location}:array")
    try:
        scene = Scene(room=room, source=np.array(source), region=region, mics=mics, snr_db=snr,
                      max_order=max_order, seed=seed)
    except DomainError as exc:
        raise ConfigError(str(exc), f"{location}:source") from None
    freqs = _frequencies(data["frequencies"], f"{location}:frequencies") if "frequencies" in data else []
    grid = _grid(data.get("grid", {}), f"{location}:grid")
    return SceneFile(scene=scene, frequencies=freqs, grid=grid, path=location)


def load_scene(path):
    return parse_scene(read_yaml(path), str(path))


def _estimators(value, loc):
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a nonempty list of estimators", loc)
    entries, seen = [], {}
    for i, item in enumerate(value):
        iloc = f"{loc}[{i}]"
        if isinstance(item, str):
            item = {"name": item}
        _keys(item, iloc, required=("name",), optional=("label", "params"))
        name = item["name"]
        if name not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {name!r}; choose from {', '.join(ESTIMATORS)}", f"{iloc}.name")
        params = item.get("params") or {}
        validate_params(name, params, f"{iloc}.params")
        label = str(item.get("label", name))
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}_{seen[label]}"
        entries.append(EstimatorEntry(name, label, dict(params)))
    return entries


def _heatmap(value, loc):
    if value is None:
        return None
    _keys(value, loc, optional=("axis", "offset", "points_per_axis"))
    axis = value.get("axis", "z")
    if axis not in ("x", "y", "z"):
        raise ConfigError(f"axis must be x, y or z, got {axis!r}", f"{loc}.axis")
    n = _number(value.get("points_per_axis", 21), f"{loc}.points_per_axis", positive=True, integer=True)
    return PlaneSpec(axis, _number(value.get("offset", 0.0), f"{loc}.offset"), n)


def parse_experiment(data, location="<inline>", base_dir="."):
    _keys(data, location, required=("scene", "estimators"),
          optional=("frequencies", "grid", "heatmap", "seed", "output", "figures", "timing"))
    scene_ref = data["scene"]
    if isinstance(scene_ref, str):
        scene_path = Path(base_dir) / scene_ref
        if not scene_path.is_file():
            raise ConfigError(f"scene file {str(scene_path)!r} not found", f"{location}:scene")
        scene = load_scene(scene_path)
    else:
        scene = parse_scene(_mapping(scene_ref, f"{location}:scene"), f"{location}:scene")
    if "frequencies" in data:
        freqs = _frequencies(data["frequencies"], f"{location}:frequencies")
    elif scene.frequencies:
        freqs = scene.frequencies
    else:
        raise ConfigError("no frequencies given", location)
    grid = _grid(data["grid"], f"{location}:grid") if "grid" in data else scene.grid
    flags = {}
    for key, default in (("figures", True), ("timing", False)):
        flags[key] = data.get(key, default)
        if not isinstance(flags[key], bool):
            raise ConfigError("expected true or false", f"{location}:{key}")
    return ExperimentConfig(
        scene=scene,
        estimators=_estimators(data["estimators"], f"{location}:estimators"),
        frequencies=freqs,
        grid=grid,
        heatmap=_heatmap(data.get("heatmap"), f"{location}:heatmap"),
        seed=_seed(data.get("seed", 0), f"{location}:seed"),
        output=str(data.get("output", "results")),
        figures=flags["figures"],
        timing=flags["timing"],
        path=location,
    )


def load_experiment(path):
    path = Path(path)
    return parse_experiment(read_yaml(path), str(path), base_dir=path.parent)
