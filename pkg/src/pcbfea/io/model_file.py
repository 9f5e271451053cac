"""TOML model files.

Layout (lengths in ``unit_system``; loads and material constants in SI)::

    name = "aed_4support"
    unit_system = "mm"

    [board]
    size = [254.0, 216.0, 0.5]
    material = "FR4 epoxy"

    [materials."FR4 epoxy"]
    youngs_modulus = 24e9
    ...

    [[components]]
    name = "Battery"
    material = "Lithium"
    shape = "cylinder_lying"     # cuboid | cylinder_upright | cylinder_lying
    diameter = 17.0
    length = 34.5
    axis = "x"
    position = [190.0, 50.0]

    [[supports]]
    name = "corner_sw"
    center = [5.0, 5.0]
    size = [10.0, 10.0]          # default: 10 mm square
    dofs = ["ux", "uy", "uz"]

    [[load_cases]]
    name = "shock"
    type = "pressure"            # pressure | gravity | point
    pressure = 1000.0
    face = "bottom"
    history = [[0.0, 0.0], [0.001, 1.0], [0.002, 0.0]]

    [thermal]
    ambient_temperature = 23.0
    heat_sources = [{component = "Battery", rate = 64000.0}]
    convection = [{surface = "exterior", film_coefficient = 10.0, sink_temperature = 23.0}]
    fixed_temperatures = []

Missing ``[materials]`` means the built-in database.
"""
from __future__ import annotations

import re
from pathlib import Path

import tomli
import tomli_w

from ..errors import Issue, ParseError, ValidationError
from ..model import (
    DOF_NAMES,
    SHAPE_TYPES,
    UNIT_SCALE,
    BoardModel,
    ComponentSpec,
    Convection,
    Cuboid,
    CylinderLying,
    CylinderUpright,
    Gravity,
    LoadCase,
    Material,
    PointForce,
    SupportSpec,
    ThermalCase,
    UniformPressure,
    material_db,
    validate_model,
)

DEFAULT_PATCH_MM = 10.0
_MATERIAL_KEYS = ("youngs_modulus", "poisson_ratio", "density", "thermal_conductivity", "specific_heat")
_POS = re.compile(r"line (\d+), column (\d+)")


class _Schema:
    """Collects structural problems so that one pass reports them all."""

    def __init__(self):
        self.issues: list[Issue] = []

    def need(self, table: dict, key: str, path: str, kind=(int, float)):
        if key not in table:
            self.issues.append(Issue("MissingField", f"{path}.{key}", "required field is missing"))
            return None
        v = table[key]
        if kind is float:
            kind = (int, float)
        if isinstance(v, bool) or not isinstance(v, kind):
            self.issues.append(Issue("WrongType", f"{path}.{key}", f"unexpected value {v!r}"))
            return None
        return v

    def vec(self, table, key, path, n, default=None):
        if key not in table and default is not None:
            return tuple(default)
        v = self.need(table, key, path, list)
        if v is None:
            return None
        if len(v) != n or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            self.issues.append(Issue("WrongType", f"{path}.{key}", f"expected {n} numbers, got {v!r}"))
            return None
        return tuple(float(x) for x in v)


def _shape(sc: _Schema, c: dict, path: str):
    kind = sc.need(c, "shape", path, str)
    if kind is None:
        return None
    if kind not in SHAPE_TYPES:
        sc.issues.append(Issue("InvalidShape", f"{path}.shape", f"unknown shape {kind!r}"))
        return None
    if kind == "cuboid":
        dims = [sc.need(c, k, path) for k in ("length", "width", "height")]
        return None if None in dims else Cuboid(*map(float, dims))
    if kind == "cylinder_upright":
        dims = [sc.need(c, k, path) for k in ("diameter", "height")]
        return None if None in dims else CylinderUpright(*map(float, dims))
    dims = [sc.need(c, k, path) for k in ("diameter", "length")]
    axis = c.get("axis", "x")
    return None if None in dims else CylinderLying(float(dims[0]), float(dims[1]), axis)


def _load(sc: _Schema, d: dict, path: str):
    kind = sc.need(d, "type", path, str)
    name = d.get("name", "")
    hist = d.get("history")
    history = tuple((float(t), float(f)) for t, f in hist) if hist else None
    if kind == "pressure":
        p, face = sc.need(d, "pressure", path), sc.need(d, "face", path, str)
        k = None if p is None or face is None else UniformPressure(float(p), face)
    elif kind == "gravity":
        g = sc.vec(d, "acceleration", path, 3)
        k = None if g is None else Gravity(g)
    elif kind == "point":
        f, x = sc.vec(d, "force", path, 3), sc.vec(d, "location", path, 3)
        k = None if f is None or x is None else PointForce(f, x)
    else:
        if kind is not None:
            sc.issues.append(Issue("InvalidLoad", f"{path}.type", f"unknown load type {kind!r}"))
        return None
    return None if k is None else LoadCase(k, name, history)


def _thermal(sc: _Schema, t: dict) -> ThermalCase:
    path = "thermal"
    srcs = tuple((s["component"], float(s["rate"])) for s in t.get("heat_sources", []))
    default = ThermalCase()
    conv = t.get("convection")
    convs = (
        default.convection
        if conv is None
        else tuple(Convection(c["surface"], float(c["film_coefficient"]), float(c["sink_temperature"])) for c in conv)
    )
    fixed = tuple((f["surface"], float(f["temperature"])) for f in t.get("fixed_temperatures", []))
    amb = t.get("ambient_temperature", default.ambient_temperature)
    if isinstance(amb, bool) or not isinstance(amb, (int, float)):
        sc.issues.append(Issue("WrongType", f"{path}.ambient_temperature", f"unexpected value {amb!r}"))
        amb = default.ambient_temperature
    return ThermalCase(float(amb), srcs, convs, fixed)


def model_from_dict(data: dict) -> BoardModel:
    """Build an unvalidated :class:`BoardModel` from parsed TOML tables."""
    sc = _Schema()
    units = data.get("unit_system", "m")
    board = data.get("board", {})
    size = sc.vec(board, "size", "board", 3)
    mats = material_db()
    if "materials" in data:
        mats = {}
        for name, row in data["materials"].items():
            vals = [sc.need(row, k, f"materials.{name}") for k in _MATERIAL_KEYS]
            if None not in vals:
                mats[name] = Material(name, *map(float, vals))
    comps = []
    for i, c in enumerate(data.get("components", [])):
        path = f"components[{i}]"
        name, mat = sc.need(c, "name", path, str), sc.need(c, "material", path, str)
        shape, pos = _shape(sc, c, path), sc.vec(c, "position", path, 2)
        if None not in (name, mat, shape, pos):
            comps.append(ComponentSpec(name, mat, shape, pos))
    patch = DEFAULT_PATCH_MM * 1e-3 / UNIT_SCALE.get(units, 1.0)
    sups = []
    for i, s in enumerate(data.get("supports", [])):
        path = f"supports[{i}]"
        centre = sc.vec(s, "center", path, 2)
        size_ = sc.vec(s, "size", path, 2, default=(patch, patch))
        dofs = tuple(s.get("dofs", DOF_NAMES))
        if centre is not None and size_ is not None:
            sups.append(SupportSpec(centre, size_, dofs, s.get("name", "")))
    loads = [_load(sc, d, f"load_cases[{i}]") for i, d in enumerate(data.get("load_cases", []))]
    thermal = _thermal(sc, data["thermal"]) if "thermal" in data else None
    if sc.issues:
        raise ValidationError(sc.issues)
    return BoardModel(
        board_size=size,
        materials=mats,
        board_material=board.get("material", "FR4 epoxy"),
        components=tuple(comps),
        supports=tuple(sups),
        load_cases=tuple(lc for lc in loads if lc is not None),
        thermal_case=thermal,
        unit_system=units,
        name=data.get("name", "board"),
    )


def loads_model(text: str) -> BoardModel:
    """Parse and validate model text; the result is in SI units."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = _POS.search(str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (0, 0)
        raise ParseError(str(exc), line, col) from exc
    return validate_model(model_from_dict(data))


def parse_model(path) -> BoardModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))


def _shape_dict(shape) -> dict:
    kind = {Cuboid: "cuboid", CylinderUpright: "cylinder_upright", CylinderLying: "cylinder_lying"}[type(shape)]
    out = {"shape": kind, **shape.dims()}
    if isinstance(shape, CylinderLying):
        out["axis"] = shape.axis
    return out


def _load_dict(lc: LoadCase) -> dict:
    k = lc.kind
    out: dict = {"name": lc.name} if lc.name else {}
    if isinstance(k, UniformPressure):
        out.update(type="pressure", pressure=k.pressure, face=k.face)
    elif isinstance(k, Gravity):
        out.update(type="gravity", acceleration=list(k.acceleration))
    else:
        out.update(type="point", force=list(k.force), location=list(k.location))
    if lc.scale_history:
        out["history"] = [list(p) for p in lc.scale_history]
    return out


def model_to_dict(model: BoardModel) -> dict:
    data: dict = {"name": model.name, "unit_system": model.unit_system}
    data["board"] = {"size": list(model.board_size), "material": model.board_material}
    data["materials"] = {
        name: {k: getattr(m, k) for k in _MATERIAL_KEYS} for name, m in model.materials.items()
    }
    data["components"] = [
        {"name": c.name, "material": c.material, **_shape_dict(c.shape), "position": list(c.position)}
        for c in model.components
    ]
    data["supports"] = [
        {"name": s.name, "center": list(s.patch_center), "size": list(s.patch_size), "dofs": list(s.constrained_dofs)}
        for s in model.supports
    ]
    data["load_cases"] = [_load_dict(lc) for lc in model.load_cases]
    tc = model.thermal_case
    if tc is not None:
        data["thermal"] = {
            "ambient_temperature": tc.ambient_temperature,
            "heat_sources": [{"component": c, "rate": r} for c, r in tc.heat_sources],
            "convection": [
                {"surface": c.surface, "film_coefficient": c.film_coefficient, "sink_temperature": c.sink_temperature}
                for c in tc.convection
            ],
            "fixed_temperatures": [{"surface": s, "temperature": t} for s, t in tc.fixed_temperatures],
        }
    return data


def dumps_model(model: BoardModel) -> str:
    return tomli_w.dumps(model_to_dict(model))


def dump_model(model: BoardModel, path) -> None:
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def shipped_model_path(name: str) -> Path:
    """Path of a model file bundled with the package, e.g. ``aed_4support``."""
    p = Path(__file__).resolve().parent.parent / "data" / f"{name}.toml"
    if not p.exists():
        raise FileNotFoundError(f"no shipped model named {name!r}")
    return p
