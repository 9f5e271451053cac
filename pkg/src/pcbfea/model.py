"""Board model schema, validation and the built-in AED main-board model.

All lengths are stored in metres once a model has been through
:func:`validate_model`. A model may be authored in millimetres by setting
``unit_system="mm"``; only lengths are affected by the unit declaration,
loads and material constants are always SI.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from .errors import Issue, NonPhysicalMaterialWarning, ValidationError

UNIT_SCALE = {"m": 1.0, "mm": 1e-3}
DOF_NAMES = ("ux", "uy", "uz")
BOARD_FACES = ("top", "bottom", "sides", "exterior")

# Young's moduli below this are flagged as a probable unit slip.
_SUSPICIOUS_MODULUS = 1e6


@dataclass(frozen=True)
class Material:
    name: str
    youngs_modulus: float  # Pa
    poisson_ratio: float
    density: float  # kg/m^3
    thermal_conductivity: float  # W/(m K)
    specific_heat: float  # J/(kg K)

    def issues(self, path: str) -> list[Issue]:
        out = []
        checks = [
            ("youngs_modulus", self.youngs_modulus > 0, "must be > 0"),
            ("poisson_ratio", 0 <= self.poisson_ratio < 0.5, "must satisfy 0 <= nu < 0.5"),
            ("density", self.density > 0, "must be > 0"),
            ("thermal_conductivity", self.thermal_conductivity > 0, "must be > 0"),
            ("specific_heat", self.specific_heat > 0, "must be > 0"),
        ]
        for attr, ok, msg in checks:
            if not ok:
                out.append(Issue("NonPhysicalMaterial", f"{path}.{attr}", f"{self.name}: {attr}={getattr(self, attr)!r} {msg}"))
        if self.youngs_modulus > 0 and self.youngs_modulus < _SUSPICIOUS_MODULUS:
            out.append(
                Issue(
                    "NonPhysicalMaterial",
                    f"{path}.youngs_modulus",
                    f"{self.name}: E={self.youngs_modulus!r} Pa is implausibly low for a solid (unit slip?)",
                    severity="warning",
                )
            )
        return out


def material_db() -> dict[str, Material]:
    """Materials of the AED main board keyed by name.

    Elastic moduli, Poisson ratios and conductivities are the board
    supplier's table values as used in the reference study. Densities and
    specific heats (lithium excepted) are room-temperature handbook values
    (CRC Handbook of Chemistry and Physics; FR-4 from IPC-4101 laminate
    sheets) because the study does not list them.
    """
    rows = [
        ("FR4 epoxy", 24e9, 0.118, 1850.0, 0.81, 1100.0),
        ("Tantalum", 175e9, 0.34, 16690.0, 54.4, 140.0),
        ("Copper", 117e9, 0.34, 8960.0, 385.0, 385.0),
        ("Polystyrene", 3250e6, 0.34, 1050.0, 0.033, 1300.0),
        ("Silicon", 140e9, 0.275, 2330.0, 150.0, 705.0),
        # E as published; almost certainly MPa or GPa in the source table
        ("Lithium", 31715.884, 0.355, 534.0, 5.4, 3582.0),
    ]
    return {r[0]: Material(*r) for r in rows}


# -- geometry ---------------------------------------------------------------


@dataclass(frozen=True)
class Cuboid:
    length: float  # along x
    width: float  # along y
    height: float

    def dims(self) -> dict[str, float]:
        return {"length": self.length, "width": self.width, "height": self.height}

    @property
    def footprint(self) -> tuple[float, float]:
        return self.length, self.width

    @property
    def total_height(self) -> float:
        return self.height

    def volume(self) -> float:
        return self.length * self.width * self.height

    def contains(self, dx, dy, dz):
        """Membership of points relative to the footprint centre / board top."""
        return (abs(dx) < self.length / 2) & (abs(dy) < self.width / 2) & (dz > 0) & (dz < self.height)


@dataclass(frozen=True)
class CylinderUpright:
    diameter: float
    height: float

    def dims(self) -> dict[str, float]:
        return {"diameter": self.diameter, "height": self.height}

    @property
    def footprint(self) -> tuple[float, float]:
        return self.diameter, self.diameter

    @property
    def total_height(self) -> float:
        return self.height

    def volume(self) -> float:
        return math.pi * self.diameter**2 / 4 * self.height

    def contains(self, dx, dy, dz):
        r = self.diameter / 2
        return (dx * dx + dy * dy < r * r) & (dz > 0) & (dz < self.height)


@dataclass(frozen=True)
class CylinderLying:
    diameter: float
    length: float
    axis: str = "x"

    def dims(self) -> dict[str, float]:
        return {"diameter": self.diameter, "length": self.length}

    @property
    def footprint(self) -> tuple[float, float]:
        if self.axis == "x":
            return self.length, self.diameter
        return self.diameter, self.length

    @property
    def total_height(self) -> float:
        return self.diameter

    def volume(self) -> float:
        return math.pi * self.diameter**2 / 4 * self.length

    def contains(self, dx, dy, dz):
        r = self.diameter / 2
        along, across = (dx, dy) if self.axis == "x" else (dy, dx)
        return (abs(along) < self.length / 2) & (across * across + (dz - r) ** 2 < r * r)


Shape = Union[Cuboid, CylinderUpright, CylinderLying]
SHAPE_TYPES = {"cuboid": Cuboid, "cylinder_upright": CylinderUpright, "cylinder_lying": CylinderLying}


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    material: str  # key into BoardModel.materials
    shape: Shape
    position: tuple[float, float]  # footprint centre on the board top face

    def bbox(self) -> tuple[float, float, float, float]:
        lx, ly = self.shape.footprint
        x, y = self.position
        return x - lx / 2, x + lx / 2, y - ly / 2, y + ly / 2


@dataclass(frozen=True)
class SupportSpec:
    patch_center: tuple[float, float]
    patch_size: tuple[float, float]
    constrained_dofs: tuple[str, ...] = DOF_NAMES
    name: str = ""

    def bbox(self) -> tuple[float, float, float, float]:
        (x, y), (dx, dy) = self.patch_center, self.patch_size
        return x - dx / 2, x + dx / 2, y - dy / 2, y + dy / 2


@dataclass(frozen=True)
class Gravity:
    acceleration: tuple[float, float, float]


@dataclass(frozen=True)
class UniformPressure:
    pressure: float  # Pa, positive pushes into the face
    face: str


@dataclass(frozen=True)
class PointForce:
    force: tuple[float, float, float]  # N
    location: tuple[float, float, float]


LoadKind = Union[Gravity, UniformPressure, PointForce]


@dataclass(frozen=True)
class LoadCase:
    kind: LoadKind
    name: str = ""
    scale_history: tuple[tuple[float, float], ...] | None = None

    def scale(self, t: float) -> float:
        """Load factor at time ``t``; constant 1 without a history."""
        if not self.scale_history:
            return 1.0
        ts, fs = zip(*self.scale_history)
        return float(np.interp(t, ts, fs))


@dataclass(frozen=True)
class Convection:
    surface: str
    film_coefficient: float  # W/(m^2 K)
    sink_temperature: float  # degC


@dataclass(frozen=True)
class ThermalCase:
    ambient_temperature: float = 23.0
    heat_sources: tuple[tuple[str, float], ...] = ()  # (component name, W/m^3)
    # natural convection on every exposed face unless overridden
    convection: tuple[Convection, ...] = (Convection("exterior", 10.0, 23.0),)
    fixed_temperatures: tuple[tuple[str, float], ...] = ()  # (surface tag, degC)


@dataclass(frozen=True)
class BoardModel:
    board_size: tuple[float, float, float]
    materials: dict[str, Material]
    board_material: str = "FR4 epoxy"
    components: tuple[ComponentSpec, ...] = ()
    supports: tuple[SupportSpec, ...] = ()
    load_cases: tuple[LoadCase, ...] = ()
    thermal_case: ThermalCase | None = None
    unit_system: str = "m"
    name: str = "board"

    def component(self, name: str) -> ComponentSpec:
        for c in self.components:
            if c.name == name:
                return c
        raise KeyError(name)

    def load_case(self, name: str | None = None) -> LoadCase:
        if not self.load_cases:
            raise KeyError("model has no load cases")
        if name is None:
            return self.load_cases[0]
        for lc in self.load_cases:
            if lc.name == name:
                return lc
        raise KeyError(name)

    def region_materials(self) -> dict[str, Material]:
        """Material per mesh region (``board`` plus one per component)."""
        out = {"board": self.materials[self.board_material]}
        for c in self.components:
            out[c.name] = self.materials[c.material]
        return out


# -- validation -------------------------------------------------------------


def _scaled(model: BoardModel) -> BoardModel:
    s = UNIT_SCALE[model.unit_system]
    if s == 1.0:
        return model

    def sc(v):
        return tuple(x * s for x in v)

    comps = []
    for c in model.components:
        dims = {k: v * s for k, v in c.shape.dims().items()}
        shape = replace(c.shape, **dims)
        comps.append(replace(c, shape=shape, position=sc(c.position)))
    sups = [replace(p, patch_center=sc(p.patch_center), patch_size=sc(p.patch_size)) for p in model.supports]
    loads = []
    for lc in model.load_cases:
        if isinstance(lc.kind, PointForce):
            lc = replace(lc, kind=replace(lc.kind, location=sc(lc.kind.location)))
        loads.append(lc)
    return replace(
        model,
        board_size=sc(model.board_size),
        components=tuple(comps),
        supports=tuple(sups),
        load_cases=tuple(loads),
        unit_system="m",
    )


def _overlap(a: ComponentSpec, b: ComponentSpec, tol: float) -> bool:
    ax0, ax1, ay0, ay1 = a.bbox()
    bx0, bx1, by0, by1 = b.bbox()
    if ax1 <= bx0 + tol or bx1 <= ax0 + tol or ay1 <= by0 + tol or by1 <= ay0 + tol:
        return False
    ca, cb = isinstance(a.shape, CylinderUpright), isinstance(b.shape, CylinderUpright)
    if ca and cb:
        d = math.dist(a.position, b.position)
        return d < (a.shape.diameter + b.shape.diameter) / 2 - tol
    if ca or cb:
        circ, rect = (a, b) if ca else (b, a)
        x0, x1, y0, y1 = rect.bbox()
        cx, cy = circ.position
        px, py = min(max(cx, x0), x1), min(max(cy, y0), y1)
        return math.hypot(cx - px, cy - py) < circ.shape.diameter / 2 - tol
    return True


def _collinear(points, tol) -> bool:
    if len(points) < 3:
        return True
    p0 = points[0]
    far = max(points, key=lambda p: math.dist(p, p0))
    ux, uy = far[0] - p0[0], far[1] - p0[1]
    n = math.hypot(ux, uy)
    if n == 0:
        return True
    return all(abs(ux * (p[1] - p0[1]) - uy * (p[0] - p0[0])) / n <= tol for p in points)


def check_model(model: BoardModel) -> list[Issue]:
    """Every violated invariant (errors and warnings) of ``model``."""
    issues: list[Issue] = []
    if model.unit_system not in UNIT_SCALE:
        return [Issue("InvalidUnits", "unit_system", f"unknown unit system {model.unit_system!r}")]
    m = _scaled(model)
    L, W, T = m.board_size
    tol = 1e-9 * max(L, W, 1e-12)
    if not (L > 0 and W > 0 and T > 0):
        issues.append(Issue("InvalidShape", "board_size", f"board dimensions must be > 0, got {model.board_size}"))

    for name, mat in sorted(m.materials.items()):
        issues += mat.issues(f"materials[{name!r}]")
    if m.board_material not in m.materials:
        issues.append(Issue("UnknownMaterial", "board_material", f"no material named {m.board_material!r}"))

    names = set()
    for i, c in enumerate(m.components):
        path = f"components[{i}]"
        if c.name in names or c.name == "board":
            issues.append(Issue("DuplicateName", f"{path}.name", f"component name {c.name!r} is not unique"))
        names.add(c.name)
        if c.material not in m.materials:
            issues.append(Issue("UnknownMaterial", f"{path}.material", f"{c.name}: no material named {c.material!r}"))
        bad = [k for k, v in c.shape.dims().items() if not v > 0]
        for k in bad:
            issues.append(Issue("InvalidShape", f"{path}.shape.{k}", f"{c.name}: {k} must be > 0"))
        if isinstance(c.shape, CylinderLying) and c.shape.axis not in ("x", "y"):
            issues.append(Issue("InvalidShape", f"{path}.shape.axis", f"{c.name}: axis must be 'x' or 'y'"))
        if bad:
            continue
        x0, x1, y0, y1 = c.bbox()
        if x0 < -tol or y0 < -tol or x1 > L + tol or y1 > W + tol:
            issues.append(Issue("ComponentOffBoard", f"{path}.position", f"{c.name}: footprint leaves the board outline"))

    valid = [c for c in m.components if all(v > 0 for v in c.shape.dims().values())]
    for i, a in enumerate(valid):
        for b in valid[i + 1 :]:
            if _overlap(a, b, tol):
                j = m.components.index(b)
                issues.append(
                    Issue("OverlappingComponents", f"components[{j}].position", f"{a.name} and {b.name} footprints overlap")
                )

    for i, s in enumerate(m.supports):
        path = f"supports[{i}]"
        if not s.constrained_dofs or any(d not in DOF_NAMES for d in s.constrained_dofs):
            issues.append(Issue("InvalidSupport", f"{path}.constrained_dofs", "must be a nonempty subset of ux, uy, uz"))
        if not all(v > 0 for v in s.patch_size):
            issues.append(Issue("InvalidSupport", f"{path}.patch_size", "patch size must be > 0"))
        x0, x1, y0, y1 = s.bbox()
        if x1 <= 0 or y1 <= 0 or x0 >= L or y0 >= W:
            issues.append(Issue("InvalidSupport", f"{path}.patch_center", "patch does not intersect the board"))
    if m.load_cases and _collinear([s.patch_center for s in m.supports], tol):
        issues.append(Issue("NoSupports", "supports", "structural cases need at least 3 non-collinear supports"))

    faces = set(BOARD_FACES) | {f"component:{n}" for n in names}
    for i, lc in enumerate(m.load_cases):
        path = f"load_cases[{i}]"
        if isinstance(lc.kind, UniformPressure) and lc.kind.face not in faces:
            issues.append(Issue("InvalidLoad", f"{path}.kind.face", f"unknown face {lc.kind.face!r}"))
        if lc.scale_history:
            ts = [t for t, _ in lc.scale_history]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                issues.append(Issue("InvalidLoad", f"{path}.scale_history", "times must be strictly increasing"))

    tc = m.thermal_case
    if tc is not None:
        for i, (comp, _rate) in enumerate(tc.heat_sources):
            if comp not in names:
                issues.append(Issue("InvalidThermalCase", f"thermal_case.heat_sources[{i}]", f"no component named {comp!r}"))
        for i, cv in enumerate(tc.convection):
            if cv.film_coefficient < 0:
                issues.append(Issue("InvalidThermalCase", f"thermal_case.convection[{i}].film_coefficient", "must be >= 0"))
            if cv.surface not in faces:
                issues.append(Issue("InvalidThermalCase", f"thermal_case.convection[{i}].surface", f"unknown surface {cv.surface!r}"))
        for i, (surf, _t) in enumerate(tc.fixed_temperatures):
            if surf not in faces:
                issues.append(Issue("InvalidThermalCase", f"thermal_case.fixed_temperatures[{i}]", f"unknown surface {surf!r}"))
    return issues


def validate_model(model: BoardModel) -> BoardModel:
    """Normalise ``model`` to SI lengths and check every invariant.

    Raises :class:`ValidationError` listing all violations. Suspicious but
    admissible values are reported through :class:`NonPhysicalMaterialWarning`.
    """
    issues = check_model(model)
    errors = [i for i in issues if i.severity == "error"]
    if errors:
        raise ValidationError(errors)
    for w in issues:
        warnings.warn(str(w), NonPhysicalMaterialWarning, stacklevel=2)
    return _scaled(model)


# -- reference model --------------------------------------------------------

_MM = 1e-3
AED_BOARD = (254.0, 216.0, 0.5)  # mm

# name, material, shape (mm), centre (mm). Capacitor and battery sizes are the
# published ones; the IC package sizes other than the microcontroller and the
# layout are illustrative.
_AED_PARTS = [
    ("Capacitor", "Tantalum", CylinderUpright(35.0, 40.0), (62.0, 140.0)),
    ("Microcontroller", "Copper", Cuboid(10.0, 10.0, 1.4), (125.0, 160.0)),
    ("Flash memory", "Polystyrene", Cuboid(12.0, 10.0, 1.2), (150.0, 160.0)),
    ("Analog Digital Converter", "Silicon", Cuboid(10.0, 10.0, 1.0), (175.0, 160.0)),
    ("FPGA", "Silicon", Cuboid(17.0, 17.0, 1.6), (125.0, 110.0)),
    ("Processor", "Silicon", Cuboid(14.0, 14.0, 1.4), (160.0, 110.0)),
    ("Audio controller", "Copper", Cuboid(7.0, 7.0, 1.0), (195.0, 110.0)),
    ("Battery", "Lithium", CylinderLying(17.0, 34.5, "x"), (190.0, 50.0)),
    ("Transistor", "Silicon", Cuboid(6.0, 6.0, 1.5), (90.0, 50.0)),
]

REFERENCE_BATTERY_POWER = 0.5  # W, illustrative


def corner_supports(length: float, width: float, patch: float = 10.0, midpoints: bool = False) -> list[SupportSpec]:
    """Square clamped patches flush with the board corners (and edge midpoints)."""
    h = patch / 2
    centres = [(h, h), (length - h, h), (length - h, width - h), (h, width - h)]
    names = ["corner_sw", "corner_se", "corner_ne", "corner_nw"]
    if midpoints:
        centres += [(length / 2, h), (length - h, width / 2), (length / 2, width - h), (h, width / 2)]
        names += ["edge_s", "edge_e", "edge_n", "edge_w"]
    return [SupportSpec((x, y), (patch, patch), DOF_NAMES, n) for (x, y), n in zip(centres, names)]


def edge_supports(length: float, width: float, strip: float = 5.0) -> list[SupportSpec]:
    """Clamped strips along all four board edges (alternative support style)."""
    h = strip / 2
    return [
        SupportSpec((length / 2, h), (length, strip), DOF_NAMES, "edge_s"),
        SupportSpec((length / 2, width - h), (length, strip), DOF_NAMES, "edge_n"),
        SupportSpec((h, width / 2), (strip, width - 2 * strip), DOF_NAMES, "edge_w"),
        SupportSpec((length - h, width / 2), (strip, width - 2 * strip), DOF_NAMES, "edge_e"),
    ]


def aed_reference_model(support_count: int = 4, support_style: str = "corners") -> BoardModel:
    """The AED main board in SI units with 4 or 8 clamped support patches.

    See :func:`aed_model_definition` for the contents.
    """
    return validate_model(aed_model_definition(support_count, support_style))


def aed_model_definition(support_count: int = 4, support_style: str = "corners") -> BoardModel:
    """The AED main board as authored, in millimetres and not yet validated.

    Load cases: ``pressure`` (1 kPa on the board underside), ``gravity``
    (1 g along -z) and ``shock`` (the pressure as a 2 ms triangular pulse).
    The thermal case puts 0.5 W into the battery with natural convection
    (10 W/m^2K to 23 degC) on every exposed face.
    """
    if support_count not in (4, 8):
        raise ValueError("support_count must be 4 or 8")
    L, W, T = AED_BOARD
    if support_style == "corners":
        supports = corner_supports(L, W, midpoints=support_count == 8)
    elif support_style == "edges":
        supports = edge_supports(L, W)
    else:
        raise ValueError(f"unknown support style {support_style!r}")

    comps = [ComponentSpec(n, mat, shape, pos) for n, mat, shape, pos in _AED_PARTS]
    battery = _AED_PARTS[7][2]
    rate = REFERENCE_BATTERY_POWER / (battery.volume() * _MM**3)
    return BoardModel(
        board_size=(L, W, T),
        materials=material_db(),
        board_material="FR4 epoxy",
        components=tuple(comps),
        supports=tuple(supports),
        load_cases=(
            LoadCase(UniformPressure(1000.0, "bottom"), "pressure"),
            LoadCase(Gravity((0.0, 0.0, -9.81)), "gravity"),
            LoadCase(UniformPressure(1000.0, "bottom"), "shock", ((0.0, 0.0), (1e-3, 1.0), (2e-3, 0.0))),
        ),
        thermal_case=ThermalCase(
            ambient_temperature=23.0,
            heat_sources=(("Battery", rate),),
            convection=(Convection("exterior", 10.0, 23.0),),
        ),
        unit_system="mm",
        name=f"aed_{support_count}support" + ("" if support_style == "corners" else f"_{support_style}"),
    )


def model_warnings(model: BoardModel) -> list[Issue]:
    return [i for i in check_model(model) if i.severity == "warning"]


__all__ = [
    "Material",
    "material_db",
    "Cuboid",
    "CylinderUpright",
    "CylinderLying",
    "ComponentSpec",
    "SupportSpec",
    "Gravity",
    "UniformPressure",
    "PointForce",
    "LoadCase",
    "Convection",
    "ThermalCase",
    "BoardModel",
    "check_model",
    "validate_model",
    "aed_reference_model",
    "aed_model_definition",
    "corner_supports",
    "edge_supports",
    "model_warnings",
]
