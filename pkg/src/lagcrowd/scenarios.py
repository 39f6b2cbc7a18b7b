"""Preset test cases, initial crowd densities and analytic streamlines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .flowmodel import ModelParams, StaticField
from .mesh import Mesh, build_regular_mesh
from .stepper import NumericalParams, SimulationState, initial_state

CASES = ("straight", "zigzag", "spiral")
IC_KINDS = ("linear_cone", "constant_half_jam")
IC_FOR_CASE = {"straight": "linear_cone", "zigzag": "linear_cone", "spiral": "constant_half_jam"}

# group offset from the domain centre, and radius per case
GROUP_OFFSET = (-30.0, 0.0)
GROUP_RADIUS = {"straight": 20.0, "zigzag": 20.0, "spiral": 10.0}
DURATION = {"straight": 80.0, "zigzag": 80.0, "spiral": 200.0}
SNAPSHOT_TIMES = {"straight": (20.0, 80.0), "zigzag": (20.0, 80.0), "spiral": (50.0, 200.0)}


@dataclass(frozen=True)
class ScenarioSpec:
    case_id: str
    model: ModelParams = field(default_factory=ModelParams)
    numerics: NumericalParams = field(default_factory=NumericalParams)
    group_center: tuple[float, float] = (30.0, 60.0)
    group_radius: float = 20.0
    ic_kind: str = "linear_cone"
    quadrature_depth: int = 3

    def __post_init__(self):
        if self.case_id not in CASES:
            raise ValueError(f"unknown case {self.case_id!r}; expected one of {CASES}")
        if self.ic_kind != IC_FOR_CASE[self.case_id]:
            raise ValueError(f"case {self.case_id!r} uses initial condition {IC_FOR_CASE[self.case_id]!r}")
        if not self.group_radius > 0:
            raise ValueError(f"group_radius must be positive, got {self.group_radius}")
        if self.quadrature_depth < 0:
            raise ValueError("quadrature_depth must be nonnegative")

    def static_field(self) -> StaticField:
        return StaticField(self.case_id, self.model)

    def build_mesh(self) -> Mesh:
        n = self.numerics
        return build_regular_mesh(n.domain_x, n.domain_y, n.cell_area)

    def initial_state(self) -> SimulationState:
        mesh = self.build_mesh()
        return initial_state(mesh, populate_cells(mesh, self), self.numerics.epsilon)

    def analytic_mass(self) -> float:
        r0, rho_jam = self.group_radius, self.model.rho_jam
        if self.ic_kind == "linear_cone":
            return rho_jam * math.pi * r0**2 / 3.0
        return 0.5 * rho_jam * math.pi * r0**2


def preset(case_id: str, *, model: ModelParams | None = None, numerics: NumericalParams | None = None,
           group_offset: tuple[float, float] = GROUP_OFFSET, group_frame: str = "relative",
           group_radius: float | None = None, quadrature_depth: int = 3) -> ScenarioSpec:
    """Preset for one of the three cases.

    With ``group_frame="relative"`` the group offset is measured from the
    centre of the initial domain; ``"absolute"`` uses it as is.
    """
    if case_id not in CASES:
        raise ValueError(f"unknown case {case_id!r}; expected one of {CASES}")
    model = model or ModelParams()
    numerics = numerics or NumericalParams()
    if group_frame == "relative":
        cx = 0.5 * (numerics.domain_x[0] + numerics.domain_x[1])
        cy = 0.5 * (numerics.domain_y[0] + numerics.domain_y[1])
        center = (cx + group_offset[0], cy + group_offset[1])
    elif group_frame == "absolute":
        center = (float(group_offset[0]), float(group_offset[1]))
    else:
        raise ValueError(f"group_frame must be 'relative' or 'absolute', got {group_frame!r}")
    radius = GROUP_RADIUS[case_id] if group_radius is None else group_radius
    return ScenarioSpec(case_id, model, numerics, center, radius, IC_FOR_CASE[case_id], quadrature_depth)


def initial_density(point, spec: ScenarioSpec):
    """Initial crowd density; accepts one point or an array of points."""
    pts = np.asarray(point, dtype=float)
    r = np.hypot(pts[..., 0] - spec.group_center[0], pts[..., 1] - spec.group_center[1])
    inside = r < spec.group_radius
    rho_jam = spec.model.rho_jam
    if spec.ic_kind == "linear_cone":
        rho = np.where(inside, rho_jam * (1.0 - r / spec.group_radius), 0.0)
    else:
        rho = np.where(inside, 0.5 * rho_jam, 0.0)
    return float(rho) if rho.ndim == 0 else rho


def subdivision_points(depth: int) -> np.ndarray:
    """Barycentric ``(u, v)`` centroids of the ``4**depth`` congruent subtriangles."""
    n = 2**depth
    pts = []
    for i in range(n):
        for j in range(n - i):
            pts.append(((i + 1 / 3) / n, (j + 1 / 3) / n))
            if i + j <= n - 2:
                pts.append(((i + 2 / 3) / n, (j + 2 / 3) / n))
    return np.array(pts)


def populate_cells(mesh: Mesh, spec: ScenarioSpec, depth: int | None = None) -> np.ndarray:
    """Pedestrian count per cell by midpoint quadrature on ``4**depth`` subtriangles."""
    depth = spec.quadrature_depth if depth is None else depth
    (xa, xb), (ya, yb) = mesh.bounds or (
        (mesh.vertices[:, 0].min(), mesh.vertices[:, 0].max()),
        (mesh.vertices[:, 1].min(), mesh.vertices[:, 1].max()))
    (gx, gy), r0 = spec.group_center, spec.group_radius
    if gx - r0 < xa or gx + r0 > xb or gy - r0 < ya or gy + r0 > yb:
        raise ValueError(f"group disc at ({gx}, {gy}) radius {r0} is not inside the mesh")
    uv = subdivision_points(depth)
    t = mesh.triangles()
    e1 = t[:, 1] - t[:, 0]
    e2 = t[:, 2] - t[:, 0]
    pts = t[:, None, 0] + uv[None, :, 0, None] * e1[:, None] + uv[None, :, 1, None] * e2[:, None]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return initial_density(pts, spec).mean(axis=1) * area


def analytic_streamline(case_id: str, start, params: ModelParams, extent: float | None = None,
                        n: int = 1001) -> np.ndarray:
    """Sampled exact streamline through ``start``.

    ``extent`` is the x-length for straight/zigzag (default 120 m) and the
    swept angle for the spiral (default: until the centre is reached).
    """
    x0, y0 = map(float, start)
    if case_id in ("straight", "zigzag"):
        xs = np.linspace(x0, x0 + (120.0 if extent is None else extent), n)
        if case_id == "straight":
            return np.stack([xs, np.full_like(xs, y0)], axis=1)
        a, b = params.zigzag_a, params.zigzag_b
        return np.stack([xs, (math.cos(b * x0) - np.cos(b * xs)) / (a * b) + y0], axis=1)
    if case_id == "spiral":
        xc, yc = params.spiral_center
        r0 = math.hypot(x0 - xc, y0 - yc)
        if r0 == 0:
            raise ValueError("spiral streamline needs a start away from the centre")
        th0 = math.atan2(y0 - yc, x0 - xc)
        th = th0 + np.linspace(0.0, r0 / params.spiral_b if extent is None else extent, n)
        r = np.maximum(0.0, r0 - params.spiral_b * (th - th0))
        return np.stack([xc + r * np.cos(th), yc + r * np.sin(th)], axis=1)
    raise ValueError(f"unknown case {case_id!r}")


def streamline_deviation(case_id: str, path, params: ModelParams) -> np.ndarray:
    """Distance of each path point from the exact streamline through ``path[0]``.

    Straight and zigzag compare y at the same x; the spiral compares the radius
    at the same unwrapped angle.
    """
    p = np.asarray(path, dtype=float)
    x0, y0 = p[0]
    if case_id == "straight":
        return np.abs(p[:, 1] - y0)
    if case_id == "zigzag":
        a, b = params.zigzag_a, params.zigzag_b
        return np.abs(p[:, 1] - ((math.cos(b * x0) - np.cos(b * p[:, 0])) / (a * b) + y0))
    if case_id == "spiral":
        xc, yc = params.spiral_center
        rel = p - (xc, yc)
        th = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
        r = np.hypot(rel[:, 0], rel[:, 1])
        exact = np.maximum(0.0, r[0] - params.spiral_b * (th - th[0]))
        return np.abs(r - exact)
    raise ValueError(f"unknown case {case_id!r}")


def with_numerics(spec: ScenarioSpec, **changes) -> ScenarioSpec:
    return replace(spec, numerics=replace(spec.numerics, **changes))
